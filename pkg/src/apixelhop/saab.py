"""Single-stage Saab filter banks (one PixelHop unit per filter size).

A unit of spatial size ``s`` over ``c`` colour channels has ``d = s*s*c``
orthonormal kernels. Kernel 0 is the constant DC kernel; the others are
the principal directions of the DC-removed patch residuals, ordered by
decreasing eigenvalue. No bias term is applied.

Patch vectors are flattened row, then column, then colour channel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .blocks import BLOCK
from .errors import DegenerateInputWarning, IndexOutOfRange, InsufficientPatches

UNIT_SIDES = (2, 3, 4)
MAX_LEARN_PATCHES = 200_000


@dataclass(frozen=True)
class FilterShape:
    s: int
    c: int = 3

    def __post_init__(self):
        if self.s not in UNIT_SIDES:
            raise ValueError(f"filter side must be one of {UNIT_SIDES}, got {self.s}")

    @property
    def d(self) -> int:
        return self.s * self.s * self.c

    @property
    def grid(self) -> int:
        """Side of the stride-1 response grid over a 16x16 block."""
        return BLOCK + 1 - self.s


@dataclass
class SaabUnit:
    """Learned filter bank.

    ``kernels`` holds the rows for ``channels`` only; a full unit has
    ``channels == arange(d)``. ``eigenvalues`` always lists all d-1 AC
    eigenvalues.
    """

    shape: FilterShape
    kernels: np.ndarray
    eigenvalues: np.ndarray
    channels: np.ndarray = field(default=None)

    def __post_init__(self):
        self.kernels = np.ascontiguousarray(self.kernels, dtype=np.float64)
        if self.channels is None:
            self.channels = np.arange(self.kernels.shape[0])
        self.channels = np.asarray(self.channels, dtype=np.int64)

    @property
    def is_full(self) -> bool:
        return len(self.channels) == self.shape.d

    def kernel(self, k: int) -> np.ndarray:
        return self.kernels[self._row(k)]

    def _row(self, k: int) -> int:
        hit = np.flatnonzero(self.channels == k)
        if not 0 <= k < self.shape.d or len(hit) == 0:
            raise IndexOutOfRange(f"channel {k} not available in unit s={self.shape.s}")
        return int(hit[0])

    def subset(self, channels) -> "SaabUnit":
        chans = np.array(sorted(set(int(k) for k in channels)), dtype=np.int64)
        rows = [self._row(k) for k in chans]
        return SaabUnit(self.shape, self.kernels[rows], self.eigenvalues.copy(), chans)


@dataclass
class ResponseCube:
    shape: FilterShape
    channels: np.ndarray
    grid: np.ndarray  # (17-s, 17-s, len(channels))


def extract_patches(block, shape: FilterShape) -> np.ndarray:
    """Stride-1 patches of a 16x16xc block, raster order, shape ((17-s)^2, d)."""
    data = getattr(block, "data", block)
    data = np.asarray(data, dtype=np.float64)
    s = shape.s
    win = np.lib.stride_tricks.sliding_window_view(data, (s, s), axis=(0, 1))  # (G, G, c, s, s)
    win = win.transpose(0, 1, 3, 4, 2)
    return win.reshape(-1, shape.d).copy()


def helmert_basis(d: int) -> np.ndarray:
    """Orthonormal basis of the complement of the all-ones vector, shape (d, d-1)."""
    q = np.zeros((d, d - 1))
    for j in range(1, d):
        q[:j, j - 1] = 1.0
        q[j, j - 1] = -j
        q[:, j - 1] /= math.sqrt(j * (j + 1))
    return q


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm falls below
    ``tol * ||A||_F``. Returns (eigenvalues, eigenvectors as columns),
    unsorted.
    """
    A = np.array(a, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    norm = np.sqrt(np.sum(A * A))
    if norm == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def _fix_signs(rows: np.ndarray) -> np.ndarray:
    out = rows.copy()
    for i, r in enumerate(out):
        if r[np.argmax(np.abs(r))] < 0:
            out[i] = -r
    return out


def residual_second_moment(patches: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """(1/N) sum r r^T over DC-removed patches, summed chunk by chunk in order."""
    n, d = patches.shape
    acc = np.zeros((d, d))
    for i in range(0, n, chunk):
        x = patches[i:i + chunk]
        r = x - x[:, :1]  # exact zeros for constant patches
        r -= r.mean(axis=1, keepdims=True)
        acc += r.T @ r
    return acc / n


def learn_unit(patches, shape: FilterShape) -> SaabUnit:
    """Learn DC + AC kernels from patch vectors of dimension ``shape.d``."""
    patches = np.asarray(patches, dtype=np.float64)
    d = shape.d
    if patches.ndim != 2 or patches.shape[1] != d:
        raise ValueError(f"patches must have shape (N, {d})")
    if patches.shape[0] < 10 * d:
        raise InsufficientPatches(f"need at least {10 * d} patches, got {patches.shape[0]}")
    dc = np.full((1, d), 1.0 / math.sqrt(d))
    q = helmert_basis(d)
    cov = residual_second_moment(patches)
    if not np.any(cov):
        warnings.warn("all patch residuals are zero; AC kernels are arbitrary", DegenerateInputWarning)
        return SaabUnit(shape, np.vstack([dc, q.T]), np.zeros(d - 1))
    reduced = q.T @ cov @ q
    reduced = 0.5 * (reduced + reduced.T)
    w, v = jacobi_eigh(reduced)
    order = np.argsort(-w, kind="stable")
    ac = _fix_signs((q @ v[:, order]).T)
    return SaabUnit(shape, np.vstack([dc, ac]), np.maximum(w[order], 0.0))


def sample_patches(blocks: np.ndarray, shape: FilterShape, cap: int = MAX_LEARN_PATCHES, seed: int = 7) -> np.ndarray:
    """Patches for unit learning, at most ``cap``.

    Takes every patch when that fits. Otherwise walks the blocks in a
    seeded order, one patch position per round, positions also in seeded
    order, until ``cap`` patches are collected.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    nb = blocks.shape[0]
    g, s = shape.grid, shape.s
    if nb * g * g <= cap:
        return np.concatenate([extract_patches(b, shape) for b in blocks]) if nb else np.zeros((0, shape.d))
    rng = np.random.default_rng(seed)
    block_order = rng.permutation(nb)
    positions = rng.permutation(g * g)
    shuffled = blocks[block_order]
    out = []
    taken = 0
    for pos in positions:
        i, j = divmod(int(pos), g)
        p = shuffled[:, i:i + s, j:j + s, :].reshape(nb, shape.d)
        out.append(p[: cap - taken])
        taken += len(out[-1])
        if taken >= cap:
            break
    return np.concatenate(out)


@njit(parallel=True, cache=True)
def _responses(blocks, kernels, s):
    n_blocks = blocks.shape[0]
    c = blocks.shape[3]
    m, d = kernels.shape
    g = blocks.shape[1] + 1 - s
    out = np.empty((m, n_blocks, g * g))
    for n in prange(n_blocks):
        patch = np.empty(d)
        for i in range(g):
            for j in range(g):
                t = 0
                for dy in range(s):
                    for dx in range(s):
                        for ch in range(c):
                            patch[t] = blocks[n, i + dy, j + dx, ch]
                            t += 1
                for k in range(m):
                    acc = 0.0
                    for t in range(d):
                        acc += kernels[k, t] * patch[t]
                    out[k, n, i * g + j] = acc
    return out


def responses(blocks, unit: SaabUnit, channels=None) -> np.ndarray:
    """Channel responses for a stack of blocks, shape (n_channels, N, (17-s)^2).

    Each response is a left-to-right dot product, so a channel's values do
    not depend on which other channels are computed alongside it.
    """
    blocks = np.ascontiguousarray(blocks, dtype=np.float64)
    if blocks.ndim == 3:
        blocks = blocks[None]
    if channels is None:
        kernels = unit.kernels
    else:
        kernels = np.ascontiguousarray(np.stack([unit.kernel(int(k)) for k in channels]))
    return _responses(blocks, kernels, unit.shape.s)


def transform(block, unit: SaabUnit) -> ResponseCube:
    data = getattr(block, "data", block)
    g = unit.shape.grid
    r = responses(data, unit)[:, 0, :]  # (m, g*g)
    return ResponseCube(unit.shape, unit.channels.copy(), r.T.reshape(g, g, -1))


def channel_features(cube: ResponseCube, k: int) -> np.ndarray:
    hit = np.flatnonzero(cube.channels == k)
    if not 0 <= k < cube.shape.d or len(hit) == 0:
        raise IndexOutOfRange(f"channel {k} not in response cube")
    return cube.grid[:, :, int(hit[0])].ravel().copy()
