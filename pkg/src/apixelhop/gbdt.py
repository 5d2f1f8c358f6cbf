"""Gradient-boosted binary decision trees with exact greedy split search.

Second-order boosting on the logistic loss. Trees are grown level by
level; at every level each open node scans every feature in presorted
order and considers thresholds at midpoints between consecutive distinct
values. The heavy loops are compiled with numba; the split search runs
one feature per thread and reduces in feature order, so a fitted model
does not depend on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit, prange
from scipy.special import expit

from .errors import DimensionMismatch, NonFinite, SingleClass


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.reg_lambda < 0 or self.min_child_weight < 0 or self.gamma < 0:
            raise ValueError("reg_lambda, min_child_weight and gamma must be >= 0")


@dataclass
class Tree:
    """One regression tree in preorder node-array form.

    Leaves have ``feature == -1`` and ``left == right == -1``. Internal
    nodes send ``x[feature] < threshold`` to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_internal(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


@dataclass
class GbdtModel:
    trees: list[Tree]
    learning_rate: float
    base_score: float
    n_features: int
    train_loss: list[float] = field(default_factory=list, compare=False)

    @cached_property
    def _packed(self):
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
        if self.trees:
            feat = np.concatenate([t.feature for t in self.trees])
            thr = np.concatenate([t.threshold for t in self.trees])
            left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offsets)])
            right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offsets)])
            val = np.concatenate([t.value for t in self.trees])
        else:
            feat = np.zeros(0, np.int64)
            thr = val = np.zeros(0)
            left = right = np.zeros(0, np.int64)
        return feat, thr, left, right, val, offsets[:-1].astype(np.int64)

    def decision_function(self, X) -> np.ndarray:
        """Raw log-odds for each row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NonFinite("feature matrix contains NaN or Inf")
        feat, thr, left, right, val, roots = self._packed
        return _predict_margin(X, feat, thr, left, right, val, roots, float(self.base_score))

    def predict_proba(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return float(expit(self.decision_function(X[None, :])[0]))
        return expit(self.decision_function(X))

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            learning_rate=float(d["learning_rate"]),
            base_score=float(d["base_score"]),
            n_features=int(d["n_features"]),
        )


def predict_proba(model: GbdtModel, x) -> float | np.ndarray:
    return model.predict_proba(x)


def count_params(model: GbdtModel) -> int:
    """Two numbers (feature, threshold) per internal node, one per leaf."""
    return sum(2 * t.n_internal + (t.n_nodes - t.n_internal) for t in model.trees)


def complete_tree_params(n_trees: int, max_depth: int) -> int:
    """Parameter count of ``n_trees`` complete binary trees of ``max_depth``."""
    return n_trees * (2 * (2**max_depth - 1) + 2**max_depth)


def log_loss(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def fit(X, y, cfg: BoostConfig = BoostConfig()) -> GbdtModel:
    """Fit a boosted ensemble of binary trees on labels ``y`` in {0, 1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X shape {X.shape} does not match {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(X)):
        raise NonFinite("feature matrix contains NaN or Inf")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise SingleClass("labels contain a single class")

    Xt = np.ascontiguousarray(X.T)
    order = _argsort_columns(Xt)
    ranks = _dense_ranks(Xt, order)

    base = 0.0
    margin = np.full(len(y), base)
    trees = []
    losses = []
    for _ in range(cfg.n_trees):
        p = expit(margin)
        g = p - y
        h = p * (1.0 - p)
        tree, leaf_of = _grow_tree(Xt, order, ranks, g, h, cfg)
        margin = margin + tree.value[leaf_of]
        trees.append(tree)
        losses.append(log_loss(y, margin))
    return GbdtModel(trees=trees, learning_rate=cfg.learning_rate, base_score=base,
                     n_features=X.shape[1], train_loss=losses)


def _grow_tree(Xt, order, ranks, g, h, cfg: BoostConfig):
    n = len(g)
    lam, eta = cfg.reg_lambda, cfg.learning_rate
    # BFS-ordered node lists; converted to preorder at the end
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    # per-feature sorted sample lists, laid out as one contiguous segment per open node
    idx, rk = order, ranks
    seg = np.array([0, n], dtype=np.int64)
    slot = np.zeros(n, dtype=np.int64)
    leaf_of = np.full(n, -1, dtype=np.int64)
    active = [new_node()]
    for depth in range(cfg.max_depth + 1):
        n_slots = len(active)
        G, H = _node_sums(slot, g, h, n_slots)
        if depth < cfg.max_depth:
            gains, thrs = _best_splits(Xt, idx, rk, seg, g, h, G, H, lam, cfg.gamma, cfg.min_child_weight)
            best_f = np.argmax(gains, axis=0)
            best_gain = gains[best_f, np.arange(n_slots)]
        else:
            best_f = np.zeros(n_slots, dtype=np.int64)
            best_gain = np.zeros(n_slots)

        split_f = np.full(n_slots, -1, dtype=np.int64)
        split_thr = np.zeros(n_slots)
        to_left = np.full(n_slots, -1, dtype=np.int64)
        to_right = np.full(n_slots, -1, dtype=np.int64)
        node_ids = np.asarray(active, dtype=np.int64)
        next_active = []
        for a, node in enumerate(active):
            if best_gain[a] > 0.0:
                f = int(best_f[a])
                feature[node] = f
                threshold[node] = float(thrs[f, a])
                left[node] = new_node()
                right[node] = new_node()
                split_f[a], split_thr[a] = f, threshold[node]
                to_left[a] = len(next_active)
                next_active.append(left[node])
                to_right[a] = len(next_active)
                next_active.append(right[node])
            else:
                denom = H[a] + lam
                value[node] = -eta * G[a] / denom if denom > 0 else 0.0
        _route(slot, leaf_of, Xt, split_f, split_thr, to_left, to_right, node_ids)
        active = next_active
        if not active:
            break
        if depth + 1 == cfg.max_depth:
            continue  # children become leaves; only their sums are needed
        counts = np.bincount(slot[slot >= 0], minlength=len(active))
        seg = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        idx, rk = _partition(idx, rk, slot, seg)

    bfs = Tree(np.asarray(feature, np.int64), np.asarray(threshold), np.asarray(left, np.int64),
               np.asarray(right, np.int64), np.asarray(value))
    tree, remap = _to_preorder(bfs)
    return tree, remap[leaf_of]


def _to_preorder(t: Tree):
    order = []
    stack = [0]
    while stack:
        i = stack.pop()
        order.append(i)
        if t.feature[i] >= 0:
            stack.append(t.right[i])
            stack.append(t.left[i])
    remap = np.empty(t.n_nodes, dtype=np.int64)
    remap[order] = np.arange(len(order))
    idx = np.asarray(order)

    def child(c):
        return np.where(c >= 0, remap[np.maximum(c, 0)], -1)

    tree = Tree(t.feature[idx], t.threshold[idx], child(t.left[idx]), child(t.right[idx]), t.value[idx])
    return tree, remap


@njit(parallel=True, cache=True)
def _argsort_columns(Xt):
    F, N = Xt.shape
    out = np.empty((F, N), dtype=np.int32)
    for f in prange(F):
        out[f] = np.argsort(Xt[f], kind="mergesort")
    return out


@njit(cache=True)
def _node_sums(slot, g, h, n_slots):
    G = np.zeros(n_slots)
    H = np.zeros(n_slots)
    for i in range(slot.shape[0]):
        a = slot[i]
        if a >= 0:
            G[a] += g[i]
            H[a] += h[i]
    return G, H


@njit(parallel=True, cache=True)
def _dense_ranks(Xt, order):
    F, N = Xt.shape
    out = np.empty((F, N), dtype=np.int32)
    for f in prange(F):
        r = 0
        for i in range(N):
            if i > 0 and Xt[f, order[f, i]] > Xt[f, order[f, i - 1]]:
                r += 1
            out[f, i] = r
    return out


@njit(parallel=True, cache=True)
def _best_splits(Xt, idx, rk, seg, g, h, G, H, lam, gamma, mcw):
    F = idx.shape[0]
    n_slots = seg.shape[0] - 1
    gains = np.full((F, n_slots), -np.inf)
    thrs = np.zeros((F, n_slots))
    for f in prange(F):
        for a in range(n_slots):
            s0 = seg[a]
            s1 = seg[a + 1]
            Ga = G[a]
            Ha = H[a]
            parent = Ga * Ga / (Ha + lam) if Ha + lam > 0 else 0.0
            # best children score gl^2/(hl+lam) + gr^2/(hr+lam); compared by cross-multiplying
            best = -np.inf
            bi = -1
            gl = 0.0
            hl = 0.0
            for i in range(s0, s1 - 1):
                j = idx[f, i]
                gl += g[j]
                hl += h[j]
                if rk[f, i] == rk[f, i + 1]:
                    continue
                hr = Ha - hl
                dl = hl + lam
                dr = hr + lam
                if hl < mcw or hr < mcw or dl <= 0 or dr <= 0:
                    continue
                gr = Ga - gl
                if gl * gl * dr + gr * gr * dl > best * dl * dr:
                    score = gl * gl / dl + gr * gr / dr
                    if score > best:
                        best = score
                        bi = i
            if bi >= 0:
                gain = 0.5 * (best - parent) - gamma
                gains[f, a] = gain
                lo = Xt[f, idx[f, bi]]
                hi = Xt[f, idx[f, bi + 1]]
                t = 0.5 * (lo + hi)
                if t <= lo:
                    t = hi
                thrs[f, a] = t
    return gains, thrs


@njit(parallel=True, cache=True)
def _partition(idx, rk, slot, seg):
    F, M = idx.shape
    M2 = seg[-1]
    out_idx = np.empty((F, M2), dtype=idx.dtype)
    out_rk = np.empty((F, M2), dtype=rk.dtype)
    for f in prange(F):
        pos = seg[:-1].copy()
        for i in range(M):
            j = idx[f, i]
            b = slot[j]
            if b >= 0:
                out_idx[f, pos[b]] = j
                out_rk[f, pos[b]] = rk[f, i]
                pos[b] += 1
    return out_idx, out_rk


@njit(cache=True)
def _route(slot, leaf_of, Xt, split_f, split_thr, to_left, to_right, node_ids):
    for i in range(slot.shape[0]):
        a = slot[i]
        if a < 0:
            continue
        f = split_f[a]
        if f < 0:
            leaf_of[i] = node_ids[a]
            slot[i] = -1
        elif Xt[f, i] < split_thr[a]:
            slot[i] = to_left[a]
        else:
            slot[i] = to_right[a]


@njit(parallel=True, cache=True)
def _predict_margin(X, feat, thr, left, right, val, roots, base):
    N = X.shape[0]
    out = np.empty(N)
    for n in prange(N):
        s = base
        for r in roots:
            node = r
            while feat[node] >= 0:
                if X[n, feat[node]] < thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            s += val[node]
        out[n] = s
    return out
