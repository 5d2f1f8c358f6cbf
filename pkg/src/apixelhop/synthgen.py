"""Procedural desk-scale corpus: textured "real" images and upsampled fakes.

Real images are smooth cosine gradients plus patchy midscale value noise
plus per-pixel grain. A fake is built from an independently seeded real
image by box downsampling, zero insertion and a fixed Gaussian
interpolation kernel. The kernel is not a partition of unity, so fakes
carry a faint periodic lattice (spectral peaks at multiples of
side/factor) while losing the fine grain.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .corpus import save_image

FAKE_SEED_XOR = 0x5DEECE66D
GRAIN_STD = 0.05


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 100
    side: int = 256
    seed: int = 7
    upsample_factor: int = 4

    def __post_init__(self):
        if self.side % 16:
            raise ValueError("side must be a multiple of 16")
        if self.upsample_factor < 1 or self.side % self.upsample_factor:
            raise ValueError("side must be divisible by upsample_factor")


def _check_index(cfg: SynthConfig, index: int):
    if not 0 <= index < cfg.n_per_class:
        raise IndexError(f"index {index} outside [0, {cfg.n_per_class})")


def _value_noise(rng, side: int, cell: int) -> np.ndarray:
    n = side // cell + 3
    grid = rng.uniform(-1.0, 1.0, size=(n, n))
    up = ndimage.zoom(grid, cell, order=3, mode="nearest")
    return up[cell:cell + side, cell:cell + side]


def _render_real(seed: int, index: int, side: int) -> np.ndarray:
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, index])
    yy, xx = np.mgrid[0:side, 0:side] / side
    img = np.empty((side, side, 3))
    for c in range(3):
        plane = np.full((side, side), rng.uniform(0.35, 0.65))
        for _ in range(rng.integers(3, 7)):
            theta = rng.uniform(0, 2 * np.pi)
            freq = rng.uniform(0.3, 2.5)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(0.02, 0.07)
            plane += amp * np.cos(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        img[..., c] = plane
    # texture appears in patches: a coarse mask gates midscale value noise
    mask = np.clip(_value_noise(rng, side, 64) * 1.5 + 0.2, 0.0, 1.0)
    texture = _value_noise(rng, side, 8)
    tint = rng.uniform(0.6, 1.0, size=3)
    img += 0.15 * (mask * texture)[..., None] * tint
    img += rng.normal(0.0, GRAIN_STD, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def upsample_kernel(factor: int) -> np.ndarray:
    """1-D Gaussian interpolation kernel summing to ``factor``."""
    radius = 2 * factor - 1
    t = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (t / (0.5 * factor)) ** 2)
    return k * (factor / k.sum())


def gen_real(cfg: SynthConfig, index: int) -> np.ndarray:
    _check_index(cfg, index)
    return _render_real(cfg.seed, index, cfg.side)


def gen_fake(cfg: SynthConfig, index: int) -> np.ndarray:
    _check_index(cfg, index)
    base = _render_real(cfg.seed ^ FAKE_SEED_XOR, index, cfg.side)
    f = cfg.upsample_factor
    if f == 1:
        return base
    n = cfg.side // f
    low = base.reshape(n, f, n, f, 3).mean(axis=(1, 3))
    up = np.zeros_like(base)
    up[::f, ::f] = low
    k = upsample_kernel(f)
    up = ndimage.convolve1d(up, k, axis=0, mode="wrap")
    up = ndimage.convolve1d(up, k, axis=1, mode="wrap")
    return np.clip(up, 0.0, 1.0)


def write_corpus(cfg: SynthConfig, out_dir) -> tuple[list[str], list[str]]:
    """Write ``out/real/NNNNN.png`` and ``out/fake/NNNNN.png``."""
    out = Path(out_dir)
    written = ([], [])
    for sub, gen, dest in (("real", gen_real, written[0]), ("fake", gen_fake, written[1])):
        (out / sub).mkdir(parents=True, exist_ok=True)
        for i in range(cfg.n_per_class):
            p = out / sub / f"{i:05d}.png"
            save_image(gen(cfg, i), p)
            dest.append(str(p))
    return written
