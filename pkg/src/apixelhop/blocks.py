"""16x16 block partition and attentive (edge/texture) block selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BLOCK = 16


@dataclass(frozen=True)
class AttentionConfig:
    blocks_per_image: int = 64
    subblock_side: int = 4
    partial_fraction: float = 0.5

    def __post_init__(self):
        if self.blocks_per_image < 1:
            raise ValueError("blocks_per_image must be >= 1")
        if self.subblock_side < 1 or BLOCK % self.subblock_side:
            raise ValueError("subblock_side must divide 16")
        if not 0.0 < self.partial_fraction <= 1.0:
            raise ValueError("partial_fraction must lie in (0, 1]")


@dataclass
class Block:
    x0: int
    y0: int
    data: np.ndarray  # (16, 16, 3)


@dataclass
class BlockScore:
    block: Block
    score: float


def crop_offset(height: int, width: int) -> tuple[int, int]:
    """Top-left corner of the centered crop whose sides are multiples of 16."""
    return (height % BLOCK) // 2, (width % BLOCK) // 2


def block_array(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All blocks of an image in raster order.

    Returns ``(coords, blocks)``: coords is (n, 2) of (y0, x0) in original
    image pixels, blocks is (n, 16, 16, 3).
    """
    h, w = image.shape[:2]
    ny, nx = h // BLOCK, w // BLOCK
    oy, ox = crop_offset(h, w)
    crop = image[oy:oy + ny * BLOCK, ox:ox + nx * BLOCK]
    blocks = crop.reshape(ny, BLOCK, nx, BLOCK, -1).swapaxes(1, 2).reshape(ny * nx, BLOCK, BLOCK, -1)
    yy, xx = np.mgrid[0:ny, 0:nx]
    coords = np.stack([oy + yy.ravel() * BLOCK, ox + xx.ravel() * BLOCK], axis=1)
    return coords, np.ascontiguousarray(blocks, dtype=np.float64)


def partition(image: np.ndarray) -> list[Block]:
    coords, blocks = block_array(image)
    return [Block(int(x), int(y), b) for (y, x), b in zip(coords, blocks)]


def score_blocks(blocks: np.ndarray, cfg: AttentionConfig = AttentionConfig()) -> np.ndarray:
    """Partial sum of sub-block residual energies for a stack of blocks.

    The per-channel block mean is removed; each sub-block's mean squared
    residual is summed over channels and the largest ``ceil(q * count)``
    of those are added up.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    n = blocks.shape[0]
    # anchoring on the corner pixel first makes constant blocks exactly zero
    resid = blocks - blocks[:, :1, :1, :]
    resid -= resid.mean(axis=(1, 2), keepdims=True)
    sb = cfg.subblock_side
    m = BLOCK // sb
    sub = resid.reshape(n, m, sb, m, sb, -1)
    energy = (sub**2).mean(axis=(2, 4)).sum(axis=-1).reshape(n, m * m)
    keep = math.ceil(cfg.partial_fraction * m * m)
    top = -np.sort(-energy, axis=1)[:, :keep]
    return top.sum(axis=1)


def score_block(block: Block, cfg: AttentionConfig = AttentionConfig()) -> BlockScore:
    return BlockScore(block, float(score_blocks(block.data[None], cfg)[0]))


def select_block_array(image: np.ndarray, cfg: AttentionConfig = AttentionConfig()):
    """Top-K blocks by score, descending; ties go to raster order.

    Returns ``(coords, blocks, scores)`` arrays.
    """
    coords, blocks = block_array(image)
    scores = score_blocks(blocks, cfg)
    order = np.lexsort((np.arange(len(scores)), -scores))[: cfg.blocks_per_image]
    return coords[order], blocks[order], scores[order]


def select_blocks(image: np.ndarray, cfg: AttentionConfig = AttentionConfig()) -> list[Block]:
    coords, blocks, _ = select_block_array(image, cfg)
    return [Block(int(x), int(y), b) for (y, x), b in zip(coords, blocks)]


def attention_mask(image: np.ndarray, cfg: AttentionConfig = AttentionConfig()) -> np.ndarray:
    """uint8 mask, 255 over selected blocks."""
    coords, _, _ = select_block_array(image, cfg)
    mask = np.zeros(image.shape[:2], dtype=np.uint8)
    for y, x in coords:
        mask[y:y + BLOCK, x:x + BLOCK] = 255
    return mask
