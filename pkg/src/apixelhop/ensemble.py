"""Image-level fusion of block soft decisions.

For each selected channel the block probabilities of an image are sorted
and a fixed number of values is taken, evenly by rank, from each of the
two confident tails. The concatenated tails feed a small stump ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gbdt
from .blocks import select_block_array
from .corpus import load_image
from .saab import responses

META_BOOST = gbdt.BoostConfig(n_trees=10, max_depth=1)


@dataclass(frozen=True)
class EnsembleConfig:
    p: float = 20
    tail: int = 13
    meta: gbdt.BoostConfig = field(default=META_BOOST)

    def __post_init__(self):
        if not 0 < self.p < 100:
            raise ValueError("p must lie in (0, 100)")
        if self.tail < 1:
            raise ValueError("tail must be >= 1")


def tail_width(n_scores: int, p: float) -> int:
    """Number of scores in each tail: round-half-up of 0.5p% of B, at least 1."""
    return max(1, math.floor(p * n_scores / 200 + 0.5))


def _even_ranks(width: int, count: int) -> np.ndarray:
    if count == 1:
        return np.zeros(1, dtype=np.int64)
    return np.array([math.floor(i * (width - 1) / (count - 1) + 0.5) for i in range(count)], dtype=np.int64)


def tail_sample(scores, p: float = 20, tail: int = 13) -> np.ndarray:
    """``tail`` values from the bottom and from the top 0.5p% of ``scores``.

    Output is bottom values ascending followed by top values ascending.
    """
    s = np.sort(np.asarray(scores, dtype=np.float64).ravel())
    if len(s) == 0:
        raise ValueError("tail_sample needs at least one score")
    n = tail_width(len(s), p)
    ranks = _even_ranks(n, tail)
    return np.concatenate([s[:n][ranks], s[len(s) - n:][ranks]])


def image_feature(soft_decisions: np.ndarray, cfg: EnsembleConfig = EnsembleConfig()) -> np.ndarray:
    """Concatenated per-channel tails; ``soft_decisions`` is (n_channels, B)."""
    rows = [tail_sample(row, cfg.p, cfg.tail) for row in soft_decisions]
    return np.concatenate(rows) if rows else np.zeros(0)


def soft_decisions_for_blocks(blocks: np.ndarray, model) -> np.ndarray:
    """Block probabilities for every bank channel, shape (n_channels, B)."""
    out = np.empty((len(model.bank.selected), len(blocks)))
    for i, rec in enumerate(model.bank.selected):
        x = responses(blocks, model.units[rec.key.unit], [rec.key.k])[0]
        out[i] = rec.model.predict_proba(x)
    return out


def collect_soft_decisions(image: np.ndarray, model) -> np.ndarray:
    _, blocks, _ = select_block_array(image, model.attention)
    return soft_decisions_for_blocks(blocks, model)


def _blocks_for(item, model) -> np.ndarray:
    if isinstance(item, (str, bytes)) or hasattr(item, "__fspath__"):
        item = load_image(item, model.target_side)
    item = np.asarray(item, dtype=np.float64)
    if item.ndim == 4:
        return item  # already a block stack
    _, blocks, _ = select_block_array(item, model.attention)
    return blocks


def fit_meta(train_images, model, cfg: EnsembleConfig | None = None) -> gbdt.GbdtModel:
    """Fit the stump ensemble on image features of labeled training images.

    ``train_images`` is a LabeledSet or a sequence of ``(item, label)``
    where item is a path, an image array or a stack of selected blocks.
    """
    cfg = cfg or model.ensemble
    items = train_images.items if hasattr(train_images, "items") else list(train_images)
    feats = np.stack([image_feature(soft_decisions_for_blocks(_blocks_for(it, model), model), cfg)
                      for it, _ in items])
    labels = np.array([lab for _, lab in items])
    return gbdt.fit(feats, labels, cfg.meta)


def image_score(item, model) -> float:
    sd = soft_decisions_for_blocks(_blocks_for(item, model), model)
    return float(model.meta.predict_proba(image_feature(sd, model.ensemble)))


def predict_image(image, model, threshold: float = 0.5) -> tuple[float, str]:
    score = image_score(image, model)
    return score, ("fake" if score >= threshold else "real")
