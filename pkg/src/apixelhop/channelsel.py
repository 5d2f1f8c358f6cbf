"""Per-channel block classifiers and discriminant channel selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gbdt
from .blocks import AttentionConfig, select_block_array
from .corpus import LabeledSet, load_image
from .errors import EmptyClass
from .metrics import auc
from .saab import SaabUnit, responses

CHANNEL_GROUP = 8  # channels whose responses are materialised at once


@dataclass(frozen=True, order=True)
class ChannelKey:
    unit: int  # filter side s
    k: int


@dataclass
class ChannelRecord:
    key: ChannelKey
    model: gbdt.GbdtModel | None
    train_auc: float
    val_auc: float


@dataclass
class ChannelBank:
    selected: list[ChannelRecord]
    n_sel_per_unit: int
    ranking: list[tuple[int, int, float, float, bool]] = field(default_factory=list)

    def __len__(self):
        return len(self.selected)

    def channels_of(self, s: int) -> list[int]:
        return [r.key.k for r in self.selected if r.key.unit == s]


@dataclass
class BlockSet:
    """Selected blocks of a set of images, stacked."""

    blocks: np.ndarray  # (N, 16, 16, 3)
    image_index: np.ndarray  # (N,)
    labels: np.ndarray  # (N,) block label = source image label
    image_labels: np.ndarray  # (n_images,)

    def image_blocks(self, i: int) -> np.ndarray:
        return self.blocks[self.image_index == i]


def gather_blocks(images: LabeledSet, attention: AttentionConfig, target_side: int | None = None) -> BlockSet:
    blocks, owner, labels = [], [], []
    for i, (path, label) in enumerate(images.items):
        _, b, _ = select_block_array(load_image(path, target_side), attention)
        blocks.append(b)
        owner.append(np.full(len(b), i))
        labels.append(np.full(len(b), label))
    return BlockSet(np.concatenate(blocks), np.concatenate(owner), np.concatenate(labels),
                    images.labels)


def balanced_rows(labels: np.ndarray, seed: int) -> np.ndarray:
    """Row indices with the majority class downsampled to the minority count."""
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise EmptyClass("block dataset needs blocks from both classes")
    n = min(len(pos), len(neg))
    rng = np.random.default_rng(seed)
    if len(pos) > n:
        pos = np.sort(rng.choice(pos, n, replace=False))
    if len(neg) > n:
        neg = np.sort(rng.choice(neg, n, replace=False))
    return np.sort(np.concatenate([pos, neg]))


def build_block_dataset(images, units: dict[int, SaabUnit], key: ChannelKey,
                        attention: AttentionConfig = AttentionConfig(), seed: int = 7,
                        target_side: int | None = None):
    """(X, y) for one channel: its responses over every selected block."""
    bs = images if isinstance(images, BlockSet) else gather_blocks(images, attention, target_side)
    rows = balanced_rows(bs.labels, seed)
    X = responses(bs.blocks[rows], units[key.unit], [key.k])[0]
    return X, bs.labels[rows]


def rank_and_select(train: BlockSet, val: BlockSet, units: dict[int, SaabUnit],
                    cfg: gbdt.BoostConfig = gbdt.BoostConfig(), n_sel_per_unit: int = 2,
                    seed: int = 7, log: Callable[[str], None] | None = None) -> ChannelBank:
    """Fit one classifier per channel and keep the best few per unit by validation AUC."""
    if not 1 <= n_sel_per_unit <= 4:
        raise ValueError("n_sel_per_unit must be in 1..4")
    tr_rows = balanced_rows(train.labels, seed)
    va_rows = balanced_rows(val.labels, seed)
    tr_blocks, y_tr = train.blocks[tr_rows], train.labels[tr_rows]
    va_blocks, y_va = val.blocks[va_rows], val.labels[va_rows]

    selected, ranking = [], []
    for s in sorted(units):
        unit = units[s]
        records = []
        chans = [int(k) for k in unit.channels]
        for g0 in range(0, len(chans), CHANNEL_GROUP):
            group = chans[g0:g0 + CHANNEL_GROUP]
            r_tr = responses(tr_blocks, unit, group)
            r_va = responses(va_blocks, unit, group)
            for j, k in enumerate(group):
                model = gbdt.fit(r_tr[j], y_tr, cfg)
                rec = ChannelRecord(ChannelKey(s, k), model,
                                    auc(model.predict_proba(r_tr[j]), y_tr),
                                    auc(model.predict_proba(r_va[j]), y_va))
                records.append(rec)
                if log:
                    log(f"unit {s}x{s}x3 channel {k:2d}: train AUC {rec.train_auc:.4f} val AUC {rec.val_auc:.4f}")
        best = sorted(records, key=lambda r: (-r.val_auc, r.key.k))[:n_sel_per_unit]
        keep = {r.key for r in best}
        selected.extend(sorted(best, key=lambda r: r.key.k))
        ranking.extend((s, r.key.k, r.train_auc, r.val_auc, r.key in keep) for r in records)
    return ChannelBank(selected, n_sel_per_unit, ranking)


def write_channel_report(bank: ChannelBank, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "channel", "train_auc", "val_auc", "selected"])
        for s, k, tr, va, sel in bank.ranking:
            w.writerow([s, k, f"{tr:.6f}", f"{va:.6f}", int(sel)])
