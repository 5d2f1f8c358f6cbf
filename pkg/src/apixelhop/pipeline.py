"""End-to-end training and evaluation on labeled image sets."""

from __future__ import annotations

import datetime as _dt
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gbdt, metrics
from .blocks import AttentionConfig
from .channelsel import BlockSet, gather_blocks, rank_and_select
from .corpus import LabeledSet, load_image, manifest_digest
from .ensemble import EnsembleConfig, fit_meta, image_score
from .saab import MAX_LEARN_PATCHES, UNIT_SIDES, FilterShape, learn_unit, sample_patches
from .store import DetectorModel


@dataclass(frozen=True)
class TrainConfig:
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    boost: gbdt.BoostConfig = field(default_factory=gbdt.BoostConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    n_sel_per_unit: int = 2
    seed: int = 7
    target_side: int | None = None
    max_patches: int = MAX_LEARN_PATCHES


def _created_stamp(stamp: bool) -> str | None:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc).isoformat()
    if stamp:
        return _dt.datetime.now(_dt.timezone.utc).isoformat()
    return None


def learn_units(blocks: np.ndarray, cfg: TrainConfig) -> dict:
    units = {}
    for s in UNIT_SIDES:
        shape = FilterShape(s)
        units[s] = learn_unit(sample_patches(blocks, shape, cfg.max_patches, cfg.seed), shape)
    return units


def train_detector(train: LabeledSet, val: LabeledSet, cfg: TrainConfig = TrainConfig(),
                   log: Callable[[str], None] | None = None, stamp: bool = False) -> DetectorModel:
    """Learn filter banks, select channels, and fit the image-level ensemble."""
    say = log or (lambda msg: None)
    say(f"selecting blocks from {len(train)} training and {len(val)} validation images")
    tr = gather_blocks(train, cfg.attention, cfg.target_side)
    va = gather_blocks(val, cfg.attention, cfg.target_side)
    return train_on_blocks(tr, va, cfg, log=log, stamp=stamp,
                           provenance={"manifest_sha256": manifest_digest([train, val]),
                                       "n_train": len(train), "n_val": len(val)})


def train_on_blocks(tr: BlockSet, va: BlockSet, cfg: TrainConfig, log=None, stamp: bool = False,
                    provenance: dict | None = None) -> DetectorModel:
    say = log or (lambda msg: None)
    say(f"learning Saab units on {len(tr.blocks)} blocks")
    units = learn_units(tr.blocks, cfg)
    say("training per-channel classifiers")
    bank = rank_and_select(tr, va, units, cfg.boost, cfg.n_sel_per_unit, cfg.seed, log=log)
    model = DetectorModel(cfg.attention, cfg.boost, cfg.ensemble, cfg.n_sel_per_unit, cfg.seed,
                          cfg.target_side, units, bank)
    say("fitting image-level ensemble")
    items = [(tr.image_blocks(i), int(lab)) for i, lab in enumerate(tr.image_labels)]
    model.meta = fit_meta(items, model, cfg.ensemble)
    model.provenance = {"created": _created_stamp(stamp), **(provenance or {})}
    return model


def score_images(model: DetectorModel, images: LabeledSet) -> np.ndarray:
    return np.array([image_score(load_image(p, model.target_side), model) for p in images.paths])


def evaluate(model: DetectorModel, images: LabeledSet, threshold: float = 0.5) -> dict:
    scores = score_images(model, images)
    y = images.labels
    return {
        "auc": metrics.auc(scores, y),
        "ap": metrics.average_precision(scores, y),
        "acc": metrics.accuracy(scores, y, threshold),
        "n_real": int(np.sum(y == 0)),
        "n_fake": int(np.sum(y == 1)),
        "scores": scores,
    }
