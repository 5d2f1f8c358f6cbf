"""Attentive PixelHop: lightweight detection of GAN-generated images.

Salient 16x16 blocks are picked by sub-block energy, filtered by small
Saab units, classified per channel with boosted trees, and the block
soft decisions are fused into one image score.
"""

__version__ = "0.1.0"

from .blocks import AttentionConfig, select_blocks
from .ensemble import EnsembleConfig, image_score, predict_image, tail_sample
from .errors import APixelHopError
from .gbdt import BoostConfig
from .pipeline import TrainConfig, evaluate, train_detector
from .store import DetectorModel, load, save

__all__ = [
    "APixelHopError",
    "AttentionConfig",
    "BoostConfig",
    "DetectorModel",
    "EnsembleConfig",
    "TrainConfig",
    "evaluate",
    "image_score",
    "load",
    "predict_image",
    "save",
    "select_blocks",
    "tail_sample",
    "train_detector",
]
