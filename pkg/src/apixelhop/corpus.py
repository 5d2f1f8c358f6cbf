"""Image decoding and labeled dataset discovery.

Images are handled as float64 arrays of shape (H, W, 3) with values in
[0, 1]. A dataset lives on disk as a pair of directories, one of real
and one of fake images.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, EmptyClass, TooSmall

REAL, FAKE = 0, 1
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
MIN_SIDE = 16


@dataclass(frozen=True)
class SplitConfig:
    val_fraction: float = 0.2
    seed: int = 7

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass
class LabeledSet:
    items: list[tuple[str, int]] = field(default_factory=list)
    split: str = "train"

    def __post_init__(self):
        paths = [p for p, _ in self.items]
        if len(set(paths)) != len(paths):
            raise ValueError("duplicate paths in labeled set")

    def __len__(self):
        return len(self.items)

    @property
    def paths(self) -> list[str]:
        return [p for p, _ in self.items]

    @property
    def labels(self) -> np.ndarray:
        return np.array([lab for _, lab in self.items], dtype=np.int64)

    def count(self, label: int) -> int:
        return sum(1 for _, lab in self.items if lab == label)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def scaled_size(width: int, height: int, target_side: int) -> tuple[int, int]:
    """Size after shrinking the short side to ``target_side``, aspect kept."""
    short = min(width, height)
    if short <= target_side:
        return width, height
    if width <= height:
        return target_side, _round_half_up(height * target_side / width)
    return _round_half_up(width * target_side / height), target_side


def center_crop(image: np.ndarray, side: int) -> np.ndarray:
    h, w = image.shape[:2]
    side_h, side_w = min(side, h), min(side, w)
    y0 = (h - side_h) // 2
    x0 = (w - side_w) // 2
    return image[y0:y0 + side_h, x0:x0 + side_w]


def load_image(path, target_side: int | None = None, crop_side: int | None = None) -> np.ndarray:
    """Decode a PNG or JPEG file into an (H, W, 3) float array in [0, 1].

    Grayscale is replicated to three channels and alpha is dropped. With
    ``target_side`` the image is bilinearly downscaled so its short side
    equals ``target_side`` (only if larger). ``crop_side`` then takes a
    centered square crop.

    Raises:
        DecodeError: unreadable or not PNG/JPEG.
        TooSmall: a side is below 16 pixels after preprocessing.
    """
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise DecodeError(f"{path}: unsupported format {im.format}")
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                im = im.point(lambda v: v / 257).convert("L")
            rgb = im.convert("RGB")
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    if target_side is not None:
        size = scaled_size(rgb.width, rgb.height, target_side)
        if size != rgb.size:
            rgb = rgb.resize(size, Image.BILINEAR)
    data = np.asarray(rgb, dtype=np.float64) / 255.0
    if crop_side is not None:
        data = center_crop(data, crop_side)
    if data.shape[0] < MIN_SIDE or data.shape[1] < MIN_SIDE:
        raise TooSmall(f"{path}: {data.shape[1]}x{data.shape[0]} is smaller than one block")
    return data


def save_image(image: np.ndarray, path) -> None:
    """Write an (H, W, 3) array in [0, 1] as an 8-bit PNG."""
    arr = np.clip(np.floor(np.asarray(image) * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def list_images(directory) -> list[str]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    return sorted(str(p) for p in d.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def scan_corpus(real_dir, fake_dir, split: SplitConfig = SplitConfig()) -> tuple[LabeledSet, LabeledSet]:
    """Discover images under both directories and split each class.

    Per class, ``round(val_fraction * n)`` images go to validation, chosen
    by a seeded permutation of the sorted paths.
    """
    train, val = [], []
    for label, directory in ((REAL, real_dir), (FAKE, fake_dir)):
        paths = list_images(directory)
        if not paths:
            raise EmptyClass(f"no images in {directory}")
        n_val = min(_round_half_up(split.val_fraction * len(paths)), len(paths) - 1)
        rng = np.random.default_rng([split.seed, label])
        perm = rng.permutation(len(paths))
        val_idx = set(perm[:n_val].tolist())
        for i, p in enumerate(paths):
            (val if i in val_idx else train).append((p, label))
    return LabeledSet(train, "train"), LabeledSet(val, "val")


def labeled_dir_pair(real_dir, fake_dir, split: str = "test") -> LabeledSet:
    items = []
    for label, directory in ((REAL, real_dir), (FAKE, fake_dir)):
        paths = list_images(directory)
        if not paths:
            raise EmptyClass(f"no images in {directory}")
        items.extend((p, label) for p in paths)
    return LabeledSet(items, split)


def write_manifest(sets, path) -> None:
    """CSV manifest with header ``path,label,split``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label", "split"])
        for s in sets:
            for p, lab in s.items:
                w.writerow([p, lab, s.split])


def manifest_digest(sets) -> str:
    h = hashlib.sha256()
    for s in sets:
        for p, lab in s.items:
            h.update(f"{p},{lab},{s.split}\n".encode())
    return h.hexdigest()
