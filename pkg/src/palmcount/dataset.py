"""Labeled 40x40 crop store: extraction, negative sampling, splits, disk I/O.

A dataset lives on disk as a directory with ``manifest.json`` plus one
image file per crop named by its id.  One process owns a dataset
directory at a time; readers may share it between mutations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .raster import PixelPoint, Raster, crop, load_raster, save_raster

PALM = "palm"
NO_PALM = "no_palm"
LABELS = (NO_PALM, PALM)
# class indices used by the classifier: probs[:, 1] is the palm probability
LABEL_TO_CLASS = {NO_PALM: 0, PALM: 1}

_MANIFEST = "manifest.json"


@dataclass(frozen=True)
class LabeledCrop:
    id: str
    crop: Raster
    label: str
    source_scene: str
    center: PixelPoint


@dataclass
class Dataset:
    side: int = 40
    channels: int = 1
    items: list = field(default_factory=list)
    _next_id: int = 0

    def class_counts(self) -> dict:
        counts = {PALM: 0, NO_PALM: 0}
        for item in self.items:
            counts[item.label] += 1
        return counts

    def fresh_id(self) -> str:
        existing = {item.id for item in self.items}
        while True:
            cid = f"crop-{self._next_id:06d}"
            self._next_id += 1
            if cid not in existing:
                return cid


@dataclass(frozen=True)
class SplitSpec:
    validation_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation fraction must lie strictly in (0, 1), got {self.validation_fraction}")


def add_crop(d: Dataset, scene: Raster, center: PixelPoint, label: str,
             scene_id: str = "") -> LabeledCrop:
    """Cut the window centered at ``center`` out of ``scene`` and append it.

    The window's top-left corner is center - side // 2; centers closer than
    side // 2 to an edge are rejected.
    """
    if label not in LABELS:
        raise ValueError(f"label must be one of {LABELS}, got {label!r}")
    if scene.channels != d.channels:
        raise ValueError(f"scene has {scene.channels} channels, dataset expects {d.channels}")
    half = d.side // 2
    top_left = PixelPoint(center.x - half, center.y - half)
    if (top_left.x < 0 or top_left.y < 0
            or top_left.x + d.side > scene.width or top_left.y + d.side > scene.height):
        raise ValueError(
            f"window centered at ({center.x},{center.y}) leaves the {scene.width}x{scene.height} scene")
    item = LabeledCrop(
        id=d.fresh_id(),
        crop=crop(scene, top_left, d.side, d.side),
        label=label,
        source_scene=scene_id,
        center=center,
    )
    d.items.append(item)
    return item


def sample_negatives(d: Dataset, scene: Raster, truth, count: int, min_dist: float = None,
                     seed: int = 0, scene_id: str = "") -> list:
    """Append ``count`` no-palm crops whose centers keep ``min_dist`` pixels
    (default: half the crop side) from every ground-truth center.  Rejection
    sampling, deterministic per seed; gives up after 1000 * count proposals."""
    if min_dist is None:
        min_dist = d.side / 2
    if min_dist <= 0:
        raise ValueError(f"min_dist must be positive, got {min_dist}")
    if count == 0:
        return []
    half = d.side // 2
    lo_x, hi_x = half, scene.width - d.side + half
    lo_y, hi_y = half, scene.height - d.side + half
    if hi_x < lo_x or hi_y < lo_y:
        raise ValueError(f"scene {scene.width}x{scene.height} is smaller than a {d.side}px window")
    centers = np.array([(p.x, p.y) for p in truth.centers], dtype=np.float64).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    out = []
    budget = 1000 * count
    while len(out) < count and budget > 0:
        budget -= 1
        cx = int(rng.integers(lo_x, hi_x + 1))
        cy = int(rng.integers(lo_y, hi_y + 1))
        if centers.size:
            dist = np.sqrt(((centers - (cx, cy)) ** 2).sum(axis=1)).min()
            if dist < min_dist:
                continue
        out.append(add_crop(d, scene, PixelPoint(cx, cy), NO_PALM, scene_id=scene_id))
    if len(out) < count:
        raise ValueError(
            f"could not place {count} negatives at min_dist {min_dist} "
            f"(found {len(out)} in {1000 * count} proposals)")
    return out


def split(d: Dataset, spec: SplitSpec):
    """Seeded, stratified train/validation partition.

    Per class, round(fraction * class_count) items go to validation.  Every
    item lands in exactly one side.
    """
    by_class = {label: [i for i, item in enumerate(d.items) if item.label == label]
                for label in LABELS}
    for label, idxs in by_class.items():
        if len(idxs) < 2:
            raise ValueError(f"class {label!r} has {len(idxs)} items; need at least 2 to split")
    rng = np.random.default_rng(spec.seed)
    val_idx = set()
    for label in LABELS:
        idxs = np.array(by_class[label])
        rng.shuffle(idxs)
        n_val = int(np.floor(spec.validation_fraction * len(idxs) + 0.5))
        val_idx.update(idxs[:n_val].tolist())
    train_ds = Dataset(d.side, d.channels, [it for i, it in enumerate(d.items) if i not in val_idx])
    val_ds = Dataset(d.side, d.channels, [it for i, it in enumerate(d.items) if i in val_idx])
    return train_ds, val_ds


def as_arrays(d: Dataset):
    """Dataset as (X, y): X is (n, channels, side, side) float32, y holds
    class indices with palm = 1."""
    n = len(d.items)
    x = np.empty((n, d.channels, d.side, d.side), dtype=np.float32)
    y = np.empty(n, dtype=np.int64)
    for i, item in enumerate(d.items):
        x[i] = item.crop.pixels.transpose(2, 0, 1)
        y[i] = LABEL_TO_CLASS[item.label]
    return x, y


def save_dataset(d: Dataset, path) -> None:
    """Write manifest.json plus one PNG per crop into directory ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for item in d.items:
        save_raster(item.crop, root / f"{item.id}.png")
    write_manifest(d, root)


def write_manifest(d: Dataset, root) -> None:
    manifest = {
        "side": d.side,
        "channels": d.channels,
        "items": [
            {
                "id": item.id,
                "label": item.label,
                "source_scene": item.source_scene,
                "center_x": item.center.x,
                "center_y": item.center.y,
            }
            for item in d.items
        ],
    }
    (Path(root) / _MANIFEST).write_text(json.dumps(manifest, indent=1))


def load_dataset(path) -> Dataset:
    root = Path(path)
    manifest_path = root / _MANIFEST
    if not manifest_path.is_file():
        raise ValueError(f"{root}: missing {_MANIFEST}")
    manifest = json.loads(manifest_path.read_text())
    d = Dataset(side=manifest["side"], channels=manifest["channels"])
    for rec in manifest["items"]:
        crop_path = root / f"{rec['id']}.png"
        if not crop_path.is_file():
            raise ValueError(f"{root}: crop file for id {rec['id']!r} is missing")
        r = load_raster(crop_path)
        if r.width != d.side or r.height != d.side or r.channels != d.channels:
            raise ValueError(
                f"{root}: crop {rec['id']!r} is {r.width}x{r.height}x{r.channels}, "
                f"dataset declares {d.side}x{d.side}x{d.channels}")
        d.items.append(LabeledCrop(
            id=rec["id"],
            crop=r,
            label=rec["label"],
            source_scene=rec["source_scene"],
            center=PixelPoint(rec["center_x"], rec["center_y"]),
        ))
    return d
