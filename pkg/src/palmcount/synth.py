"""Seeded synthetic plantation scenes with known crown positions.

Scenes stand in for proprietary satellite imagery: crowns are rendered as
radially shaded disks with multiplicative speckle over a low-amplitude
noise background, placed on a jittered grid.  Everything is driven by one
seeded generator, so identical (config, seed) pairs produce byte-identical
scenes, truth lists and crops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, PALM, add_crop, sample_negatives
from .evaluation import GroundTruth, save_truth_csv
from .raster import PixelPoint, Raster, save_raster

BORDER_MARGIN = 20  # keeps every truth center's 40px window in-bounds


@dataclass(frozen=True)
class SynthConfig:
    width: int = 800
    height: int = 800
    radius_range: tuple = (16.0, 22.0)   # crown diameters bracket 40px
    count_range: tuple = (80, 150)
    min_spacing: float = 48.0
    placement_jitter: float = 4.0
    crown_contrast: float = 0.35
    crown_noise: float = 0.10
    background_noise: float = 0.05
    overlap_allowance: float = 0.25      # fraction of spacing crowns may close in by
    channels: int = 1
    background_level: float = 0.32
    crown_peak: float = 0.80

    def __post_init__(self):
        rmin, rmax = self.radius_range
        if not 0 < rmin <= rmax < min(self.width, self.height) / 2:
            raise ValueError(f"radius range {self.radius_range} not inside "
                             f"(0, {min(self.width, self.height) / 2})")
        cmin, cmax = self.count_range
        if not 0 <= cmin <= cmax:
            raise ValueError(f"bad tree count range {self.count_range}")
        if self.min_spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.min_spacing}")
        if self.placement_jitter < 0 or self.crown_noise < 0 or self.background_noise < 0:
            raise ValueError("jitter and noise amplitudes must be >= 0")
        if not 0.0 <= self.overlap_allowance <= 1.0:
            raise ValueError(f"overlap allowance must lie in [0, 1], got {self.overlap_allowance}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")

    def effective_jitter(self) -> float:
        """Jitter amplitude actually applied.  Capped (with slack for the
        integer rounding of centers) so that any two centers stay at least
        min_spacing * (1 - overlap_allowance) apart."""
        cap = self.min_spacing * self.overlap_allowance / 2.0 - 0.71
        return max(0.0, min(self.placement_jitter, cap))

    def grid_cells(self):
        ncols = int((self.width - 2 * BORDER_MARGIN) // self.min_spacing)
        nrows = int((self.height - 2 * BORDER_MARGIN) // self.min_spacing)
        return ncols, nrows


def generate_scene(cfg: SynthConfig, seed) -> tuple:
    """Render one scene; returns (Raster, GroundTruth) with exact centers."""
    rng = np.random.default_rng(seed)
    ncols, nrows = cfg.grid_cells()
    if cfg.count_range[1] > ncols * nrows:
        raise ValueError(
            f"count range {cfg.count_range} infeasible: only {ncols * nrows} grid cells "
            f"fit a {cfg.width}x{cfg.height} scene at spacing {cfg.min_spacing}")

    count = int(rng.integers(cfg.count_range[0], cfg.count_range[1] + 1))
    cells = np.sort(rng.choice(ncols * nrows, size=count, replace=False)) if count else np.array([], dtype=int)
    jit = cfg.effective_jitter()
    offsets = rng.uniform(-jit, jit, size=(count, 2))
    radii = rng.uniform(cfg.radius_range[0], cfg.radius_range[1], size=count)

    centers = []
    for k, cell in enumerate(cells):
        gy, gx = divmod(int(cell), ncols)
        cx = BORDER_MARGIN + cfg.min_spacing * (gx + 0.5) + offsets[k, 0]
        cy = BORDER_MARGIN + cfg.min_spacing * (gy + 0.5) + offsets[k, 1]
        centers.append((int(round(cx)), int(round(cy))))

    mono = _render_background(cfg, rng)
    crown_weight = np.zeros_like(mono)
    for k, (cx, cy) in enumerate(centers):
        _render_crown(cfg, rng, mono, crown_weight, cx, cy, radii[k])
    mono = np.clip(mono, 0.0, 1.0)

    if cfg.channels == 3:
        bg_tint = np.array([0.58, 0.52, 0.40], dtype=np.float32)
        crown_tint = np.array([0.55, 1.0, 0.60], dtype=np.float32)
        tint = (bg_tint[None, None, :] * (1.0 - crown_weight[:, :, None])
                + crown_tint[None, None, :] * crown_weight[:, :, None])
        pixels = np.clip(mono[:, :, None] * tint, 0.0, 1.0).astype(np.float32)
    else:
        pixels = mono[:, :, None].astype(np.float32)

    points = sorted((PixelPoint(x, y) for x, y in centers), key=lambda p: (p.y, p.x))
    return Raster(pixels), GroundTruth(tuple(points))


def _render_background(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    h, w = cfg.height, cfg.width
    cell = 16
    coarse = rng.uniform(-1.0, 1.0, size=(h // cell + 2, w // cell + 2))
    yy = np.arange(h) / cell
    xx = np.arange(w) / cell
    iy, fy = yy.astype(int), (yy % 1.0)[:, None]
    ix, fx = xx.astype(int), (xx % 1.0)[None, :]
    smooth = ((coarse[np.ix_(iy, ix)] * (1 - fy) + coarse[np.ix_(iy + 1, ix)] * fy) * (1 - fx)
              + (coarse[np.ix_(iy, ix + 1)] * (1 - fy) + coarse[np.ix_(iy + 1, ix + 1)] * fy) * fx)
    white = rng.uniform(-1.0, 1.0, size=(h, w))
    noise = 0.75 * smooth + 0.25 * white
    return (cfg.background_level + cfg.background_noise * noise).astype(np.float64)


def _render_crown(cfg: SynthConfig, rng: np.random.Generator, mono: np.ndarray,
                  crown_weight: np.ndarray, cx: int, cy: int, radius: float) -> None:
    h, w = mono.shape
    r_int = int(math.ceil(radius))
    y0, y1 = max(0, cy - r_int), min(h, cy + r_int + 1)
    x0, x1 = max(0, cx - r_int), min(w, cx + r_int + 1)
    speckle = rng.uniform(-1.0, 1.0, size=(2 * r_int + 1, 2 * r_int + 1))
    yy, xx = np.mgrid[y0:y1, x0:x1]
    d2 = ((yy - cy) ** 2 + (xx - cx) ** 2) / (radius * radius)
    inside = d2 < 1.0
    profile = cfg.crown_peak - cfg.crown_contrast * d2
    profile *= 1.0 + cfg.crown_noise * speckle[y0 - (cy - r_int):y1 - (cy - r_int),
                                               x0 - (cx - r_int):x1 - (cx - r_int)]
    region = mono[y0:y1, x0:x1]
    np.copyto(region, np.maximum(region, profile), where=inside)
    wregion = crown_weight[y0:y1, x0:x1]
    np.copyto(wregion, np.maximum(wregion, 1.0 - d2), where=inside)


def generate_crops(cfg: SynthConfig, seed: int, n_palm: int, n_nopalm: int,
                   side: int = 40) -> Dataset:
    """Build a labeled crop dataset from fresh synthetic scenes.

    Palm crops are centered exactly on generated crown centers.  No-palm
    crop centers keep at least half the window side away from every crown
    center, so no negative window contains a crown center (a mix of
    between-tree and background windows).
    """
    if n_palm < 0 or n_nopalm < 0:
        raise ValueError("crop counts must be >= 0")
    d = Dataset(side=side, channels=cfg.channels)
    if n_palm == 0 and n_nopalm == 0:
        return d
    if cfg.count_range[1] == 0 and n_palm > 0:
        raise ValueError("cannot produce palm crops from scenes with zero trees")

    max_scenes = math.ceil(n_palm / max(cfg.count_range[0], 1)) + 3
    scenes = []
    palms_left = n_palm
    k = 0
    while True:
        scene, truth = generate_scene(cfg, [seed, k])
        scenes.append((f"synth-{k:03d}", scene, truth))
        take = min(palms_left, len(truth))
        for p in truth.centers[:take]:
            add_crop(d, scene, p, PALM, scene_id=f"synth-{k:03d}")
        palms_left -= take
        k += 1
        if palms_left == 0:
            break
        if k >= max_scenes:
            raise ValueError(
                f"requested {n_palm} palm crops but {k} scenes yielded only {n_palm - palms_left}")

    exclusion = side / 2.0
    quota = math.ceil(n_nopalm / len(scenes)) if n_nopalm else 0
    negatives_left = n_nopalm
    for idx, (scene_id, scene, truth) in enumerate(scenes):
        want = min(quota, negatives_left)
        if want == 0:
            break
        sample_negatives(d, scene, truth, want, exclusion, seed=[seed, 0x4E, idx],
                         scene_id=scene_id)
        negatives_left -= want
    return d


def write_scene_bundle(scene: Raster, truth: GroundTruth, out_dir, name: str) -> None:
    """Write ``<name>.png`` plus ``<name>_truth.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_raster(scene, out / f"{name}.png")
    save_truth_csv(truth, out / f"{name}_truth.csv")
