"""Sliding-window detection: confidence map, smoothing, peak extraction.

The classifier is swept over the scene on a stride grid; cell (i, j) of the
confidence map holds the palm probability of the window whose top-left
pixel is (i*stride, j*stride).  The map is smoothed with a uniform (box)
filter under reflect padding and peaks are extracted by non-maximal
suppression over a Chebyshev neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .nn.model import Model, forward
from .raster import PixelPoint, Raster

PALM_CLASS = 1


def round_to_odd(x: float) -> int:
    """Nearest odd integer >= 1; even integers round down."""
    k = int(round(x))
    if k % 2 == 0:
        k -= 1
    return max(1, k)


@dataclass(frozen=True)
class DetectorParams:
    """Sweep parameters.

    ``kernel_side`` defaults to about half a crown diameter in cells: the
    classifier's positive response is confined to windows that still
    contain a crown center, so a full-crown kernel would dilute peaks
    below the detection threshold.  ``nms_radius`` defaults to half a
    crown as well, the closest two resolvable crowns can sit.
    """

    window_side: int = 40
    stride: int = 4
    kernel_side: int = None
    nms_radius: int = None
    threshold: float = 0.3
    batch_size: int = 512

    def __post_init__(self):
        if self.window_side < 1:
            raise ValueError(f"window side must be >= 1, got {self.window_side}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.kernel_side is None:
            object.__setattr__(self, "kernel_side", round_to_odd(self.window_side / (2 * self.stride)))
        if self.kernel_side < 1 or self.kernel_side % 2 == 0:
            raise ValueError(f"kernel side must be odd and >= 1, got {self.kernel_side}")
        if self.nms_radius is None:
            object.__setattr__(self, "nms_radius", max(1, self.window_side // (2 * self.stride)))
        if self.nms_radius < 1:
            raise ValueError(f"nms radius must be >= 1, got {self.nms_radius}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ConfidenceMap:
    """Palm probabilities on the sweep grid plus the geometry that maps
    cells back to scene pixels."""

    values: np.ndarray  # (rows, cols) float32 in [0, 1]
    window_side: int
    stride: int
    scene_width: int
    scene_height: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError(f"confidence map must be 2D, got shape {v.shape}")
        exp_cols = (self.scene_width - self.window_side) // self.stride + 1
        exp_rows = (self.scene_height - self.window_side) // self.stride + 1
        if v.shape != (exp_rows, exp_cols):
            raise ValueError(
                f"map is {v.shape[1]}x{v.shape[0]} cells but geometry implies {exp_cols}x{exp_rows}")

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PeakList:
    """Detected crown centers: (x_px, y_px, confidence), sorted by (y, x)."""

    peaks: tuple
    scene_width: int
    scene_height: int

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))

    def __len__(self) -> int:
        return len(self.peaks)

    def points(self) -> list:
        return [PixelPoint(x, y) for x, y, _ in self.peaks]


def cell_to_pixel(i: int, j: int, cmap: ConfidenceMap) -> PixelPoint:
    """Center pixel of the window that cell (col i, row j) scored."""
    if not (0 <= i < cmap.cols and 0 <= j < cmap.rows):
        raise ValueError(f"cell ({i},{j}) outside the {cmap.cols}x{cmap.rows} map grid")
    half = cmap.window_side // 2
    return PixelPoint(i * cmap.stride + half, j * cmap.stride + half)


def slide(m: Model, scene: Raster, p: DetectorParams = DetectorParams()) -> ConfidenceMap:
    """Evaluate the classifier on every interior window of the stride grid.

    Windows are batched for speed; values are identical (within float32
    rounding) to evaluating each window on its own.
    """
    if scene.width < p.window_side or scene.height < p.window_side:
        raise ValueError(
            f"scene {scene.width}x{scene.height} is smaller than the {p.window_side}px window")
    if scene.channels != m.config.input_channels:
        raise ValueError(
            f"scene has {scene.channels} channels, model expects {m.config.input_channels}")
    if p.window_side != m.config.input_side:
        raise ValueError(
            f"window side {p.window_side} does not match the model input {m.config.input_side}")

    ws = p.window_side
    chw = scene.pixels.transpose(2, 0, 1)  # (C, H, W)
    wins = sliding_window_view(chw, (ws, ws), axis=(1, 2))[:, ::p.stride, ::p.stride]
    _, rows, cols = wins.shape[:3]
    wins = wins.transpose(1, 2, 0, 3, 4)  # (rows, cols, C, ws, ws)
    flat = wins.reshape(rows * cols, scene.channels, ws, ws)

    values = np.empty(rows * cols, dtype=np.float32)
    for start in range(0, len(flat), p.batch_size):
        batch = np.ascontiguousarray(flat[start:start + p.batch_size])
        values[start:start + len(batch)] = forward(m, batch)[:, PALM_CLASS]
    return ConfidenceMap(values.reshape(rows, cols), ws, p.stride,
                         scene.width, scene.height)


def box_filter(cmap: ConfidenceMap, kernel_side: int) -> ConfidenceMap:
    """Uniform mean filter with reflect (edge-repeating) padding.

    Implemented with a summed-area table over the padded grid; equals the
    naive per-cell neighborhood mean.
    """
    if kernel_side < 1 or kernel_side % 2 == 0:
        raise ValueError(f"kernel side must be odd and >= 1, got {kernel_side}")
    if kernel_side == 1:
        return cmap
    pad = kernel_side // 2
    padded = np.pad(cmap.values.astype(np.float64), pad, mode="symmetric")
    sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    sat[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    k = kernel_side
    rows, cols = cmap.values.shape
    sums = (sat[k:k + rows, k:k + cols] - sat[:rows, k:k + cols]
            - sat[k:k + rows, :cols] + sat[:rows, :cols])
    smoothed = np.clip(sums / (k * k), 0.0, 1.0).astype(np.float32)
    return ConfidenceMap(smoothed, cmap.window_side, cmap.stride,
                         cmap.scene_width, cmap.scene_height)


def nms(cmap: ConfidenceMap, radius: int, threshold: float) -> PeakList:
    """Peaks: cells at or above ``threshold`` that dominate every cell
    within Chebyshev distance ``radius``; on plateaus of equal maxima the
    lexicographically smallest (row, col) cell wins."""
    if radius < 1:
        raise ValueError(f"nms radius must be >= 1, got {radius}")
    v = cmap.values
    rows, cols = v.shape
    idx = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)

    neigh_max = np.full_like(v, -np.inf, dtype=np.float64)
    min_equal_idx = idx.copy()
    for dr in range(-radius, radius + 1):
        r0, r1 = max(0, dr), min(rows, rows + dr)
        s0, s1 = max(0, -dr), min(rows, rows - dr)
        if r0 >= r1:
            continue
        for dc in range(-radius, radius + 1):
            c0, c1 = max(0, dc), min(cols, cols + dc)
            t0, t1 = max(0, -dc), min(cols, cols - dc)
            if c0 >= c1:
                continue
            shifted_v = v[s0:s1, t0:t1]
            dest_v = neigh_max[r0:r1, c0:c1]
            np.maximum(dest_v, shifted_v, out=dest_v)
            equal = shifted_v == v[r0:r1, c0:c1]
            dest_i = min_equal_idx[r0:r1, c0:c1]
            cand = np.where(equal, idx[s0:s1, t0:t1], dest_i)
            np.minimum(dest_i, cand, out=dest_i)

    is_peak = (v >= threshold) & (v >= neigh_max) & (min_equal_idx == idx)
    peak_rows, peak_cols = np.nonzero(is_peak)
    peaks = []
    for j, i in zip(peak_rows.tolist(), peak_cols.tolist()):
        pt = cell_to_pixel(i, j, cmap)
        peaks.append((pt.x, pt.y, float(v[j, i])))
    peaks.sort(key=lambda p: (p[1], p[0]))
    return PeakList(tuple(peaks), cmap.scene_width, cmap.scene_height)


def detect(m: Model, scene: Raster, p: DetectorParams = DetectorParams()):
    """Full pipeline: sweep -> smooth -> suppress.  Returns all stages."""
    raw = slide(m, scene, p)
    smoothed = box_filter(raw, p.kernel_side)
    peaks = nms(smoothed, p.nms_radius, p.threshold)
    return raw, smoothed, peaks


# --- file formats ------------------------------------------------------------


def save_map_pgm16(cmap: ConfidenceMap, path) -> None:
    """16-bit binary PGM; sample = round(p * 65535), big-endian."""
    samples = np.rint(cmap.values.astype(np.float64) * 65535.0).astype(">u2")
    header = b"P5\n%d %d\n65535\n" % (cmap.cols, cmap.rows)
    Path(path).write_bytes(header + samples.tobytes())


def save_map_text(cmap: ConfidenceMap, path) -> None:
    """Plain-text grid: one map row per line, decimal probabilities."""
    lines = [" ".join(f"{x:.6f}" for x in row) for row in cmap.values]
    Path(path).write_text("\n".join(lines) + "\n")


def save_peaks_csv(pl: PeakList, path) -> None:
    lines = ["x_px,y_px,confidence"]
    for x, y, c in sorted(pl.peaks, key=lambda p: (p[1], p[0])):
        lines.append(f"{x},{y},{c:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_peaks_csv(path, scene_width: int = 0, scene_height: int = 0) -> PeakList:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != "x_px,y_px,confidence":
        raise ValueError(f"{path}: expected a 'x_px,y_px,confidence' header")
    peaks = []
    for line in text[1:]:
        xs, ys, cs = line.split(",")
        peaks.append((int(xs), int(ys), float(cs)))
    if not scene_width:
        scene_width = max((x for x, _, _ in peaks), default=0) + 1
    if not scene_height:
        scene_height = max((y for _, y, _ in peaks), default=0) + 1
    return PeakList(tuple(peaks), scene_width, scene_height)
