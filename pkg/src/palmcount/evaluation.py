"""Count and localization scoring against ground truth.

The count metric is margin of error = |D - N| / N with D detected and N
actual trees.  Localization quality is measured by greedy nearest-first
matching of peaks to truth centers within a pixel tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import PixelPoint

DEFAULT_TOLERANCE_PX = 20.0  # half a crown


@dataclass(frozen=True)
class GroundTruth:
    centers: tuple
    scene_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(self.centers))

    def __len__(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class CountReport:
    detected: int
    actual: int
    margin: float


@dataclass(frozen=True)
class MatchReport:
    matches: tuple  # (peak index, truth index, distance px)
    precision: float
    recall: float
    tolerance: float


def margin_of_error(detected: int, actual: int) -> float:
    """|D - N| / N.  Undefined (raises) when no trees exist."""
    if actual < 1:
        raise ValueError(f"margin of error is undefined for N = {actual}")
    return abs(detected - actual) / actual


def match_detections(peaks, truth: GroundTruth, tolerance: float = DEFAULT_TOLERANCE_PX) -> MatchReport:
    """Greedy matching in ascending distance order.

    Repeatedly pairs the closest unmatched (peak, truth) pair with distance
    <= tolerance; ties break by (peak index, truth index).  Precision is 1
    when there are no peaks, recall is 1 when there is no truth.
    """
    if tolerance <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    pts = [(x, y) for x, y, *_ in peaks.peaks] if hasattr(peaks, "peaks") else list(peaks)
    candidates = []
    for pi, (px, py) in enumerate(pts):
        for ti, t in enumerate(truth.centers):
            d = float(np.hypot(px - t.x, py - t.y))
            if d <= tolerance:
                candidates.append((d, pi, ti))
    candidates.sort()
    used_p, used_t, matches = set(), set(), []
    for d, pi, ti in candidates:
        if pi in used_p or ti in used_t:
            continue
        used_p.add(pi)
        used_t.add(ti)
        matches.append((pi, ti, d))
    n_peaks, n_truth = len(pts), len(truth)
    precision = len(matches) / n_peaks if n_peaks else 1.0
    recall = len(matches) / n_truth if n_truth else 1.0
    return MatchReport(tuple(matches), precision, recall, tolerance)


def evaluate_scene(peaks, truth: GroundTruth, tolerance: float = DEFAULT_TOLERANCE_PX):
    """Count report (D = number of peaks) plus the localization match report."""
    n_peaks = len(peaks.peaks) if hasattr(peaks, "peaks") else len(peaks)
    count = CountReport(n_peaks, len(truth), margin_of_error(n_peaks, len(truth)))
    return count, match_detections(peaks, truth, tolerance)


def write_batch_report(rows, path) -> None:
    """CSV with one line per scene (D, N, margin, precision, recall) and a
    final mean row.  ``rows`` is a list of (scene_id, CountReport, MatchReport)."""
    lines = ["scene,detected,actual,margin,precision,recall"]
    for scene_id, count, match in rows:
        lines.append(f"{scene_id},{count.detected},{count.actual},"
                     f"{count.margin:.6f},{match.precision:.6f},{match.recall:.6f}")
    if rows:
        mean = [float(np.mean([c.margin for _, c, _ in rows])),
                float(np.mean([m.precision for _, _, m in rows])),
                float(np.mean([m.recall for _, _, m in rows]))]
        d_sum = sum(c.detected for _, c, _ in rows)
        n_sum = sum(c.actual for _, c, _ in rows)
        lines.append(f"MEAN,{d_sum},{n_sum},{mean[0]:.6f},{mean[1]:.6f},{mean[2]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def save_truth_csv(truth: GroundTruth, path) -> None:
    lines = ["x_px,y_px"]
    for p in sorted(truth.centers, key=lambda p: (p.y, p.x)):
        lines.append(f"{p.x},{p.y}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_truth_csv(path, scene_id: str = "") -> GroundTruth:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != "x_px,y_px":
        raise ValueError(f"{path}: expected a 'x_px,y_px' header")
    centers = []
    for line in text[1:]:
        xs, ys = line.split(",")
        centers.append(PixelPoint(int(xs), int(ys)))
    return GroundTruth(tuple(centers), scene_id or Path(path).stem)
