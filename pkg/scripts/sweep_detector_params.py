#!/usr/bin/env python3
"""Sensitivity sweep over the detector's smoothing kernel and threshold.

Trains one classifier, computes each scene's raw confidence map once, then
scores every (kernel, threshold) pair on count margin and recall.  Useful
for picking detector defaults for a new crown scale or stride.

    python scripts/sweep_detector_params.py --scenes 3
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from palmcount.detector import DetectorParams, box_filter, nms, slide
from palmcount.evaluation import evaluate_scene
from palmcount.nn import ModelConfig, TrainConfig, train
from palmcount.synth import SynthConfig, generate_crops, generate_scene


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=777)
    ap.add_argument("--scenes", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--kernels", type=int, nargs="+", default=[1, 3, 5, 7, 9])
    ap.add_argument("--thresholds", type=float, nargs="+", default=[0.15, 0.3, 0.5])
    return ap.parse_args()


def main():
    args = parse_args()
    cfg = SynthConfig()
    data = generate_crops(cfg, args.seed, 300, 500)
    result = train(ModelConfig(input_channels=cfg.channels), data,
                   TrainConfig(epochs=args.epochs, seed=args.seed))
    print(f"classifier val acc {result.best_val_accuracy:.4f}")

    params = DetectorParams()
    cases = []
    for k in range(args.scenes):
        scene, truth = generate_scene(cfg, [args.seed + 1, k])
        t0 = time.time()
        cases.append((slide(result.model, scene, params), truth))
        print(f"scene {k}: swept in {time.time() - t0:.0f}s ({len(truth)} trees)")

    print(f"\n{'kernel':>6} {'thr':>5} {'margin':>8} {'recall':>8} {'precision':>10}")
    for kernel in args.kernels:
        smoothed = [(box_filter(raw, kernel), truth) for raw, truth in cases]
        for thr in args.thresholds:
            margins, recalls, precisions = [], [], []
            for sm, truth in smoothed:
                peaks = nms(sm, params.nms_radius, thr)
                count, match = evaluate_scene(peaks, truth, 20.0)
                margins.append(count.margin)
                recalls.append(match.recall)
                precisions.append(match.precision)
            print(f"{kernel:>6} {thr:>5.2f} {np.mean(margins):>8.4f} "
                  f"{np.mean(recalls):>8.4f} {np.mean(precisions):>10.4f}")


if __name__ == "__main__":
    main()
