"""Command-line entry point: one subcommand per pipeline stage.

synth     generate scenes, truth files and a labeled crop dataset
train     train the classifier on a crop dataset
detect    sweep a model over a scene and emit maps, peaks and overlays
evaluate  score peak files against truth files
gradcheck verify analytic gradients against finite differences
serve     run the annotation backend

Every command is deterministic given --seed and never mutates its inputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataset as ds_mod
from . import detector, evaluation, raster, synth
from .nn import ModelConfig, TrainConfig, gradcheck, load_model, save_model, train


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="palmcount",
                                     description="palm-tree crown counting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes and crops")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=1, help="number of scenes to write")
    p.add_argument("--n-palm", type=int, default=0, help="palm crops for the dataset")
    p.add_argument("--n-nopalm", type=int, default=0, help="no-palm crops for the dataset")
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--height", type=int, default=800)
    p.add_argument("--trees-min", type=int, default=80)
    p.add_argument("--trees-max", type=int, default=150)
    p.add_argument("--spacing", type=float, default=48.0)
    p.add_argument("--channels", type=int, default=1, choices=(1, 3))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the classifier on a crop dataset")
    p.add_argument("dataset", help="dataset directory (manifest.json + crops)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect crowns in a scene")
    p.add_argument("model", help="model file written by train")
    p.add_argument("scene", help="scene image (png/pgm/ppm)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--window", type=int, default=40, metavar="PX")
    p.add_argument("--stride", type=int, default=4, metavar="PX")
    p.add_argument("--kernel", type=int, default=None, metavar="CELLS")
    p.add_argument("--nms-radius", type=int, default=None, metavar="CELLS")
    p.add_argument("--threshold", type=float, default=0.3)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    p.add_argument("files", nargs="+", metavar="PEAKS TRUTH",
                   help="alternating peaks.csv truth.csv pairs")
    p.add_argument("--tolerance", type=float, default=evaluation.DEFAULT_TOLERANCE_PX)
    p.add_argument("--out", default=None, help="write a CSV batch report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve", help="run the annotation backend")
    p.add_argument("--data", required=True, help="directory with scenes/ (dataset/ is created)")
    p.add_argument("--listen", default="127.0.0.1:8000", metavar="ADDR:PORT")
    p.add_argument("--static", default=None, help="directory with the built annotator UI")
    p.set_defaults(func=cmd_serve)
    return parser


def cmd_synth(args) -> int:
    out = Path(args.out)
    cfg = synth.SynthConfig(
        width=args.width,
        height=args.height,
        count_range=(args.trees_min, args.trees_max),
        min_spacing=args.spacing,
        channels=args.channels,
    )
    for k in range(args.scenes):
        scene, truth = synth.generate_scene(cfg, [args.seed, k])
        synth.write_scene_bundle(scene, truth, out / "scenes", f"scene_{k:03d}")
        print(f"scene_{k:03d}: {len(truth)} trees")
    if args.n_palm or args.n_nopalm:
        d = synth.generate_crops(cfg, args.seed, args.n_palm, args.n_nopalm)
        ds_mod.save_dataset(d, out / "dataset")
        print(f"dataset: {d.class_counts()}")
    return 0


def cmd_train(args) -> int:
    data = ds_mod.load_dataset(args.dataset)
    config = ModelConfig(input_side=data.side, input_channels=data.channels)
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                      epochs=args.epochs, seed=args.seed)
    report = train(config, data, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(report.model, out / "model.pcm")
    lines = ["epoch,train_loss,val_accuracy"]
    for e, (loss, acc) in enumerate(zip(report.train_losses, report.val_accuracies)):
        lines.append(f"{e},{loss:.6f},{acc:.6f}")
    (out / "train_report.csv").write_text("\n".join(lines) + "\n")
    print(f"best validation accuracy {report.best_val_accuracy:.4f} "
          f"(epoch {report.best_epoch}); model -> {out / 'model.pcm'}")
    return 0


def cmd_detect(args) -> int:
    model = load_model(args.model)
    scene = raster.load_raster(args.scene)
    params = detector.DetectorParams(
        window_side=args.window,
        stride=args.stride,
        kernel_side=args.kernel,
        nms_radius=args.nms_radius,
        threshold=args.threshold,
    )
    raw, smoothed, peaks = detector.detect(model, scene, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    detector.save_map_pgm16(raw, out / "map_raw.pgm")
    detector.save_map_text(raw, out / "map_raw.txt")
    detector.save_map_pgm16(smoothed, out / "map_smoothed.pgm")
    detector.save_map_text(smoothed, out / "map_smoothed.txt")
    detector.save_peaks_csv(peaks, out / "peaks.csv")
    raster.save_raster(raster.render_overlay(scene, smoothed, "heatmap"),
                       out / "overlay_heatmap.png")
    raster.save_raster(raster.render_overlay(scene, peaks, "peaks"),
                       out / "overlay_peaks.png")
    print(f"{len(peaks)} peaks -> {out / 'peaks.csv'}")
    return 0


def cmd_evaluate(args) -> int:
    if len(args.files) % 2:
        raise ValueError("evaluate expects alternating PEAKS TRUTH file pairs")
    rows = []
    for peaks_path, truth_path in zip(args.files[0::2], args.files[1::2]):
        peaks = detector.load_peaks_csv(peaks_path)
        truth = evaluation.load_truth_csv(truth_path)
        count, match = evaluation.evaluate_scene(peaks, truth, args.tolerance)
        rows.append((truth.scene_id, count, match))
        print(f"{truth.scene_id}: D={count.detected} N={count.actual} "
              f"margin={count.margin:.4f} precision={match.precision:.4f} "
              f"recall={match.recall:.4f}")
    if len(rows) > 1:
        mean_margin = sum(c.margin for _, c, _ in rows) / len(rows)
        print(f"mean margin over {len(rows)} scenes: {mean_margin:.4f}")
    if args.out:
        evaluation.write_batch_report(rows, args.out)
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck.check_all(args.seed)
    status = 0
    for name, err in results.items():
        ok = err < gradcheck.TOLERANCE
        print(f"{name:14s} max relative error {err:.3e}  {'ok' if ok else 'FAIL'}")
        if not ok:
            status = 1
    return status


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"--listen expects ADDR:PORT, got {args.listen!r}")
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static = bundled if bundled.is_dir() else None
    app = create_app(args.data, static_dir=static)
    uvicorn.run(app, host=host, port=int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
