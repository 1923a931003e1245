"""Request-level CLI coverage on a miniature pipeline (fast settings)."""

import numpy as np
import pytest

from palmcount.cli import main
from palmcount.raster import Raster, save_raster


SYNTH_ARGS = ["--scenes", "1", "--width", "240", "--height", "240",
              "--trees-min", "4", "--trees-max", "7", "--spacing", "50",
              "--n-palm", "16", "--n-nopalm", "24", "--seed", "5"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> train -> detect, shared by the command tests below."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root)] + SYNTH_ARGS) == 0
    assert main(["train", str(root / "dataset"), "--out", str(root / "model"),
                 "--epochs", "4", "--seed", "1"]) == 0
    assert main(["detect", str(root / "model" / "model.pcm"),
                 str(root / "scenes" / "scene_000.png"),
                 "--out", str(root / "det")]) == 0
    return root


def test_synth_outputs(pipeline):
    assert (pipeline / "scenes" / "scene_000.png").is_file()
    assert (pipeline / "scenes" / "scene_000_truth.csv").is_file()
    assert (pipeline / "dataset" / "manifest.json").is_file()


def test_train_outputs(pipeline):
    assert (pipeline / "model" / "model.pcm").is_file()
    report = (pipeline / "model" / "train_report.csv").read_text().splitlines()
    assert report[0] == "epoch,train_loss,val_accuracy"
    assert len(report) == 5


def test_detect_outputs(pipeline):
    det = pipeline / "det"
    for name in ("map_raw.pgm", "map_raw.txt", "map_smoothed.pgm", "map_smoothed.txt",
                 "peaks.csv", "overlay_heatmap.png", "overlay_peaks.png"):
        assert (det / name).is_file(), name
    assert (det / "peaks.csv").read_text().splitlines()[0] == "x_px,y_px,confidence"


def test_evaluate_prints_report(pipeline, capsys, tmp_path):
    out = tmp_path / "report.csv"
    status = main(["evaluate", str(pipeline / "det" / "peaks.csv"),
                   str(pipeline / "scenes" / "scene_000_truth.csv"),
                   "--out", str(out)])
    assert status == 0
    printed = capsys.readouterr().out
    assert "margin=" in printed
    lines = out.read_text().splitlines()
    assert lines[0] == "scene,detected,actual,margin,precision,recall"
    assert lines[-1].startswith("MEAN,")


def test_evaluate_rejects_empty_truth(tmp_path, capsys):
    peaks = tmp_path / "p.csv"
    peaks.write_text("x_px,y_px,confidence\n10,10,0.9\n")
    truth = tmp_path / "t.csv"
    truth.write_text("x_px,y_px\n")
    assert main(["evaluate", str(peaks), str(truth)]) == 1
    assert "undefined" in capsys.readouterr().err


def test_evaluate_rejects_odd_file_list(tmp_path, capsys):
    peaks = tmp_path / "p.csv"
    peaks.write_text("x_px,y_px,confidence\n")
    assert main(["evaluate", str(peaks)]) == 1
    assert "pairs" in capsys.readouterr().err


def test_detect_rejects_small_scene(pipeline, tmp_path, capsys):
    small = tmp_path / "small.png"
    save_raster(Raster(np.zeros((20, 20, 1), dtype=np.float32)), small)
    status = main(["detect", str(pipeline / "model" / "model.pcm"), str(small),
                   "--out", str(tmp_path / "out")])
    assert status == 1
    assert "smaller" in capsys.readouterr().err


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit):
        main(["gradcheck", "--bogus", "1"])


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert out.count(" ok") == 5


def test_synth_deterministic_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["synth", "--out", str(out)] + SYNTH_ARGS) == 0
    for rel in ("scenes/scene_000.png", "scenes/scene_000_truth.csv", "dataset/manifest.json"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_detect_never_mutates_inputs(pipeline, tmp_path):
    scene = pipeline / "scenes" / "scene_000.png"
    model = pipeline / "model" / "model.pcm"
    before = scene.read_bytes(), model.read_bytes()
    assert main(["detect", str(model), str(scene), "--out", str(tmp_path / "again")]) == 0
    assert (scene.read_bytes(), model.read_bytes()) == before
