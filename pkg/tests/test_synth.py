import numpy as np
import pytest

from palmcount.dataset import NO_PALM, PALM
from palmcount.synth import BORDER_MARGIN, SynthConfig, generate_crops, generate_scene, write_scene_bundle
from palmcount.evaluation import load_truth_csv
from palmcount.raster import load_raster


def pairwise_min_distance(centers):
    pts = np.array([(p.x, p.y) for p in centers], dtype=float)
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    return float(d.min())


class TestGenerateScene:
    def test_empty_count_range_gives_background_only(self):
        cfg = SynthConfig(width=200, height=200, count_range=(0, 0), min_spacing=40)
        scene, truth = generate_scene(cfg, 1)
        assert len(truth) == 0
        assert scene.width == 200 and scene.height == 200

    def test_single_tree_no_jitter_no_noise_at_cell_center(self):
        cfg = SynthConfig(width=200, height=200, count_range=(1, 1), min_spacing=40,
                          placement_jitter=0.0, crown_noise=0.0, background_noise=0.0)
        scene, truth = generate_scene(cfg, 3)
        assert len(truth) == 1
        center = truth.centers[0]
        # grid cell centers sit at margin + spacing * (g + 0.5)
        assert (center.x - BORDER_MARGIN - 20) % 40 == 0
        assert (center.y - BORDER_MARGIN - 20) % 40 == 0
        # brightest pixel is the crown center
        flat = scene.pixels[:, :, 0]
        y, x = np.unravel_index(np.argmax(flat), flat.shape)
        assert abs(x - center.x) <= 1 and abs(y - center.y) <= 1

    def test_pairwise_spacing_bound_holds(self):
        cfg = SynthConfig(width=800, height=800, count_range=(80, 150), min_spacing=36.0)
        scene, truth = generate_scene(cfg, 42)
        assert 80 <= len(truth) <= 150
        bound = cfg.min_spacing * (1 - cfg.overlap_allowance)
        assert pairwise_min_distance(truth.centers) >= bound

    def test_centers_respect_border_margin(self):
        cfg = SynthConfig(width=400, height=300, count_range=(10, 20), min_spacing=40)
        _, truth = generate_scene(cfg, 7)
        for p in truth.centers:
            assert BORDER_MARGIN <= p.x <= cfg.width - BORDER_MARGIN
            assert BORDER_MARGIN <= p.y <= cfg.height - BORDER_MARGIN

    def test_byte_identical_determinism(self):
        cfg = SynthConfig(width=400, height=400, count_range=(10, 30), min_spacing=42)
        s1, t1 = generate_scene(cfg, 5)
        s2, t2 = generate_scene(cfg, 5)
        assert s1.pixels.tobytes() == s2.pixels.tobytes()
        assert t1.centers == t2.centers
        s3, _ = generate_scene(cfg, 6)
        assert s3.pixels.tobytes() != s1.pixels.tobytes()

    def test_pixels_clamped(self):
        cfg = SynthConfig(width=240, height=240, count_range=(5, 9), min_spacing=44,
                          crown_noise=0.8, background_noise=0.5)
        scene, _ = generate_scene(cfg, 11)
        assert scene.pixels.min() >= 0.0 and scene.pixels.max() <= 1.0

    def test_infeasible_density_rejected(self):
        cfg = SynthConfig(width=120, height=120, count_range=(50, 60), min_spacing=40)
        with pytest.raises(ValueError, match="infeasible"):
            generate_scene(cfg, 0)

    def test_three_channel_scene(self):
        cfg = SynthConfig(width=200, height=200, count_range=(3, 5), min_spacing=44, channels=3)
        scene, _ = generate_scene(cfg, 2)
        assert scene.channels == 3
        # crowns are green-dominant
        g = scene.pixels[:, :, 1]
        r = scene.pixels[:, :, 0]
        assert g.max() > r.max()


class TestGenerateCrops:
    cfg = SynthConfig(width=400, height=400, count_range=(12, 20), min_spacing=44)

    def test_zero_counts_give_empty_dataset(self):
        d = generate_crops(self.cfg, 0, 0, 0)
        assert len(d.items) == 0

    def test_exact_class_counts(self):
        d = generate_crops(self.cfg, 7, n_palm=30, n_nopalm=50)
        counts = d.class_counts()
        assert counts[PALM] == 30 and counts[NO_PALM] == 50
        assert all(item.crop.width == 40 and item.crop.height == 40 for item in d.items)

    def test_palm_centers_on_truth_and_negatives_excluded(self):
        d = generate_crops(self.cfg, 7, n_palm=14, n_nopalm=20)
        # regenerate the same scenes the generator used and recheck distances
        scene_truths = {}
        for k in range(3):
            try:
                _, truth = generate_scene(self.cfg, [7, k])
            except ValueError:
                break
            scene_truths[f"synth-{k:03d}"] = {(p.x, p.y) for p in truth.centers}
        for item in d.items:
            truth_set = scene_truths[item.source_scene]
            if item.label == PALM:
                assert (item.center.x, item.center.y) in truth_set
            else:
                dists = [np.hypot(item.center.x - x, item.center.y - y) for x, y in truth_set]
                assert min(dists) >= 20.0  # half the window side

    def test_deterministic(self):
        d1 = generate_crops(self.cfg, 3, 10, 10)
        d2 = generate_crops(self.cfg, 3, 10, 10)
        assert [i.center for i in d1.items] == [i.center for i in d2.items]
        assert all(a.crop.pixels.tobytes() == b.crop.pixels.tobytes()
                   for a, b in zip(d1.items, d2.items))

    def test_unreachable_palm_count_rejected(self):
        with pytest.raises(ValueError):
            generate_crops(SynthConfig(width=200, height=200, count_range=(0, 0), min_spacing=40),
                           0, n_palm=5, n_nopalm=0)


class TestSceneBundle:
    def test_bundle_files_round_trip(self, tmp_path, small_scene):
        scene, truth = small_scene
        write_scene_bundle(scene, truth, tmp_path, "scene_000")
        back = load_raster(tmp_path / "scene_000.png")
        assert (back.width, back.height) == (scene.width, scene.height)
        t = load_truth_csv(tmp_path / "scene_000_truth.csv")
        assert set(t.centers) == set(truth.centers)
