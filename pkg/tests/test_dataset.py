import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from palmcount.dataset import (
    Dataset,
    NO_PALM,
    PALM,
    SplitSpec,
    add_crop,
    as_arrays,
    load_dataset,
    sample_negatives,
    save_dataset,
    split,
)
from palmcount.evaluation import GroundTruth
from palmcount.raster import PixelPoint, Raster


@pytest.fixture
def scene(rng):
    return Raster(rng.uniform(0, 1, (200, 300, 1)).astype(np.float32))


def filled_dataset(scene, n_palm, n_nopalm):
    d = Dataset(side=40, channels=1)
    rng = np.random.default_rng(0)
    for i in range(n_palm + n_nopalm):
        cx = int(rng.integers(20, scene.width - 20 + 1))
        cy = int(rng.integers(20, scene.height - 20 + 1))
        add_crop(d, scene, PixelPoint(cx, cy), PALM if i < n_palm else NO_PALM, scene_id="s")
    return d


class TestAddCrop:
    def test_boundary_touching_center_ok(self, scene):
        d = Dataset(side=40, channels=1)
        item = add_crop(d, scene, PixelPoint(20, 20), PALM)
        assert item.crop.width == 40
        np.testing.assert_array_equal(item.crop.pixels, scene.pixels[0:40, 0:40])

    def test_one_pixel_too_close_rejected(self, scene):
        d = Dataset(side=40, channels=1)
        with pytest.raises(ValueError, match="leaves"):
            add_crop(d, scene, PixelPoint(19, 20), PALM)

    def test_crop_pixels_equal_scene_subregion(self, scene):
        d = Dataset(side=40, channels=1)
        item = add_crop(d, scene, PixelPoint(77, 93), NO_PALM)
        # naive copy oracle: top-left = center - side/2
        for j in range(0, 40, 5):
            for i in range(0, 40, 5):
                assert item.crop.pixels[j, i, 0] == scene.pixels[73 + j, 57 + i, 0]

    def test_ids_unique_and_labels_recorded(self, scene):
        d = filled_dataset(scene, 3, 2)
        ids = [item.id for item in d.items]
        assert len(set(ids)) == 5
        assert d.class_counts() == {PALM: 3, NO_PALM: 2}

    def test_bad_label_rejected(self, scene):
        d = Dataset(side=40, channels=1)
        with pytest.raises(ValueError, match="label"):
            add_crop(d, scene, PixelPoint(50, 50), "tree")


class TestSampleNegatives:
    def test_empty_truth_allows_any_window(self, scene):
        d = Dataset(side=40, channels=1)
        items = sample_negatives(d, scene, GroundTruth(()), count=7, min_dist=20, seed=1)
        assert len(items) == 7
        assert all(item.label == NO_PALM for item in items)

    def test_distance_constraint_holds(self, scene):
        truth = GroundTruth(tuple(PixelPoint(x, y) for x, y in [(60, 60), (150, 100), (250, 170)]))
        d = Dataset(side=40, channels=1)
        items = sample_negatives(d, scene, truth, count=25, min_dist=30, seed=5)
        for item in items:
            for t in truth.centers:
                assert np.hypot(item.center.x - t.x, item.center.y - t.y) >= 30

    def test_deterministic(self, scene):
        d1, d2 = Dataset(side=40, channels=1), Dataset(side=40, channels=1)
        truth = GroundTruth((PixelPoint(100, 100),))
        a = sample_negatives(d1, scene, truth, 10, 25, seed=3)
        b = sample_negatives(d2, scene, truth, 10, 25, seed=3)
        assert [i.center for i in a] == [i.center for i in b]

    def test_infeasible_region_errors(self, rng):
        tiny = Raster(rng.uniform(0, 1, (40, 40, 1)).astype(np.float32))
        truth = GroundTruth((PixelPoint(20, 20),))  # the only valid center
        d = Dataset(side=40, channels=1)
        with pytest.raises(ValueError, match="negatives"):
            sample_negatives(d, tiny, truth, count=1, min_dist=10, seed=0)


class TestSplit:
    def test_paper_sized_stratification(self, scene):
        # round(0.2 * 300) = 60 palm, round(0.2 * 500) = 100 no-palm validation items
        d = filled_dataset(scene, 300, 500)
        train_ds, val_ds = split(d, SplitSpec(0.2, seed=1))
        assert val_ds.class_counts() == {PALM: 60, NO_PALM: 100}
        assert train_ds.class_counts() == {PALM: 240, NO_PALM: 400}

    def test_half_split_small(self, scene):
        d = filled_dataset(scene, 4, 4)
        train_ds, val_ds = split(d, SplitSpec(0.5, seed=2))
        assert val_ds.class_counts() == {PALM: 2, NO_PALM: 2}

    def test_same_seed_same_partition(self, scene):
        d = filled_dataset(scene, 10, 10)
        a_train, a_val = split(d, SplitSpec(0.3, seed=9))
        b_train, b_val = split(d, SplitSpec(0.3, seed=9))
        assert [i.id for i in a_val.items] == [i.id for i in b_val.items]

    def test_too_small_class_rejected(self, scene):
        d = filled_dataset(scene, 1, 5)
        with pytest.raises(ValueError, match="at least 2"):
            split(d, SplitSpec(0.2, seed=0))

    @given(n_palm=st.integers(2, 40), n_nopalm=st.integers(2, 40),
           fraction=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_split_is_exact_partition(self, n_palm, n_nopalm, fraction, seed):
        rng = np.random.default_rng(0)
        scene = Raster(rng.uniform(0, 1, (120, 120, 1)).astype(np.float32))
        d = filled_dataset(scene, n_palm, n_nopalm)
        train_ds, val_ds = split(d, SplitSpec(fraction, seed))
        train_ids = {i.id for i in train_ds.items}
        val_ids = {i.id for i in val_ds.items}
        assert not (train_ids & val_ids)
        assert len(train_ids) + len(val_ids) == len(d.items)
        for label, total in ((PALM, n_palm), (NO_PALM, n_nopalm)):
            n_val = val_ds.class_counts()[label]
            assert abs(n_val - fraction * total) <= 0.5 + 1e-9


class TestPersistence:
    def test_empty_round_trip(self, tmp_path):
        save_dataset(Dataset(side=40, channels=1), tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        assert back.side == 40 and back.items == []

    def test_round_trip_preserves_order_and_metadata(self, tmp_path, scene):
        d = filled_dataset(scene, 2, 1)
        save_dataset(d, tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        assert [(i.id, i.label, i.center) for i in back.items] == \
               [(i.id, i.label, i.center) for i in d.items]
        for a, b in zip(d.items, back.items):
            assert np.abs(a.crop.pixels - b.crop.pixels).max() <= 1 / 255 + 1e-7

    def test_double_round_trip_is_stable(self, tmp_path, scene):
        d = filled_dataset(scene, 2, 2)
        save_dataset(d, tmp_path / "d1")
        once = load_dataset(tmp_path / "d1")
        save_dataset(once, tmp_path / "d2")
        twice = load_dataset(tmp_path / "d2")
        for a, b in zip(once.items, twice.items):
            assert a.crop.pixels.tobytes() == b.crop.pixels.tobytes()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ValueError, match="manifest"):
            load_dataset(tmp_path)

    def test_missing_crop_file_names_id(self, tmp_path, scene):
        d = filled_dataset(scene, 2, 1)
        save_dataset(d, tmp_path / "d")
        victim = d.items[1].id
        (tmp_path / "d" / f"{victim}.png").unlink()
        with pytest.raises(ValueError, match=victim):
            load_dataset(tmp_path / "d")

    def test_size_mismatch_rejected(self, tmp_path, scene, rng):
        d = filled_dataset(scene, 2, 1)
        save_dataset(d, tmp_path / "d")
        from palmcount.raster import save_raster
        wrong = Raster(rng.uniform(0, 1, (8, 8, 1)).astype(np.float32))
        save_raster(wrong, tmp_path / "d" / f"{d.items[0].id}.png")
        with pytest.raises(ValueError, match="declares"):
            load_dataset(tmp_path / "d")


def test_as_arrays_layout(scene):
    d = filled_dataset(scene, 2, 3)
    x, y = as_arrays(d)
    assert x.shape == (5, 1, 40, 40)
    assert x.dtype == np.float32
    assert list(y) == [1, 1, 0, 0, 0]
