import json

import numpy as np
import pytest

from palmcount.nn import ModelConfig, ModelFileError, build_model, load_model, save_model


@pytest.fixture
def model():
    return build_model(ModelConfig(input_channels=1), seed=11)


def test_round_trip_bitwise(model, tmp_path):
    path = tmp_path / "m.pcm"
    save_model(model, path)
    back = load_model(path)
    assert back.config == model.config
    for a, b in zip(model.params(), back.params()):
        assert a.tobytes() == b.tobytes()


def test_round_trip_small_custom_config(tmp_path):
    cfg = ModelConfig(input_side=12, input_channels=3,
                      layers=(("conv", 4, 3), ("relu",), ("pool", 2), ("dense", 2)))
    m = build_model(cfg, seed=5)
    save_model(m, tmp_path / "m.pcm")
    back = load_model(tmp_path / "m.pcm")
    assert back.config == cfg
    for a, b in zip(m.params(), back.params()):
        np.testing.assert_array_equal(a, b)


def test_truncated_file_rejected(model, tmp_path):
    path = tmp_path / "m.pcm"
    save_model(model, path)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) - 64])
    with pytest.raises(ModelFileError, match="corrupt"):
        load_model(path)


def test_version_mismatch_rejected(model, tmp_path):
    path = tmp_path / "m.pcm"
    save_model(model, path)
    data = path.read_bytes()
    head_len = int.from_bytes(data[4:8], "little")
    header = json.loads(data[8:8 + head_len])
    header["format_version"] = 99
    new_head = json.dumps(header).encode()
    path.write_bytes(data[:4] + len(new_head).to_bytes(4, "little") + new_head + data[8 + head_len:])
    with pytest.raises(ModelFileError, match="version"):
        load_model(path)


def test_checksum_failure_rejected(model, tmp_path):
    path = tmp_path / "m.pcm"
    save_model(model, path)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF  # flip one weight byte
    path.write_bytes(bytes(data))
    with pytest.raises(ModelFileError, match="checksum"):
        load_model(path)


def test_not_a_model_file(tmp_path):
    path = tmp_path / "m.pcm"
    path.write_bytes(b"garbage")
    with pytest.raises(ModelFileError):
        load_model(path)
