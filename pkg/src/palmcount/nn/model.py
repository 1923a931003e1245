"""Classifier model: configuration, construction, inference and file I/O."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import Conv2d, Dense, Flatten, MaxPool2d, ReLU, softmax

MODEL_FORMAT_VERSION = 1
_MAGIC = b"PCM1"

# LeNet-style stack sized for 40x40 crops: 40 -> 36 -> 18 -> 14 -> 7 -> 784
DEFAULT_LAYERS = (
    ("conv", 6, 5),
    ("relu",),
    ("pool", 2),
    ("conv", 16, 5),
    ("relu",),
    ("pool", 2),
    ("dense", 120),
    ("relu",),
    ("dense", 84),
    ("relu",),
    ("dense", 2),
)


class ModelFileError(ValueError):
    """Raised when a model file is missing, corrupt or incompatible."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; layer specs are ("conv", filters, kernel),
    ("pool", size), ("dense", units) or ("relu",).  A softmax over
    ``class_count`` classes is always applied after the last layer."""

    input_side: int = 40
    input_channels: int = 1
    layers: tuple = DEFAULT_LAYERS
    class_count: int = 2

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(l) for l in self.layers))
        if self.input_side < 1:
            raise ValueError(f"input side must be >= 1, got {self.input_side}")
        if self.input_channels not in (1, 3):
            raise ValueError(f"input channels must be 1 or 3, got {self.input_channels}")
        if self.class_count != 2:
            raise ValueError("the classifier is binary; class_count must be 2")
        self.chain_shapes()  # validates the layer chain

    def chain_shapes(self) -> list:
        """Shape after each layer, starting from the input; raises if the
        chain is inconsistent or does not end in ``class_count`` units."""
        shape = (self.input_channels, self.input_side, self.input_side)
        shapes = [shape]
        for spec in self.layers:
            kind = spec[0]
            if kind == "conv":
                _, filters, kernel = spec
                if len(shape) != 3:
                    raise ValueError("conv layer after flattening is not supported")
                c, h, w = shape
                if h < kernel or w < kernel:
                    raise ValueError(f"conv kernel {kernel} exceeds input {h}x{w}")
                shape = (filters, h - kernel + 1, w - kernel + 1)
            elif kind == "pool":
                (_, size) = spec
                if len(shape) != 3:
                    raise ValueError("pool layer after flattening is not supported")
                c, h, w = shape
                if h % size or w % size:
                    raise ValueError(f"pool size {size} does not divide {h}x{w}")
                shape = (c, h // size, w // size)
            elif kind == "dense":
                (_, units) = spec
                shape = (int(np.prod(shape)),) if len(shape) == 3 else shape
                shape = (units,)
            elif kind == "relu":
                pass
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
            shapes.append(shape)
        final = shapes[-1]
        if int(np.prod(final)) != self.class_count:
            raise ValueError(
                f"layer chain ends with {final}, expected {self.class_count} logits")
        return shapes


@dataclass
class Model:
    """A built classifier: the config plus live layer objects."""

    config: ModelConfig
    layers: list = field(repr=False)

    def params(self) -> list:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out


def build_model(config: ModelConfig, seed: int, dtype=np.float32) -> Model:
    """Construct a model with seeded Glorot-uniform weights and zero biases.

    The same (config, seed) always yields bitwise-identical parameters.
    """
    rng = np.random.default_rng(seed)
    layers = []
    shape = (config.input_channels, config.input_side, config.input_side)
    for spec in config.layers:
        kind = spec[0]
        if kind == "conv":
            _, filters, kernel = spec
            c = shape[0]
            fan_in, fan_out = c * kernel * kernel, filters * kernel * kernel
            a = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-a, a, size=(filters, c, kernel, kernel)).astype(dtype)
            layers.append(Conv2d(w, np.zeros(filters, dtype=dtype)))
            shape = (filters, shape[1] - kernel + 1, shape[2] - kernel + 1)
        elif kind == "pool":
            layers.append(MaxPool2d(spec[1]))
            shape = (shape[0], shape[1] // spec[1], shape[2] // spec[1])
        elif kind == "dense":
            if len(shape) == 3:
                layers.append(Flatten())
                shape = (int(np.prod(shape)),)
            units = spec[1]
            a = np.sqrt(6.0 / (shape[0] + units))
            w = rng.uniform(-a, a, size=(units, shape[0])).astype(dtype)
            layers.append(Dense(w, np.zeros(units, dtype=dtype)))
            shape = (units,)
        elif kind == "relu":
            layers.append(ReLU())
    if len(shape) == 3:
        layers.append(Flatten())
    return Model(config, layers)


def _check_batch(m: Model, batch: np.ndarray) -> np.ndarray:
    expected = (m.config.input_channels, m.config.input_side, m.config.input_side)
    if batch.ndim != 4 or batch.shape[1:] != expected:
        raise ValueError(f"batch shape {batch.shape} does not match (n, {expected[0]}, "
                         f"{expected[1]}, {expected[2]})")
    if batch.shape[0] == 0:
        raise ValueError("batch is empty")
    if not np.all(np.isfinite(batch)):
        raise ValueError("batch contains non-finite values")
    return batch


def forward(m: Model, batch: np.ndarray) -> np.ndarray:
    """Class probabilities, shape (n, 2); each row sums to 1 within 1e-6."""
    x = _check_batch(m, batch)
    x = x - np.asarray(0.5, dtype=x.dtype)  # zero-center pixel inputs
    for layer in m.layers:
        x = layer.forward(x)
    return softmax(x)


def loss_and_grads(m: Model, batch: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch plus gradients per parameter.

    ``labels`` holds one class index in {0, 1} per batch row.  Returned
    gradients align with ``m.params()``.
    """
    x = _check_batch(m, batch)
    labels = np.asarray(labels)
    if labels.shape != (batch.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match batch size {batch.shape[0]}")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be class indices in {0, 1}")

    x = x - np.asarray(0.5, dtype=x.dtype)
    caches = []
    for layer in m.layers:
        x, cache = layer.forward_train(x)
        caches.append(cache)
    logits = x.astype(np.float64)
    logits -= logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits).sum(axis=1))
    n = batch.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(log_z - logits[rows, labels]))

    probs = np.exp(logits - log_z[:, None])
    dlogits = probs
    dlogits[rows, labels] -= 1.0
    dy = (dlogits / n).astype(batch.dtype)

    grads = []
    for layer, cache in zip(reversed(m.layers), reversed(caches)):
        dy, layer_grads = layer.backward(dy, cache)
        grads = layer_grads + grads
    return loss, grads


def save_model(m: Model, path) -> None:
    """Write the model: JSON header + little-endian float32 weights blob."""
    blob = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in m.params())
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": {
            "input_side": m.config.input_side,
            "input_channels": m.config.input_channels,
            "layers": [list(l) for l in m.config.layers],
            "class_count": m.config.class_count,
        },
        "param_shapes": [list(p.shape) for p in m.params()],
        "weights_bytes": len(blob),
        "checksum_crc32": zlib.crc32(blob),
    }
    head = json.dumps(header).encode()
    payload = _MAGIC + len(head).to_bytes(4, "little") + head + blob
    Path(path).write_bytes(payload)


def load_model(path) -> Model:
    """Read a model written by :func:`save_model`; parameters round-trip bitwise."""
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != _MAGIC:
        raise ModelFileError(f"{path}: not a palmcount model file")
    head_len = int.from_bytes(data[4:8], "little")
    if len(data) < 8 + head_len:
        raise ModelFileError(f"{path}: corrupt model file (truncated header)")
    try:
        header = json.loads(data[8:8 + head_len])
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: corrupt model file (bad header): {exc}") from exc
    if header.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"{path}: model format version {header.get('format_version')} is not supported "
            f"(expected {MODEL_FORMAT_VERSION})")
    blob = data[8 + head_len:]
    if len(blob) != header["weights_bytes"]:
        raise ModelFileError(
            f"{path}: corrupt model file ({len(blob)} weight bytes, expected {header['weights_bytes']})")
    if zlib.crc32(blob) != header["checksum_crc32"]:
        raise ModelFileError(f"{path}: model file checksum mismatch")
    cfg = header["config"]
    config = ModelConfig(
        input_side=cfg["input_side"],
        input_channels=cfg["input_channels"],
        layers=tuple(tuple(l) for l in cfg["layers"]),
        class_count=cfg["class_count"],
    )
    m = build_model(config, seed=0)
    params = m.params()
    shapes = [tuple(s) for s in header["param_shapes"]]
    if shapes != [p.shape for p in params]:
        raise ModelFileError(f"{path}: parameter shapes do not match the declared config")
    offset = 0
    for p in params:
        n = int(np.prod(p.shape))
        vals = np.frombuffer(blob, dtype="<f4", count=n, offset=offset).reshape(p.shape)
        p[...] = vals
        offset += n * 4
    return m
