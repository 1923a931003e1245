"""Gradient verification by central finite differences.

Every check runs in float64 with step 1e-3 and reports the maximum
relative error, which must stay below 1e-3.  The scalar loss for a
layer-level check is sum(forward(x) * R) with a fixed random projection R,
so that backward(R) is the analytic input gradient.

Central differences are only meaningful when the loss is smooth across
the +-step interval, so instances are screened: any configuration that
puts a ReLU pre-activation or a pooling near-tie within the kink danger
zone is rejected and the next seeded instance is drawn.
"""

from __future__ import annotations

import numpy as np

from .layers import Conv2d, Dense, MaxPool2d, ReLU
from .model import ModelConfig, build_model, loss_and_grads

STEP = 1e-3
TOLERANCE = 1e-3
# a 1e-3 parameter step moves activations by well under this; instances
# whose kinks sit farther away than the margin give smooth differences
KINK_MARGIN = 2e-3


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-3)
    return float((num / den).max())


def _numeric_grad(f, arr: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + STEP
        f_plus = f()
        flat[i] = orig - STEP
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2 * STEP)
    return grad


def _check_layer(layer, x: np.ndarray, rng: np.random.Generator) -> float:
    y, cache = layer.forward_train(x)
    proj = rng.standard_normal(y.shape)
    dx, param_grads = layer.backward(proj, cache)

    worst = relative_error(dx, _numeric_grad(lambda: float((layer.forward(x) * proj).sum()), x))
    for p, g in zip(layer.params(), param_grads):
        numeric = _numeric_grad(lambda: float((layer.forward(x) * proj).sum()), p)
        worst = max(worst, relative_error(g, numeric))
    return worst


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard-normal draw with every entry pushed outside the kink zone."""
    x = rng.standard_normal(shape)
    return x + np.sign(x) * KINK_MARGIN


def _pool_gaps_ok(x: np.ndarray, size: int) -> bool:
    """No pool block may have its two largest positive entries nearly tied.

    Blocks whose maximum is <= 0 only hold dead ReLU outputs; a winner
    switch there carries no gradient, so they are not screened.
    """
    n, c, h, w = x.shape
    blocks = x.reshape(n, c, h // size, size, w // size, size)
    flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // size, w // size, -1)
    top2 = np.sort(flat, axis=-1)[..., -2:]
    gaps = top2[..., 1] - top2[..., 0]
    live = top2[..., 1] > 0
    return not live.any() or float(gaps[live].min()) > KINK_MARGIN


def _relu_margins_ok(model, x: np.ndarray) -> bool:
    """True when no ReLU input or pooling near-tie sits inside the kink zone."""
    z = x - 0.5
    for layer in model.layers:
        if isinstance(layer, ReLU) and float(np.abs(z).min()) <= KINK_MARGIN:
            return False
        if isinstance(layer, MaxPool2d) and not _pool_gaps_ok(z, layer.size):
            return False
        z = layer.forward(z)
    return True


def check_all(seed: int = 0) -> dict:
    """Max relative finite-difference error for every layer type plus the
    full model loss; keys are check names."""
    rng = np.random.default_rng(seed)
    results = {}

    w = rng.standard_normal((3, 2, 3, 3))
    layer = Conv2d(w, rng.standard_normal(3))
    results["conv2d"] = _check_layer(layer, rng.standard_normal((2, 2, 6, 6)), rng)

    x_pool = rng.standard_normal((2, 3, 6, 6))
    while not _pool_gaps_ok(x_pool, 2):
        x_pool = rng.standard_normal((2, 3, 6, 6))
    results["maxpool"] = _check_layer(MaxPool2d(2), x_pool, rng)

    dense = Dense(rng.standard_normal((4, 7)), rng.standard_normal(4))
    results["dense"] = _check_layer(dense, rng.standard_normal((3, 7)), rng)

    results["relu"] = _check_layer(ReLU(), _away_from_zero(rng, (4, 9)), rng)

    results["softmax_xent"] = _check_model(seed)
    return results


def _check_model(seed: int) -> float:
    """Finite differences through the full loss of a small float64 model.

    Draws seeded instances until one keeps all kinks outside the step
    interval, then checks every parameter.
    """
    config = ModelConfig(
        input_side=8,
        input_channels=1,
        layers=(("conv", 2, 3), ("relu",), ("pool", 2), ("dense", 6), ("relu",), ("dense", 2)),
    )
    for attempt in range(256):
        rng = np.random.default_rng([seed, attempt])
        model = build_model(config, seed=int(rng.integers(2 ** 31)), dtype=np.float64)
        x = rng.uniform(0.0, 1.0, size=(2, 1, 8, 8))
        y = rng.integers(0, 2, size=2)
        if _relu_margins_ok(model, x):
            break
    else:
        raise RuntimeError("no kink-free gradient-check instance found in 256 draws")

    _, grads = loss_and_grads(model, x, y)
    worst = 0.0
    for p, g in zip(model.params(), grads):
        numeric = _numeric_grad(lambda: loss_and_grads(model, x, y)[0], p)
        worst = max(worst, relative_error(g, numeric))
    return worst
