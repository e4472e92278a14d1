"""From-scratch fully connected network on plain numpy arrays.

Forward pass, L2 loss, exact backpropagation, bias-corrected Adam, a
finite-difference gradient checker, and a versioned JSON weight format with
bit-exact round-trip. Everything runs in float64; inputs may be single
vectors or (batch, dim) matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WEIGHTS_FORMAT_VERSION = 1

#: Layer widths of the default receiver sub-network: 256 input values,
#: three hidden layers, 16 outputs (one per predicted bit).
DEFAULT_LAYER_DIMS = (256, 500, 250, 120, 16)


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str  # one of "relu", "sigmoid", "none"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")
        if self.activation not in ("relu", "sigmoid", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)
    activation: str


@dataclass
class MlpParams:
    layers: list[Layer]

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.layers[0].weight.shape[1],) + tuple(
            l.weight.shape[0] for l in self.layers
        )

    @property
    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    n_steps: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.batch_size < 1 or self.n_steps < 0:
            raise ValueError("batch_size must be >= 1 and n_steps >= 0")


@dataclass
class AdamState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    t: int = 0
    # Scratch buffers shaped like the parameters, reused every step so the
    # update makes no heap allocations.
    scratch: list[tuple[np.ndarray, np.ndarray]] | None = None

    @classmethod
    def for_params(cls, params: MlpParams) -> "AdamState":
        zeros = lambda l: (np.zeros_like(l.weight), np.zeros_like(l.bias))
        return cls(m=[zeros(l) for l in params.layers],
                   v=[zeros(l) for l in params.layers],
                   scratch=[zeros(l) for l in params.layers])


def default_layer_specs(dims=DEFAULT_LAYER_DIMS) -> list[LayerSpec]:
    """Relu hidden layers with a sigmoid output layer."""
    specs = []
    for i in range(len(dims) - 1):
        act = "sigmoid" if i == len(dims) - 2 else "relu"
        specs.append(LayerSpec(dims[i], dims[i + 1], act))
    return specs


def init_params(specs: list[LayerSpec], rng: np.random.Generator,
                dtype=np.float64) -> MlpParams:
    """Glorot-uniform weights on +-sqrt(6/(in+out)); zero biases."""
    layers = []
    for spec in specs:
        limit = math.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        w = rng.uniform(-limit, limit, size=(spec.out_dim, spec.in_dim))
        layers.append(Layer(weight=w.astype(dtype), bias=np.zeros(spec.out_dim, dtype),
                            activation=spec.activation))
    return MlpParams(layers=layers)


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # Split by sign for overflow-free evaluation on large |z|.
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "none":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _fold_activation_grad(grad_a: np.ndarray, z: np.ndarray, a: np.ndarray,
                          name: str) -> None:
    """Multiply ``grad_a`` in place by the activation derivative at ``z``."""
    if name == "relu":
        # Subgradient at exactly 0 is defined as 0.
        grad_a *= z > 0
    elif name == "sigmoid":
        grad_a *= a
        grad_a *= 1.0 - a
    elif name != "none":
        raise ValueError(f"unknown activation {name!r}")


def forward(params: MlpParams, x) -> tuple[np.ndarray, list]:
    """Run the cascade of affine maps and nonlinearities.

    Accepts a single input vector or a (batch, in_dim) matrix and returns
    (output, cache); the cache holds each layer's input and pre-activation
    for :func:`backward`. The computation runs in the parameters' dtype.
    """
    dtype = params.layers[0].weight.dtype
    x = np.asarray(x, dtype=dtype)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != params.layers[0].weight.shape[1]:
        raise ValueError(
            f"input dim {a.shape[1]} does not match first layer "
            f"{params.layers[0].weight.shape[1]}"
        )
    cache = [single]
    for layer in params.layers:
        z = a @ layer.weight.T
        z += layer.bias
        a_next = _activate(z, layer.activation)
        cache.append((a, z, a_next))
        a = a_next
    return (a[0] if single else a), cache


def loss_l2(pred, target) -> float:
    """Mean squared difference, averaged over every output (and the batch)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def backward(params: MlpParams, cache: list, target) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradient of the mean L2 loss w.r.t. every weight and bias.

    ``cache`` must come from a matching :func:`forward` call. Returns one
    (d_weight, d_bias) pair per layer.
    """
    single = cache[0]
    target = np.asarray(target, dtype=np.float64)
    if single:
        target = target[None, :]
    out = cache[-1][2]
    if target.shape != out.shape:
        raise ValueError(f"target shape {target.shape} does not match output {out.shape}")

    # d loss / d output for loss = mean over batch and outputs of (out-t)^2.
    dtype = out.dtype
    grad_a = (out - target.astype(dtype)) * dtype.type(2.0 / target.size)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        a_in, z, a_out = cache[i + 1]
        layer = params.layers[i]
        # grad_a is freshly allocated at every layer, so the activation
        # gradient can be folded in without touching cached arrays.
        _fold_activation_grad(grad_a, z, a_out, layer.activation)
        grads[i] = (grad_a.T @ a_in, grad_a.sum(axis=0))
        if i > 0:
            grad_a = grad_a @ layer.weight
    return grads


def adam_step(
    params: MlpParams,
    grads: list[tuple[np.ndarray, np.ndarray]],
    state: AdamState,
    cfg: TrainConfig,
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Parameters and state are updated in
    place and returned."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    correct1 = 1.0 - b1 ** state.t
    correct2 = 1.0 - b2 ** state.t
    if state.scratch is None:
        state.scratch = [
            (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers
        ]
    for layer, gpair, mpair, vpair, tpair in zip(
        params.layers, grads, state.m, state.v, state.scratch
    ):
        for param, g, m, v, tmp in zip(
            (layer.weight, layer.bias), gpair, mpair, vpair, tpair
        ):
            # m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g^2, all via the
            # scratch buffer so no step allocates.
            m *= b1
            np.multiply(g, 1.0 - b1, out=tmp)
            m += tmp
            v *= b2
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - b2
            v += tmp
            # param -= lr * (m/correct1) / (sqrt(v/correct2) + eps)
            np.divide(v, correct2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += cfg.epsilon
            np.divide(m, tmp, out=tmp)
            tmp *= cfg.learning_rate / correct1
            param -= tmp
    return params, state


def train_batch(
    params: MlpParams,
    x: np.ndarray,
    target: np.ndarray,
    state: AdamState,
    cfg: TrainConfig,
) -> float:
    """Forward, backward, and Adam update on one batch; returns the loss."""
    out, cache = forward(params, x)
    loss = loss_l2(out, np.asarray(target, dtype=np.float64))
    grads = backward(params, cache, target)
    adam_step(params, grads, state, cfg)
    return loss


def gradient_check(
    params: MlpParams,
    x: np.ndarray,
    target: np.ndarray,
    n_coords: int = 200,
    step: float = 1e-5,
    rng: np.random.Generator | None = None,
    layer_index: int | None = None,
) -> float:
    """Compare backprop against central finite differences.

    Samples ``n_coords`` random parameter coordinates (from one layer when
    ``layer_index`` is given, otherwise anywhere) and returns the maximum
    relative error, with a max(|a|, |b|, 1e-12) denominator so zero
    gradients cannot blow up the ratio.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    out, cache = forward(params, x)
    grads = backward(params, cache, target)

    arrays = []
    for i, (layer, (gw, gb)) in enumerate(zip(params.layers, grads)):
        if layer_index is not None and i != layer_index:
            continue
        arrays.append((layer.weight, gw))
        arrays.append((layer.bias, gb))

    sizes = np.array([a.size for a, _ in arrays])
    cum = np.cumsum(sizes)
    worst = 0.0
    for flat_pick in rng.integers(0, cum[-1], size=n_coords):
        ai = int(np.searchsorted(cum, flat_pick, side="right"))
        offset = int(flat_pick - (cum[ai - 1] if ai else 0))
        arr, grad = arrays[ai]
        index = np.unravel_index(offset, arr.shape)
        orig = arr[index]
        arr[index] = orig + step
        loss_plus = loss_l2(forward(params, x)[0], target)
        arr[index] = orig - step
        loss_minus = loss_l2(forward(params, x)[0], target)
        arr[index] = orig
        fd = (loss_plus - loss_minus) / (2.0 * step)
        analytic = grad[index]
        err = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-12)
        worst = max(worst, err)
    return worst


def save_params(params: MlpParams, path, train_config: TrainConfig | None = None,
                seed: int | None = None) -> None:
    """Write weights as versioned JSON (row-major nested lists).

    Floats are serialized through Python's shortest round-trip decimal repr,
    so ``load_params(save_params(p)) `` reproduces every value bit-exactly.
    """
    doc = {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "kind": "mlp-weights",
        "layer_dims": list(params.layer_dims),
        "dtype": params.layers[0].weight.dtype.name,
        "activations": [l.activation for l in params.layers],
        "layers": [
            {"weight": l.weight.tolist(), "bias": l.bias.tolist()}
            for l in params.layers
        ],
        "train_config": None if train_config is None else {
            "learning_rate": train_config.learning_rate,
            "beta1": train_config.beta1,
            "beta2": train_config.beta2,
            "epsilon": train_config.epsilon,
            "batch_size": train_config.batch_size,
            "n_steps": train_config.n_steps,
            "seed": train_config.seed,
        },
        "seed": seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))


def load_params(path) -> MlpParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != WEIGHTS_FORMAT_VERSION or doc.get("kind") != "mlp-weights":
        raise ValueError(f"unrecognized weight file format: {path}")
    dims = doc["layer_dims"]
    dtype = np.dtype(doc.get("dtype", "float64"))
    layers = []
    for i, (entry, act) in enumerate(zip(doc["layers"], doc["activations"])):
        w = np.array(entry["weight"], dtype=dtype)
        b = np.array(entry["bias"], dtype=dtype)
        if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
            raise ValueError("weight file dimensions are inconsistent")
        layers.append(Layer(weight=w, bias=b, activation=act))
    return MlpParams(layers=layers)
