"""Minimal dense feedforward network with exact reverse-mode gradients.

All numeric state is float64 numpy data: weight matrices are C-order
``(out, in)`` arrays, everything else (inputs, biases, activations,
flattened parameters) is 1-D. The parameters of a whole model can be
extracted into one flat vector and injected back bit-exactly; the
parameter-bank machinery is built on that round trip.

Canonical flat order: layers in network order, each layer contributing
its weight matrix in row-major order followed by its bias vector. This
order is load-bearing -- gradients, optimizer buffers, and the on-disk
bank format all use it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConsistencyError, NumericError, ShapeError


class Activation(enum.Enum):
    LINEAR = "linear"
    RELU = "relu"
    TANH = "tanh"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.LINEAR:
            return z
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        # ReLU slope at exactly 0 is taken as 0.
        if self is Activation.LINEAR:
            return np.ones_like(z)
        if self is Activation.RELU:
            return (z > 0.0).astype(np.float64)
        t = np.tanh(z)
        return 1.0 - t * t


class LossKind(enum.Enum):
    MSE = "mse"


def as_vector(values, width: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {v.shape}")
    if width is not None and v.shape[0] != width:
        raise ShapeError(f"{name} has length {v.shape[0]}, expected {width}")
    return v


def check_finite(values: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericError(f"{name}[{bad}] is not finite: {values[bad]!r}")


@dataclass
class DenseLayer:
    """One fully connected layer: y = activation(W @ x + b)."""

    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation

    def __post_init__(self) -> None:
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match weights "
                f"shape {self.weights.shape}"
            )

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]


class MLPModel:
    """Ordered dense-layer stack holding exactly one live parameter set."""

    def __init__(self, layers: Sequence[DenseLayer]):
        layers = list(layers)
        if not layers:
            raise ShapeError("a model needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_width != layers[k - 1].out_width:
                raise ShapeError(
                    f"layer {k} input width {layers[k].in_width} does not chain "
                    f"with layer {k - 1} output width {layers[k - 1].out_width}"
                )
        self.layers = layers

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_width

    @property
    def parameter_count(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def layout(self) -> "ModelLayout":
        return ModelLayout(tuple((l.out_width, l.in_width) for l in self.layers))


class LayerSpec(NamedTuple):
    in_width: int
    out_width: int
    activation: Activation


def build_model(specs: Sequence[LayerSpec]) -> MLPModel:
    """Assemble a model with all-zero parameters; callers inject real ones."""
    return MLPModel(
        [
            DenseLayer(
                np.zeros((s.out_width, s.in_width)), np.zeros(s.out_width), s.activation
            )
            for s in specs
        ]
    )


@dataclass(frozen=True)
class ModelLayout:
    """Per-layer (out, in) shapes; fixes the canonical flat parameter order."""

    shapes: tuple[tuple[int, int], ...]

    @property
    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.shapes)

    def slices(self) -> Iterator[tuple[tuple[int, int], slice, slice]]:
        """Yield ((out, in), weight_slice, bias_slice) per layer, in flat order."""
        pos = 0
        for o, i in self.shapes:
            w = slice(pos, pos + o * i)
            pos += o * i
            b = slice(pos, pos + o)
            pos += o
            yield (o, i), w, b


@dataclass(eq=False)
class FlatParams:
    """One model's parameters as a single flat vector in canonical order."""

    values: np.ndarray
    layout: ModelLayout

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeError(f"flat parameters must be 1-D, got shape {self.values.shape}")
        if self.values.shape[0] != self.layout.param_count:
            raise ShapeError(
                f"flat parameter length {self.values.shape[0]} does not match "
                f"layout size {self.layout.param_count}"
            )

    def copy(self) -> "FlatParams":
        return FlatParams(self.values.copy(), self.layout)


def extract_params(model: MLPModel) -> FlatParams:
    """Copy the model's parameters out as a FlatParams value."""
    parts: list[np.ndarray] = []
    for layer in model.layers:
        parts.append(layer.weights.ravel())
        parts.append(layer.bias)
    return FlatParams(np.concatenate(parts), model.layout())


def inject_params(model: MLPModel, params: FlatParams) -> None:
    """Overwrite the model's parameters with `params`, bit-exactly."""
    if params.layout != model.layout():
        raise ShapeError(
            f"parameter layout {params.layout.shapes} does not match "
            f"model layout {model.layout().shapes}"
        )
    vals = params.values
    for layer, ((o, i), ws, bs) in zip(model.layers, params.layout.slices()):
        np.copyto(layer.weights, vals[ws].reshape(o, i))
        np.copyto(layer.bias, vals[bs])


def random_params(layout: ModelLayout, seed) -> FlatParams:
    """Fresh parameters, uniform in [-s, s] with s = 1/sqrt(fan_in) per layer.

    Draws come from numpy's seeded PCG64 stream in a fixed order (per layer:
    weight matrix row-major, then bias), so equal seeds give bit-equal
    parameters. `seed` may be an int or a tuple of ints.
    """
    rng = np.random.default_rng(seed)
    vals = np.empty(layout.param_count)
    for (o, i), ws, bs in layout.slices():
        s = 1.0 / math.sqrt(i)
        vals[ws] = rng.uniform(-s, s, o * i)
        vals[bs] = rng.uniform(-s, s, o)
    return FlatParams(vals, layout)


@dataclass(eq=False)
class ForwardTrace:
    """Everything backward() needs: the input and per-layer pre/post activations."""

    model: MLPModel
    x: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def y_hat(self) -> np.ndarray:
        return self.post[-1]


def forward(model: MLPModel, x) -> ForwardTrace:
    """Run the network on one input vector. Pure: the model is not touched."""
    a = as_vector(x, model.input_width, "x")
    check_finite(a, "x")
    x0 = a
    pre: list[np.ndarray] = []
    post: list[np.ndarray] = []
    for layer in model.layers:
        z = layer.weights @ a + layer.bias
        a = layer.activation.apply(z)
        pre.append(z)
        post.append(a)
    return ForwardTrace(model, x0, pre, post)


def loss(kind: LossKind, y, y_hat) -> float:
    y = as_vector(y, name="y")
    y_hat = as_vector(y_hat, name="y_hat")
    if y.shape != y_hat.shape:
        raise ShapeError(f"y has length {y.shape[0]} but y_hat has length {y_hat.shape[0]}")
    check_finite(y, "y")
    check_finite(y_hat, "y_hat")
    if kind is LossKind.MSE:
        r = y_hat - y
        return float(np.mean(r * r))
    raise ValueError(f"unknown loss kind: {kind!r}")


def _loss_gradient(kind: LossKind, y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    if kind is LossKind.MSE:
        return (2.0 / y.shape[0]) * (y_hat - y)
    raise ValueError(f"unknown loss kind: {kind!r}")


def backward(model: MLPModel, trace: ForwardTrace, y, kind: LossKind = LossKind.MSE) -> FlatParams:
    """Exact dLoss/dtheta for every parameter, in canonical flat order.

    The trace must come from forward() on this very model with its current
    parameters; a trace from another model object is rejected. Pure: neither
    the model nor the trace is modified.
    """
    if trace.model is not model:
        raise ConsistencyError("trace was not produced by this model")
    y = as_vector(y, model.output_width, "y")
    check_finite(y, "y")
    d_act = _loss_gradient(kind, y, trace.post[-1])
    n = len(model.layers)
    w_grads: list[np.ndarray] = [np.empty(0)] * n
    b_grads: list[np.ndarray] = [np.empty(0)] * n
    for j in range(n - 1, -1, -1):
        layer = model.layers[j]
        delta = d_act * layer.activation.derivative(trace.pre[j])
        a_prev = trace.post[j - 1] if j > 0 else trace.x
        w_grads[j] = np.outer(delta, a_prev)
        b_grads[j] = delta
        if j > 0:
            d_act = layer.weights.T @ delta
    parts: list[np.ndarray] = []
    for wg, bg in zip(w_grads, b_grads):
        parts.append(wg.ravel())
        parts.append(bg)
    return FlatParams(np.concatenate(parts), model.layout())
