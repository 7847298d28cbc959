"""Experiment configuration: one JSON file describes a full run.

Schema (sections are JSON objects; see README for a complete example):

* ``model.layers``: list of ``{"in": int, "out": int, "activation": "linear|relu|tanh"}``,
  adjacent widths must chain.
* ``routing.breakpoints``: strictly increasing finite numbers. An empty list
  is the degenerate single-branch setup. ``routing.feature`` (default 0)
  picks the input component to route on.
* ``optimizer``: ``kind`` ("sgd" or "adam"), ``learning_rate`` (default 0.01),
  and for adam ``beta1``/``beta2``/``epsilon`` (defaults 0.9 / 0.999 / 1e-8).
* ``training``: ``epochs``, ``init_mode`` ("shared-seed" or
  "independent-seeds"), ``init_seed``, optional ``shuffle_seed`` (null = no
  shuffling).
* ``data``: exactly one of ``path`` (a dataset CSV) or ``piecewise`` (a
  synthetic spec: ``segments``, ``noise_sigma``, ``sample_count``, ``x_min``,
  ``x_max``, ``seed``).
* ``outputs``: optional map of output names (``dataset``, ``bank``,
  ``report``, ``eval``, ``predictions``, ``compare``) to file paths.
* ``compare.scaled_baseline``: optional bool; adds a second monolithic arm
  with hidden widths scaled by sqrt(branch count).

All randomness in a run flows from the seeds in this file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .bank import INIT_INDEPENDENT, INIT_SHARED, OptimizerKind, OptimizerSpec
from .dataio import ConstantSegment, LinearSegment, PiecewiseSpec, Segment, SineSegment
from .errors import ConfigError
from .net import Activation, LayerSpec, MLPModel, build_model
from .router import ConditionArray


@dataclass
class ExperimentConfig:
    layers: tuple[LayerSpec, ...]
    breakpoints: tuple[float, ...]
    routing_feature: int
    optimizer: OptimizerSpec
    init_mode: str
    init_seed: int
    epochs: int
    shuffle_seed: int | None
    dataset_path: str | None
    piecewise: PiecewiseSpec | None
    outputs: dict[str, str] = field(default_factory=dict)
    compare_scaled_baseline: bool = False

    @property
    def branch_count(self) -> int:
        return len(self.breakpoints) + 1

    def conditions(self) -> ConditionArray:
        return ConditionArray(self.breakpoints, self.routing_feature)

    def model(self) -> MLPModel:
        return build_model(self.layers)


def _expect(mapping: Any, key: str, where: str) -> Any:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in mapping:
        raise ConfigError(f"{where}.{key}: missing")
    return mapping[key]


def _as_int(value: Any, where: str, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _as_float(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise ConfigError(f"{where}: must be finite, got {value!r}")
    return out


def _parse_layers(raw: Any) -> tuple[LayerSpec, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("model.layers: expected a non-empty list")
    layers: list[LayerSpec] = []
    for k, entry in enumerate(raw):
        where = f"model.layers[{k}]"
        in_w = _as_int(_expect(entry, "in", where), f"{where}.in", minimum=1)
        out_w = _as_int(_expect(entry, "out", where), f"{where}.out", minimum=1)
        act_name = _expect(entry, "activation", where)
        try:
            act = Activation(act_name)
        except ValueError:
            raise ConfigError(
                f"{where}.activation: unknown activation {act_name!r} "
                f"(expected one of {[a.value for a in Activation]})"
            ) from None
        if layers and in_w != layers[-1].out_width:
            raise ConfigError(
                f"{where}.in: width {in_w} does not chain with previous layer's out width "
                f"{layers[-1].out_width}"
            )
        layers.append(LayerSpec(in_w, out_w, act))
    return tuple(layers)


def _parse_breakpoints(raw: Any) -> tuple[float, ...]:
    if not isinstance(raw, list):
        raise ConfigError("routing.breakpoints: expected a list")
    bps: list[float] = []
    for k, value in enumerate(raw):
        v = _as_float(value, f"routing.breakpoints[{k}]")
        if bps and v <= bps[-1]:
            raise ConfigError(
                f"routing.breakpoints[{k}]: must be strictly increasing "
                f"({v!r} after {bps[-1]!r})"
            )
        bps.append(v)
    return tuple(bps)


def _parse_optimizer(raw: Any) -> OptimizerSpec:
    kind_name = _expect(raw, "kind", "optimizer")
    try:
        kind = OptimizerKind(kind_name)
    except ValueError:
        raise ConfigError(f"optimizer.kind: unknown kind {kind_name!r} (expected sgd or adam)") from None
    lr = _as_float(raw.get("learning_rate", 0.01), "optimizer.learning_rate")
    if lr <= 0:
        raise ConfigError(f"optimizer.learning_rate: must be > 0, got {lr!r}")
    beta1 = _as_float(raw.get("beta1", 0.9), "optimizer.beta1")
    beta2 = _as_float(raw.get("beta2", 0.999), "optimizer.beta2")
    epsilon = _as_float(raw.get("epsilon", 1e-8), "optimizer.epsilon")
    for name, b in (("beta1", beta1), ("beta2", beta2)):
        if not 0.0 <= b < 1.0:
            raise ConfigError(f"optimizer.{name}: must be in [0, 1), got {b!r}")
    if epsilon <= 0:
        raise ConfigError(f"optimizer.epsilon: must be > 0, got {epsilon!r}")
    return OptimizerSpec(kind, lr, beta1, beta2, epsilon)


def _parse_segment(entry: Any, where: str) -> Segment:
    kind = _expect(entry, "kind", where)
    lo = _as_float(_expect(entry, "lo", where), f"{where}.lo")
    hi = _as_float(_expect(entry, "hi", where), f"{where}.hi")
    if kind == "constant":
        return ConstantSegment(lo, hi, _as_float(_expect(entry, "value", where), f"{where}.value"))
    if kind == "linear":
        return LinearSegment(
            lo,
            hi,
            _as_float(_expect(entry, "slope", where), f"{where}.slope"),
            _as_float(_expect(entry, "intercept", where), f"{where}.intercept"),
        )
    if kind == "sine":
        return SineSegment(
            lo,
            hi,
            _as_float(_expect(entry, "amplitude", where), f"{where}.amplitude"),
            _as_float(_expect(entry, "angular_frequency", where), f"{where}.angular_frequency"),
            _as_float(entry.get("phase", 0.0), f"{where}.phase"),
        )
    raise ConfigError(f"{where}.kind: unknown segment kind {kind!r}")


def _parse_piecewise(raw: Any) -> PiecewiseSpec:
    where = "data.piecewise"
    segments_raw = _expect(raw, "segments", where)
    if not isinstance(segments_raw, list) or not segments_raw:
        raise ConfigError(f"{where}.segments: expected a non-empty list")
    segments = tuple(
        _parse_segment(entry, f"{where}.segments[{k}]") for k, entry in enumerate(segments_raw)
    )
    return PiecewiseSpec(
        segments=segments,
        noise_sigma=_as_float(_expect(raw, "noise_sigma", where), f"{where}.noise_sigma"),
        sample_count=_as_int(_expect(raw, "sample_count", where), f"{where}.sample_count", minimum=1),
        x_min=_as_float(_expect(raw, "x_min", where), f"{where}.x_min"),
        x_max=_as_float(_expect(raw, "x_max", where), f"{where}.x_max"),
        seed=_as_int(_expect(raw, "seed", where), f"{where}.seed"),
    )


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at the top level")

    layers = _parse_layers(_expect(_expect(raw, "model", "config"), "layers", "model"))

    routing = raw.get("routing", {})
    if not isinstance(routing, dict):
        raise ConfigError("routing: expected an object")
    breakpoints = _parse_breakpoints(_expect(routing, "breakpoints", "routing"))
    routing_feature = _as_int(routing.get("feature", 0), "routing.feature", minimum=0)
    if routing_feature >= layers[0].in_width:
        raise ConfigError(
            f"routing.feature: {routing_feature} out of range for input width {layers[0].in_width}"
        )

    optimizer = _parse_optimizer(_expect(raw, "optimizer", "config"))

    training = _expect(raw, "training", "config")
    epochs = _as_int(_expect(training, "epochs", "training"), "training.epochs", minimum=1)
    init_mode = _expect(training, "init_mode", "training")
    if init_mode not in (INIT_SHARED, INIT_INDEPENDENT):
        raise ConfigError(
            f"training.init_mode: expected {INIT_SHARED!r} or {INIT_INDEPENDENT!r}, got {init_mode!r}"
        )
    init_seed = _as_int(_expect(training, "init_seed", "training"), "training.init_seed")
    shuffle_seed_raw = training.get("shuffle_seed")
    shuffle_seed = None if shuffle_seed_raw is None else _as_int(shuffle_seed_raw, "training.shuffle_seed")

    data = _expect(raw, "data", "config")
    if not isinstance(data, dict):
        raise ConfigError("data: expected an object")
    has_path = "path" in data
    has_piecewise = "piecewise" in data
    if has_path == has_piecewise:
        raise ConfigError("data: exactly one of 'path' or 'piecewise' is required")
    dataset_path = None
    piecewise = None
    if has_path:
        if not isinstance(data["path"], str) or not data["path"]:
            raise ConfigError("data.path: expected a non-empty string")
        dataset_path = data["path"]
    else:
        piecewise = _parse_piecewise(data["piecewise"])

    outputs_raw = raw.get("outputs", {})
    if not isinstance(outputs_raw, dict):
        raise ConfigError("outputs: expected an object")
    outputs: dict[str, str] = {}
    for key, value in outputs_raw.items():
        if not isinstance(value, str) or not value:
            raise ConfigError(f"outputs.{key}: expected a non-empty path string")
        outputs[key] = value

    compare = raw.get("compare", {})
    if not isinstance(compare, dict):
        raise ConfigError("compare: expected an object")
    scaled = compare.get("scaled_baseline", False)
    if not isinstance(scaled, bool):
        raise ConfigError("compare.scaled_baseline: expected a boolean")

    return ExperimentConfig(
        layers=layers,
        breakpoints=breakpoints,
        routing_feature=routing_feature,
        optimizer=optimizer,
        init_mode=init_mode,
        init_seed=init_seed,
        epochs=epochs,
        shuffle_seed=shuffle_seed,
        dataset_path=dataset_path,
        piecewise=piecewise,
        outputs=outputs,
        compare_scaled_baseline=scaled,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)
