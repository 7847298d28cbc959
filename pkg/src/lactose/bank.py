"""Per-branch parameter banks: N parameter snapshots swapped through one model.

A bank owns N flat parameter vectors (identical layout) and N optimizer
states, one per routing branch. A training step loads branch i into the
live model, updates it, and stores it back; every other branch stays
byte-identical. Optimizer state is banked per branch together with the
parameters, so branch i's moment buffers and step count never see another
branch's gradients.

On-disk format (two files):

* ``<path>``: binary blob. Magic bytes ``LACT``, one format version byte,
  then the payload as little-endian float64 -- branch-major, each branch
  contributing its parameters in canonical flat order followed by its
  Adam moment buffers (first then second) when present -- and a trailing
  little-endian uint64 holding the payload's float count as a length check.
* ``<path>.json``: human-readable manifest with the format version, layout,
  branch count, optimizer kind and hyperparameters, per-branch step counts,
  and any experiment metadata the caller wants alongside (breakpoints,
  routing feature, seeds).

Load rebuilds the bank bit-exactly or raises; it never returns a partial bank.
"""

from __future__ import annotations

import enum
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import BankFormatError, NumericError, ShapeError, ValidationError
from .net import FlatParams, MLPModel, ModelLayout, extract_params, inject_params, random_params

BANK_MAGIC = b"LACT"
BANK_FORMAT_VERSION = 1

INIT_SHARED = "shared-seed"
INIT_INDEPENDENT = "independent-seeds"


class OptimizerKind(enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class OptimizerSpec:
    """Optimizer kind plus hyperparameters, shared by all branches of a bank."""

    kind: OptimizerKind
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def sgd(cls, learning_rate: float = 0.01) -> "OptimizerSpec":
        return cls(OptimizerKind.SGD, learning_rate)

    @classmethod
    def adam(
        cls,
        learning_rate: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "OptimizerSpec":
        return cls(OptimizerKind.ADAM, learning_rate, beta1, beta2, epsilon)


@dataclass(eq=False)
class OptimizerState:
    """One branch's optimizer bookkeeping: step count and (Adam) moment buffers."""

    spec: OptimizerSpec
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    @classmethod
    def fresh(cls, spec: OptimizerSpec, layout: ModelLayout) -> "OptimizerState":
        if spec.kind is OptimizerKind.ADAM:
            return cls(spec, 0, np.zeros(layout.param_count), np.zeros(layout.param_count))
        return cls(spec, 0, None, None)

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.spec,
            self.step_count,
            None if self.m is None else self.m.copy(),
            None if self.v is None else self.v.copy(),
        )


@dataclass(eq=False)
class ParameterBank:
    layout: ModelLayout
    params: list[FlatParams]
    opt_states: list[OptimizerState]

    @property
    def branch_count(self) -> int:
        return len(self.params)

    def copy(self) -> "ParameterBank":
        return ParameterBank(
            self.layout,
            [p.copy() for p in self.params],
            [s.copy() for s in self.opt_states],
        )


def bank_init(
    model: MLPModel,
    branch_count: int,
    mode: str,
    seed: int,
    optimizer: OptimizerSpec | None = None,
) -> ParameterBank:
    """Create N parameter snapshots and fresh optimizer states for a model.

    ``shared-seed`` draws one parameter set and copies it to every branch;
    ``independent-seeds`` seeds branch i's stream with (seed, i). Both are
    exactly reproducible. The model itself is left untouched.
    """
    if branch_count < 1:
        raise ValidationError(f"branch_count must be >= 1, got {branch_count}")
    if optimizer is None:
        optimizer = OptimizerSpec.sgd()
    layout = model.layout()
    if mode == INIT_SHARED:
        base = random_params(layout, seed)
        params = [base.copy() for _ in range(branch_count)]
    elif mode == INIT_INDEPENDENT:
        params = [random_params(layout, (seed, i)) for i in range(branch_count)]
    else:
        raise ValidationError(
            f"init mode must be {INIT_SHARED!r} or {INIT_INDEPENDENT!r}, got {mode!r}"
        )
    states = [OptimizerState.fresh(optimizer, layout) for _ in range(branch_count)]
    return ParameterBank(layout, params, states)


def _check_branch(bank: ParameterBank, i: int) -> None:
    if not 0 <= i < bank.branch_count:
        raise IndexError(f"branch index {i} out of range for bank of {bank.branch_count}")


def load_branch(bank: ParameterBank, i: int, model: MLPModel) -> None:
    """Copy branch i's parameters into the live model; the bank is unchanged."""
    _check_branch(bank, i)
    inject_params(model, bank.params[i])


def store_branch(bank: ParameterBank, i: int, model: MLPModel) -> None:
    """Snapshot the live model's parameters into branch i; other branches untouched."""
    _check_branch(bank, i)
    if model.layout() != bank.layout:
        raise ShapeError(
            f"model layout {model.layout().shapes} does not match bank layout {bank.layout.shapes}"
        )
    bank.params[i] = extract_params(model)


def apply_update(state: OptimizerState, params: FlatParams, grads: FlatParams) -> FlatParams:
    """One optimizer step on a flat parameter vector.

    SGD: theta - lr * g. Adam: bias-corrected first/second moment update
    using this state's own buffers. Gradients are checked for finiteness
    before any state is touched, so a failed update leaves the state as-is.
    """
    if params.layout != grads.layout:
        raise ShapeError("parameter and gradient layouts differ")
    if state.m is not None and state.m.shape != params.values.shape:
        raise ShapeError("optimizer buffers do not match the parameter layout")
    g = grads.values
    if not np.all(np.isfinite(g)):
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise NumericError(f"gradient component {bad} is not finite: {g[bad]!r}")
    spec = state.spec
    if spec.kind is OptimizerKind.SGD:
        new_values = params.values - spec.learning_rate * g
        state.step_count += 1
        return FlatParams(new_values, params.layout)
    # Adam, one canonical operation order (kept fixed for bit-reproducibility):
    # m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g*g;
    # theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    t = state.step_count + 1
    m = spec.beta1 * state.m + (1.0 - spec.beta1) * g
    v = spec.beta2 * state.v + (1.0 - spec.beta2) * (g * g)
    m_hat = m / (1.0 - spec.beta1**t)
    v_hat = v / (1.0 - spec.beta2**t)
    new_values = params.values - spec.learning_rate * m_hat / (np.sqrt(v_hat) + spec.epsilon)
    state.m = m
    state.v = v
    state.step_count = t
    return FlatParams(new_values, params.layout)


def bank_diff(a: ParameterBank, b: ParameterBank) -> str | None:
    """First difference between two banks, or None when byte-identical."""
    if a.layout != b.layout:
        return f"layouts differ: {a.layout.shapes} vs {b.layout.shapes}"
    if a.branch_count != b.branch_count:
        return f"branch counts differ: {a.branch_count} vs {b.branch_count}"
    for i in range(a.branch_count):
        d = _bytes_diff(a.params[i].values, b.params[i].values)
        if d is not None:
            return f"branch {i} params: {d}"
        sa, sb = a.opt_states[i], b.opt_states[i]
        if sa.spec != sb.spec:
            return f"branch {i} optimizer spec differs: {sa.spec} vs {sb.spec}"
        if sa.step_count != sb.step_count:
            return f"branch {i} step count differs: {sa.step_count} vs {sb.step_count}"
        for name, ba, bb in (("m", sa.m, sb.m), ("v", sa.v, sb.v)):
            if (ba is None) != (bb is None):
                return f"branch {i} buffer {name} present on one side only"
            if ba is not None and bb is not None:
                d = _bytes_diff(ba, bb)
                if d is not None:
                    return f"branch {i} buffer {name}: {d}"
    return None


def _bytes_diff(a: np.ndarray, b: np.ndarray) -> str | None:
    if a.shape != b.shape:
        return f"shapes differ: {a.shape} vs {b.shape}"
    ab, bb = a.tobytes(), b.tobytes()
    if ab == bb:
        return None
    k = next(j for j in range(len(ab)) if ab[j] != bb[j])
    idx = k // 8
    return f"first differing byte at offset {k} (element {idx}: {a.flat[idx]!r} vs {b.flat[idx]!r})"


def manifest_path(path: str) -> str:
    return f"{path}.json"


def save_bank(bank: ParameterBank, path: str, extra_manifest: Mapping | None = None) -> None:
    """Write the blob to `path` and the manifest to `path`.json."""
    spec = bank.opt_states[0].spec if bank.opt_states else OptimizerSpec.sgd()
    manifest: dict = {
        "format_version": BANK_FORMAT_VERSION,
        "layout": [[o, i] for o, i in bank.layout.shapes],
        "branch_count": bank.branch_count,
        "optimizer": {
            "kind": spec.kind.value,
            "learning_rate": spec.learning_rate,
            "beta1": spec.beta1,
            "beta2": spec.beta2,
            "epsilon": spec.epsilon,
        },
        "step_counts": [s.step_count for s in bank.opt_states],
    }
    if extra_manifest:
        for key, value in extra_manifest.items():
            if key in manifest:
                raise ValidationError(f"extra manifest key {key!r} collides with a reserved key")
            manifest[key] = value

    parts: list[np.ndarray] = []
    for p, s in zip(bank.params, bank.opt_states):
        parts.append(p.values)
        if s.m is not None:
            parts.append(s.m)
            parts.append(s.v)  # type: ignore[arg-type]
    payload = np.concatenate(parts) if parts else np.empty(0)
    blob = (
        BANK_MAGIC
        + bytes([BANK_FORMAT_VERSION])
        + payload.astype("<f8", copy=False).tobytes()
        + struct.pack("<Q", payload.size)
    )
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as f:
        f.write(blob)
    with open(manifest_path(path), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def read_manifest(path: str) -> dict:
    mpath = manifest_path(path)
    try:
        with open(mpath, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise BankFormatError(f"bank manifest not found: {mpath}") from None
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"bank manifest {mpath} is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise BankFormatError(f"bank manifest {mpath} must be a JSON object")
    return manifest


def _manifest_field(manifest: dict, key: str, path: str):
    if key not in manifest:
        raise BankFormatError(f"bank manifest for {path} is missing {key!r}")
    return manifest[key]


def load_bank(path: str) -> ParameterBank:
    """Rebuild a bank from disk bit-exactly, or raise without partial state."""
    manifest = read_manifest(path)
    version = _manifest_field(manifest, "format_version", path)
    if version != BANK_FORMAT_VERSION:
        raise BankFormatError(f"unsupported bank format version {version!r} in manifest")

    raw_layout = _manifest_field(manifest, "layout", path)
    try:
        layout = ModelLayout(tuple((int(o), int(i)) for o, i in raw_layout))
    except (TypeError, ValueError):
        raise BankFormatError(f"bank manifest for {path} has a malformed layout") from None
    branch_count = _manifest_field(manifest, "branch_count", path)
    if not isinstance(branch_count, int) or branch_count < 1:
        raise BankFormatError(f"bank manifest for {path} has a bad branch_count: {branch_count!r}")
    opt = _manifest_field(manifest, "optimizer", path)
    try:
        spec = OptimizerSpec(
            OptimizerKind(opt["kind"]),
            float(opt["learning_rate"]),
            float(opt["beta1"]),
            float(opt["beta2"]),
            float(opt["epsilon"]),
        )
    except (KeyError, TypeError, ValueError):
        raise BankFormatError(f"bank manifest for {path} has a malformed optimizer section") from None
    step_counts = _manifest_field(manifest, "step_counts", path)
    if (
        not isinstance(step_counts, list)
        or len(step_counts) != branch_count
        or not all(isinstance(c, int) and c >= 0 for c in step_counts)
    ):
        raise BankFormatError(f"bank manifest for {path} has malformed step_counts")

    try:
        with open(path, "rb") as f:
            blob = f.read()
    except FileNotFoundError:
        raise BankFormatError(f"bank file not found: {path}") from None

    header = len(BANK_MAGIC) + 1
    if len(blob) < header + 8:
        raise BankFormatError(f"bank file {path} is truncated (shorter than its header)")
    if blob[: len(BANK_MAGIC)] != BANK_MAGIC:
        raise BankFormatError(f"bank file {path} has bad magic bytes")
    if blob[len(BANK_MAGIC)] != BANK_FORMAT_VERSION:
        raise BankFormatError(
            f"unsupported bank format version {blob[len(BANK_MAGIC)]} in {path}"
        )

    per_branch = layout.param_count * (3 if spec.kind is OptimizerKind.ADAM else 1)
    expected_floats = branch_count * per_branch
    expected_len = header + expected_floats * 8 + 8
    if len(blob) < expected_len:
        raise BankFormatError(f"bank file {path} is truncated")
    if len(blob) > expected_len:
        raise BankFormatError(f"bank file {path} has trailing data")
    (length_check,) = struct.unpack("<Q", blob[-8:])
    if length_check != expected_floats:
        raise BankFormatError(
            f"bank file {path} length check mismatch: header says {length_check}, "
            f"manifest implies {expected_floats}"
        )

    payload = np.frombuffer(blob, dtype="<f8", count=expected_floats, offset=header)
    payload = payload.astype(np.float64, copy=True)

    params: list[FlatParams] = []
    states: list[OptimizerState] = []
    pos = 0
    n = layout.param_count
    for b in range(branch_count):
        values = payload[pos : pos + n].copy()
        pos += n
        if spec.kind is OptimizerKind.ADAM:
            m = payload[pos : pos + n].copy()
            pos += n
            v = payload[pos : pos + n].copy()
            pos += n
        else:
            m = v = None
        params.append(FlatParams(values, layout))
        states.append(OptimizerState(spec, step_counts[b], m, v))
    return ParameterBank(layout, params, states)
