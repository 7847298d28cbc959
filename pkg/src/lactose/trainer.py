"""Training loops: swapped per-branch training, a monolithic baseline, and
the partition-equivalence check.

A swapped training step processes exactly one record (batch size is fixed
at 1 because parameters are loaded and stored around every prediction):
route the input to a branch, load that branch's parameters into the live
model, run forward / loss / backward, apply that branch's optimizer, and
store the result back. Storing is the final action of a step, so a failed
step cannot corrupt the bank.

Float operations happen in one canonical order (the same kernels, in the
same sequence, for every trainer in this module), which is what makes the
bit-exact equivalence properties testable: training with a single-branch
bank is byte-identical to the monolithic loop, and training with N branches
is byte-identical to training each branch separately on the subsequence of
records routed to it.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import net
from .bank import ParameterBank, OptimizerSpec, OptimizerState, apply_update, bank_diff, bank_init, load_branch, store_branch
from .errors import ShapeError, ValidationError
from .net import LayerSpec, LossKind, MLPModel, build_model, extract_params, inject_params
from .router import ConditionArray, route, validate


@dataclass
class TrainRecord:
    """One (x, y) sample; always consumed alone (batch size 1)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.x = net.as_vector(self.x, name="x")
        self.y = net.as_vector(self.y, name="y")


@dataclass
class TrainReport:
    losses: list[float]  # pre-update loss per step
    branches: list[int]  # routed branch per step
    branch_step_counts: list[int]
    final_branch_mse: list[float]
    final_mse: float
    duration_seconds: float


@dataclass
class BankEval:
    mean: float
    branch_mse: list[float]  # NaN for branches that saw no records
    branch_counts: list[int]


@dataclass
class OracleVerdict:
    equal: bool
    detail: str


def _check_setup(model: MLPModel, bank: ParameterBank, conditions: ConditionArray) -> None:
    # An empty breakpoint tuple is the documented single-branch degenerate
    # case; anything non-empty must pass full validation.
    if conditions.breakpoints:
        validate(conditions)
    if bank.branch_count != conditions.branch_count:
        raise ValidationError(
            f"bank has {bank.branch_count} branches but conditions imply "
            f"{conditions.branch_count}"
        )
    if bank.layout != model.layout():
        raise ShapeError(
            f"bank layout {bank.layout.shapes} does not match model layout "
            f"{model.layout().shapes}"
        )


def _plain_step(model: MLPModel, state: OptimizerState, record: TrainRecord, loss_kind: LossKind) -> float:
    trace = net.forward(model, record.x)
    step_loss = net.loss(loss_kind, record.y, trace.y_hat)
    grads = net.backward(model, trace, record.y, loss_kind)
    new_params = apply_update(state, extract_params(model), grads)
    inject_params(model, new_params)
    return step_loss


def lactose_step(
    model: MLPModel,
    bank: ParameterBank,
    conditions: ConditionArray,
    record: TrainRecord,
    loss_kind: LossKind = LossKind.MSE,
) -> float:
    """One swap-train-swap cycle on a single record; returns the pre-update loss."""
    _check_setup(model, bank, conditions)
    i = route(conditions, record.x)
    load_branch(bank, i, model)
    step_loss = _plain_step(model, bank.opt_states[i], record, loss_kind)
    store_branch(bank, i, model)
    return step_loss


def _checked_records(dataset: Sequence[TrainRecord], model: MLPModel) -> list[TrainRecord]:
    records = list(dataset)
    if not records:
        raise ValidationError("dataset is empty")
    for k, rec in enumerate(records):
        if rec.x.shape[0] != model.input_width:
            raise ShapeError(
                f"record {k}: input width {rec.x.shape[0]} != model input width {model.input_width}"
            )
        if rec.y.shape[0] != model.output_width:
            raise ShapeError(
                f"record {k}: target width {rec.y.shape[0]} != model output width {model.output_width}"
            )
        net.check_finite(rec.x, f"record {k} x")
        net.check_finite(rec.y, f"record {k} y")
    return records


def _epoch_orders(n: int, epochs: int, shuffle_seed: int | None) -> list[list[int]]:
    """Record order per epoch. No seed means dataset order, every epoch."""
    if epochs < 1:
        raise ValidationError(f"epochs must be >= 1, got {epochs}")
    if shuffle_seed is None:
        return [list(range(n))] * epochs
    rng = np.random.default_rng(shuffle_seed)
    return [rng.permutation(n).tolist() for _ in range(epochs)]


def train(
    model: MLPModel,
    bank: ParameterBank,
    conditions: ConditionArray,
    dataset: Sequence[TrainRecord],
    epochs: int,
    loss_kind: LossKind = LossKind.MSE,
    shuffle_seed: int | None = None,
) -> TrainReport:
    """Run the swapped training loop over the dataset for `epochs` passes.

    Deterministic given the bank's init seeds and `shuffle_seed`; two runs
    from identical starting banks produce byte-identical final banks.
    """
    records = _checked_records(dataset, model)
    _check_setup(model, bank, conditions)
    t0 = time.perf_counter()
    losses: list[float] = []
    branches: list[int] = []
    for order in _epoch_orders(len(records), epochs, shuffle_seed):
        for idx in order:
            rec = records[idx]
            i = route(conditions, rec.x)
            load_branch(bank, i, model)
            losses.append(_plain_step(model, bank.opt_states[i], rec, loss_kind))
            branches.append(i)
            store_branch(bank, i, model)
    duration = time.perf_counter() - t0
    counts = np.bincount(branches, minlength=bank.branch_count).tolist()
    ev = evaluate_bank(model, bank, conditions, records, loss_kind)
    return TrainReport(losses, branches, counts, ev.branch_mse, ev.mean, duration)


def train_monolithic(
    model: MLPModel,
    opt_state: OptimizerState,
    dataset: Sequence[TrainRecord],
    epochs: int,
    loss_kind: LossKind = LossKind.MSE,
    shuffle_seed: int | None = None,
) -> TrainReport:
    """Ordinary single-parameter-set training: same step mechanics, no routing."""
    records = _checked_records(dataset, model)
    t0 = time.perf_counter()
    losses: list[float] = []
    for order in _epoch_orders(len(records), epochs, shuffle_seed):
        for idx in order:
            losses.append(_plain_step(model, opt_state, records[idx], loss_kind))
    duration = time.perf_counter() - t0
    final = evaluate_model(model, records, loss_kind)
    return TrainReport(losses, [0] * len(losses), [len(losses)], [final], final, duration)


def evaluate_model(model: MLPModel, dataset: Sequence[TrainRecord], loss_kind: LossKind = LossKind.MSE) -> float:
    """Mean per-record loss; pure."""
    records = list(dataset)
    if not records:
        raise ValidationError("dataset is empty")
    total = 0.0
    for rec in records:
        total += net.loss(loss_kind, rec.y, net.forward(model, rec.x).y_hat)
    return total / len(records)


def evaluate_bank(
    model: MLPModel,
    bank: ParameterBank,
    conditions: ConditionArray,
    dataset: Sequence[TrainRecord],
    loss_kind: LossKind = LossKind.MSE,
) -> BankEval:
    """Route every record, score it under its branch's parameters.

    Pure: the model is used as a vessel and its original parameters are
    restored before returning; the bank is read-only throughout.
    """
    records = list(dataset)
    if not records:
        raise ValidationError("dataset is empty")
    _check_setup(model, bank, conditions)
    saved = extract_params(model)
    n = bank.branch_count
    sums = [0.0] * n
    counts = [0] * n
    total = 0.0
    try:
        for rec in records:
            i = route(conditions, rec.x)
            load_branch(bank, i, model)
            l = net.loss(loss_kind, rec.y, net.forward(model, rec.x).y_hat)
            sums[i] += l
            counts[i] += 1
            total += l
    finally:
        inject_params(model, saved)
    branch_mse = [sums[i] / counts[i] if counts[i] else float("nan") for i in range(n)]
    return BankEval(total / len(records), branch_mse, counts)


def partition_oracle(
    layer_specs: Sequence[LayerSpec],
    conditions: ConditionArray,
    dataset: Sequence[TrainRecord],
    epochs: int,
    *,
    optimizer: OptimizerSpec,
    init_mode: str,
    init_seed: int,
    loss_kind: LossKind = LossKind.MSE,
    shuffle_seed: int | None = None,
) -> OracleVerdict:
    """Check that swapped training equals independent per-branch training.

    Side A runs the swapped loop. Side B re-creates the identical initial
    bank, then trains each branch as a standalone model on exactly the
    records routed to it, in the same relative order (epoch structure and
    shuffling included). The verdict compares final parameters, moment
    buffers, and step counts byte-for-byte.
    """
    model_a = build_model(layer_specs)
    bank_a = bank_init(model_a, conditions.branch_count, init_mode, init_seed, optimizer)
    train(model_a, bank_a, conditions, dataset, epochs, loss_kind, shuffle_seed)

    bank_b = bank_init(build_model(layer_specs), conditions.branch_count, init_mode, init_seed, optimizer)
    records = _checked_records(dataset, build_model(layer_specs))
    orders = _epoch_orders(len(records), epochs, shuffle_seed)
    routes = [route(conditions, rec.x) for rec in records]
    for i in range(conditions.branch_count):
        model_i = build_model(layer_specs)
        inject_params(model_i, bank_b.params[i])
        state_i = bank_b.opt_states[i]
        for order in orders:
            for idx in order:
                if routes[idx] == i:
                    _plain_step(model_i, state_i, records[idx], loss_kind)
        bank_b.params[i] = extract_params(model_i)

    diff = bank_diff(bank_a, bank_b)
    if diff is None:
        return OracleVerdict(True, "banks byte-identical")
    return OracleVerdict(False, diff)


def write_report_csv(report: TrainReport, path: str) -> None:
    """Per-step CSV (step, branch, loss) for external plotting; byte-deterministic."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "branch", "loss"])
        for s, (b, l) in enumerate(zip(report.branches, report.losses)):
            w.writerow([s, b, repr(float(l))])
