"""Synthetic piecewise datasets and CSV input/output.

Segment boundaries follow the router's convention (left-closed above the
boundary): a sample exactly on a boundary takes the upper segment's value,
so breakpoints placed on segment boundaries partition the data perfectly.

CSV values are written with shortest round-trip formatting, so a write
followed by a read reproduces every float64 bit-exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import NumericError, ValidationError
from .trainer import TrainRecord


@dataclass(frozen=True)
class ConstantSegment:
    lo: float
    hi: float
    value: float

    def y(self, x: float) -> float:
        return self.value


@dataclass(frozen=True)
class LinearSegment:
    lo: float
    hi: float
    slope: float
    intercept: float

    def y(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class SineSegment:
    lo: float
    hi: float
    amplitude: float
    angular_frequency: float
    phase: float = 0.0

    def y(self, x: float) -> float:
        return self.amplitude * math.sin(self.angular_frequency * x + self.phase)


Segment = Union[ConstantSegment, LinearSegment, SineSegment]


@dataclass(frozen=True)
class PiecewiseSpec:
    """Recipe for a 1-D regression set with distinct regimes."""

    segments: tuple[Segment, ...]
    noise_sigma: float
    sample_count: int
    x_min: float
    x_max: float
    seed: int


def validate_spec(spec: PiecewiseSpec) -> None:
    if spec.sample_count < 1:
        raise ValidationError(f"sample_count must be >= 1, got {spec.sample_count}")
    if not math.isfinite(spec.noise_sigma) or spec.noise_sigma < 0:
        raise ValidationError(f"noise_sigma must be finite and >= 0, got {spec.noise_sigma!r}")
    if not (math.isfinite(spec.x_min) and math.isfinite(spec.x_max)) or spec.x_min >= spec.x_max:
        raise ValidationError(f"x range [{spec.x_min!r}, {spec.x_max!r}] is not a valid interval")
    if not spec.segments:
        raise ValidationError("segments: empty")
    for k, seg in enumerate(spec.segments):
        if not (math.isfinite(seg.lo) and math.isfinite(seg.hi)) or seg.lo >= seg.hi:
            raise ValidationError(f"segments[{k}]: bounds [{seg.lo!r}, {seg.hi!r}] are not a valid interval")
    if spec.segments[0].lo != spec.x_min:
        raise ValidationError(
            f"segments[0]: starts at {spec.segments[0].lo!r} but the x range starts at {spec.x_min!r}"
        )
    for k in range(1, len(spec.segments)):
        prev_hi = spec.segments[k - 1].hi
        lo = spec.segments[k].lo
        if lo > prev_hi:
            raise ValidationError(f"segments[{k}]: gap between {prev_hi!r} and {lo!r}")
        if lo < prev_hi:
            raise ValidationError(f"segments[{k}]: overlaps previous segment ending at {prev_hi!r}")
    if spec.segments[-1].hi != spec.x_max:
        raise ValidationError(
            f"segments[{len(spec.segments) - 1}]: ends at {spec.segments[-1].hi!r} "
            f"but the x range ends at {spec.x_max!r}"
        )


def piecewise_value(spec: PiecewiseSpec, x: float) -> float:
    """Noise-free target at x. Boundaries belong to the upper segment."""
    for seg in spec.segments:
        if seg.lo <= x < seg.hi:
            return seg.y(x)
    if x == spec.x_max:
        return spec.segments[-1].y(x)
    raise ValidationError(f"x={x!r} is outside the sampled range [{spec.x_min!r}, {spec.x_max!r}]")


def generate(spec: PiecewiseSpec) -> list[TrainRecord]:
    """Draw the dataset: x uniform over the range, y = segment(x) + N(0, sigma).

    Deterministic given the seed; draw order is all x values first, then all
    noise values, from one seeded PCG64 stream.
    """
    validate_spec(spec)
    rng = np.random.default_rng(spec.seed)
    xs = rng.uniform(spec.x_min, spec.x_max, spec.sample_count)
    noise = rng.normal(0.0, spec.noise_sigma, spec.sample_count)
    return [
        TrainRecord(np.array([x]), np.array([piecewise_value(spec, float(x)) + e]))
        for x, e in zip(xs, noise)
    ]


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_cell(cell: str, path: str, line: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ValidationError(f"{path}:{line}: column {col}: not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise NumericError(f"{path}:{line}: column {col}: not finite: {cell!r}")
    return value


def _dataset_header(x_width: int, y_width: int) -> list[str]:
    return [f"x{i}" for i in range(x_width)] + [f"y{i}" for i in range(y_width)]


def write_dataset(path: str, records: Sequence[TrainRecord]) -> None:
    records = list(records)
    if not records:
        raise ValidationError("cannot write an empty dataset (no header widths to infer)")
    x_width = records[0].x.shape[0]
    y_width = records[0].y.shape[0]
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(_dataset_header(x_width, y_width))
        for rec in records:
            w.writerow([_fmt(v) for v in rec.x] + [_fmt(v) for v in rec.y])


def _split_header(header: list[str], path: str) -> tuple[int, int]:
    x_width = 0
    while x_width < len(header) and header[x_width] == f"x{x_width}":
        x_width += 1
    y_width = 0
    while x_width + y_width < len(header) and header[x_width + y_width] == f"y{y_width}":
        y_width += 1
    if x_width == 0 or y_width == 0 or x_width + y_width != len(header):
        raise ValidationError(
            f"{path}:1: header must be x0..xk,y0..ym, got {','.join(header)!r}"
        )
    return x_width, y_width


def read_dataset(path: str) -> list[TrainRecord]:
    """Parse a dataset CSV. A header-only file yields an empty list."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}:1: file is empty, expected a header row") from None
        x_width, y_width = _split_header(header, path)
        records: list[TrainRecord] = []
        for line, row in enumerate(reader, start=2):
            if len(row) != x_width + y_width:
                raise ValidationError(
                    f"{path}:{line}: expected {x_width + y_width} cells, got {len(row)}"
                )
            values = [_parse_cell(cell, path, line, header[c]) for c, cell in enumerate(row)]
            records.append(
                TrainRecord(np.array(values[:x_width]), np.array(values[x_width:]))
            )
    return records


def write_predictions(
    path: str,
    records: Sequence[TrainRecord],
    predictions: Sequence[np.ndarray],
    branches: Sequence[int],
) -> None:
    """Prediction CSV: x0..xk, y_true0..m, y_pred0..m, branch."""
    records = list(records)
    if not records:
        raise ValidationError("cannot write predictions for an empty dataset")
    if len(predictions) != len(records) or len(branches) != len(records):
        raise ValidationError(
            f"records ({len(records)}), predictions ({len(predictions)}) and "
            f"branches ({len(branches)}) must have equal lengths"
        )
    x_width = records[0].x.shape[0]
    y_width = records[0].y.shape[0]
    header = (
        [f"x{i}" for i in range(x_width)]
        + [f"y_true{i}" for i in range(y_width)]
        + [f"y_pred{i}" for i in range(y_width)]
        + ["branch"]
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for rec, pred, branch in zip(records, predictions, branches):
            w.writerow(
                [_fmt(v) for v in rec.x]
                + [_fmt(v) for v in rec.y]
                + [_fmt(v) for v in np.asarray(pred).ravel()]
                + [int(branch)]
            )
