"""Breakpoint routing: one scalar feature of the input picks a branch.

Breakpoints live entirely outside the trained model, so routing never
participates in gradients. K breakpoints split the real line into K+1
half-open intervals, left-closed at each breakpoint: a value equal to a
breakpoint routes to the branch above it.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import RoutingError, ShapeError, ValidationError


@dataclass(frozen=True)
class ConditionArray:
    """Immutable sorted breakpoints plus the input feature they test."""

    breakpoints: tuple[float, ...]
    routing_feature: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))

    @property
    def branch_count(self) -> int:
        return len(self.breakpoints) + 1

    @classmethod
    def single_branch(cls, routing_feature: int = 0) -> "ConditionArray":
        """Degenerate router with no breakpoints: everything is branch 0."""
        return cls((), routing_feature)


def validate(conditions: ConditionArray) -> None:
    """Reject empty, non-finite, duplicated, or unsorted breakpoints."""
    bps = conditions.breakpoints
    if len(bps) == 0:
        raise ValidationError("breakpoints: empty; at least one breakpoint is required")
    for i, b in enumerate(bps):
        if not math.isfinite(b):
            raise ValidationError(f"breakpoints[{i}]: not finite ({b!r})")
    for i in range(1, len(bps)):
        if bps[i] == bps[i - 1]:
            raise ValidationError(f"breakpoints[{i}]: duplicate value {bps[i]!r}")
        if bps[i] < bps[i - 1]:
            raise ValidationError(
                f"breakpoints[{i}]: out of order ({bps[i]!r} < {bps[i - 1]!r})"
            )
    if conditions.routing_feature < 0:
        raise ValidationError(f"routing_feature: must be >= 0, got {conditions.routing_feature}")


def route(conditions: ConditionArray, x) -> int:
    """Branch index for input x; deterministic and total over finite values."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"x must be 1-D, got shape {v.shape}")
    f = conditions.routing_feature
    if f < 0 or f >= v.shape[0]:
        raise ShapeError(f"routing feature {f} out of range for input of width {v.shape[0]}")
    value = float(v[f])
    if not math.isfinite(value):
        raise RoutingError(f"routing value x[{f}] is not finite: {value!r}")
    return bisect.bisect_right(conditions.breakpoints, value)
