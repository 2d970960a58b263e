"""Small shared utilities: intervals, probability clipping, JSON coercion.

The clipping policy is package-wide: every probability produced by a formula
is pushed into its legal range *with a recorded event*, never silently.
Downstream code raises the "model-inconsistent rates" flag whenever any event
was recorded, so users can tell an internally consistent answer from one that
required repair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

#: Weak-instrument threshold on probability-difference denominators. Below
#: this magnitude the IV estimators refuse rather than return an exploding
#: value.
EPS_DENOM = 1e-8


@dataclass(frozen=True)
class Interval:
    """A closed interval [lo, hi]; degenerate (lo == hi) encodes a point."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi + 1e-15:
            raise ValueError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:  # tolerate sub-1e-15 float dust, normalise away
            object.__setattr__(self, "hi", self.lo)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(float(x), float(x))


@dataclass(frozen=True)
class ClipEvent:
    """Record of a probability pushed back into its legal range.

    quantity
        Human-readable name of the quantity that was clipped.
    raw
        The value the formula produced.
    clipped
        The value actually used downstream.
    """

    quantity: str
    raw: float
    clipped: float


def clip01(
    value: float,
    quantity: str,
    events: list[ClipEvent],
    lo: float = 0.0,
    hi: float = 1.0,
) -> float:
    """Clip ``value`` into [lo, hi], appending a ClipEvent when it moved."""
    clipped = min(max(value, lo), hi)
    if clipped != value:
        events.append(ClipEvent(quantity=quantity, raw=float(value), clipped=float(clipped)))
    return clipped


def as_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses / numpy scalars / tuples to JSON types."""
    import dataclasses

    import numpy as np

    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [as_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: as_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): as_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [as_jsonable(v) for v in obj]
    raise TypeError(f"cannot convert {type(obj).__name__} to JSON")
