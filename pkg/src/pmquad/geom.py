"""Points, cells, and the exact step-function representation of cost profiles."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

__all__ = ["Point2", "Cell", "StepProfile"]


@dataclass(frozen=True)
class Point2:
    """A data point in the unit square with its insertion rank."""

    x: float
    y: float
    index: int = 0

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"point ({self.x}, {self.y}) outside the unit square")


@dataclass(frozen=True)
class Cell:
    """An axis-aligned rectangle; the x-extent is [x0, x1), closed at x1 = 1.

    The half-open convention makes the cost profile right-continuous: the
    query line at a split coordinate belongs to the right-hand cells.
    """

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("degenerate cell")

    def crosses_line(self, s: float) -> bool:
        """Whether the vertical line x = s meets this cell's x-extent."""
        return self.x0 <= s < self.x1 or (s == self.x1 == 1.0)

    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def width(self) -> float:
        return self.x1 - self.x0


class StepProfile:
    """Canonical cadlag step function: value v_i on [b_i, b_{i+1}), closed at 1.

    Breakpoints start at 0 and are strictly increasing; adjacent values
    always differ (merged form).
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values):
        breakpoints = list(breakpoints)
        values = list(values)
        if len(breakpoints) != len(values) or not breakpoints:
            raise ValueError("breakpoints and values must be equal-length, nonempty")
        if breakpoints[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        for a, b in zip(breakpoints, breakpoints[1:]):
            if not a < b:
                raise ValueError("breakpoints must be strictly increasing")
        if breakpoints[-1] > 1.0:
            raise ValueError("breakpoints must lie in [0, 1]")
        for a, b in zip(values, values[1:]):
            if a == b:
                raise ValueError("profile not canonical: adjacent values equal")
        self.breakpoints = breakpoints
        self.values = values

    @classmethod
    def from_events(cls, events):
        """Build from (position, delta) jump events; deltas at equal positions merge.

        Events at position 1.0 are dropped: cells touching the right edge are
        closed there, so nothing ends before s = 1.
        """
        acc = {0.0: 0}
        for pos, delta in events:
            if pos >= 1.0:
                continue
            acc[pos] = acc.get(pos, 0) + delta
        breakpoints = [0.0]
        values = [acc[0.0]]
        level = acc[0.0]
        for pos in sorted(acc):
            if pos == 0.0:
                continue
            delta = acc[pos]
            if delta == 0:
                continue
            level += delta
            breakpoints.append(pos)
            values.append(level)
        return cls(breakpoints, values)

    def eval(self, s: float) -> int:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"profile defined on [0, 1], got {s!r}")
        return self.values[bisect_right(self.breakpoints, s) - 1]

    def segments(self):
        """(lo, hi, value) triples; the final segment is closed at hi = 1."""
        out = []
        for i, v in enumerate(self.values):
            hi = self.breakpoints[i + 1] if i + 1 < len(self.breakpoints) else 1.0
            out.append((self.breakpoints[i], hi, v))
        return out

    def max_segment(self):
        """(value, (lo, hi)) for the first segment attaining the maximum."""
        best = max(self.values)
        for lo, hi, v in self.segments():
            if v == best:
                return best, (lo, hi)
        raise AssertionError("unreachable")

    def __eq__(self, other):
        return (
            isinstance(other, StepProfile)
            and self.breakpoints == other.breakpoints
            and self.values == other.values
        )

    def __repr__(self):
        return f"StepProfile({self.breakpoints!r}, {self.values!r})"
