import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from app.errors import InputError


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise InputError("Interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise InputError(f"Interval has lo = {self.lo} > hi = {self.hi}")
        # Infinite endpoints are always open
        if math.isinf(self.lo) and self.lo_closed:
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi) and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    @property
    def is_empty(self) -> bool:
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def contains(self, x: float) -> bool:
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def intersects(self, other: "Interval") -> bool:
        if self.is_empty or other.is_empty:
            return False
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_closed = self.lo, self.lo_closed
        else:
            lo, lo_closed = other.lo, other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hi_closed = self.hi, self.hi_closed
        else:
            hi, hi_closed = other.hi, other.hi_closed
        return lo < hi or (lo == hi and lo_closed and hi_closed)

    def to_list(self) -> list:
        return [self.lo, self.hi, self.lo_closed, self.hi_closed]


def _touching(left: Interval, right: Interval) -> bool:
    """True if ``right`` (starting at or after ``left``) joins ``left`` into one piece."""
    if right.lo < left.hi:
        return True
    if right.lo == left.hi:
        return left.hi_closed or right.lo_closed
    return False


def _merge(intervals: Iterable[Interval]) -> Tuple[Interval, ...]:
    items = sorted(
        (i for i in intervals if not i.is_empty),
        key=lambda i: (i.lo, not i.lo_closed),
    )
    merged: List[Interval] = []
    for item in items:
        if merged and _touching(merged[-1], item):
            last = merged[-1]
            if item.hi > last.hi or (item.hi == last.hi and item.hi_closed):
                hi, hi_closed = item.hi, item.hi_closed
            else:
                hi, hi_closed = last.hi, last.hi_closed
            merged[-1] = Interval(last.lo, hi, last.lo_closed, hi_closed)
        else:
            merged.append(item)
    return tuple(merged)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint real intervals, kept sorted and merged."""

    intervals: Tuple[Interval, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _merge(self.intervals))

    # ----------------------------
    # Construction
    # ----------------------------

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(())

    @classmethod
    def from_points(cls, values: Iterable[float]) -> "IntervalUnion":
        return cls(tuple(Interval(float(v), float(v)) for v in values))

    @classmethod
    def closed(cls, lo: float, hi: float) -> "IntervalUnion":
        return cls((Interval(lo, hi),))

    @classmethod
    def open(cls, lo: float, hi: float) -> "IntervalUnion":
        return cls((Interval(lo, hi, False, False),))

    @classmethod
    def from_list(cls, rows: Sequence[Sequence]) -> "IntervalUnion":
        intervals = []
        for index, row in enumerate(rows):
            if not isinstance(row, (list, tuple)) or len(row) != 4:
                raise InputError(
                    f"Interval #{index} must be [lo, hi, lo_closed, hi_closed], got {row!r}"
                )
            lo, hi, lo_closed, hi_closed = row
            try:
                lo, hi = float(lo), float(hi)
            except (TypeError, ValueError):
                raise InputError(f"Interval #{index} has non-numeric endpoints: {row!r}")
            intervals.append(Interval(lo, hi, bool(lo_closed), bool(hi_closed)))
        return cls(tuple(intervals))

    def to_list(self) -> List[list]:
        return [i.to_list() for i in self.intervals]

    # ----------------------------
    # Queries
    # ----------------------------

    @property
    def is_empty(self) -> bool:
        return len(self.intervals) == 0

    def min(self) -> float:
        self._require_nonempty()
        return self.intervals[0].lo

    def max(self) -> float:
        self._require_nonempty()
        return self.intervals[-1].hi

    def contains(self, x: float) -> bool:
        return any(i.contains(x) for i in self.intervals)

    def membership(self, x: float, tol: float) -> Tuple[bool, bool]:
        """Closed comparison with tolerance.

        Returns ``(inside, ambiguous)``. ``ambiguous`` marks points whose
        membership could flip within ``tol``: next to an open endpoint, or just
        outside a closed one.
        """
        inside = False
        ambiguous = False
        for i in self.intervals:
            if i.lo - tol <= x <= i.hi + tol:
                inside = True
            for end, closed, outward in (
                (i.lo, i.lo_closed, x < i.lo),
                (i.hi, i.hi_closed, x > i.hi),
            ):
                if math.isinf(end) or abs(x - end) > tol:
                    continue
                if not closed or outward:
                    ambiguous = True
        return inside, ambiguous

    def hull(self) -> Optional[Interval]:
        if self.is_empty:
            return None
        first, last = self.intervals[0], self.intervals[-1]
        return Interval(first.lo, last.hi, first.lo_closed, last.hi_closed)

    def intersects(self, other: "IntervalUnion") -> bool:
        return any(a.intersects(b) for a in self.intervals for b in other.intervals)

    def hull_intersects(self, other: "IntervalUnion") -> bool:
        """conv.hull(self) ∩ other ≠ ∅"""
        hull = self.hull()
        if hull is None:
            return False
        return any(hull.intersects(b) for b in other.intervals)

    def _require_nonempty(self):
        if self.is_empty:
            raise InputError("Operation needs a nonempty interval union")

    # ----------------------------
    # Set algebra
    # ----------------------------

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.intervals + other.intervals)

    def complement(self) -> "IntervalUnion":
        pieces: List[Interval] = []
        lo, lo_closed = -math.inf, False
        for i in self.intervals:
            if lo < i.lo or (lo == i.lo and lo_closed and not i.lo_closed):
                pieces.append(Interval(lo, i.lo, lo_closed, not i.lo_closed))
            lo, lo_closed = i.hi, not i.hi_closed
        if lo < math.inf:
            pieces.append(Interval(lo, math.inf, lo_closed, False))
        return IntervalUnion(tuple(pieces))

    def neighborhood(self, eps: float) -> "IntervalUnion":
        """Open ε-neighborhood: ∪ (lo−ε, hi+ε), merged where overlapping."""
        if not eps > 0:
            raise InputError(f"Neighborhood radius must be positive, got {eps}")
        return IntervalUnion(
            tuple(Interval(i.lo - eps, i.hi + eps, False, False) for i in self.intervals)
        )

    def distance(self, other: "IntervalUnion") -> float:
        """inf |x − y| over the two sets, from endpoints only."""
        if self.is_empty or other.is_empty:
            raise InputError("Distance between sets needs two nonempty sets")
        best = math.inf
        for a in self.intervals:
            for b in other.intervals:
                best = min(best, max(0.0, b.lo - a.hi, a.lo - b.hi))
        return best

    def scaled(self, factor: float) -> "IntervalUnion":
        if not factor > 0:
            raise InputError(f"Scale factor must be positive, got {factor}")
        return IntervalUnion(
            tuple(
                Interval(i.lo * factor, i.hi * factor, i.lo_closed, i.hi_closed)
                for i in self.intervals
            )
        )
