"""Closed intervals and the multi-clock reconciliation calculus.

Intervals carry seconds.  An empty intersection is a value (``Interval.EMPTY``),
not an exception: statistical bounds legitimately produce it and the caller
decides what to do.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Iterable


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    empty: bool = False

    EMPTY: ClassVar["Interval"]

    def __post_init__(self):
        if not self.empty and self.lo > self.hi:
            raise ValueError(f"lo > hi: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo

    @property
    def mid(self) -> float:
        if self.empty:
            raise ValueError("empty interval has no midpoint")
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return not self.empty and self.lo - tol <= x <= self.hi + tol

    def issubset(self, other: "Interval", tol: float = 0.0) -> bool:
        if self.empty:
            return True
        if other.empty:
            return False
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol

    def __neg__(self) -> "Interval":
        return affine(self, -1.0, 0.0)

    def __add__(self, offset: float) -> "Interval":
        return affine(self, 1.0, offset)

    __radd__ = __add__

    def __sub__(self, offset: float) -> "Interval":
        return affine(self, 1.0, -offset)

    def __rsub__(self, offset: float) -> "Interval":
        return affine(self, -1.0, offset)

    def __repr__(self) -> str:
        return "Interval.EMPTY" if self.empty else f"Interval({self.lo!r}, {self.hi!r})"


Interval.EMPTY = Interval(float("nan"), float("nan"), empty=True)


@dataclass(frozen=True)
class ClockReading:
    """One per-server clock instance: its reading of the event at true time 0.

    ``value`` is C_a(0) and ``a_param`` the configuration parameter a, so the
    zero-parameter reading C_0(0) is ``value + a_param / 2``.
    """

    value: float
    a_param: float
    asym_interval: Interval

    @property
    def c0(self) -> float:
        return self.value + 0.5 * self.a_param

    def clock_interval(self) -> Interval:
        return affine(self.asym_interval, -0.5, self.c0)


def affine(iv: Interval, scale: float, offset: float) -> Interval:
    if iv.empty:
        raise ValueError("affine map of an empty interval")
    a, b = scale * iv.lo + offset, scale * iv.hi + offset
    return Interval(min(a, b), max(a, b))


def clock_interval(r_min: float, asym: float) -> Interval:
    """Clock interval at true time 0 with a = 0 and the default bound [-r, r].

    The reading is C_0(0) = asym/2, giving [asym/2 - r/2, asym/2 + r/2].
    """
    if r_min < 0 or abs(asym) > r_min:
        raise ValueError(f"need |asym| <= r_min, got asym={asym}, r_min={r_min}")
    return affine(Interval(-r_min, r_min), -0.5, 0.5 * asym)


def intersect_all(ivs: Iterable[Interval]) -> Interval:
    ivs = list(ivs)
    if not ivs:
        raise ValueError("intersect_all needs at least one interval")
    if any(iv.empty for iv in ivs):
        return Interval.EMPTY
    lo = max(iv.lo for iv in ivs)
    hi = min(iv.hi for iv in ivs)
    if lo > hi:
        return Interval.EMPTY
    return Interval(lo, hi)


def update_asym_bound(reading: ClockReading, reconciled: Interval) -> Interval:
    """Tightened asymmetry interval once the reconciled time interval is known.

    new bound = 2*C_0(0) - 2*reconciled
    """
    if reconciled.empty:
        raise ValueError("cannot update from an empty reconciled interval")
    if not reconciled.issubset(reading.clock_interval(), tol=1e-12 * max(1.0, abs(reading.c0))):
        raise ValueError("reconciled interval must lie inside the clock interval")
    return affine(reconciled, -2.0, 2.0 * reading.c0)
