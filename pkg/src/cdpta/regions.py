"""Exact k-regions, corner points, time successors and resets.

A k-region is stored as integer data scaled by ``k``: ``h[x] = k * h(x)``,
plus an ordered partition of clock ids by fractional part. ``classes[0]``
holds the clocks whose value is exactly ``h(x)`` and may be empty; every
later class is non-empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .model import ClockConstraint, OutsideDomain, ProbEdge, Valuation


class OutOfRange(ValueError):
    pass


class NotInRegion(ValueError):
    pass


class OutsideClosure(ValueError):
    pass


@dataclass(frozen=True)
class KRegion:
    k: int
    ceiling: int
    h: tuple[int, ...]
    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if any(not c for c in self.classes[1:]):
            raise ValueError("only the first class may be empty")
        top = self.k * self.ceiling
        if any(self.h[x] >= top for c in self.classes[1:] for x in c):
            raise ValueError("clocks at the ceiling must have zero fractional part")

    @property
    def n_clocks(self) -> int:
        return len(self.h)

    @property
    def n(self) -> int:
        """Number of non-zero fractional classes."""
        return len(self.classes) - 1

    def value(self, x: int) -> Fraction:
        return Fraction(self.h[x], self.k)

    def is_punctual(self, x: int) -> bool:
        return x in self.classes[0]

    def __contains__(self, v: Sequence) -> bool:
        return contains(self, v)

    def format(self, names: Sequence[str] | None = None) -> str:
        """Canonical text form, e.g. ``k=2;h=x:1/2,y:0;classes=[{y}|{x}]``."""
        if names is None:
            names = [f"x{i}" for i in range(self.n_clocks)]
        h = ",".join(f"{names[x]}:{self.value(x)}" for x in range(self.n_clocks))
        classes = "|".join("{" + ",".join(names[x] for x in c) + "}" for c in self.classes)
        return f"k={self.k};h={h};classes=[{classes}]"

    def __str__(self) -> str:
        return self.format()


def _canon(k: int, ceiling: int, h: Iterable[int], classes: Iterable[Iterable[int]]) -> KRegion:
    classes = list(classes)
    rest = [tuple(sorted(c)) for c in classes[1:] if c]
    return KRegion(k, ceiling, tuple(h), (tuple(sorted(classes[0])),) + tuple(rest))


def zero_region(n_clocks: int, k: int, ceiling: int) -> KRegion:
    return KRegion(k, ceiling, (0,) * n_clocks, (tuple(range(n_clocks)),))


def region_of(v: Sequence, k: int, ceiling: int) -> KRegion:
    """The unique k-region containing ``v``."""
    if k < 1:
        raise ValueError("granularity must be positive")
    h, frac = [], []
    for x, value in enumerate(v):
        value = Fraction(value)
        if value < 0 or value > ceiling:
            raise OutOfRange(f"clock {x} value {value} outside [0, {ceiling}]")
        scaled = value * k
        whole = math.floor(scaled)
        h.append(whole)
        frac.append(scaled - whole)
    zero = [x for x in range(len(h)) if frac[x] == 0]
    levels = sorted({f for f in frac if f != 0})
    classes = [zero] + [[x for x in range(len(h)) if frac[x] == f] for f in levels]
    return _canon(k, ceiling, h, classes)


def contains(R: KRegion, v: Sequence) -> bool:
    """Membership by the three defining conditions, checked directly."""
    k = R.k
    index = {x: i for i, c in enumerate(R.classes) for x in c}
    frac = {}
    for x, value in enumerate(v):
        scaled = Fraction(value) * k
        if math.floor(scaled) != R.h[x]:
            return False
        frac[x] = scaled - math.floor(scaled)
    zero = set(R.classes[0])
    if any((frac[x] == 0) != (x in zero) for x in frac):
        return False
    for x in frac:
        for y in frac:
            if (frac[x] <= frac[y]) != (index[x] <= index[y]):
                return False
    return True


def corners_scaled(R: KRegion) -> list[tuple[int, ...]]:
    """Corner points as integer tuples scaled by ``k``; corner ``i`` keeps
    classes ``0..i`` at ``h`` and lifts later classes by one grid step."""
    out = []
    for i in range(R.n + 1):
        lifted = {x for c in R.classes[i + 1:] for x in c}
        out.append(tuple(hx + (1 if x in lifted else 0) for x, hx in enumerate(R.h)))
    return out


def corners(R: KRegion) -> list[Valuation]:
    return [tuple(Fraction(a, R.k) for a in alpha) for alpha in corners_scaled(R)]


def immediate_successor(R: KRegion) -> KRegion | None:
    """The next region reached by letting time pass, or ``None`` when some
    clock already sits at the ceiling."""
    top = R.k * R.ceiling
    zero = R.classes[0]
    if any(R.h[x] >= top for x in zero):
        return None
    if zero:
        return KRegion(R.k, R.ceiling, R.h, ((),) + R.classes)
    last = R.classes[-1]
    h = list(R.h)
    for x in last:
        h[x] += 1
    return KRegion(R.k, R.ceiling, tuple(h), (last,) + R.classes[1:-1])


def region_satisfies(R: KRegion, psi: ClockConstraint) -> bool:
    """True iff every valuation of ``R`` satisfies ``psi``."""
    k = R.k
    zero = R.classes[0]
    for a in psi.atoms:
        hx = R.h[a.clock]
        ck = a.bound * k
        if a.clock in zero:
            ok = {"<": hx < ck, "<=": hx <= ck, ">=": hx >= ck, ">": hx > ck}[a.op]
        elif a.op in ("<", "<="):
            ok = hx + 1 <= ck
        else:
            ok = hx >= ck
        if not ok:
            return False
    return True


def time_successors(R: KRegion, psi: ClockConstraint) -> list[KRegion]:
    """Regions reachable by letting time pass while ``psi`` holds throughout."""
    out = []
    current = R
    while current is not None and region_satisfies(current, psi):
        out.append(current)
        current = immediate_successor(current)
    return out


def reset_region(R: KRegion, X: Iterable[int]) -> KRegion:
    X = set(X)
    if not X:
        return R
    h = tuple(0 if x in X else hx for x, hx in enumerate(R.h))
    classes = [set(R.classes[0]) | X] + [set(c) - X for c in R.classes[1:]]
    return _canon(R.k, R.ceiling, h, classes)


def parent_region(R: KRegion, k: int) -> KRegion:
    """The unique k-region containing the finer region ``R`` (``k`` divides ``R.k``)."""
    if R.k % k:
        raise ValueError(f"{k} does not divide {R.k}")
    c = R.k // k
    index = {x: i for i, cl in enumerate(R.classes) for x in cl}
    h = [hx // c for hx in R.h]
    key = {x: (R.h[x] % c, index[x]) for x in range(R.n_clocks)}
    zero = [x for x in range(R.n_clocks) if key[x] == (0, 0)]
    levels = sorted({key[x] for x in range(R.n_clocks)} - {(0, 0)})
    classes = [zero] + [[x for x in range(R.n_clocks) if key[x] == lv] for lv in levels]
    return _canon(k, R.ceiling, h, classes)


def closure_weights(point: Sequence, R: KRegion) -> dict[Valuation, Fraction]:
    """Convex weights of ``point`` over the corners of ``R`` (point must lie
    in the closure of ``R``). Weights are the gaps between consecutive
    class fractional parts."""
    k = R.k
    phi = []
    for i, cl in enumerate(R.classes):
        vals = {Fraction(point[x]) * k - R.h[x] for x in cl}
        if i == 0 and not vals:
            vals = {Fraction(0)}
        if len(vals) != 1:
            raise NotInRegion("point is not in the region closure")
        phi.append(vals.pop())
    if phi[0] != 0 or any(not 0 <= f <= 1 for f in phi):
        raise NotInRegion("point is not in the region closure")
    if any(a > b for a, b in zip(phi[1:], phi[2:])):
        raise NotInRegion("point is not in the region closure")
    seq = phi[1:] + [Fraction(1)]
    weights = [seq[0]] + [b - a for a, b in zip(seq, seq[1:])]
    # corner i lifts classes > i, so weight of corner i is phi_{i+1} - phi_i
    out: dict[Valuation, Fraction] = {}
    for alpha, w in zip(corners(R), weights):
        out[alpha] = w
    return out


def barycentric_weights(v: Sequence, R: KRegion) -> dict[Valuation, Fraction]:
    if not contains(R, v):
        raise NotInRegion("valuation is not in the region")
    return closure_weights(v, R)


def eval_template_at_corner(edge: ProbEdge, alpha: Sequence) -> dict[int, Fraction]:
    """Outcome probabilities at a corner point, using continuous extension
    of each piece to its closure."""
    try:
        return {i: o.probability_at_closure(alpha) for i, o in enumerate(edge.outcomes)}
    except OutsideDomain as exc:
        raise OutsideClosure(str(exc)) from exc
