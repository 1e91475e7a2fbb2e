"""Clock-dependent probabilistic timed automata: syntax and well-formedness.

A model is a set of locations with clock invariants and a list of
probabilistic edges. Each edge has a guard and a list of outcomes; the
probability of an outcome at valuation ``v`` is the sum over clocks of a
continuous piecewise linear function of ``v(x)``. All arithmetic is exact
(:class:`fractions.Fraction`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

OPS = ("<", "<=", ">=", ">")

# A clock valuation is a tuple of non-negative rationals indexed by clock id.
Valuation = tuple[Fraction, ...]


class ModelError(ValueError):
    """Raised when a model is structurally malformed (bad ids, bad ops)."""


class GuardUnsatisfied(ValueError):
    pass


class InvariantViolated(ValueError):
    pass


class OutsideDomain(ValueError):
    """A piecewise linear function was evaluated outside its pieces."""


def valuation(*values) -> Valuation:
    return tuple(Fraction(v) for v in values)


# ---------------------------------------------------------------------------
# Constraints and intervals


@dataclass(frozen=True)
class Interval:
    """A (possibly empty) interval of clock values with open/closed ends.

    ``hi`` is ``None`` for an unbounded interval.
    """

    lo: Fraction = Fraction(0)
    lo_open: bool = False
    hi: Fraction | None = None
    hi_open: bool = False

    @property
    def empty(self) -> bool:
        if self.hi is None:
            return False
        if self.lo < self.hi:
            return False
        return self.lo > self.hi or self.lo_open or self.hi_open

    def __contains__(self, value) -> bool:
        if value < self.lo or (self.lo_open and value == self.lo):
            return False
        if self.hi is None:
            return True
        return value < self.hi or (not self.hi_open and value == self.hi)

    def __and__(self, other: Interval) -> Interval:
        if self.lo > other.lo:
            lo, lo_open = self.lo, self.lo_open
        elif other.lo > self.lo:
            lo, lo_open = other.lo, other.lo_open
        else:
            lo, lo_open = self.lo, self.lo_open or other.lo_open
        if self.hi is None:
            hi, hi_open = other.hi, other.hi_open
        elif other.hi is None or self.hi < other.hi:
            hi, hi_open = self.hi, self.hi_open
        elif other.hi < self.hi:
            hi, hi_open = other.hi, other.hi_open
        else:
            hi, hi_open = self.hi, self.hi_open or other.hi_open
        return Interval(lo, lo_open, hi, hi_open)

    def complement_parts(self, within: Interval) -> list[Interval]:
        """Sub-intervals of ``within`` lying outside ``self``."""
        parts = []
        below = Interval(Fraction(0), False, self.lo, not self.lo_open)
        parts.append(below & within)
        if self.hi is not None:
            parts.append(Interval(self.hi, not self.hi_open, None, False) & within)
        return [p for p in parts if not p.empty]

    def __str__(self) -> str:
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open or self.hi is None else "]"
        hi = "inf" if self.hi is None else str(self.hi)
        return f"{left}{self.lo},{hi}{right}"


@dataclass(frozen=True)
class Clock:
    id: int
    name: str


@dataclass(frozen=True)
class ConstraintAtom:
    """``x op bound`` for a clock id ``x``."""

    clock: int
    op: str
    bound: int

    def __post_init__(self):
        if self.op not in OPS:
            raise ModelError(f"unknown comparison {self.op!r}")
        if isinstance(self.bound, bool) or not isinstance(self.bound, int) or self.bound < 0:
            raise ModelError(f"constraint bound must be a natural number, got {self.bound!r}")

    def holds(self, value) -> bool:
        c = self.bound
        if self.op == "<":
            return value < c
        if self.op == "<=":
            return value <= c
        if self.op == ">=":
            return value >= c
        return value > c

    def interval(self) -> Interval:
        c = Fraction(self.bound)
        if self.op == "<":
            return Interval(Fraction(0), False, c, True)
        if self.op == "<=":
            return Interval(Fraction(0), False, c, False)
        if self.op == ">=":
            return Interval(c, False, None, False)
        return Interval(c, True, None, False)

    @property
    def is_upper(self) -> bool:
        return self.op in ("<", "<=")


@dataclass(frozen=True)
class ClockConstraint:
    """Conjunction of atoms; the empty conjunction is ``true``."""

    atoms: tuple[ConstraintAtom, ...] = ()

    def __and__(self, other: ClockConstraint) -> ClockConstraint:
        return ClockConstraint(self.atoms + tuple(a for a in other.atoms if a not in self.atoms))

    def box(self, n_clocks: int) -> tuple[Interval, ...]:
        box = [Interval() for _ in range(n_clocks)]
        for atom in self.atoms:
            box[atom.clock] = box[atom.clock] & atom.interval()
        return tuple(box)

    @property
    def max_constant(self) -> int:
        return max((a.bound for a in self.atoms), default=0)


TRUE = ClockConstraint()


def atom(clock: int, op: str, bound: int) -> ConstraintAtom:
    return ConstraintAtom(clock, op, bound)


def conj(*atoms: ConstraintAtom) -> ClockConstraint:
    return ClockConstraint(tuple(atoms))


def satisfies(v: Sequence, psi: ClockConstraint) -> bool:
    return all(a.holds(v[a.clock]) for a in psi.atoms)


# ---------------------------------------------------------------------------
# Piecewise linear functions


@dataclass(frozen=True)
class Piece:
    """``gamma -> c + d * gamma`` on ``[lo, hi)``."""

    lo: int
    hi: int
    c: Fraction
    d: Fraction

    def __call__(self, gamma) -> Fraction:
        return self.c + self.d * gamma


@dataclass(frozen=True)
class PiecewiseLinearFn:
    pieces: tuple[Piece, ...] = ()

    @classmethod
    def affine(cls, lo: int, hi: int, c, d=0) -> PiecewiseLinearFn:
        return cls((Piece(lo, hi, Fraction(c), Fraction(d)),))

    @property
    def lo(self) -> int:
        return self.pieces[0].lo

    @property
    def hi(self) -> int:
        return self.pieces[-1].hi

    def __call__(self, gamma) -> Fraction:
        """Evaluate with the half-open convention; ``hi`` itself is
        evaluated by continuous extension of the last piece."""
        if not self.pieces:
            return Fraction(0)
        for p in self.pieces:
            if p.lo <= gamma < p.hi:
                return p(gamma)
        if gamma == self.hi:
            return self.pieces[-1](gamma)
        raise OutsideDomain(f"{gamma} outside [{self.lo},{self.hi}]")

    def at_closure(self, gamma) -> Fraction:
        """Evaluate using the first piece whose closure contains ``gamma``."""
        if not self.pieces:
            return Fraction(0)
        for p in self.pieces:
            if p.lo <= gamma <= p.hi:
                return p(gamma)
        raise OutsideDomain(f"{gamma} outside [{self.lo},{self.hi}]")

    def breakpoints(self) -> list[int]:
        if not self.pieces:
            return []
        return [p.lo for p in self.pieces] + [self.hi]

    def problems(self) -> list[str]:
        """Structural problems: empty pieces, gaps, overlaps, discontinuities."""
        out = []
        for p in self.pieces:
            if p.lo >= p.hi:
                out.append(f"empty piece [{p.lo},{p.hi})")
        for a, b in zip(self.pieces, self.pieces[1:]):
            if a.hi != b.lo:
                out.append(f"pieces not contiguous at {a.hi}/{b.lo}")
            elif a(a.hi) != b(b.lo):
                out.append(f"discontinuity at {a.hi}: {a(a.hi)} vs {b(b.lo)}")
        return out

    def sup_on(self, interval: Interval) -> tuple[Fraction, Fraction]:
        """Maximum over the closure of a non-empty bounded interval, with argmax."""
        lo, hi = interval.lo, interval.hi
        points = [lo, hi] + [b for b in self.breakpoints() if lo < b < hi]
        best = max(points, key=lambda g: (self.at_closure(g), -g))
        return self.at_closure(best), best


ZERO_FN = PiecewiseLinearFn()


# ---------------------------------------------------------------------------
# Locations, edges, models


@dataclass(frozen=True)
class Outcome:
    """One branch of a probabilistic edge: reset set, target, per-clock addends."""

    reset: frozenset[int]
    target: int
    weights: tuple[tuple[int, PiecewiseLinearFn], ...] = ()

    def fn(self, clock: int) -> PiecewiseLinearFn:
        for x, f in self.weights:
            if x == clock:
                return f
        return ZERO_FN

    def probability(self, v: Sequence) -> Fraction:
        return sum((f(v[x]) for x, f in self.weights), Fraction(0))

    def probability_at_closure(self, v: Sequence) -> Fraction:
        return sum((f.at_closure(v[x]) for x, f in self.weights), Fraction(0))


@dataclass(frozen=True)
class ProbEdge:
    source: int
    guard: ClockConstraint
    outcomes: tuple[Outcome, ...]


@dataclass(frozen=True)
class Location:
    id: int
    name: str
    invariant: ClockConstraint = TRUE


def reset_valuation(v: Sequence, reset: Iterable[int]) -> Valuation:
    reset = set(reset)
    return tuple(Fraction(0) if i in reset else Fraction(x) for i, x in enumerate(v))


def delay(v: Sequence, t) -> Valuation:
    return tuple(Fraction(x) + t for x in v)


@dataclass(frozen=True)
class CdPta:
    clocks: tuple[Clock, ...]
    locations: tuple[Location, ...]
    initial: int
    edges: tuple[ProbEdge, ...]

    def __post_init__(self):
        n = len(self.clocks)
        for i, c in enumerate(self.clocks):
            if c.id != i:
                raise ModelError("clock ids must be dense 0..n-1")
        if len({c.name for c in self.clocks}) != n:
            raise ModelError("clock names must be unique")
        for i, loc in enumerate(self.locations):
            if loc.id != i:
                raise ModelError("location ids must be dense 0..n-1")
        if len({loc.name for loc in self.locations}) != len(self.locations):
            raise ModelError("location names must be unique")
        if not 0 <= self.initial < len(self.locations):
            raise ModelError("initial location out of range")
        for constraint in [loc.invariant for loc in self.locations] + [e.guard for e in self.edges]:
            for a in constraint.atoms:
                if not 0 <= a.clock < n:
                    raise ModelError(f"constraint on unknown clock id {a.clock}")
        for j, e in enumerate(self.edges):
            if not 0 <= e.source < len(self.locations):
                raise ModelError(f"edge {j}: unknown source")
            for o in e.outcomes:
                if not 0 <= o.target < len(self.locations):
                    raise ModelError(f"edge {j}: unknown target")
                if any(not 0 <= x < n for x in o.reset):
                    raise ModelError(f"edge {j}: reset of unknown clock")
                if any(not 0 <= x < n for x, _ in o.weights):
                    raise ModelError(f"edge {j}: weight on unknown clock")

    @cached_property
    def ceiling(self) -> int:
        """The clock ceiling M: largest constant in constraints or piece endpoints."""
        consts = [loc.invariant.max_constant for loc in self.locations]
        consts += [e.guard.max_constant for e in self.edges]
        for e in self.edges:
            for o in e.outcomes:
                for _, f in o.weights:
                    consts.extend(f.breakpoints())
        return max(consts, default=0)

    @cached_property
    def guards(self) -> tuple[ClockConstraint, ...]:
        """Guards conjoined with the source invariant."""
        return tuple(e.guard & self.locations[e.source].invariant for e in self.edges)

    @cached_property
    def guard_boxes(self) -> tuple[tuple[Interval, ...], ...]:
        return tuple(g.box(len(self.clocks)) for g in self.guards)

    @cached_property
    def edges_by_source(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in self.locations]
        for j, e in enumerate(self.edges):
            out[e.source].append(j)
        return tuple(tuple(x) for x in out)

    def location_id(self, name: str) -> int:
        for loc in self.locations:
            if loc.name == name:
                return loc.id
        raise KeyError(name)

    def clock_id(self, name: str) -> int:
        for c in self.clocks:
            if c.name == name:
                return c.id
        raise KeyError(name)

    def zero(self) -> Valuation:
        return tuple(Fraction(0) for _ in self.clocks)


# ---------------------------------------------------------------------------
# Semantics helpers


def eval_template(edge: ProbEdge, v: Sequence) -> dict[int, Fraction]:
    """Outcome probabilities of ``edge`` at ``v``, keyed by outcome index."""
    if not satisfies(v, edge.guard):
        raise GuardUnsatisfied(f"valuation {tuple(map(str, v))} does not satisfy guard")
    return {i: o.probability(v) for i, o in enumerate(edge.outcomes)}


def enabled_edges(model: CdPta, loc: int, v: Sequence) -> list[int]:
    if not satisfies(v, model.locations[loc].invariant):
        raise InvariantViolated(f"valuation violates invariant of {model.locations[loc].name}")
    return [j for j in model.edges_by_source[loc] if satisfies(v, model.guards[j])]


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    where: str
    message: str
    witness: tuple[Fraction, ...] | None = None
    severity: str = "error"

    def __str__(self) -> str:
        s = f"{self.severity}: [{self.kind}] {self.where}: {self.message}"
        if self.witness is not None:
            s += " at (" + ", ".join(str(w) for w in self.witness) + ")"
        return s


def _edge_name(model: CdPta, j: int) -> str:
    return f"edge {j} (from {model.locations[model.edges[j].source].name})"


def _grid_points(model: CdPta, j: int) -> list[list[Fraction]]:
    """Per clock: closure endpoints of the guard interval plus every piece
    breakpoint inside it. Sums of per-clock affine pieces are affine on each
    cell of this grid, so checking the grid is exact."""
    box = model.guard_boxes[j]
    edge = model.edges[j]
    grid = []
    for x, iv in enumerate(box):
        pts = {iv.lo, iv.hi}
        for o in edge.outcomes:
            pts.update(Fraction(b) for b in o.fn(x).breakpoints() if iv.lo < b < iv.hi)
        if not any(o.fn(x).pieces for o in edge.outcomes):
            pts = {iv.lo}
        grid.append(sorted(pts))
    return grid


def check_structure(model: CdPta) -> list[Diagnostic]:
    """All error-level checks (everything except liveness)."""
    diags: list[Diagnostic] = []

    for loc in model.locations:
        bounded = {a.clock for a in loc.invariant.atoms if a.is_upper}
        for c in model.clocks:
            if c.id not in bounded:
                diags.append(Diagnostic("invariant-bound", f"location {loc.name}",
                                        f"invariant has no upper bound on clock {c.name}"))
    if not satisfies(model.zero(), model.locations[model.initial].invariant):
        diags.append(Diagnostic("initial-invariant", f"location {model.locations[model.initial].name}",
                                "zero valuation violates the initial invariant", model.zero()))

    for j, edge in enumerate(model.edges):
        where = _edge_name(model, j)
        box = model.guard_boxes[j]
        if any(iv.empty for iv in box):
            diags.append(Diagnostic("unsatisfiable-guard", where, "guard is unsatisfiable", severity="warning"))
            continue
        if any(iv.hi is None for iv in box):
            # only reachable when the invariant check above already failed
            continue
        structural = False
        for i, o in enumerate(edge.outcomes):
            for x, f in o.weights:
                name = model.clocks[x].name
                for problem in f.problems():
                    diags.append(Diagnostic("piecewise", f"{where} outcome {i} clock {name}", problem))
                    structural = True
                if f.pieces and (f.lo > box[x].lo or f.hi < box[x].hi):
                    diags.append(Diagnostic("piece-coverage", f"{where} outcome {i} clock {name}",
                                            f"pieces [{f.lo},{f.hi}] do not cover guard interval {box[x]}"))
                    structural = True
        if structural:
            continue

        grid = _grid_points(model, j)
        range_bad = [False] * len(edge.outcomes)
        sum_bad = False
        for point in itertools.product(*grid):
            total = Fraction(0)
            for i, o in enumerate(edge.outcomes):
                p = o.probability_at_closure(point)
                total += p
                if not range_bad[i] and not 0 <= p <= 1:
                    range_bad[i] = True
                    diags.append(Diagnostic("outcome-range", f"{where} outcome {i}",
                                            f"probability {p} outside [0,1]", tuple(point)))
            if not sum_bad and total != 1:
                sum_bad = True
                diags.append(Diagnostic("sum-to-one", where, f"probabilities sum to {total}", tuple(point)))

        for i, o in enumerate(edge.outcomes):
            diags.extend(_target_invariant(model, j, i, box))
    return diags


def _sup_probability(o: Outcome, box: Sequence[Interval]) -> tuple[Fraction, tuple[Fraction, ...]]:
    total = Fraction(0)
    witness = [iv.lo for iv in box]
    for x, f in o.weights:
        value, arg = f.sup_on(box[x])
        total += value
        witness[x] = arg
    return total, tuple(witness)


def _target_invariant(model: CdPta, j: int, i: int, box: Sequence[Interval]) -> list[Diagnostic]:
    """Exact check that every positive-probability reset lands inside the
    target invariant. The violating region is a union of sub-boxes of the
    guard box; an outcome is harmless on a sub-box iff its supremum there is 0."""
    o = model.edges[j].outcomes[i]
    target_box = model.locations[o.target].invariant.box(len(model.clocks))
    bad_boxes = []
    for y, allowed in enumerate(target_box):
        if y in o.reset:
            if 0 not in allowed:
                bad_boxes.append(tuple(box))
        else:
            for part in allowed.complement_parts(box[y]):
                sub = list(box)
                sub[y] = part
                bad_boxes.append(tuple(sub))
    for sub in bad_boxes:
        sup, witness = _sup_probability(o, sub)
        if sup > 0:
            return [Diagnostic("target-invariant", f"{_edge_name(model, j)} outcome {i}",
                               f"reset lands outside invariant of {model.locations[o.target].name}",
                               witness)]
    return []


def validate(model: CdPta) -> list[Diagnostic]:
    """All diagnostics; an empty list means the model is well formed.

    Liveness (some edge available from every reachable region, possibly
    after a delay) is checked on the granularity-1 region graph and reported
    as warnings.
    """
    diags = check_structure(model)
    if any(d.severity == "error" for d in diags):
        return diags
    from .graph import explore

    for loc, region in explore(model, 1).deadlocks():
        diags.append(Diagnostic("liveness", f"location {model.locations[loc].name}",
                                f"no probabilistic edge available from region {region}",
                                severity="warning"))
    return diags


def errors(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]
