"""Random small cdPTAs and random schedules for property tests.

Models have at most 2 clocks, 4 locations and ceiling 2. Templates are
built so that the outcome probabilities always form a distribution: each
driving clock owns an equal share of the mass and splits it between the
outcomes by piecewise linear interpolation of random quarter-grid
distributions at the integer points. The last location is a sink
meant to be used as the target. Candidates are rejection-sampled until
validation reports nothing at all.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

from cdpta.concrete import ConcreteState, Schedule
from cdpta.model import (
    CdPta,
    Clock,
    ClockConstraint,
    ConstraintAtom,
    Location,
    Outcome,
    Piece,
    PiecewiseLinearFn,
    ProbEdge,
    delay,
    reset_valuation,
    satisfies,
    validate,
)
from cdpta.regions import region_of

# fixed seeds for deterministic suites; the tail ones give k-dependent values
SEEDS = list(range(20)) + [38, 45, 46, 49, 55, 57, 72, 92, 123]


def _split(rng: random.Random, parts: int, units: int = 4) -> list[Fraction]:
    """Random composition of 1 into ``parts`` multiples of ``1/units``."""
    cuts = sorted(rng.randint(0, units) for _ in range(parts - 1))
    bounds = [0] + cuts + [units]
    return [Fraction(b - a, units) for a, b in zip(bounds, bounds[1:])]


def _interpolate(values: list[Fraction]) -> PiecewiseLinearFn:
    pieces = []
    for b, (lo, hi) in enumerate(zip(values, values[1:])):
        d = hi - lo
        pieces.append(Piece(b, b + 1, lo - d * b, d))
    return PiecewiseLinearFn(tuple(pieces))


def _candidate(rng: random.Random) -> CdPta:
    n = rng.randint(1, 2)
    n_locs = rng.choice((2, 3, 4, 4))
    M = rng.randint(1, 2)
    clocks = tuple(Clock(i, f"x{i}") for i in range(n))
    locations = []
    for i in range(n_locs):
        atoms = [ConstraintAtom(x, "<=", M) if rng.random() < 0.7
                 else ConstraintAtom(x, rng.choice(("<=", "<")), rng.randint(1, M)) for x in range(n)]
        locations.append(Location(i, f"l{i}", ClockConstraint(tuple(atoms))))
    edges = []
    # the last location (the usual target) and, with 3+ locations, the one
    # before it are sinks, so that values are not all 0 or 1
    sinks = range(max(1, n_locs - 2), n_locs)
    for src in sinks:
        everything = frozenset(range(n))
        loop = Outcome(everything, src, ((0, PiecewiseLinearFn((Piece(0, M, Fraction(1), Fraction(0)),))),))
        edges.append(ProbEdge(src, ClockConstraint(), (loop,)))
    # mostly forward edges: retry loops tend to push values to 0 or 1
    forward = rng.random() < 0.7
    for src in range(n_locs):
        if src in sinks:
            continue
        succ = range(src + 1, n_locs) if forward else range(n_locs)
        for _ in range(rng.randint(1, 2)):
            atoms = []
            for x in range(n):
                if rng.random() < 0.5:
                    atoms.append(ConstraintAtom(x, rng.choice(("<", "<=", ">=", ">")), rng.randint(0, M)))
            r = rng.randint(1, 3)
            drivers = rng.sample(range(n), rng.randint(1, n))
            share = Fraction(1, len(drivers))
            weights = [[] for _ in range(r)]
            for x in drivers:
                at_points = [_split(rng, r) for _ in range(M + 1)]
                for i in range(r):
                    weights[i].append((x, _interpolate([share * p[i] for p in at_points])))
            outcomes = tuple(
                Outcome(frozenset(x for x in range(n) if rng.random() < 0.15), rng.choice(succ),
                        tuple(sorted(weights[i])))
                for i in range(r)
            )
            edges.append(ProbEdge(src, ClockConstraint(tuple(atoms)), outcomes))
    return CdPta(clocks, tuple(locations), 0, tuple(edges))


def _chain_candidate(rng: random.Random) -> CdPta:
    """``l0 -> l1 -> ... -> target`` with leaks into a trap; each step
    succeeds with a probability linear in one clock, which makes the best
    delays interior and the values depend on the granularity."""
    n = rng.randint(1, 2)
    M = rng.randint(1, 2)
    steps = rng.randint(1, 2)
    names = [f"l{i}" for i in range(steps)] + ["trap", "goal"]
    trap, goal = steps, steps + 1
    clocks = tuple(Clock(i, f"x{i}") for i in range(n))
    locations = []
    for i, name in enumerate(names):
        atoms = tuple(ConstraintAtom(x, rng.choice(("<", "<=")) if i < steps else "<=", M) for x in range(n))
        locations.append(Location(i, name, ClockConstraint(atoms)))
    edges = []
    for src in (trap, goal):
        loop = Outcome(frozenset(range(n)), src, ((0, PiecewiseLinearFn((Piece(0, M, Fraction(1), Fraction(0)),))),))
        edges.append(ProbEdge(src, ClockConstraint(), (loop,)))
    for i in range(steps):
        x = rng.randrange(n)
        ends = [Fraction(rng.randint(0, 4), 4) for _ in range(M + 1)]
        ok = _interpolate(ends)
        fail = _interpolate([1 - e for e in ends])
        guard = ClockConstraint((ConstraintAtom(x, "<", M),)) if rng.random() < 0.5 else ClockConstraint()
        edges.append(ProbEdge(i, guard, (
            Outcome(frozenset(), i + 1 if i + 1 < steps else goal, ((x, ok),)),
            Outcome(frozenset(), trap, ((x, fail),)),
        )))
    return CdPta(clocks, tuple(locations), 0, tuple(edges))


def random_cdpta(rng: random.Random, tries: int = 10_000) -> CdPta:
    for _ in range(tries):
        model = _chain_candidate(rng) if rng.random() < 0.4 else _candidate(rng)
        if not validate(model):
            return model
    raise RuntimeError("no valid model found")


def random_schedule(model: CdPta, rng: random.Random, depth: int,
                    start: ConcreteState | None = None, grid: int = 4) -> Schedule | None:
    """A random legal schedule tree with delays on a ``1/grid`` lattice."""
    start = start or ConcreteState(model.initial, model.zero())

    def node(loc: int, v, left: int) -> Schedule | None:
        if left == 0:
            return None
        inv = model.locations[loc].invariant
        options = []
        for i in range((model.ceiling + 1) * grid + 1):
            d = Fraction(i, grid)
            after = delay(v, d)
            if not satisfies(after, inv):
                break
            options += [(d, j, after) for j in model.edges_by_source[loc] if satisfies(after, model.guards[j])]
        if not options:
            return None
        d, j, after = rng.choice(options)
        children = {}
        for oi, o in enumerate(model.edges[j].outcomes):
            if o.probability(after) and rng.random() < 0.9:
                child = node(o.target, reset_valuation(after, o.reset), left - 1)
                if child is not None:
                    children[oi] = child
        return Schedule(d, j, children)

    return node(start.location, tuple(start.valuation), depth)


def all_regions(n: int, k: int, M: int):
    """Every k-region over ``n`` clocks, via a lattice fine enough to hit each."""
    steps = [Fraction(j, (n + 1) * k) for j in range((n + 1) * k * M + 1)]
    return sorted({region_of(v, k, M) for v in product(steps, repeat=n)},
                  key=lambda R: (R.h, R.classes))


def random_valuation(rng: random.Random, n: int, M: int, den: int):
    return tuple(Fraction(rng.randint(0, M * den), den) for _ in range(n))
