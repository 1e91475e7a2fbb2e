"""Exact evaluation of finite schedules on the concrete (infinite-state) semantics.

A schedule is a finite decision tree. Each node says how long to wait and
which edge to take; its children are indexed by the outcome that was drawn.
A missing child stops the run.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .model import (
    CdPta,
    Valuation,
    delay as delay_by,
    reset_valuation,
    satisfies,
)

DEFAULT_NODE_BUDGET = 5_000_000


class IllegalDelay(ValueError):
    pass


class EdgeNotEnabled(ValueError):
    pass


class Explosion(RuntimeError):
    pass


@dataclass(frozen=True)
class ConcreteState:
    location: int
    valuation: Valuation


@dataclass
class Schedule:
    delay: Fraction
    edge: int
    children: dict[int, Schedule] = field(default_factory=dict)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children.values()), default=0)

    def delays(self) -> list[Fraction]:
        """Delays along the leftmost path (first child at each node)."""
        out, node = [], self
        while node is not None:
            out.append(node.delay)
            node = node.children[min(node.children)] if node.children else None
        return out


def _check_delay(model: CdPta, loc: int, v: Sequence, d: Fraction) -> Valuation:
    if d < 0:
        raise IllegalDelay(f"negative delay {d}")
    inv = model.locations[loc].invariant
    after = delay_by(v, d)
    # box invariants are convex, so both endpoints suffice
    if not (satisfies(v, inv) and satisfies(after, inv)):
        raise IllegalDelay(f"delay {d} breaks the invariant of {model.locations[loc].name}")
    return after


def schedule_bounds(model: CdPta, schedule: Schedule | None, targets: Iterable[int],
                    start: ConcreteState | None = None) -> tuple[Fraction, Fraction]:
    """Exact ``(reached, reached + open)`` for a finite schedule.

    ``reached`` is the probability of visiting a target within the tree.
    ``open`` is the probability of stopping at a leaf whose location can
    still reach a target, so every extension of the schedule reaches the
    targets with probability in ``[reached, reached + open]``.
    """
    targets = set(targets)
    useful = _can_reach(model, targets)
    if start is None:
        start = ConcreteState(model.initial, model.zero())

    def walk(loc: int, v: Valuation, node: Schedule | None) -> tuple[Fraction, Fraction]:
        if loc in targets:
            return Fraction(1), Fraction(1)
        if node is None:
            return Fraction(0), Fraction(1 if loc in useful else 0)
        after = _check_delay(model, loc, v, Fraction(node.delay))
        if not 0 <= node.edge < len(model.edges):
            raise EdgeNotEnabled(f"no edge {node.edge}")
        edge = model.edges[node.edge]
        if edge.source != loc or not satisfies(after, model.guards[node.edge]):
            raise EdgeNotEnabled(f"edge {node.edge} is not enabled in {model.locations[loc].name}")
        lo = hi = Fraction(0)
        for i, o in enumerate(edge.outcomes):
            p = o.probability(after)
            if p:
                a, b = walk(o.target, reset_valuation(after, o.reset), node.children.get(i))
                lo += p * a
                hi += p * b
        return lo, hi

    return walk(start.location, tuple(Fraction(x) for x in start.valuation), schedule)


def evaluate_schedule(model: CdPta, schedule: Schedule | None, targets: Iterable[int],
                      start: ConcreteState | None = None) -> Fraction:
    """Exact probability of visiting a target location before the tree ends."""
    return schedule_bounds(model, schedule, targets, start)[0]


def _max_delay(model: CdPta, loc: int, v: Sequence) -> tuple[Fraction, bool]:
    """Supremum of admissible delays from ``v`` and whether it is attained."""
    best, attained = Fraction(model.ceiling + 1), True
    for a in model.locations[loc].invariant.atoms:
        if not a.is_upper:
            continue
        room = a.bound - Fraction(v[a.clock])
        closed = a.op == "<="
        if room < best or (room == best and not closed):
            best, attained = room, closed
    return best, attained


def _can_reach(model: CdPta, targets: set[int]) -> set[int]:
    """Locations with a path to a target in the location graph."""
    back: dict[int, set[int]] = {}
    for e in model.edges:
        for o in e.outcomes:
            back.setdefault(o.target, set()).add(e.source)
    seen, stack = set(targets), list(targets)
    while stack:
        for src in back.get(stack.pop(), ()):
            if src not in seen:
                seen.add(src)
                stack.append(src)
    return seen


def node_budget() -> int:
    return int(os.environ.get("CDPTA_NODE_BUDGET", DEFAULT_NODE_BUDGET))


def grid_search(model: CdPta, targets: Iterable[int], m: int, depth: int,
                budget: int | None = None,
                start: ConcreteState | None = None) -> tuple[Schedule | None, Fraction]:
    """Best schedule (for maximal reachability) whose delays are multiples of
    ``1/m``, exhaustive up to ``depth`` edges. Ties keep the lexicographically
    smallest delay sequence. Returns ``(schedule, exact value)``."""
    if m < 1 or depth < 0:
        raise ValueError("need m >= 1 and depth >= 0")
    targets = set(targets)
    budget = node_budget() if budget is None else budget
    if start is None:
        start = ConcreteState(model.initial, model.zero())
    step = Fraction(1, m)
    useful = _can_reach(model, targets)
    memo: dict[tuple[int, Valuation, int], tuple[Fraction, Schedule | None]] = {}
    visited = 0
    edge_cache: dict[tuple[int, Valuation], list | None] = {}

    def successors(j: int, after: Valuation):
        """Non-zero outcomes of edge ``j`` at ``after``, or None if disabled."""
        key = (j, after)
        if key not in edge_cache:
            if not satisfies(after, model.guards[j]):
                edge_cache[key] = None
            else:
                edge_cache[key] = [
                    (oi, p, o.target, reset_valuation(after, o.reset))
                    for oi, o in enumerate(model.edges[j].outcomes)
                    if (p := o.probability(after))
                ]
        return edge_cache[key]

    def best(loc: int, v: Valuation, left: int) -> tuple[Fraction, Schedule | None]:
        nonlocal visited
        if loc in targets:
            return Fraction(1), None
        if left == 0 or loc not in useful:
            return Fraction(0), None
        key = (loc, v, left)
        if key in memo:
            return memo[key]
        top, attained = _max_delay(model, loc, v)
        value, choice = Fraction(0), None
        i = 0
        while True:
            d = i * step
            if d > top or (d == top and not attained):
                break
            i += 1
            after = delay_by(v, d)
            for j in model.edges_by_source[loc]:
                branches = successors(j, after)
                if branches is None:
                    continue
                visited += 1
                if visited > budget:
                    raise Explosion(f"grid search exceeded {budget} nodes")
                total = Fraction(0)
                subs = []
                for oi, p, target, w in branches:
                    sub, child = best(target, w, left - 1)
                    total += p * sub
                    subs.append((oi, child))
                if total > value or choice is None:
                    children = {oi: c for oi, c in subs if c is not None}
                    value, choice = total, Schedule(d, j, children)
        memo[key] = (value, choice)
        return value, choice

    value, schedule = best(start.location, tuple(Fraction(x) for x in start.valuation), depth)
    return schedule, value
