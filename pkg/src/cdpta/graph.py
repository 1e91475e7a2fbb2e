"""Clock-dependent region graph of a cdPTA at granularity k, as an explicit MDP.

Each MDP action is a composite "delay, then take an edge at a corner":
from state ``s`` the delay target ``t`` ranges over the invariant-satisfying
time successors of ``s`` (a chain, ``s`` first), and for ``t`` every enabled
edge ``p`` and every corner ``alpha`` of ``t``'s region give one action whose
distribution sends ``p[alpha](X, l')`` to ``(l', R_t[X:=0])``.

The per-target part ("edge actions") is stored once per state; composite
actions are enumerated from the successor chain on demand. Action order is
chain order, then edge order, then corner order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .model import CdPta, Valuation, check_structure, errors
from .regions import (
    KRegion,
    corners_scaled,
    eval_template_at_corner,
    immediate_successor,
    region_satisfies,
    reset_region,
    zero_region,
)


class ValidationRequired(ValueError):
    """The model has error-level diagnostics and cannot be compiled."""


@dataclass(frozen=True)
class RegionState:
    location: int
    region: KRegion


@dataclass(frozen=True)
class EdgeAction:
    edge: int
    corner: Valuation
    dist: tuple[tuple[int, Fraction], ...]


@dataclass(frozen=True)
class CompositeAction:
    """Delay to state ``delay_target`` then take ``edge`` at ``corner``.
    ``edge == -1`` marks a synthesized absorbing self-loop."""

    delay_target: int
    edge: int
    corner: Valuation


SELF_LOOP = -1


class RegionMdp:
    def __init__(self, model: CdPta, k: int, states, succ, edge_actions, target):
        self.model = model
        self.k = k
        self.states: list[RegionState] = states
        self.initial = 0
        self.succ: list[int] = succ
        self.edge_actions: list[tuple[EdgeAction, ...]] = edge_actions
        self.target: list[bool] = target
        self._chain_counts = None

    def __len__(self) -> int:
        return len(self.states)

    def chain(self, s: int) -> Iterator[int]:
        while s != -1:
            yield s
            s = self.succ[s]

    def _counts(self) -> tuple[list[int], list[int]]:
        """Per state: number of composite actions and their total support size."""
        if self._chain_counts is None:
            n = len(self.states)
            acts = [-1] * n
            trans = [-1] * n
            for s in range(n):
                if acts[s] >= 0:
                    continue
                path = []
                t = s
                while t != -1 and acts[t] < 0:
                    path.append(t)
                    t = self.succ[t]
                a = acts[t] if t != -1 else 0
                tr = trans[t] if t != -1 else 0
                for u in reversed(path):
                    a += len(self.edge_actions[u])
                    tr += sum(len(ea.dist) for ea in self.edge_actions[u])
                    acts[u], trans[u] = a, tr
            self._chain_counts = (acts, trans)
        return self._chain_counts

    def is_absorbing(self, s: int) -> bool:
        return self.target[s] or self._counts()[0][s] == 0

    def deadlocks(self) -> list[tuple[int, KRegion]]:
        """States with no composite action at all (before target closure)."""
        acts = self._counts()[0]
        return [(st.location, st.region) for s, st in enumerate(self.states) if acts[s] == 0]

    def actions(self, s: int) -> list[tuple[CompositeAction, tuple[tuple[int, Fraction], ...]]]:
        if self.is_absorbing(s):
            return [(CompositeAction(s, SELF_LOOP, ()), ((s, Fraction(1)),))]
        out = []
        for t in self.chain(s):
            for ea in self.edge_actions[t]:
                out.append((CompositeAction(t, ea.edge, ea.corner), ea.dist))
        return out

    def stats(self) -> dict[str, int]:
        acts, trans = self._counts()
        n_actions = n_trans = 0
        for s in range(len(self.states)):
            if self.is_absorbing(s):
                n_actions += 1
                n_trans += 1
            else:
                n_actions += acts[s]
                n_trans += trans[s]
        return {"numStates": len(self.states), "numActions": n_actions, "numTransitions": n_trans}

    def state_label(self, s: int) -> str:
        st = self.states[s]
        names = [c.name for c in self.model.clocks]
        return f"{self.model.locations[st.location].name} {st.region.format(names)}"


def build(model: CdPta, k: int, targets: Iterable[int] = ()) -> RegionMdp:
    """Forward-reachable region graph from ``(initial, R_0)`` in BFS order."""
    if k < 1:
        raise ValueError("granularity must be at least 1")
    problems = errors(check_structure(model))
    if problems:
        raise ValidationRequired("; ".join(str(d) for d in problems[:3]))
    targets = set(targets)
    M = model.ceiling
    invariants = [loc.invariant for loc in model.locations]
    guards = model.guards
    edges_by_source = model.edges_by_source
    corner_cache: dict[tuple[int, tuple[int, ...]], dict[int, Fraction]] = {}

    index: dict[tuple[int, KRegion], int] = {}
    states: list[RegionState] = []
    queue: deque[int] = deque()

    def intern(loc: int, region: KRegion) -> int:
        key = (loc, region)
        s = index.get(key)
        if s is None:
            s = len(states)
            index[key] = s
            states.append(RegionState(loc, region))
            queue.append(s)
        return s

    intern(model.initial, zero_region(len(model.clocks), k, M))
    succ: list[int] = []
    edge_actions: list[tuple[EdgeAction, ...]] = []
    while queue:
        s = queue.popleft()
        loc, R = states[s].location, states[s].region
        nxt = immediate_successor(R)
        if nxt is not None and region_satisfies(nxt, invariants[loc]):
            succ.append(intern(loc, nxt))
        else:
            succ.append(-1)
        acts = []
        for j in edges_by_source[loc]:
            if not region_satisfies(R, guards[j]):
                continue
            edge = model.edges[j]
            for alpha in corners_scaled(R):
                probs = corner_cache.get((j, alpha))
                if probs is None:
                    point = tuple(Fraction(a, k) for a in alpha)
                    probs = eval_template_at_corner(edge, point)
                    corner_cache[(j, alpha)] = probs
                dist: dict[int, Fraction] = {}
                for i, p in probs.items():
                    if p == 0:
                        continue
                    o = edge.outcomes[i]
                    t = intern(o.target, reset_region(R, o.reset))
                    dist[t] = dist.get(t, Fraction(0)) + p
                if sum(dist.values()) != 1:
                    raise AssertionError(f"edge {j} corner {alpha}: distribution does not sum to 1")
                acts.append(EdgeAction(j, tuple(Fraction(a, k) for a in alpha), tuple(dist.items())))
        edge_actions.append(tuple(acts))

    target = [st.location in targets for st in states]
    return RegionMdp(model, k, states, succ, edge_actions, target)


def explore(model: CdPta, k: int) -> RegionMdp:
    return build(model, k, ())


def stats(mdp: RegionMdp) -> dict[str, int]:
    return mdp.stats()
