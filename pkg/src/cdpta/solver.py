"""Maximal / minimal reachability on a :class:`~cdpta.graph.RegionMdp`.

The composite actions of a state are "pick a delay target on my time
successor chain, then one of its edge actions", so the Bellman update
factors as::

    W(t) = opt over edge actions a of t of  sum_u P_a(t, u) V(u)
    V(s) = opt over t in chain(s) of W(t)

The second step is a suffix reduction along successor chains, done level by
level (states grouped by distance to the end of their chain).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import RegionMdp

DEFAULT_EPSILON = 1e-9
DEFAULT_MAX_ITER = 1_000_000
TIE_TOL = 1e-12


class NonConvergence(RuntimeError):
    pass


@dataclass
class SolveResult:
    value: float
    objective: str
    iterations: int
    residual: float
    strategy: list[int]
    values: np.ndarray = field(repr=False)
    k: int = 0
    states: int = 0
    actions: int = 0

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "objective": self.objective,
            "k": self.k,
            "iterations": self.iterations,
            "residual": self.residual,
            "states": self.states,
            "actions": self.actions,
        }


class _Flat:
    """Array view of the MDP for vectorised sweeps."""

    def __init__(self, mdp: RegionMdp, target: np.ndarray | None = None):
        n = len(mdp.states)
        self.n = n
        self.target = np.array(mdp.target if target is None else target, dtype=bool)
        n_ea = np.fromiter((len(a) for a in mdp.edge_actions), dtype=np.int64, count=n)
        self.n_ea = n_ea
        self.start = np.concatenate(([0], np.cumsum(n_ea)))
        self.has_ea = n_ea > 0
        rows, cols, vals = [], [], []
        r = 0
        for acts in mdp.edge_actions:
            for ea in acts:
                for u, p in ea.dist:
                    rows.append(r)
                    cols.append(u)
                    vals.append(float(p))
                r += 1
        self.m = r
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(r, n))
        self.Pb = sp.csr_matrix((np.ones(len(vals), dtype=np.int32), (rows, cols)), shape=(r, n))
        self.succ = np.array(mdp.succ, dtype=np.int64)
        self.levels = self._levels()
        self.has_action = self.chain_reduce(self.has_ea, np.logical_or)
        self.absorbing = self.target | ~self.has_action

    def _levels(self) -> list[np.ndarray]:
        depth = np.full(self.n, -1, dtype=np.int64)
        succ = self.succ
        for s in range(self.n):
            if depth[s] >= 0:
                continue
            path = []
            t = s
            while t != -1 and depth[t] < 0:
                path.append(t)
                t = succ[t]
            d = depth[t] if t != -1 else -1
            for u in reversed(path):
                d += 1
                depth[u] = d
        order = np.argsort(depth, kind="stable")
        bounds = np.searchsorted(depth[order], np.arange(depth.max() + 2 if self.n else 1))
        return [order[bounds[d]:bounds[d + 1]] for d in range(1, len(bounds) - 1)]

    def chain_reduce(self, w: np.ndarray, op) -> np.ndarray:
        out = w.copy()
        for idx in self.levels:
            out[idx] = op(out[idx], out[self.succ[idx]])
        return out

    def segment(self, per_ea: np.ndarray, op, empty) -> np.ndarray:
        out = np.full(self.n, empty, dtype=per_ea.dtype)
        if self.m:
            red = op.reduceat(per_ea, self.start[:-1][self.has_ea])
            out[self.has_ea] = red
        return out

    def exists(self, ea_mask: np.ndarray) -> np.ndarray:
        w = self.segment(ea_mask, np.logical_or, False)
        return self.chain_reduce(w, np.logical_or) & ~self.absorbing

    def forall(self, ea_mask: np.ndarray) -> np.ndarray:
        w = self.segment(ea_mask, np.logical_and, True)
        return self.chain_reduce(w, np.logical_and) & ~self.absorbing

    def hits(self, mask: np.ndarray) -> np.ndarray:
        return (self.Pb @ mask.astype(np.int32)) > 0


def prob0_1(mdp: RegionMdp, objective: str = "max", flat: _Flat | None = None):
    """Graph-based qualitative sets: ``(P0, P1)`` as boolean arrays.

    P0 holds the states whose optimal value is 0. P1 (max only, ``None``
    for min) holds the states from which some strategy reaches the targets
    almost surely.
    """
    f = flat or _Flat(mdp)
    if objective == "max":
        reach = f.target.copy()
        while True:
            new = reach | f.exists(f.hits(reach))
            if np.array_equal(new, reach):
                break
            reach = new
        p0 = ~reach
        U = reach.copy()
        while True:
            R = f.target.copy()
            stay = ~f.hits(~U)
            while True:
                new = R | (f.exists(stay & f.hits(R)) & U)
                if np.array_equal(new, R):
                    break
                R = new
            if np.array_equal(R, U):
                break
            U = R
        return p0, U
    if objective == "min":
        forced = f.target.copy()
        while True:
            new = forced | f.forall(f.hits(forced))
            if np.array_equal(new, forced):
                break
            forced = new
        return ~forced, None
    raise ValueError(f"objective must be max or min, not {objective!r}")


def _solve(mdp: RegionMdp, objective: str, epsilon: float, max_iter: int) -> SolveResult:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    f = _Flat(mdp)
    p0, p1 = prob0_1(mdp, objective, f)
    is_max = objective == "max"
    op = np.maximum if is_max else np.minimum
    empty = -np.inf if is_max else np.inf
    ones = f.target.copy() if p1 is None else (f.target | p1)
    fixed = ones | p0 | f.absorbing
    free = ~fixed

    V = np.zeros(f.n)
    V[ones] = 1.0
    residual = 0.0
    iterations = 0
    while True:
        if iterations >= max_iter:
            raise NonConvergence(f"no convergence after {iterations} sweeps (residual {residual:g})")
        iterations += 1
        W = f.segment(f.P @ V, op, empty)
        new = f.chain_reduce(W, op)
        new[~free] = V[~free]
        assert np.all(new[free] >= V[free]), "value iteration lost monotonicity"
        residual = float(np.max(new - V)) if f.n else 0.0
        V = new
        if residual < epsilon:
            break

    strategy = _extract_strategy(mdp, f, V, is_max)
    if is_max and np.any(~f.absorbing):
        induced = induced_values(mdp, strategy, f)
        if np.max(np.abs(induced - V)) > 10 * epsilon:
            strategy = _attractor_strategy(mdp, f, V)
    st = mdp.stats()
    return SolveResult(float(V[mdp.initial]), objective, iterations, residual, strategy, V,
                       mdp.k, st["numStates"], st["numActions"])


def _best_edge_actions(f: _Flat, V: np.ndarray, is_max: bool):
    """Per delay target: optimal edge-action value and its lowest index."""
    q = f.P @ V
    sign = 1.0 if is_max else -1.0
    sq = sign * q
    W = f.segment(sq, np.maximum, -np.inf)
    best = np.full(f.n, -1, dtype=np.int64)
    for t in np.flatnonzero(f.has_ea):
        lo, hi = f.start[t], f.start[t + 1]
        best[t] = lo + int(np.argmax(sq[lo:hi] >= W[t] - TIE_TOL))
    return W, best


def _extract_strategy(mdp: RegionMdp, f: _Flat, V: np.ndarray, is_max: bool) -> list[int]:
    """Lowest-index optimal composite action per non-absorbing state."""
    W, best_ea = _best_edge_actions(f, V, is_max)
    Vs = f.chain_reduce(W, np.maximum)
    # cum[s] = number of edge actions on chain(s); choice[s] = chosen delay target
    cum = _chain_sum(f, f.n_ea)
    choice = np.where(f.has_ea & (W >= Vs - TIE_TOL), np.arange(f.n), -1)
    for idx in f.levels:
        unset = idx[choice[idx] < 0]
        choice[unset] = choice[f.succ[unset]]
    strategy = [-1] * f.n
    for s in np.flatnonzero(~f.absorbing):
        t = choice[s]
        strategy[s] = int(cum[s] - cum[t] + best_ea[t] - f.start[t])
    return strategy


def _chain_sum(f: _Flat, w: np.ndarray) -> np.ndarray:
    out = w.copy()
    for idx in f.levels:
        out[idx] = out[idx] + out[f.succ[idx]]
    return out


def _action_ea(f: _Flat, mdp: RegionMdp, s: int, a: int) -> int:
    """Global edge-action row of composite action ``a`` of state ``s``."""
    for t in mdp.chain(s):
        if a < f.n_ea[t]:
            return int(f.start[t] + a)
        a -= int(f.n_ea[t])
    raise IndexError(f"state {s} has no action {a}")


def induced_values(mdp: RegionMdp, strategy: list[int], flat: _Flat | None = None) -> np.ndarray:
    """Reachability probabilities of the Markov chain induced by a memoryless
    strategy, by a sparse linear solve."""
    f = flat or _Flat(mdp)
    rows = []
    for s in range(f.n):
        if f.absorbing[s]:
            rows.append(-1)
        else:
            rows.append(_action_ea(f, mdp, s, strategy[s]))
    rows = np.array(rows)
    live = rows >= 0
    sel = sp.csr_matrix((f.n, f.n))
    if live.any():
        pick = sp.csr_matrix((np.ones(live.sum()), (np.flatnonzero(live), rows[live])), shape=(f.n, f.m))
        sel = (pick @ f.P).tocsr()
    # states that can reach a target in the chain
    reach = f.target.copy()
    graph = (sel > 0).astype(np.int32)
    while True:
        new = reach | ((graph @ reach.astype(np.int32)) > 0)
        if np.array_equal(new, reach):
            break
        reach = new
    x = np.zeros(f.n)
    x[f.target] = 1.0
    unknown = np.flatnonzero(reach & ~f.target)
    if unknown.size:
        A = sp.identity(unknown.size, format="csr") - sel[unknown][:, unknown]
        b = np.asarray(sel[unknown][:, np.flatnonzero(f.target)].sum(axis=1)).ravel()
        x[unknown] = spla.spsolve(A.tocsc(), b)
    return x


def _attractor_strategy(mdp: RegionMdp, f: _Flat, V: np.ndarray) -> list[int]:
    """Optimal max strategy that also makes progress: rank states by layers of
    the optimal-action graph from the targets, and pick the lowest-index
    optimal action leading into a lower layer."""
    q = f.P @ V
    ranked = f.target.copy()
    strategy = _extract_strategy(mdp, f, V, True)
    pending = [s for s in range(f.n) if not f.absorbing[s] and V[s] > 0]
    indptr, indices = f.P.indptr, f.P.indices
    while pending:
        layer = []
        for s in pending:
            a = 0
            for t in mdp.chain(s):
                for r in range(f.start[t], f.start[t + 1]):
                    if q[r] >= V[s] - TIE_TOL and ranked[indices[indptr[r]:indptr[r + 1]]].any():
                        layer.append((s, a))
                        break
                    a += 1
                else:
                    continue
                break
        if not layer:
            break
        for s, a in layer:
            strategy[s] = a
            ranked[s] = True
        done = {s for s, _ in layer}
        pending = [s for s in pending if s not in done]
    return strategy


def reach_max(mdp: RegionMdp, epsilon: float = DEFAULT_EPSILON, max_iter: int = DEFAULT_MAX_ITER) -> SolveResult:
    return _solve(mdp, "max", epsilon, max_iter)


def reach_min(mdp: RegionMdp, epsilon: float = DEFAULT_EPSILON, max_iter: int = DEFAULT_MAX_ITER) -> SolveResult:
    return _solve(mdp, "min", epsilon, max_iter)


def solve(mdp: RegionMdp, objective: str, epsilon: float = DEFAULT_EPSILON,
          max_iter: int = DEFAULT_MAX_ITER) -> SolveResult:
    if objective not in ("max", "min"):
        raise ValueError(f"objective must be max or min, not {objective!r}")
    return _solve(mdp, objective, epsilon, max_iter)
