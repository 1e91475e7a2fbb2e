"""Constructors for the bundled model families.

* :func:`gen_oneclock` - five-location, one-clock model where the optimal
  delay is irrational.
* :func:`gen_robot` - robot crossing a 2x2 grid under a mission deadline.
* :func:`compile_2cm` - two-counter machine to three-clock cdPTA, built
  from increment / decrement / zero-test gadgets. Counter values are
  encoded as ``x_c = 1 / 2**c`` on entry to each instruction location.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    TRUE,
    CdPta,
    Clock,
    ClockConstraint,
    ConstraintAtom,
    Location,
    Outcome,
    PiecewiseLinearFn,
    ProbEdge,
)

F = Fraction


def lt(x, c):
    return ConstraintAtom(x, "<", c)


def le(x, c):
    return ConstraintAtom(x, "<=", c)


def ge(x, c):
    return ConstraintAtom(x, ">=", c)


def gt(x, c):
    return ConstraintAtom(x, ">", c)


def eq(x, c):
    return (ConstraintAtom(x, ">=", c), ConstraintAtom(x, "<=", c))


def _flatten(*parts) -> ClockConstraint:
    atoms = []
    for p in parts:
        atoms.extend(p if isinstance(p, tuple) else (p,))
    return ClockConstraint(tuple(atoms))


class _Builder:
    """Collects named locations and edges, then freezes them into a CdPta."""

    def __init__(self, clocks: list[str]):
        self.clocks = clocks
        self.locations: list[tuple[str, ClockConstraint]] = []
        self.ids: dict[str, int] = {}
        self.edges: list[tuple[str, ClockConstraint, list[tuple[tuple[int, ...], str, dict]]]] = []

    def location(self, name: str, invariant: ClockConstraint) -> str:
        if name in self.ids:
            raise ValueError(f"duplicate location {name}")
        self.ids[name] = len(self.locations)
        self.locations.append((name, invariant))
        return name

    def edge(self, source: str, guard: ClockConstraint, *outcomes):
        """``outcomes``: (reset clocks, target name, {clock: pwl fn})."""
        self.edges.append((source, guard, list(outcomes)))

    def sink(self, name: str, invariant: ClockConstraint, const_span: int):
        """Location whose only edge resets every clock and loops back."""
        self.location(name, invariant)
        everything = tuple(range(len(self.clocks)))
        self.edge(name, TRUE, (everything, name, {0: const(1, const_span)}))

    def freeze(self, initial: str) -> CdPta:
        clocks = tuple(Clock(i, n) for i, n in enumerate(self.clocks))
        locations = tuple(Location(i, n, inv) for i, (n, inv) in enumerate(self.locations))
        edges = []
        for source, guard, outcomes in self.edges:
            outs = tuple(
                Outcome(frozenset(reset), self.ids[target], tuple(sorted(weights.items())))
                for reset, target, weights in outcomes
            )
            edges.append(ProbEdge(self.ids[source], guard, outs))
        return CdPta(clocks, locations, self.ids[initial], tuple(edges))


def lin(lo: int, hi: int, c, d) -> PiecewiseLinearFn:
    return PiecewiseLinearFn.affine(lo, hi, F(c), F(d))


def const(p, span: int) -> PiecewiseLinearFn:
    return PiecewiseLinearFn.affine(0, span, F(p), 0)


# ---------------------------------------------------------------------------


def gen_oneclock() -> CdPta:
    x = 0
    b = _Builder(["x"])
    open_unit = _flatten(lt(x, 1))
    for name in "ABC":
        b.location(name, open_unit)
    b.sink("D", _flatten(le(x, 1)), 1)
    b.sink("E", _flatten(le(x, 1)), 1)
    b.edge("A", _flatten(lt(x, 1)),
           ((), "B", {x: lin(0, 1, 0, 1)}),
           ((), "E", {x: lin(0, 1, 1, -1)}))
    b.edge("B", _flatten(lt(x, 1)),
           ((), "C", {x: lin(0, 1, 1, -1)}),
           ((), "E", {x: lin(0, 1, 0, 1)}))
    b.edge("C", _flatten(lt(x, 1)),
           ((), "D", {x: lin(0, 1, 1, F(-1, 2))}),
           ((), "E", {x: lin(0, 1, 0, F(1, 2))}))
    return b.freeze("A")


def gen_robot(c_max: int) -> CdPta:
    if c_max < 4:
        raise ValueError("c_max must be at least 4")
    x, y = 0, 1
    C = c_max
    b = _Builder(["x", "y"])
    b.location("TL", _flatten(le(x, 2), le(y, C)))
    b.location("TR", _flatten(le(x, 2), le(y, C)))
    b.location("BL", _flatten(le(x, 3), le(y, C)))
    b.location("BR", _flatten(le(x, 0), le(y, C)))
    b.sink("OK", _flatten(le(x, 3), le(y, C)), 3)
    b.sink("FAIL", _flatten(le(x, 3), le(y, C)), 3)

    # leave a top cell after waiting 1, succeed with probability x - 1
    for dest in ("TR", "BL"):
        b.edge("TL", _flatten(ge(x, 1)),
               ((x,), dest, {x: lin(1, 2, -1, 1)}),
               ((x,), "TL", {x: lin(1, 2, 2, -1)}))
    b.edge("TR", _flatten(ge(x, 1)),
           ((x,), "BR", {x: lin(1, 2, F(-1, 2), F(1, 2))}),
           ((x,), "TR", {x: lin(1, 2, F(3, 2), F(-1, 2))}))
    b.edge("BL", _flatten(ge(x, 2)),
           ((x,), "BR", {x: lin(2, 3, -2, 1)}),
           ((x,), "BL", {x: lin(2, 3, 3, -1)}))
    b.edge("BR", _flatten(eq(x, 0)),
           ((), "OK", {y: lin(0, C, 1, F(-1, C))}),
           ((), "FAIL", {y: lin(0, C, 0, F(1, C))}))
    for cell in ("TL", "TR", "BL", "BR"):
        b.edge(cell, _flatten(eq(y, C)), ((), "FAIL", {x: const(1, 3)}))
    return b.freeze("TL")


# ---------------------------------------------------------------------------
# Two-counter machines


class MalformedProgram(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    """``op`` is one of inc, dec, jz, halt; labels are 1-based indices.

    ``jz`` jumps to ``target`` when the counter is zero, else to ``alt``.
    """

    op: str
    counter: int = 0
    target: int = 0
    alt: int = 0


@dataclass(frozen=True)
class TwoCounterProgram:
    instructions: tuple[Instruction, ...]

    def __post_init__(self):
        n = len(self.instructions)
        if n == 0:
            raise MalformedProgram("empty program")
        halts = [i for i, ins in enumerate(self.instructions, 1) if ins.op == "halt"]
        if halts != [n]:
            raise MalformedProgram("exactly one HALT is required, as the last instruction")
        for i, ins in enumerate(self.instructions, 1):
            if ins.op == "halt":
                continue
            if ins.op not in ("inc", "dec", "jz"):
                raise MalformedProgram(f"L{i}: unknown op {ins.op}")
            if ins.counter not in (1, 2):
                raise MalformedProgram(f"L{i}: counter must be 1 or 2")
            jumps = [ins.target] + ([ins.alt] if ins.op == "jz" else [])
            if any(not 1 <= j <= n for j in jumps):
                raise MalformedProgram(f"L{i}: jump to undefined label")

    def run(self, max_steps: int = 10_000) -> tuple[int, int, int] | None:
        """Final configuration ``(label, c1, c2)`` if the machine halts within
        ``max_steps`` steps, else ``None``. Decrementing zero leaves it at zero."""
        label, counters = 1, [0, 0, 0]
        for _ in range(max_steps):
            ins = self.instructions[label - 1]
            if ins.op == "halt":
                return label, counters[1], counters[2]
            if ins.op == "inc":
                counters[ins.counter] += 1
                label = ins.target
            elif ins.op == "dec":
                counters[ins.counter] = max(0, counters[ins.counter] - 1)
                label = ins.target
            else:
                label = ins.target if counters[ins.counter] == 0 else ins.alt
        return None


_LINE = re.compile(
    r"^L(\d+)\s*:\s*(?:"
    r"(?P<incdec>INC|DEC)\s+C([12])\s+GOTO\s+L(\d+)"
    r"|JZ\s+C(?P<jc>[12])\s+L(?P<jz>\d+)\s+L(?P<jp>\d+)"
    r"|(?P<halt>HALT))$",
    re.IGNORECASE,
)


def parse_2cm(text: str) -> TwoCounterProgram:
    """Parse ``L1: INC C1 GOTO L2`` / ``DEC`` / ``L3: JZ C1 L4 L5`` / ``Ln: HALT``."""
    found: dict[int, Instruction] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise MalformedProgram(f"line {lineno}: cannot parse {raw.strip()!r}")
        label = int(m.group(1))
        if label in found:
            raise MalformedProgram(f"line {lineno}: duplicate label L{label}")
        if m.group("halt"):
            ins = Instruction("halt")
        elif m.group("incdec"):
            ins = Instruction(m.group("incdec").lower(), int(m.group(3)), int(m.group(4)))
        else:
            ins = Instruction("jz", int(m.group("jc")), int(m.group("jz")), int(m.group("jp")))
        found[label] = ins
    if sorted(found) != list(range(1, len(found) + 1)):
        raise MalformedProgram("labels must be L1..Ln without gaps")
    return TwoCounterProgram(tuple(found[i] for i in range(1, len(found) + 1)))


def format_2cm(program: TwoCounterProgram) -> str:
    lines = []
    for i, ins in enumerate(program.instructions, 1):
        if ins.op == "halt":
            lines.append(f"L{i}: HALT")
        elif ins.op == "jz":
            lines.append(f"L{i}: JZ C{ins.counter} L{ins.target} L{ins.alt}")
        else:
            lines.append(f"L{i}: {ins.op.upper()} C{ins.counter} GOTO L{ins.target}")
    return "\n".join(lines) + "\n"


def check_target_names(program: TwoCounterProgram) -> list[str]:
    """Names of the check locations whose reachability the reduction measures."""
    out = []
    for i, ins in enumerate(program.instructions, 1):
        if ins.op == "inc":
            out.append(f"L{i}.G")
        elif ins.op == "dec":
            out.append(f"L{i}.F")
        elif ins.op == "jz":
            out += [f"L{i}.okzero", f"L{i}.okpos"]
    return out


FAIL = "fail"


def compile_2cm(program: TwoCounterProgram) -> CdPta:
    """Three clocks ``x1, x2, x3``; counter ``c`` lives in clock ``x_c`` and
    ``x3`` measures one time unit per instruction. Counter-2 gadgets are the
    counter-1 gadgets with ``x1`` and ``x2`` swapped."""
    b = _Builder(["x1", "x2", "x3"])
    z = 2
    box = (le(0, 1), le(1, 1), le(2, 1))

    def inv(*tight) -> ClockConstraint:
        touched = {a.clock for a in tight if a.is_upper}
        return ClockConstraint(tuple(tight) + tuple(a for a in box if a.clock not in touched))

    def half_sum(p, q, lo=0, hi=1):
        """(p + q) / 2 split over the two clocks."""
        return {p: lin(lo, hi, 0, F(1, 2)), q: lin(lo, hi, 0, F(1, 2))}

    def half_rest(p, q, lo=0, hi=1):
        """1 - (p + q) / 2 split over the two clocks."""
        return {p: lin(lo, hi, F(1, 2), F(-1, 2)), q: lin(lo, hi, F(1, 2), F(-1, 2))}

    one = {0: const(1, 1)}
    quarter, three_quarters = {0: const(F(1, 4), 1)}, {0: const(F(3, 4), 1)}
    half = {0: const(F(1, 2), 1)}

    b.location("init", inv())
    for i, ins in enumerate(program.instructions, 1):
        b.location(f"L{i}", inv(le(z, 0)) if ins.op == "jz" else inv())
    if any(ins.op == "inc" for ins in program.instructions):
        b.sink(FAIL, inv(), 1)
    b.edge("init", _flatten(eq(0, 1)), ((z,), "L1", one))

    for i, ins in enumerate(program.instructions, 1):
        L = f"L{i}"
        c = ins.counter - 1
        o = 1 - c
        if ins.op == "halt":
            b.edge(L, TRUE, ((0, 1, 2), L, one))
        elif ins.op == "inc":
            nxt = f"L{ins.target}"
            B, C, D, E = (f"{L}.{s}" for s in "BCDE")
            b.location(B, inv(lt(c, 1), lt(z, 1)))
            b.location(C, inv())
            b.location(D, inv(le(o, 0)))
            b.location(E, inv(le(o, 0)))
            for s in "FGH":
                b.sink(f"{L}.{s}", inv(), 1)
            b.edge(L, _flatten(eq(c, 1), lt(z, 1)), ((c,), B, one))
            b.edge(L, _flatten(eq(o, 1)), ((o,), L, one))
            # reachable only if x_c was 0 on entry, which a faithful run never does
            b.edge(L, _flatten(eq(z, 1)), ((), FAIL, one))
            b.edge(B, _flatten(gt(c, 0)), ((c,), C, half), ((o,), D, half))
            b.edge(B, _flatten(eq(o, 1)), ((o,), B, one))
            b.edge(C, _flatten(eq(z, 1)), ((z,), nxt, one))
            b.edge(C, _flatten(eq(o, 1)), ((o,), C, one))
            b.edge(D, _flatten(eq(o, 0)), ((), E, half_sum(c, z)), ((), f"{L}.F", half_rest(c, z)))
            b.edge(E, _flatten(eq(o, 0)), ((), f"{L}.G", half_rest(c, z)), ((), f"{L}.H", half_sum(c, z)))
        elif ins.op == "dec":
            nxt = f"L{ins.target}"
            B, C, D, E = (f"{L}.{s}" for s in "BCDE")
            b.location(B, inv())
            b.location(C, inv())
            b.location(D, inv(le(c, 0)))
            b.location(E, inv(le(c, 0)))
            for s in "FGH":
                b.sink(f"{L}.{s}", inv(), 1)
            b.edge(L, _flatten(lt(c, 1), lt(z, 1)), ((c,), B, half), ((o,), C, half))
            # decrementing zero leaves the counter at zero
            b.edge(L, _flatten(eq(c, 1)), ((z,), nxt, one))
            b.edge(L, _flatten(eq(o, 1)), ((o,), L, one))
            b.edge(B, _flatten(eq(z, 1)), ((z,), nxt, one))
            b.edge(B, _flatten(eq(o, 1)), ((o,), B, one))
            b.edge(C, _flatten(eq(c, 1)), ((c,), D, one))
            b.edge(D, _flatten(eq(c, 0)), ((), E, half_sum(o, z)), ((), f"{L}.G", half_rest(o, z)))
            b.edge(E, _flatten(eq(c, 0)), ((), f"{L}.F", half_rest(o, z)), ((), f"{L}.H", half_sum(o, z)))
        else:
            zero_next, pos_next = f"L{ins.target}", f"L{ins.alt}"
            b.sink(f"{L}.okzero", inv(), 1)
            b.sink(f"{L}.okpos", inv(), 1)
            b.edge(L, _flatten(eq(c, 1)), ((), f"{L}.okzero", quarter), ((), zero_next, three_quarters))
            b.edge(L, _flatten(lt(c, 1)), ((), f"{L}.okpos", quarter), ((), pos_next, three_quarters))
    return b.freeze("init")
