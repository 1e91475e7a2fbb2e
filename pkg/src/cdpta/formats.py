"""Text formats: model JSON, schedule JSON, explicit MDP export, sweep CSV.

Model files refer to clocks and locations by name. Rationals are written as
integers when whole and as ``"num/den"`` strings otherwise; decimals are
rejected so that model files stay exact.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from .generators import format_2cm, parse_2cm  # noqa: F401  (2CM text format lives with the translator)
from .concrete import Schedule
from .graph import RegionMdp
from .model import (
    OPS,
    CdPta,
    Clock,
    ClockConstraint,
    ConstraintAtom,
    Location,
    ModelError,
    Outcome,
    Piece,
    PiecewiseLinearFn,
    ProbEdge,
)
from .solver import SolveResult


class SchemaError(ValueError):
    """Malformed input; ``pointer`` is a JSON pointer to the offending node."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


_RATIONAL = re.compile(r"\s*-?\d+(\s*/\s*\d+)?\s*")


def format_rational(q: Fraction) -> int | str:
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def parse_rational(value: Any, pointer: str = "") -> Fraction:
    if isinstance(value, bool):
        raise SchemaError(pointer, "expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str) and _RATIONAL.fullmatch(value):
        try:
            return Fraction(value.replace(" ", ""))
        except ZeroDivisionError:
            raise SchemaError(pointer, "zero denominator") from None
    raise SchemaError(pointer, f"expected an integer or 'num/den' string, got {value!r}")


# ---------------------------------------------------------------------------
# Model JSON


def _obj(node: Any, pointer: str, required: Sequence[str], optional: Sequence[str] = ()) -> dict:
    if not isinstance(node, dict):
        raise SchemaError(pointer, "expected an object")
    for key in node:
        if key not in required and key not in optional:
            raise SchemaError(f"{pointer}/{key}", f"unknown key {key!r}")
    for key in required:
        if key not in node:
            raise SchemaError(pointer, f"missing key {key!r}")
    return node


def _list(node: Any, pointer: str) -> list:
    if not isinstance(node, list):
        raise SchemaError(pointer, "expected a list")
    return node


def _name(node: Any, pointer: str, table: dict[str, int], kind: str) -> int:
    if not isinstance(node, str):
        raise SchemaError(pointer, f"expected a {kind} name")
    if node not in table:
        raise SchemaError(pointer, f"unknown {kind} {node!r}")
    return table[node]


def _natural(node: Any, pointer: str) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise SchemaError(pointer, "expected a natural number")
    if node < 0:
        raise SchemaError(pointer, f"negative bound {node}")
    return node


def _constraint(node: Any, pointer: str, clocks: dict[str, int]) -> ClockConstraint:
    atoms = []
    for i, a in enumerate(_list(node, pointer)):
        p = f"{pointer}/{i}"
        _obj(a, p, ("clock", "op", "bound"))
        if a["op"] not in OPS:
            raise SchemaError(f"{p}/op", f"unknown comparison {a['op']!r}")
        atoms.append(ConstraintAtom(_name(a["clock"], f"{p}/clock", clocks, "clock"), a["op"],
                                    _natural(a["bound"], f"{p}/bound")))
    return ClockConstraint(tuple(atoms))


def _fn(node: Any, pointer: str) -> PiecewiseLinearFn:
    pieces = []
    for i, pc in enumerate(_list(node, pointer)):
        p = f"{pointer}/{i}"
        _obj(pc, p, ("lo", "hi", "c", "d"))
        pieces.append(Piece(_natural(pc["lo"], f"{p}/lo"), _natural(pc["hi"], f"{p}/hi"),
                            parse_rational(pc["c"], f"{p}/c"), parse_rational(pc["d"], f"{p}/d")))
    return PiecewiseLinearFn(tuple(pieces))


def model_from_dict(doc: Any) -> CdPta:
    _obj(doc, "", ("clocks", "locations", "initial", "edges"))
    names = _list(doc["clocks"], "/clocks")
    for i, n in enumerate(names):
        if not isinstance(n, str) or not n:
            raise SchemaError(f"/clocks/{i}", "clock names must be non-empty strings")
    if len(set(names)) != len(names):
        raise SchemaError("/clocks", "duplicate clock name")
    clocks = {n: i for i, n in enumerate(names)}

    locations, loc_ids = [], {}
    for i, loc in enumerate(_list(doc["locations"], "/locations")):
        p = f"/locations/{i}"
        _obj(loc, p, ("name", "invariant"))
        if not isinstance(loc["name"], str) or not loc["name"]:
            raise SchemaError(f"{p}/name", "location names must be non-empty strings")
        if loc["name"] in loc_ids:
            raise SchemaError(f"{p}/name", f"duplicate location {loc['name']!r}")
        loc_ids[loc["name"]] = i
        locations.append(Location(i, loc["name"], _constraint(loc["invariant"], f"{p}/invariant", clocks)))

    initial = _name(doc["initial"], "/initial", loc_ids, "location")
    edges = []
    for j, e in enumerate(_list(doc["edges"], "/edges")):
        p = f"/edges/{j}"
        _obj(e, p, ("source", "guard", "outcomes"))
        outcomes = []
        for i, o in enumerate(_list(e["outcomes"], f"{p}/outcomes")):
            q = f"{p}/outcomes/{i}"
            _obj(o, q, ("reset", "target", "weights"))
            reset = frozenset(_name(x, f"{q}/reset/{r}", clocks, "clock")
                              for r, x in enumerate(_list(o["reset"], f"{q}/reset")))
            weights = []
            for w_i, w in enumerate(_list(o["weights"], f"{q}/weights")):
                wp = f"{q}/weights/{w_i}"
                _obj(w, wp, ("clock", "pieces"))
                weights.append((_name(w["clock"], f"{wp}/clock", clocks, "clock"), _fn(w["pieces"], f"{wp}/pieces")))
            outcomes.append(Outcome(reset, _name(o["target"], f"{q}/target", loc_ids, "location"), tuple(weights)))
        edges.append(ProbEdge(_name(e["source"], f"{p}/source", loc_ids, "location"),
                              _constraint(e["guard"], f"{p}/guard", clocks), tuple(outcomes)))
    try:
        return CdPta(tuple(Clock(i, n) for i, n in enumerate(names)), tuple(locations), initial, tuple(edges))
    except ModelError as exc:
        raise SchemaError("", str(exc)) from None


def parse_model(text: str) -> CdPta:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    return model_from_dict(doc)


def model_to_dict(model: CdPta) -> dict:
    clock = [c.name for c in model.clocks]
    loc = [l.name for l in model.locations]

    def constraint(psi: ClockConstraint) -> list:
        return [{"clock": clock[a.clock], "op": a.op, "bound": a.bound} for a in psi.atoms]

    def fn(f: PiecewiseLinearFn) -> list:
        return [{"lo": p.lo, "hi": p.hi, "c": format_rational(p.c), "d": format_rational(p.d)} for p in f.pieces]

    return {
        "clocks": clock,
        "locations": [{"name": l.name, "invariant": constraint(l.invariant)} for l in model.locations],
        "initial": loc[model.initial],
        "edges": [
            {
                "source": loc[e.source],
                "guard": constraint(e.guard),
                "outcomes": [
                    {
                        "reset": [clock[x] for x in sorted(o.reset)],
                        "target": loc[o.target],
                        "weights": [{"clock": clock[x], "pieces": fn(f)} for x, f in o.weights],
                    }
                    for o in e.outcomes
                ],
            }
            for e in model.edges
        ],
    }


def serialize_model(model: CdPta) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Schedules


def schedule_to_dict(node: Schedule) -> dict:
    return {
        "delay": str(Fraction(node.delay)),
        "edge": node.edge,
        "children": {str(i): schedule_to_dict(c) for i, c in sorted(node.children.items())},
    }


def schedule_from_dict(doc: Any, pointer: str = "") -> Schedule:
    _obj(doc, pointer, ("delay", "edge"), ("children",))
    delay = parse_rational(doc["delay"], f"{pointer}/delay")
    if delay < 0:
        raise SchemaError(f"{pointer}/delay", "negative delay")
    edge = doc["edge"]
    if isinstance(edge, bool) or not isinstance(edge, int):
        raise SchemaError(f"{pointer}/edge", "expected an edge index")
    children = {}
    raw = doc.get("children", {})
    if not isinstance(raw, dict):
        raise SchemaError(f"{pointer}/children", "expected an object")
    for key, child in raw.items():
        if not key.isdigit():
            raise SchemaError(f"{pointer}/children/{key}", "outcome index must be a natural number")
        children[int(key)] = schedule_from_dict(child, f"{pointer}/children/{key}")
    return Schedule(delay, edge, children)


def serialize_schedule(node: Schedule | None) -> str:
    return json.dumps(None if node is None else schedule_to_dict(node), sort_keys=True, indent=2) + "\n"


def parse_schedule(text: str) -> Schedule | None:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    return None if doc is None else schedule_from_dict(doc)


# ---------------------------------------------------------------------------
# Explicit MDP export


def sta_text(mdp: RegionMdp) -> str:
    return "".join(f"{s} {mdp.state_label(s)}\n" for s in range(len(mdp.states)))


def tra_lines(mdp: RegionMdp) -> Iterable[str]:
    for s in range(len(mdp.states)):
        for a, (_, dist) in enumerate(mdp.actions(s)):
            for t, p in dist:
                yield f"{s} {a} {t} {p.numerator}/{p.denominator}\n"


def lab_text(mdp: RegionMdp) -> str:
    lines = []
    for s in range(len(mdp.states)):
        if s == mdp.initial:
            lines.append(f"{s} init\n")
        if mdp.target[s]:
            lines.append(f"{s} target\n")
    return "".join(lines)


def export_explicit(mdp: RegionMdp, directory: str | Path, stem: str = "model") -> list[Path]:
    """Write ``<stem>.sta``, ``<stem>.tra`` and ``<stem>.lab`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    sta, tra, lab = d / f"{stem}.sta", d / f"{stem}.tra", d / f"{stem}.lab"
    sta.write_text(sta_text(mdp), encoding="utf-8")
    with tra.open("w", encoding="utf-8") as fh:
        fh.writelines(tra_lines(mdp))
    lab.write_text(lab_text(mdp), encoding="utf-8")
    return [sta, tra, lab]


def strategy_text(result: SolveResult) -> str:
    """``<stateId> <actionIdx>`` for every state that has a real choice."""
    return "".join(f"{s} {a}\n" for s, a in enumerate(result.strategy) if a >= 0)


def parse_tra(text: str) -> dict[tuple[int, int], list[tuple[int, Fraction]]]:
    rows: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    for line in text.splitlines():
        src, act, dst, p = line.split()
        rows.setdefault((int(src), int(act)), []).append((int(dst), Fraction(p)))
    return rows


# ---------------------------------------------------------------------------
# Sweep CSV

SWEEP_HEADER = ("model", "k", "objective", "value", "states", "actions", "build_ms", "solve_ms")


@dataclass(frozen=True)
class SweepRow:
    model: str
    k: int
    objective: str
    value: float
    states: int
    actions: int
    build_ms: float
    solve_ms: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"value {self.value} is not a probability")


def write_sweep_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r.model, r.k, r.objective, f"{r.value:.9f}", r.states, r.actions,
                    f"{r.build_ms:.1f}", f"{r.solve_ms:.1f}"])
    return buf.getvalue()
