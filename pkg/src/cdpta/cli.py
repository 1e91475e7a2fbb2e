"""Command-line interface: ``cdpta <subcommand> ...``.

Model arguments are JSON file paths, ``-`` for standard input, or a
built-in generator spec ``@oneclock`` / ``@robot:<cmax>``. Results go to
standard output; logs and errors go to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from . import formats, generators
from .concrete import EdgeNotEnabled, Explosion, IllegalDelay, evaluate_schedule, grid_search
from .graph import ValidationRequired, build
from .model import CdPta, errors, validate
from .solver import DEFAULT_EPSILON, NonConvergence, solve

log = logging.getLogger("cdpta")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _natural(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _k_list(text: str) -> list[int]:
    ks = [_positive_int(part) for part in text.split(",") if part.strip()]
    if not ks:
        raise argparse.ArgumentTypeError("expected at least one granularity")
    return ks


def _epsilon(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return value


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def load_model(spec: str) -> CdPta:
    if spec.startswith("@"):
        name, _, arg = spec[1:].partition(":")
        if name == "oneclock" and not arg:
            return generators.gen_oneclock()
        if name == "robot":
            try:
                return generators.gen_robot(int(arg or 10))
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        raise UsageError(f"unknown generator spec {spec!r}")
    return formats.parse_model(_read(spec))


def _targets(model: CdPta, names: str) -> list[int]:
    out = []
    for name in filter(None, (n.strip() for n in names.split(","))):
        try:
            out.append(model.location_id(name))
        except KeyError:
            raise UsageError(f"unknown target location {name!r}") from None
    return out


def _model_label(spec: str) -> str:
    return spec if spec.startswith("@") or spec == "-" else Path(spec).stem


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    model = load_model(args.model)
    diags = validate(model)
    for d in diags:
        print(d)
    n_err = len(errors(diags))
    log.info("%d diagnostics, %d errors", len(diags), n_err)
    return EXIT_INVALID if n_err else EXIT_OK


def cmd_solve(args) -> int:
    model = load_model(args.model)
    targets = _targets(model, args.target)
    t0 = time.perf_counter()
    mdp = build(model, args.k, targets)
    t1 = time.perf_counter()
    result = solve(mdp, args.objective, args.epsilon)
    t2 = time.perf_counter()
    log.info("k=%d: %d states, built in %.1f ms, solved in %.1f ms (%d sweeps)",
             args.k, len(mdp.states), 1000 * (t1 - t0), 1000 * (t2 - t1), result.iterations)
    if args.strategy:
        _write(args.strategy, formats.strategy_text(result))
    doc = json.dumps(result.to_json(), sort_keys=True) + "\n"
    if args.json:
        _write(args.json, doc)
    if args.json != "-":
        print(repr(result.value))
    return EXIT_OK


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    targets = _targets(model, args.target)
    label = args.name or _model_label(args.model)
    rows = []
    for k in args.k:
        t0 = time.perf_counter()
        mdp = build(model, k, targets)
        t1 = time.perf_counter()
        result = solve(mdp, args.objective, args.epsilon)
        t2 = time.perf_counter()
        log.info("k=%d value=%.9f", k, result.value)
        rows.append(formats.SweepRow(label, k, args.objective, result.value, result.states,
                                     result.actions, 1000 * (t1 - t0), 1000 * (t2 - t1)))
    _write(args.csv, formats.write_sweep_csv(rows))
    return EXIT_OK


def cmd_export(args) -> int:
    model = load_model(args.model)
    mdp = build(model, args.k, _targets(model, args.target))
    paths = formats.export_explicit(mdp, args.out, args.stem)
    if args.strategy:
        result = solve(mdp, args.objective, args.epsilon)
        path = Path(args.out) / f"{args.stem}.str"
        path.write_text(formats.strategy_text(result), encoding="utf-8")
        paths.append(path)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    targets = _targets(model, args.target)
    schedule = formats.parse_schedule(_read(args.schedule))
    value = evaluate_schedule(model, schedule, targets)
    print(json.dumps({"value": str(value), "float": float(value)}, sort_keys=True))
    return EXIT_OK


def cmd_search(args) -> int:
    model = load_model(args.model)
    targets = _targets(model, args.target)
    schedule, value = grid_search(model, targets, args.grid, args.depth, args.budget)
    doc = {
        "value": str(value),
        "float": float(value),
        "schedule": None if schedule is None else formats.schedule_to_dict(schedule),
    }
    print(json.dumps(doc, sort_keys=True))
    if args.schedule_out:
        _write(args.schedule_out, formats.serialize_schedule(schedule))
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "oneclock":
        model = generators.gen_oneclock()
    elif args.kind == "robot":
        if args.cmax is None:
            raise UsageError("gen robot needs --cmax")
        try:
            model = generators.gen_robot(args.cmax)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        if not args.file:
            raise UsageError("gen 2cm needs a program FILE")
        model = generators.compile_2cm(generators.parse_2cm(_read(args.file)))
    _write(args.out, formats.serialize_model(model))
    return EXIT_OK


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="cdpta", description="Region-graph bounds and exact schedule "
                                "evaluation for clock-dependent probabilistic timed automata.",
                                formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def model_cmd(name, help_text):
        sp = sub.add_parser(name, help=help_text, formatter_class=fmt)
        sp.add_argument("model", help="model JSON path, '-' for stdin, or @oneclock / @robot:N")
        return sp

    def objective(sp):
        sp.add_argument("--objective", choices=("max", "min"), default="max", help="optimisation direction")
        sp.add_argument("--epsilon", type=_epsilon, default=DEFAULT_EPSILON, help="value iteration stopping threshold")

    sp = model_cmd("validate", "check a model and print diagnostics")
    sp.set_defaults(func=cmd_validate)

    sp = model_cmd("solve", "build the region graph and compute a reachability bound")
    sp.add_argument("--k", type=_positive_int, required=True, help="granularity")
    sp.add_argument("--target", required=True, help="comma-separated target location names")
    objective(sp)
    sp.add_argument("--json", help="write the result JSON here ('-' for stdout)")
    sp.add_argument("--strategy", help="write the strategy (.str) here")
    sp.set_defaults(func=cmd_solve)

    sp = model_cmd("sweep", "solve for several granularities and write CSV")
    sp.add_argument("--k", type=_k_list, required=True, help="comma-separated granularities")
    sp.add_argument("--target", required=True, help="comma-separated target location names")
    objective(sp)
    sp.add_argument("--csv", default="-", help="output CSV path ('-' for stdout)")
    sp.add_argument("--name", help="model label in the CSV (default: file stem)")
    sp.set_defaults(func=cmd_sweep)

    sp = model_cmd("export", "write the region graph as .sta/.tra/.lab files")
    sp.add_argument("--k", type=_positive_int, required=True, help="granularity")
    sp.add_argument("--target", default="", help="comma-separated target location names")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--stem", default="model", help="file name stem")
    sp.add_argument("--strategy", action="store_true", help="also solve and write <stem>.str")
    objective(sp)
    sp.set_defaults(func=cmd_export)

    sp = model_cmd("eval", "evaluate a schedule exactly")
    sp.add_argument("--schedule", required=True, help="schedule JSON path ('-' for stdin)")
    sp.add_argument("--target", required=True, help="comma-separated target location names")
    sp.set_defaults(func=cmd_eval)

    sp = model_cmd("search", "grid search for a good schedule (max objective)")
    sp.add_argument("--grid", type=_positive_int, required=True, help="delay grid denominator m")
    sp.add_argument("--depth", type=_natural, required=True, help="number of edges")
    sp.add_argument("--target", required=True, help="comma-separated target location names")
    sp.add_argument("--budget", type=_positive_int, default=None,
                    help="node budget (default: $CDPTA_NODE_BUDGET or 5000000)")
    sp.add_argument("--schedule-out", help="also write the schedule JSON here")
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("gen", help="generate a bundled model as JSON", formatter_class=fmt)
    sp.add_argument("kind", choices=("oneclock", "robot", "2cm"))
    sp.add_argument("file", nargs="?", help="two-counter program (for 2cm)")
    sp.add_argument("--cmax", type=_natural, help="mission deadline (for robot)")
    sp.add_argument("--out", default="-", help="output path ('-' for stdout)")
    sp.set_defaults(func=cmd_gen)
    return p


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _):
        pass


def _configure_logging(verbose: int) -> None:
    for h in [h for h in log.handlers if isinstance(h, _StderrHandler)]:
        log.removeHandler(h)
    handler = _StderrHandler()
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.WARNING - 10 * min(verbose, 2))
    log.propagate = False


def run(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cdpta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (formats.SchemaError, ValidationRequired, generators.MalformedProgram) as exc:
        print(f"cdpta: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IllegalDelay, EdgeNotEnabled) as exc:
        print(f"cdpta: bad schedule: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (Explosion, NonConvergence, OSError) as exc:
        print(f"cdpta: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
