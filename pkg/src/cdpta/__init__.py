"""Clock-dependent probabilistic timed automata.

Exact models (:mod:`cdpta.model`), k-regions (:mod:`cdpta.regions`), the
clock-dependent region graph (:mod:`cdpta.graph`), reachability bounds
(:mod:`cdpta.solver`), exact schedule evaluation (:mod:`cdpta.concrete`),
model generators, text formats and a command-line tool.
"""

from .concrete import ConcreteState, Schedule, evaluate_schedule, grid_search
from .generators import compile_2cm, gen_oneclock, gen_robot, parse_2cm
from .graph import RegionMdp, build, explore
from .model import CdPta, validate
from .regions import KRegion, region_of
from .solver import SolveResult, reach_max, reach_min, solve

__all__ = [
    "CdPta",
    "ConcreteState",
    "KRegion",
    "RegionMdp",
    "Schedule",
    "SolveResult",
    "build",
    "compile_2cm",
    "evaluate_schedule",
    "explore",
    "gen_oneclock",
    "gen_robot",
    "grid_search",
    "parse_2cm",
    "reach_max",
    "reach_min",
    "region_of",
    "solve",
    "validate",
]
