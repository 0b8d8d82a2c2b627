"""Planning view of the factory: domain/problem export, BFS planner, replay."""

from .compile import export_domain, export_problem, parse_goal
from .planner import SearchLimitExceeded, simulate, solve
from .replay import ReplayError, ReplayResult, plan_urls, replay
from .syntax import PddlSyntaxError, check_grammar, parse_domain, parse_problem

__all__ = [
    "PddlSyntaxError",
    "ReplayError",
    "ReplayResult",
    "SearchLimitExceeded",
    "check_grammar",
    "export_domain",
    "export_problem",
    "parse_domain",
    "parse_goal",
    "parse_problem",
    "plan_urls",
    "replay",
    "simulate",
    "solve",
]
