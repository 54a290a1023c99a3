"""Local-view reasoning lab for concurrent search structures.

Instrumented set algorithms run under a deterministic scheduler; the
resulting logs are checked for linearizability and for the local-view
conditions (read-in-order, acyclic accumulated order, preservation)
together with the hindsight witness they imply.
"""

from __future__ import annotations

from .lab import evaluate, run_checker
from .scheduler import OpSpec, RunResult, Scenario, Strategy, run_exhaustive, run_random, run_script
from .shared_memory import ExecutionLog, Location, StateSnapshot
from .structures import REGISTRY, make_structure

__version__ = "0.1.0"

__all__ = [
    "REGISTRY",
    "ExecutionLog",
    "Location",
    "OpSpec",
    "RunResult",
    "Scenario",
    "StateSnapshot",
    "Strategy",
    "evaluate",
    "make_structure",
    "run_checker",
    "run_exhaustive",
    "run_random",
    "run_script",
]
