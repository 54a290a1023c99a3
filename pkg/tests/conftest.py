from __future__ import annotations

import os

from hypothesis import HealthCheck, settings

from localview.scenario_file import parse_op
from localview.scheduler import Scenario

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

STRUCTURES = ("cf_tree", "lazy_list", "lf_list", "skip_list")

CF_MIX = {
    "contains": 1, "insert": 1, "delete": 1,
    "remove_right": 0.3, "remove_left": 0.3, "rotate_right_left": 0.3, "rotate_left_right": 0.3,
}

# the lazy list is checked in the variant whose contains answers true on a marked node
SWEEP_OPTIONS = {"lazy_list": {"variant": "B"}}


def sweep(structure: str, keys=range(1, 9), threads: int = 3, ops: int = 6, **kw) -> Scenario:
    kw.setdefault("options", dict(SWEEP_OPTIONS.get(structure, {})))
    if structure == "cf_tree":
        kw.setdefault("op_mix", CF_MIX)
    return Scenario(structure, structure, list(keys), n_threads=threads, ops_per_thread=ops, **kw)


def scripted(structure: str, threads, keys, prefill=(), **kw) -> Scenario:
    return Scenario(
        "scripted", structure, list(keys),
        threads=[[parse_op(o) for o in t] for t in threads],
        prefill=[parse_op(o) for o in prefill],
        **kw,
    )


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
