"""YAML scenario files.

Schema (all keys except ``name``, ``structure`` and ``keys`` optional)::

    name: lazy_smoke
    structure: lazy_list            # cf_tree | lazy_list | lf_list | skip_list | cf_inplace | cf_wandering
    options: {variant: B}           # passed to the structure constructor
    keys: [1, 2, 3, 4]              # finite key universe, no sentinels
    threads: 2                      # a count (ops drawn from op_mix) ...
    # threads:                      # ... or explicit per-thread scripts
    #   - [contains(4)]
    #   - [rotate_right_left(5), insert(4)]
    ops_per_thread: 3
    op_mix: {contains: 1, insert: 1, delete: 1}
    prefill: [insert(5), insert(3)] # run sequentially before the threads start
    seed: 0
    strategy:
      kind: random                  # random | exhaustive | scripted
      runs: 20                      # random: seeds seed .. seed+runs-1
      preemption_bound: 3           # exhaustive
      step_bound: 60                # exhaustive
      script: "0*4 1* 2* 0*"        # scripted; tokens i, i*n, i*
    checkers: [linearizability, preservation]
    checker_options: {acyclicity: {model: {null_to_root: true}}}
    fuel: 10000
    keep_logs: failures             # failures | all | none

An operation is written ``method`` or ``method(key)``.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .lab import CHECKERS
from .scheduler import DEFAULT_FUEL, DEFAULT_PREEMPTION_BOUND, DEFAULT_STEP_BOUND, OpSpec, Scenario, Strategy
from .structures import REGISTRY

_OP = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(\s*(-?\d+)\s*\))?\s*$")


class ScenarioError(ValueError):
    pass


def parse_op(text: str) -> OpSpec:
    m = _OP.match(text)
    if not m:
        raise ValueError(f"cannot parse operation {text!r}; expected method or method(key)")
    return OpSpec(m.group(1), None if m.group(2) is None else int(m.group(2)))


class StrategyModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["random", "exhaustive", "scripted"] = "random"
    runs: int = Field(1, ge=1)
    preemption_bound: int = Field(DEFAULT_PREEMPTION_BOUND, ge=0)
    step_bound: int = Field(DEFAULT_STEP_BOUND, ge=1)
    script: str = ""


class ScenarioModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    structure: str
    options: dict = Field(default_factory=dict)
    keys: list[int] = Field(min_length=1)
    threads: Union[int, list[list[str]]] = 2
    ops_per_thread: int = Field(3, ge=0)
    op_mix: dict[str, float] = Field(default_factory=lambda: {"contains": 1, "insert": 1, "delete": 1})
    prefill: list[str] = Field(default_factory=list)
    seed: int = 0
    strategy: StrategyModel = Field(default_factory=StrategyModel)
    checkers: list[str] | None = None
    checker_options: dict[str, dict] = Field(default_factory=dict)
    fuel: int = Field(DEFAULT_FUEL, ge=1)
    keep_logs: Literal["failures", "all", "none"] = "failures"

    @field_validator("structure")
    @classmethod
    def _known_structure(cls, v):
        if v not in REGISTRY:
            raise ValueError(f"unknown structure {v!r}; known: {', '.join(sorted(REGISTRY))}")
        return v

    @field_validator("checkers")
    @classmethod
    def _known_checkers(cls, v):
        for c in v or ():
            if c not in CHECKERS:
                raise ValueError(f"unknown checker {c!r}; known: {', '.join(CHECKERS)}")
        return v

    @field_validator("threads")
    @classmethod
    def _threads(cls, v):
        if isinstance(v, int):
            if v < 1:
                raise ValueError("thread count must be at least 1")
        else:
            if not v:
                raise ValueError("at least one thread script is required")
            for script in v:
                for op in script:
                    parse_op(op)
        return v

    @field_validator("prefill")
    @classmethod
    def _prefill(cls, v):
        for op in v:
            parse_op(op)
        return v


def to_scenario(model: ScenarioModel) -> Scenario:
    structure_cls = REGISTRY[model.structure]
    known = set(structure_cls.methods) | set(structure_cls.maintenance)
    threads = None
    n_threads = 1
    if isinstance(model.threads, int):
        n_threads = model.threads
        for m in model.op_mix:
            if m not in known:
                raise ScenarioError(f"op_mix: {model.structure} has no operation {m!r}")
    else:
        threads = [[parse_op(o) for o in t] for t in model.threads]
        n_threads = len(threads)
    prefill = [parse_op(o) for o in model.prefill]
    for spec in prefill + [s for t in (threads or []) for s in t]:
        if spec.method not in known:
            raise ScenarioError(f"{model.structure} has no operation {spec.method!r}")
    st = model.strategy
    try:
        return Scenario(
            name=model.name,
            structure=model.structure,
            keys=list(model.keys),
            threads=threads,
            n_threads=n_threads,
            ops_per_thread=model.ops_per_thread,
            op_mix=dict(model.op_mix),
            prefill=prefill,
            options=dict(model.options),
            seed=model.seed,
            strategy=Strategy(st.kind, st.runs, st.preemption_bound, st.step_bound, st.script),
            checkers=list(model.checkers) if model.checkers else None,
            fuel=model.fuel,
            checker_options=dict(model.checker_options),
            keep_logs=model.keep_logs,
        )
    except (ValueError, KeyError) as e:
        raise ScenarioError(str(e)) from None


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    return parse_scenario(text, source=str(path))


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioError(f"{source}: not valid YAML: {e}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: a scenario must be a mapping")
    try:
        model = ScenarioModel.model_validate(data)
    except ValidationError as e:
        lines = [f"{source}: invalid scenario"]
        for err in e.errors():
            where = ".".join(str(p) for p in err["loc"]) or "(top)"
            lines.append(f"  {where}: {err['msg']}")
        raise ScenarioError("\n".join(lines)) from None
    return to_scenario(model)


def scenario_to_dict(sc: Scenario) -> dict:
    """Normalized, JSON-friendly form (used for digests and round-trips)."""
    d = {
        "name": sc.name,
        "structure": sc.structure,
        "options": sc.options,
        "keys": list(sc.keys),
        "threads": [[str(o) for o in t] for t in sc.threads] if sc.threads is not None else sc.n_threads,
        "ops_per_thread": sc.ops_per_thread,
        "op_mix": {m: float(w) for m, w in sorted(sc.op_mix.items())},
        "prefill": [str(o) for o in sc.prefill],
        "seed": sc.seed,
        "strategy": {
            "kind": sc.strategy.kind,
            "runs": sc.strategy.runs,
            "preemption_bound": sc.strategy.preemption_bound,
            "step_bound": sc.strategy.step_bound,
            "script": sc.strategy.script if isinstance(sc.strategy.script, str) else " ".join(map(str, sc.strategy.script)),
        },
        "checkers": sc.checkers,
        "checker_options": sc.checker_options,
        "fuel": sc.fuel,
        "keep_logs": sc.keep_logs,
    }
    return d


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def scenario_digest(sc: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(sc), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


BUNDLED_DIR = Path(__file__).parent / "scenarios"


def bundled_scenarios() -> dict[str, Path]:
    return {p.stem: p for p in sorted(BUNDLED_DIR.glob("*.yaml"))}


def resolve_scenario_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return bundled[name_or_path]
    raise ScenarioError(f"no scenario file {name_or_path!r} (bundled: {', '.join(bundled) or 'none'})")
