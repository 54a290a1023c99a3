"""Run checkers by name over a `RunResult` and collect verdict records."""

from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import RunView, Verdict
from .framework_checkers import (
    check_accumulated_acyclic,
    check_fabrication,
    check_hindsight_all,
    check_lf_invariants,
    check_preservation,
    check_read_in_order_all,
    check_sl_invariants,
    check_transition_invariants_cf,
)
from .linearizability import (
    BRUTE_FORCE_LIMIT,
    brute_force_linearize,
    check_by_abstraction,
    default_abstraction,
    initial_abstract_set,
    phi_stability,
)
from .paths import model_for

# writes that must leave the abstraction unchanged, per abstraction
STABLE_LABELS = {
    "phi_cf": (
        "rotate.fresh", "rotate.x_right", "rotate.x_left", "rotate.p_left", "rotate.p_right",
        "remove_right.unlink", "remove_left.unlink",
    ),
    "phi_lazy_logical": ("delete.unlink",),
}

CHECKERS = (
    "linearizability",
    "brute_force",
    "read_in_order",
    "acyclicity",
    "preservation",
    "hindsight",
    "fabrication",
    "transition_invariants",
    "lf_invariants",
    "sl_invariants",
    "phi_stability",
    "assertions",
)

DEFAULT_CHECKERS = {
    "cf_tree": ("linearizability", "read_in_order", "acyclicity", "preservation", "hindsight",
                "transition_invariants", "phi_stability", "assertions"),
    "cf_inplace": ("linearizability", "read_in_order", "preservation", "hindsight", "assertions"),
    "cf_wandering": ("linearizability", "read_in_order", "acyclicity"),
    "lazy_list": ("linearizability", "read_in_order", "acyclicity", "preservation", "hindsight", "phi_stability",
                  "assertions"),
    "lf_list": ("linearizability", "read_in_order", "acyclicity", "preservation", "hindsight", "lf_invariants",
                "assertions"),
    "skip_list": ("linearizability", "read_in_order", "acyclicity", "preservation", "hindsight", "sl_invariants",
                  "assertions"),
}


@dataclass
class CheckContext:
    """Per-checker options as given in a scenario's ``checker_options``."""

    options: dict = field(default_factory=dict)

    def of(self, name: str) -> dict:
        return dict(self.options.get(name, {}))


def _model(result, opts: dict):
    merged = dict(result.structure_options)
    merged.update(opts.get("model", {}))
    return model_for(result.structure_name, **merged)


def _assertions(result) -> Verdict:
    if result.assertion_failures:
        a = result.assertion_failures[0]
        return Verdict("assertions", False,
                       f"{len(result.assertion_failures)} assertion(s) failed; first {a.name} in op {a.op} at event {a.seq}",
                       {"name": a.name, "op": a.op, "event": a.seq})
    return Verdict("assertions", True, "all step assertions held")


def run_checker(name: str, result, ctx: CheckContext | None = None, views: dict | None = None) -> Verdict:
    ctx = ctx or CheckContext()
    opts = ctx.of(name)
    if not result.conclusive and name != "assertions":
        return Verdict(name, None, f"run is {result.status}; not judged")
    views = {} if views is None else views

    def view_for(model):
        key = (type(model).__name__, tuple(sorted(vars(model).items())))
        if key not in views:
            views[key] = RunView.of(result, model)
        return views[key]

    if name == "linearizability":
        model = model_for(result.structure_name, **result.structure_options)
        fn = opts.get("abstraction")
        return check_by_abstraction(result, fn, view_for(model))
    if name == "brute_force":
        set_ops = [o for o in result.ops if o.kind is not None]
        if len(set_ops) > BRUTE_FORCE_LIMIT:
            return Verdict(name, None, f"{len(set_ops)} operations exceed the brute-force limit")
        initial = initial_abstract_set(result, opts.get("abstraction"))
        return brute_force_linearize(result.ops, initial)
    if name == "assertions":
        return _assertions(result)
    if name == "phi_stability":
        fn = opts.get("abstraction") or default_abstraction(result.structure_name, result.structure_options)
        labels = opts.get("labels") or STABLE_LABELS.get(fn, ())
        if not labels:
            return Verdict(name, None, f"no stability obligations for {fn}")
        model = model_for(result.structure_name, **result.structure_options)
        return phi_stability(result, labels, fn, view_for(model))
    if name == "lf_invariants":
        return check_lf_invariants(result)
    if name == "sl_invariants":
        return check_sl_invariants(result, literal_sorted=opts.get("literal_sorted", False))
    if name == "transition_invariants":
        if not result.structure_name.startswith("cf_"):
            return Verdict(name, None, "transition invariants are defined for the CF tree only")
        return check_transition_invariants_cf(result)

    model = _model(result, opts)
    if name == "read_in_order":
        return check_read_in_order_all(result, model, current_state=opts.get("form") == "current")
    if name == "acyclicity":
        return check_accumulated_acyclic(result.log, model)
    if name == "preservation":
        return check_preservation(result, model, view=view_for(model), per_traversal=opts.get("scope") == "traversal")
    if name == "hindsight":
        return check_hindsight_all(result, model, view_for(model), field_extended=opts.get("field_extended", True))
    if name == "fabrication":
        return check_fabrication(result, model, view_for(model))
    raise KeyError(f"unknown checker {name!r}; known: {', '.join(CHECKERS)}")


def default_checkers(structure_name: str) -> tuple[str, ...]:
    return DEFAULT_CHECKERS.get(structure_name, ("linearizability",))


def evaluate(result, checkers=None, checker_options: dict | None = None) -> list[Verdict]:
    names = list(checkers) if checkers else list(default_checkers(result.structure_name))
    ctx = CheckContext(checker_options or {})
    views: dict = {}
    return [run_checker(n, result, ctx, views) for n in names]


def run_record(result, verdicts: list[Verdict]) -> dict:
    return {
        "scenario": result.scenario_name,
        "seed": result.seed,
        "status": result.status,
        "schedule": " ".join(str(i) for i in result.schedule),
        "verdicts": [v.to_record() for v in verdicts],
    }


def failed(verdicts: list[Verdict]) -> bool:
    return any(v.failed for v in verdicts)
