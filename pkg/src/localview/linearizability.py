"""Linearizability of recorded set histories, decided two independent ways.

`check_by_abstraction` maps every global state to an abstract set and
demands that each abstract change is made by the successful update it
belongs to, while read-only and failed operations find a matching state
inside their own window.

`brute_force_linearize` ignores the heap entirely and searches for a total
order of the operations that respects real time and replays correctly on a
plain Python set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .analysis import RunView, Verdict
from .paths import SearchModel, as_lookup, model_for, reach_set
from .shared_memory import ABSENT, Bool, Int, Location, MarkedRef, Ref, target_of
from .structures.skip_list import level_field

BRUTE_FORCE_LIMIT = 7


# ---------------------------------------------------------------------------
# Abstraction functions
# ---------------------------------------------------------------------------


def _false(v) -> bool:
    return isinstance(v, Bool) and not v.value


def _unmarked(v) -> bool:
    return isinstance(v, MarkedRef) and not v.mark


@dataclass(frozen=True)
class AbstractionFunction:
    name: str
    model_name: str
    # condition on the node holding key k, besides k-reachability of its designated location
    condition: Callable[[Callable, int], bool]

    def model(self) -> SearchModel:
        return model_for(self.model_name)


PHI = {
    "phi_cf": AbstractionFunction("phi_cf", "cf_tree", lambda get, n: _false(get(Location(n, "del")))),
    "phi_lazy_logical": AbstractionFunction(
        "phi_lazy_logical", "lazy_list", lambda get, n: _false(get(Location(n, "mark")))
    ),
    "phi_lazy_physical": AbstractionFunction("phi_lazy_physical", "lazy_list", lambda get, n: True),
    "phi_lf": AbstractionFunction("phi_lf", "lf_list", lambda get, n: _unmarked(get(Location(n, "next")))),
    "phi_sl": AbstractionFunction("phi_sl", "skip_list", lambda get, n: _unmarked(get(Location(n, level_field(0))))),
}


def default_abstraction(structure_name: str, options: dict | None = None) -> str:
    options = options or {}
    if structure_name.startswith("cf_"):
        return "phi_cf"
    if structure_name == "lazy_list":
        return "phi_lazy_physical" if options.get("variant", "A") == "B" else "phi_lazy_logical"
    if structure_name == "lf_list":
        return "phi_lf"
    if structure_name == "skip_list":
        return "phi_sl"
    raise KeyError(structure_name)


def _members(fn: AbstractionFunction, model: SearchModel, get, k, reach: frozenset) -> bool:
    target = Int(k)
    for loc in reach:
        if loc != model.designated(loc.node):
            continue
        if get(Location(loc.node, "key")) == target and fn.condition(get, loc.node):
            return True
    return False


def _check_refs(get, locations: Iterable[Location]) -> None:
    for loc in locations:
        t = target_of(get(loc))
        if t is not None and get(Location(t, "key")) is ABSENT:
            raise ValueError(f"dangling reference at {loc} -> node {t}")


def abstract(fn: AbstractionFunction | str, h) -> frozenset:
    """The abstract set represented by the full snapshot h."""
    if isinstance(fn, str):
        fn = PHI[fn]
    model = fn.model()
    get = as_lookup(h)
    locs = list(h) if not callable(h) else []
    _check_refs(get, locs)
    keys = set()
    for loc in locs:
        if loc.field == "key":
            v = get(loc)
            if isinstance(v, Int) and isinstance(v.value, int):
                keys.add(v.value)
    out = set()
    for k in keys:
        r, _ = reach_set(model, get, k)
        if _members(fn, model, get, k, r):
            out.add(k)
    return frozenset(out)


def phi_series(view: RunView, fn: AbstractionFunction) -> list[frozenset]:
    """phi(H_m) for m = 0..n, recomputed only where something relevant changed."""
    keys = view.set_keys
    reaches = {k: view.reach(k) for k in keys}
    model = view.model
    cur = dict(view.log.init._map)
    get = lambda loc: cur.get(loc, ABSENT)  # noqa: E731

    def compute(m):
        return frozenset(k for k in keys if _members(fn, model, get, k, reaches[k][m]))

    out = [compute(0)]
    relevant = model.membership_fields
    for m, w in enumerate(view.writes, 1):
        cur[w.loc] = w.new
        changed = w.old != w.new and (
            w.loc.field in relevant or any(reaches[k][m] is not reaches[k][m - 1] for k in keys)
        )
        out.append(compute(m) if changed else out[-1])
    return out


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


def _expected_ok(kind: str, result, present: bool) -> bool:
    if kind == "contains":
        return bool(result) == present
    if kind == "insert":
        return present if result is False else not present
    if kind == "delete":
        return (not present) if result is False else present
    raise ValueError(kind)


def check_by_abstraction(result, fn: str | None = None, view: RunView | None = None) -> Verdict:
    name = "linearizability"
    if not result.conclusive:
        return Verdict(name, None, f"run is {result.status}; not judged")
    fn_name = fn or default_abstraction(result.structure_name, result.structure_options)
    phi_fn = PHI[fn_name]
    view = view or RunView.of(result)
    phis = phi_series(view, phi_fn)
    ops = {o.op: o for o in result.ops}
    writes = view.writes
    pins: dict[int, list[int]] = {}

    for m in range(1, len(phis)):
        if phis[m] is phis[m - 1] or phis[m] == phis[m - 1]:
            continue
        w = writes[m - 1]
        owner = ops.get(w.op)
        for k, kind in [(k, "insert") for k in phis[m] - phis[m - 1]] + [
            (k, "delete") for k in phis[m - 1] - phis[m]
        ]:
            ok = owner is not None and owner.kind == kind and owner.key == k and owner.result is True
            if not ok:
                return Verdict(
                    name,
                    False,
                    f"{fn_name} {'gained' if kind == 'insert' else 'lost'} {k} at write {m} "
                    f"by op {w.op} ({owner.method if owner else '?'}({owner.key if owner else '?'}))",
                    {"write": m, "key": k, "op": w.op, "abstraction": fn_name},
                )
            pins.setdefault(owner.op, []).append(m)

    checked = 0
    for o in result.ops:
        kind = o.kind
        if kind is None:
            continue
        checked += 1
        if kind in ("insert", "delete") and o.result is True:
            got = pins.get(o.op, [])
            if len(got) != 1:
                return Verdict(
                    name,
                    False,
                    f"successful {o.method}({o.key}) (op {o.op}) changed {fn_name} {len(got)} times",
                    {"op": o.op, "pins": got, "abstraction": fn_name},
                )
            continue
        lo = view.write_state_index(o.inv)
        hi = view.write_state_index(o.resp)
        if not any(_expected_ok(kind, o.result, o.key in phis[i]) for i in range(lo, hi + 1)):
            return Verdict(
                name,
                False,
                f"{o.method}({o.key}) = {o.result} (op {o.op}) matches no state in [{lo}, {hi}]",
                {"op": o.op, "window": [lo, hi], "abstraction": fn_name},
            )
    return Verdict(name, True, f"{checked} operations linearized via {fn_name}", count=checked)


def brute_force_linearize(ops: Sequence, initial: Iterable = ()) -> Verdict:
    """Search for a real-time-respecting order that replays on a sequential set.

    Maintenance operations (no set kind) are ignored.  At most seven set
    operations are accepted.
    """
    name = "brute_force"
    set_ops = [o for o in ops if o.kind is not None]
    if len(set_ops) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force handles at most {BRUTE_FORCE_LIMIT} operations, got {len(set_ops)}")
    if any(o.status != "ok" for o in set_ops):
        return Verdict(name, None, "history has incomplete operations")
    n = len(set_ops)
    before = [0] * n  # bitmask of ops that must precede i
    for i, a in enumerate(set_ops):
        for j, b in enumerate(set_ops):
            if i != j and b.resp <= a.inv:
                before[i] |= 1 << j
    full = (1 << n) - 1
    seen: set = set()
    order: list[int] = []

    def apply(o, s: frozenset):
        present = o.key in s
        if o.kind == "contains":
            return (bool(o.result) == present), s
        if o.kind == "insert":
            return (bool(o.result) == (not present)), s | {o.key}
        return (bool(o.result) == present), s - {o.key}

    def dfs(mask: int, s: frozenset) -> bool:
        if mask == full:
            return True
        if (mask, s) in seen:
            return False
        seen.add((mask, s))
        for i in range(n):
            bit = 1 << i
            if mask & bit or (before[i] & ~mask):
                continue
            ok, s2 = apply(set_ops[i], s)
            if ok:
                order.append(i)
                if dfs(mask | bit, s2):
                    return True
                order.pop()
        return False

    if dfs(0, frozenset(initial)):
        return Verdict(name, True, "order: " + ", ".join(f"op{set_ops[i].op}" for i in order), count=n)
    return Verdict(name, False, "no real-time-respecting order replays on a set", {"ops": [o.op for o in set_ops]}, n)


def initial_abstract_set(result, fn: str | None = None) -> frozenset:
    fn_name = fn or default_abstraction(result.structure_name, result.structure_options)
    return abstract(PHI[fn_name], result.log.init)


def phi_stability(result, labels_of_interest: Iterable[str], fn: str | None = None, view: RunView | None = None) -> Verdict:
    """Writes whose label is in `labels_of_interest` must leave phi unchanged."""
    name = "phi_stability"
    fn_name = fn or default_abstraction(result.structure_name, result.structure_options)
    view = view or RunView.of(result)
    phis = phi_series(view, PHI[fn_name])
    wanted = set(labels_of_interest)
    checked = 0
    for m, label in sorted(result.labels.items()):
        if label not in wanted:
            continue
        checked += 1
        if phis[m] != phis[m - 1]:
            return Verdict(
                name,
                False,
                f"write {m} ({label}) changed {fn_name}: {sorted(phis[m - 1])} -> {sorted(phis[m])}",
                {"write": m, "label": label, "before": sorted(phis[m - 1]), "after": sorted(phis[m])},
                checked,
            )
    return Verdict(name, True, f"{checked} labelled writes left {fn_name} unchanged", count=checked)


__all__ = [
    "PHI",
    "AbstractionFunction",
    "abstract",
    "brute_force_linearize",
    "check_by_abstraction",
    "default_abstraction",
    "initial_abstract_set",
    "phi_series",
    "phi_stability",
    "Ref",
]
