"""The nine acceptance criteria, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines appear in
the "acceptance criteria" section of the terminal summary.
"""

from __future__ import annotations

import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import pytest

from conftest import STRUCTURES, record_criterion, sweep
from localview.analysis import RunView
from localview.framework_checkers import (
    check_accumulated_acyclic, check_fabrication, check_hindsight_all, check_preservation,
    check_read_in_order_all, check_transition_invariants_cf, completed_traversals, local_view_paths_absent,
)
from localview.lab import STABLE_LABELS
from localview.linearizability import (
    brute_force_linearize, check_by_abstraction, initial_abstract_set, phi_stability,
)
from localview.paths import CFModel, model_for
from localview.scenario_file import load_scenario, resolve_scenario_path
from localview.scheduler import run_exhaustive, run_random, run_script

SWEEP_RUNS = 1000
SMALL_RUNS = 1000
SHORT_SWEEP_RUNS = 200
CONDITIONS = ("read_in_order", "acyclicity", "preservation", "hindsight")

SKIP_LIST_PRESERVATION = (
    "Skip-list search paths may step onto entry n.next[i] whenever the predecessor's key is below k, "
    "without looking at n's own key.  Inserting a node m with u.key < m.key <= n.key in front of n then "
    "cuts k-reachability of n's entries for every k in (u.key, m.key], and the later mark, snip or link "
    "write on such an entry violates preservation.  It happens single-threaded (insert 1, 5, 3, remove 5; "
    "k = 2).  Hindsight still holds on every run, so the conclusion survives; the premise does not."
)


# -- shared sweep (criteria 1, 3, 7) ------------------------------------------


def _sweep(structure):
    sc = sweep(structure)
    model = model_for(structure)
    out = {"runs": 0, "conclusive": 0, "lin_fail": [], "lin_seconds": 0.0, "cond_fail": Counter(),
           "cond_example": {}, "per_traversal_pres_fail": 0, "traversals": 0, "stable": Counter(),
           "stable_fail": [], "lazy_unlink": 0, "lazy_unlink_fail": []}
    for seed in range(SWEEP_RUNS):
        t0 = time.perf_counter()
        r = run_random(sc, seed)
        out["runs"] += 1
        if not r.conclusive:
            continue
        out["conclusive"] += 1
        view = RunView.of(r, model)
        lin = check_by_abstraction(r, view=view)
        out["lin_seconds"] += time.perf_counter() - t0
        if lin.failed:
            out["lin_fail"].append((seed, lin.detail))
        out["traversals"] += len(completed_traversals(r))
        verdicts = {
            "read_in_order": check_read_in_order_all(r, model),
            "acyclicity": check_accumulated_acyclic(r.log, model),
            "preservation": check_preservation(r, model, view=view),
            "hindsight": check_hindsight_all(r, model, view, field_extended=True),
        }
        for name, v in verdicts.items():
            if v.failed:
                out["cond_fail"][name] += 1
                out["cond_example"].setdefault(name, (seed, v.detail))
        if verdicts["preservation"].failed and check_preservation(r, model, view=view, per_traversal=True).failed:
            out["per_traversal_pres_fail"] += 1
        if structure == "cf_tree":
            labels = STABLE_LABELS["phi_cf"]
            out["stable"].update(lab for lab in r.labels.values() if lab in labels)
            v = phi_stability(r, labels, "phi_cf", view)
            if v.failed:
                out["stable_fail"].append((seed, v.detail))
        if structure == "lazy_list":
            out["lazy_unlink"] += sum(1 for lab in r.labels.values() if lab == "delete.unlink")
            v = phi_stability(r, ("delete.unlink",), "phi_lazy_logical", view)
            if v.failed:
                out["lazy_unlink_fail"].append((seed, v.detail))
    return out


@pytest.fixture(scope="module")
def sweeps():
    t0 = time.perf_counter()
    data = {s: _sweep(s) for s in STRUCTURES}
    data["_seconds"] = time.perf_counter() - t0
    return data


# -- criteria ----------------------------------------------------------------


def test_criterion_1_linearizability_sweep(sweeps):
    lin_seconds = sum(sweeps[s]["lin_seconds"] for s in STRUCTURES)
    fails = {s: len(sweeps[s]["lin_fail"]) for s in STRUCTURES}
    conclusive = {s: sweeps[s]["conclusive"] for s in STRUCTURES}
    ok = not any(fails.values()) and lin_seconds <= 300 and all(c > 0 for c in conclusive.values())
    record_criterion(1, ok, f"{SWEEP_RUNS} runs x 4 structures (3 threads, 6 ops, 8 keys); "
                     f"conclusive {conclusive}; failures {fails}; {lin_seconds:.1f}s for runs + linearizability")
    for s in STRUCTURES:
        assert not sweeps[s]["lin_fail"], sweeps[s]["lin_fail"][:3]
    assert lin_seconds <= 300


def test_criterion_2_oracle_agreement():
    counts = {}
    disagreements = []
    for structure in STRUCTURES:
        sc = sweep(structure, keys=[1, 2, 3], threads=3, ops=2)
        c = Counter()
        seed = 0
        while c["histories"] < SMALL_RUNS:
            r = run_random(sc, seed)
            seed += 1
            if not r.conclusive:
                continue
            set_ops = [o for o in r.ops if o.kind is not None]
            assert len(set_ops) <= 6
            bf = brute_force_linearize(r.ops, initial_abstract_set(r))
            ab = check_by_abstraction(r)
            c["histories"] += 1
            c["linearizable"] += bool(bf.passed)
            if bf.passed != ab.passed:
                disagreements.append((structure, seed - 1, bf.detail, ab.detail))
        counts[structure] = dict(c)
    record_criterion(2, not disagreements, f"{SMALL_RUNS} histories of <= 6 operations per structure; "
                     f"{len(disagreements)} disagreements; {counts}")
    assert not disagreements, disagreements[:3]


@pytest.mark.parametrize("structure", [
    "cf_tree", "lazy_list", "lf_list",
    pytest.param("skip_list", marks=pytest.mark.xfail(strict=True, reason=SKIP_LIST_PRESERVATION)),
])
def test_criterion_3_framework_soundness(sweeps, structure):
    d = sweeps[structure]
    fails = dict(d["cond_fail"])
    if structure == "skip_list":
        _summarize_criterion_3(sweeps)
    assert not fails, (fails, d["cond_example"])


def _summarize_criterion_3(sweeps):
    parts = []
    ok = True
    for s in STRUCTURES:
        d = sweeps[s]
        fails = dict(d["cond_fail"])
        ok &= not fails
        extra = f", per-traversal preservation fails on {d['per_traversal_pres_fail']}" if fails.get("preservation") else ""
        parts.append(f"{s}: {d['traversals']} traversals, failures {fails or 'none'}{extra}")
    record_criterion(3, ok, "; ".join(parts) + ("" if ok else "; skip-list preservation is a documented finding"))


def test_criterion_4_necessity_fixtures():
    model = CFModel()
    t0 = time.perf_counter()
    inplace = run_exhaustive(load_scenario(resolve_scenario_path("inplace_rotation_counterexample")),
                             preemption_bound=3)
    pres = lin = 0
    for r in inplace:
        view = RunView.of(r, model)
        pres += check_preservation(r, model, view=view).failed
        lin += check_by_abstraction(r, view=view).failed
    t_inplace = time.perf_counter() - t0

    t0 = time.perf_counter()
    wander = run_exhaustive(load_scenario(resolve_scenario_path("wandering")), preemption_bound=3)
    rio = sum(check_read_in_order_all(r, CFModel()).failed for r in wander)
    cyc = sum(check_accumulated_acyclic(r.log, CFModel(null_to_root=True)).failed for r in wander)
    t_wander = time.perf_counter() - t0

    ok = pres >= 1 and lin >= 1 and rio >= 1 and cyc >= 1 and t_inplace < 60 and t_wander < 60
    record_criterion(4, ok, f"in-place rotation: {len(inplace)} schedules, {pres} preservation and {lin} "
                     f"linearizability failures in {t_inplace:.1f}s; wandering: {len(wander)} schedules, "
                     f"{rio} read-in-order violations, {cyc} cyclic in {t_wander:.1f}s")
    assert ok


def test_criterion_5_fabricated_traces():
    results = {}
    failures = []
    for structure in ("cf_tree", "lazy_list"):
        sc = sweep(structure)
        model = model_for(structure)
        n = traversals = 0
        for seed in range(SHORT_SWEEP_RUNS):
            r = run_random(sc, seed)
            if not r.conclusive:
                continue
            v = check_fabrication(r, model)
            n += 1
            traversals += v.count
            if not v.passed:
                failures.append((structure, seed, v.name, v.detail))
        results[structure] = f"{n} runs, {traversals} traversals"
    record_criterion(5, not failures, f"containment, forward-agreement, simulation: {results}; "
                     f"{len(failures)} failures")
    assert not failures, failures[:3]


def test_criterion_6_transition_invariants():
    sc = sweep("cf_tree")
    failures = []
    transitions = 0
    for seed in range(SHORT_SWEEP_RUNS):
        r = run_random(sc, seed)
        v = check_transition_invariants_cf(r)
        transitions += v.count
        if not v.passed:
            failures.append((seed, v.detail))
    record_criterion(6, not failures, f"{SHORT_SWEEP_RUNS} CF-tree runs, {transitions} transitions, "
                     f"{len(failures)} failures")
    assert not failures, failures[:3]


def test_criterion_7_phi_stability(sweeps):
    cf, lazy = sweeps["cf_tree"], sweeps["lazy_list"]
    seen = dict(cf["stable"])
    required = ("rotate.fresh", "remove_right.unlink")
    ok = not cf["stable_fail"] and not lazy["lazy_unlink_fail"] and all(seen.get(l, 0) > 0 for l in required) \
        and lazy["lazy_unlink"] > 0
    record_criterion(7, ok, f"CF writes checked {seen}, {len(cf['stable_fail'])} phi_cf changes; "
                     f"{lazy['lazy_unlink']} lazy unlinks, {len(lazy['lazy_unlink_fail'])} phi_lazy_logical changes")
    assert ok, (cf["stable_fail"][:3], lazy["lazy_unlink_fail"][:3])


def test_criterion_8_rotation_race():
    sc = load_scenario(resolve_scenario_path("rotation_race"))
    r = run_script(sc, sc.strategy.script)
    model = CFModel()
    view = RunView.of(r, model)
    contains = next(o for o in r.ops if o.method == "contains")
    t = next(t for t in completed_traversals(r) if t.op == contains.op)
    absent = local_view_paths_absent(r, t, model, contains.key)
    checks = {
        "linearizability": check_by_abstraction(r, view=view),
        "brute_force": brute_force_linearize(r.ops, initial_abstract_set(r)),
        "read_in_order": check_read_in_order_all(r, model),
        "acyclicity": check_accumulated_acyclic(r.log, model),
        "preservation": check_preservation(r, model, view=view),
        "hindsight": check_hindsight_all(r, model, view),
    }
    ok = r.conclusive and contains.result is True and bool(absent) and all(v.passed for v in checks.values())
    paths = "; ".join(" -> ".join(str(p) for p in path) for _, path in absent[:1])
    record_criterion(8, ok, f"contains({contains.key}) = {contains.result}; {len(absent)} local-view paths in no "
                     f"global state (e.g. {paths}); checks {[k for k, v in checks.items() if v.passed]} pass")
    assert ok


def test_criterion_9_determinism(tmp_path):
    digests = {}
    for structure in STRUCTURES:
        scen = tmp_path / f"{structure}.yaml"
        opts = "options: {variant: B}\n" if structure == "lazy_list" else ""
        scen.write_text(f"name: det_{structure}\nstructure: {structure}\n{opts}keys: [1, 2, 3, 4, 5, 6, 7, 8]\n"
                        "threads: 3\nops_per_thread: 6\nseed: 17\nstrategy: {kind: random, runs: 3}\n"
                        "checkers: [linearizability]\nkeep_logs: all\n")
        outputs = []
        for i in range(3):
            out = tmp_path / f"{structure}-{i}"
            proc = subprocess.run([sys.executable, "-m", "localview.cli", "run", "--scenario", str(scen),
                                   "--out-dir", str(out)], capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outputs.append({p.name: p.read_bytes() for p in sorted(Path(out).iterdir())})
        digests[structure] = len(outputs[0])
        assert outputs[0] and outputs[0] == outputs[1] == outputs[2]
    record_criterion(9, True, f"3 CLI invocations per structure produced byte-identical files {digests}")
