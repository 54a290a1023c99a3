from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import STRUCTURES, sweep
from localview.analysis import RunView, check_universe
from localview.framework_checkers import check_upward_absolute, random_extensions, reach_predicate
from localview.paths import (
    CFModel, LazyModel, LFModel, SkipModel, model_for, one_path, order_leq, reach_set, reaches, search_paths,
)
from localview.scheduler import run_random
from localview.shared_memory import ABSENT, NULL, Bool, Int, Location, MarkedRef, Ref

MODELS = {"cf_tree": CFModel, "lazy_list": LazyModel, "lf_list": LFModel, "skip_list": SkipModel}


def sampled_states(structure, seed, count=4):
    r = run_random(sweep(structure, threads=3, ops=4), seed)
    rng = random.Random(seed)
    n = r.log.n_writes
    return r, [r.log.state_at(rng.randint(0, n)).as_dict() for _ in range(count)]


def lookup(h):
    return lambda loc: h.get(loc, ABSENT)


def probe_keys(h):
    stored = sorted({v.value for l, v in h.items() if l.field == "key" and isinstance(v, Int)
                     and abs(v.value) != float("inf")})
    return check_universe(stored or [0])


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 50_000))
def test_reach_set_matches_path_enumeration(structure, seed):
    _, states = sampled_states(structure, seed, 2)
    model = model_for(structure)
    for h in states:
        get = lookup(h)
        locs = set(h) | {model.root_location()}
        for k in probe_keys(h)[::2]:
            r = reach_set(model, get, k)[0]
            for x in locs:
                assert (x in r) == bool(search_paths(model, get, k, x, limit=1))


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 50_000))
def test_path_axioms(structure, seed):
    """Every prefix of a search path is a search path, and paths extend one step at a time."""
    _, states = sampled_states(structure, seed, 2)
    model = model_for(structure)
    for h in states:
        get = lookup(h)
        for k in probe_keys(h)[::2]:
            r = reach_set(model, get, k)[0]
            for x in r:
                p = one_path(model, get, k, x)
                assert p is not None and p[0] == model.root_location() and p[-1] == x
                for a, b in zip(p, p[1:]):
                    assert b in model.path_step(get, a, k)[0]
                # truncation: every prefix ends at a reachable location
                assert all(loc in r for loc in p)
                # concatenation: one more step from x stays reachable
                assert set(model.path_step(get, x, k)[0]) <= r


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 50_000))
def test_search_paths_follow_the_order(structure, seed):
    _, states = sampled_states(structure, seed, 2)
    model = model_for(structure)
    for h in states:
        get = lookup(h)
        for k in probe_keys(h)[::2]:
            for x in reach_set(model, get, k)[0]:
                p = one_path(model, get, k, x)
                for i, a in enumerate(p):
                    for b in p[i:]:
                        assert order_leq(model, get, a, b), (k, a, b)


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 50_000), k=st.integers(-3, 12))
def test_reachability_is_constant_between_stored_keys(structure, seed, k):
    """The finite check universe (stored keys +- 1) represents every key."""
    _, states = sampled_states(structure, seed, 1)
    model = model_for(structure)
    h = states[0]
    stored = sorted({v.value for l, v in h.items() if l.field == "key" and isinstance(v, Int)
                     and abs(v.value) != float("inf")})
    if k in stored or not stored:
        rep = k
    elif k < stored[0]:
        rep = stored[0] - 1
    else:
        rep = max(s for s in stored if s < k) + 1
    assert reach_set(model, lookup(h), k)[0] == reach_set(model, lookup(h), rep)[0]


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 50_000))
def test_incremental_reach_matches_recomputation(structure, seed):
    r = run_random(sweep(structure, threads=2, ops=4), seed)
    model = model_for(structure, **r.structure_options)
    view = RunView.of(r, model)
    for k in view.keys[::3]:
        series = view.reach(k)
        for m in range(0, r.log.n_writes + 1, 3):
            assert series[m] == reach_set(model, r.log.state_at(m).get, k)[0]


@pytest.mark.parametrize("structure", STRUCTURES)
def test_reachability_is_upward_absolute(structure):
    """1,000 random (state, extension) pairs per structure."""
    model = model_for(structure)
    states = []
    for seed in range(10):
        r = run_random(sweep(structure, threads=3, ops=4), seed)
        states.extend(r.log.state_at(m).as_dict() for m in range(0, r.log.n_writes + 1, 7))
    rng = random.Random(1)
    pairs = list(random_extensions(states, 1000, seed=3))
    checked = 0
    for h, h2 in pairs:
        k = rng.randint(0, 9)
        x = rng.choice(sorted(h2)) if h2 else model.root_location()
        v = check_upward_absolute(reach_predicate(model, k, x), [(h, h2)])
        assert v.passed, v.detail
        checked += 1
    assert checked == 1000


def test_upward_absolute_trivial_cases():
    model = CFModel()
    h = {Location(0, "key"): Int(5), Location(0, "left"): Ref(1), Location(1, "key"): Int(3)}
    pred = reach_predicate(model, 3, Location(1, "key"))
    assert pred(h)
    assert check_upward_absolute(pred, [(h, dict(h))]).passed
    fresh = dict(h)
    fresh[Location(9, "key")] = Int(7)
    fresh[Location(9, "left")] = NULL
    assert check_upward_absolute(pred, [(h, fresh)]).passed
    with pytest.raises(ValueError):
        check_upward_absolute(pred, [(h, {})])


def test_cf_paths_by_hand():
    m = CFModel()
    h = {Location(0, "key"): Int(float("inf")), Location(0, "left"): Ref(1), Location(0, "del"): Bool(False),
         Location(1, "key"): Int(5), Location(1, "left"): NULL, Location(1, "right"): Ref(2),
         Location(2, "key"): Int(7), Location(2, "left"): NULL, Location(2, "right"): NULL}
    assert reaches(m, h, 7, Location(2, "key"))
    assert not reaches(m, h, 3, Location(2, "key"))
    assert reaches(m, h, 3, Location(1, "left"))
    assert [str(p) for p in one_path(m, lookup(h), 7, Location(2, "key"))] == [
        "n0.key", "n0.left", "n1.key", "n1.right", "n2.key"]


def test_lf_strict_and_mark_tolerant_paths():
    h = {Location(0, "key"): Int(float("-inf")), Location(0, "next"): MarkedRef(2, False),
         Location(2, "key"): Int(5), Location(2, "next"): MarkedRef(1, True),
         Location(1, "key"): Int(float("inf")), Location(1, "next"): MarkedRef(None, False)}
    strict, tolerant = LFModel(), LFModel(mark_tolerant=True)
    assert not reaches(strict, h, 5, Location(1, "key"))
    assert reaches(tolerant, h, 5, Location(1, "key"))
    assert reaches(strict, h, 6, Location(1, "key"))


def test_skip_levels_precede_lower_levels_and_keys_are_unordered():
    m = SkipModel(max_level=2)
    get = lambda loc: ABSENT  # noqa: E731
    hi, lo = Location(3, "next[2]"), Location(3, "next[0]")
    assert order_leq(m, get, hi, lo) and not order_leq(m, get, lo, hi)
    assert not order_leq(m, get, Location(3, "key"), lo)
    assert order_leq(m, get, Location(3, "key"), Location(3, "key"))
