from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import STRUCTURES, scripted, sweep
from localview import runlog
from localview.scheduler import (
    SplitMix64, format_schedule, parse_schedule, run_exhaustive, run_random, run_script,
)


def test_splitmix_reference_values():
    # reference outputs of SplitMix64 seeded with 0 (Vigna's published generator)
    g = SplitMix64(0)
    assert [g.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    ]


@given(st.integers(0, 2**32), st.integers(1, 50))
def test_below_stays_in_range(seed, n):
    g = SplitMix64(seed)
    assert all(0 <= g.below(n) < n for _ in range(20))


@pytest.mark.parametrize("structure", STRUCTURES)
def test_same_seed_same_log(structure):
    sc = sweep(structure)
    a, b = run_random(sc, 11), run_random(sc, 11)
    assert runlog.dumps(a) == runlog.dumps(b)
    assert runlog.dumps(a) != runlog.dumps(run_random(sc, 12))


def test_parse_schedule_tokens():
    assert parse_schedule("0 1*3 2*") == [(0, 1), (1, 3), (2, None)]
    assert parse_schedule("") == []
    for bad in ("x", "1*y", "-1"):
        with pytest.raises(ValueError):
            parse_schedule(bad)
    assert format_schedule([0, 0, 1]) == "0 0 1"


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 10_000))
def test_recorded_schedule_replays_exactly(structure, seed):
    sc = sweep(structure, threads=3, ops=3)
    r = run_random(sc, seed)
    again = run_script(sc, r.schedule, seed)
    assert runlog.dumps(again) == runlog.dumps(r)
    assert runlog.dumps(run_script(sc, format_schedule(r.schedule), seed)) == runlog.dumps(r)


def test_scripted_pick_of_finished_thread_is_an_error():
    sc = scripted("lazy_list", [["contains(1)"], ["insert(1)"]], [1])
    with pytest.raises(ValueError):
        run_script(sc, "0* 0")


def test_short_script_leaves_run_partial():
    sc = scripted("lazy_list", [["contains(1)"], ["insert(1)"]], [1])
    r = run_script(sc, "0")
    assert r.status == "partial" and not r.conclusive


def test_fuel_exhaustion_voids_run():
    sc = sweep("lf_list", threads=2, ops=4, fuel=5)
    r = run_random(sc, 0)
    assert r.status == "fuel" and not r.conclusive


@pytest.mark.parametrize("n", [1, 2, 3])
def test_no_preemption_runs_threads_in_every_order(n):
    threads = [[f"insert({i + 1})"] for i in range(n)]
    sc = scripted("lazy_list", threads, [1, 2, 3], options={"variant": "B"})
    runs = run_exhaustive(sc, preemption_bound=0)
    orders = {tuple(dict.fromkeys(r.schedule)) for r in runs}
    assert orders == set(itertools.permutations(range(n)))
    assert len(runs) == len({tuple(r.schedule) for r in runs})


def test_exhaustive_covers_random_schedules():
    sc = scripted("lazy_list", [["insert(1)"], ["delete(1)"]], [1, 2], options={"variant": "B"})
    every = {tuple(r.schedule) for r in run_exhaustive(sc, preemption_bound=50, step_bound=200)}
    for seed in range(200):
        assert tuple(run_random(sc, seed).schedule) in every


def test_exhaustive_schedules_are_distinct_and_bounded():
    sc = scripted("cf_tree", [["contains(3)"], ["insert(3)"]], [3, 4], prefill=["insert(4)"])
    runs = run_exhaustive(sc, preemption_bound=2)
    scheds = [tuple(r.schedule) for r in runs]
    assert len(scheds) == len(set(scheds))
    assert all(r.conclusive for r in runs)
    assert len(run_exhaustive(sc, preemption_bound=2, limit=3)) == 3
