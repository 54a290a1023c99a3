from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import STRUCTURES, sweep
from localview.linearizability import PHI, abstract, default_abstraction
from localview.scheduler import OpSpec, Scenario, run_random
from localview.shared_memory import Bool, Int, Location, MarkedRef, Ref
from localview.structures import REGISTRY, make_structure
from localview.structures.skip_list import level_field

KEYS = [1, 2, 3, 4, 5]
set_op = st.tuples(st.sampled_from(["contains", "insert", "delete"]), st.sampled_from(KEYS))
ops = st.lists(set_op, max_size=14)


def sequential(structure, script, options=None, maintenance=()):
    spec = [OpSpec(m, k) for m, k in script]
    sc = Scenario("seq", structure, KEYS, threads=[spec], options=options or {})
    return run_random(sc, 0)


def expected_results(script):
    s, out = set(), []
    for m, k in script:
        if m == "contains":
            out.append(k in s)
        elif m == "insert":
            out.append(k not in s)
            s.add(k)
        else:
            out.append(k in s)
            s.discard(k)
    return out, s


def walk_list(h, head=0, field="next"):
    """Keys of unmarked nodes met walking from head (independent of search paths)."""
    keys, node, seen = set(), head, set()
    while node is not None and node not in seen:
        seen.add(node)
        k = h.get(Location(node, "key")).value
        v = h.get(Location(node, field))
        mark = h.get(Location(node, "mark"))
        if isinstance(v, MarkedRef):
            nxt = v.target
        else:
            nxt = v.node if isinstance(v, Ref) else None
        nxt_mark = isinstance(v, MarkedRef) and v.mark
        if k not in (float("-inf"), float("inf")) and mark != Bool(True) and not nxt_mark:
            keys.add(k)
        node = nxt
    return keys


def tree_contents(h, root=0):
    """Keys of BST nodes not logically deleted, by plain descent per key."""
    out = set()
    for k in KEYS:
        node = root
        while node is not None:
            nk = h.get(Location(node, "key")).value
            if nk == k:
                if h.get(Location(node, "del")) == Bool(False):
                    out.add(k)
                break
            v = h.get(Location(node, "left" if k < nk else "right"))
            node = v.node if isinstance(v, Ref) else None
    return out


@pytest.mark.parametrize("structure", STRUCTURES)
@given(script=ops)
def test_sequential_runs_behave_like_a_set(structure, script):
    opts = {"variant": "A"} if structure == "lazy_list" else {}
    r = sequential(structure, script, opts)
    assert r.conclusive
    want, final = expected_results(script)
    assert [o.result for o in r.ops] == want
    assert not r.assertion_failures
    h = r.log.state_at(r.log.n_writes)
    fn = default_abstraction(structure, opts)
    assert abstract(PHI[fn], h) == frozenset(final)
    if structure == "cf_tree":
        assert tree_contents(h) == final
    elif structure in ("lazy_list", "lf_list"):
        assert walk_list(h) == final
    else:
        assert walk_list(h, field=level_field(0)) == final


maintenance = st.tuples(st.sampled_from(sorted(REGISTRY["cf_tree"].maintenance)), st.none())


@given(mixed=st.lists(st.one_of(set_op, maintenance), max_size=24))
def test_cf_maintenance_keeps_contents_sequentially(mixed):
    spec = [OpSpec(m, k) for m, k in mixed]
    r = run_random(Scenario("seq", "cf_tree", KEYS, threads=[spec]), 0)
    _, final = expected_results([x for x in mixed if x[1] is not None])
    h = r.log.state_at(r.log.n_writes)
    assert abstract(PHI["phi_cf"], h) == frozenset(final)
    assert not r.assertion_failures


@pytest.mark.parametrize("structure", STRUCTURES)
@given(seed=st.integers(0, 100_000))
def test_concurrent_runs_keep_step_assertions(structure, seed):
    r = run_random(sweep(structure, threads=3, ops=4), seed)
    assert r.conclusive
    assert not r.assertion_failures


def test_lazy_variants_differ_only_on_marked_nodes():
    with pytest.raises(ValueError):
        make_structure("lazy_list", variant="C")
    assert REGISTRY["lazy_list"]().variant == "A"


def test_list_aliases_map_to_set_kinds():
    lf = make_structure("lf_list")
    assert lf.kind("add") == "insert" and lf.kind("remove") == "delete"
    assert make_structure("cf_tree").kind("rotate_right_left") is None
    assert make_structure("cf_wandering").kind("wandering_contains") == "contains"


def test_fresh_tree_holds_only_the_sentinel():
    r = sequential("cf_tree", [])
    h = r.log.init
    assert h.get(Location(0, "key")) == Int(float("inf"))
    assert abstract(PHI["phi_cf"], h) == frozenset()
