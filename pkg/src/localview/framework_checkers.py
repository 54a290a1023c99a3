"""Dynamic checks of the local-view conditions on recorded executions.

Every checker takes a finished `RunResult` (or its log) plus a `SearchModel`
and returns a `Verdict`.  State indices follow the log: state m is the heap
after the first m writes, and a read with sequence number s observed state
``log.writes_before(s)``.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .analysis import RunView, Verdict, check_universe, result_keys
from .paths import SearchModel, model_for, one_path, order_leq, reach_set
from .shared_memory import (
    ABSENT,
    FREE,
    MINUS_INF,
    PLUS_INF,
    TRUE,
    Bool,
    Int,
    Location,
    LockOwner,
    MarkedRef,
    Ref,
    StateSnapshot,
    format_value,
    local_view,
    subsumes,
    target_of,
)
from .structures.skip_list import level_field, level_of


def _fmt_path(path) -> list[str] | None:
    return None if path is None else [str(p) for p in path]


# ---------------------------------------------------------------------------
# Accumulated order
# ---------------------------------------------------------------------------


class OrderCycle(Exception):
    def __init__(self, cycle: list[tuple[Location, Location, int]]):
        super().__init__("accumulated order has a cycle")
        self.cycle = cycle


@dataclass
class AccumulatedOrder:
    """Union of the per-state search orders over all write prefixes.

    Edges are immediate successors from `order_successors`, kept only between
    locations of the same stratum (strata are compared statically).  Each
    edge remembers the first write index that introduced it (0 = initial
    state).  Adding an edge that closes a cycle raises `OrderCycle` unless
    ``strict`` is off, in which case the cycle is recorded and kept.
    """

    model: SearchModel
    strict: bool = True
    succ: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    cycles: list = field(default_factory=list)

    def _path(self, src: Location, dst: Location) -> list[Location] | None:
        parent = {src: None}
        todo = deque([src])
        while todo:
            cur = todo.popleft()
            if cur == dst:
                out = []
                while cur is not None:
                    out.append(cur)
                    cur = parent[cur]
                return out[::-1]
            for n in self.succ.get(cur, ()):
                if n not in parent:
                    parent[n] = cur
                    todo.append(n)
        return None

    def add_edge(self, a: Location, b: Location, windex: int) -> None:
        if a == b or (a, b) in self.provenance:
            return
        if self.model.stratum(a) != self.model.stratum(b):
            return
        back = self._path(b, a)
        if back is not None:
            cyc = [(a, b, windex)] + [(x, y, self.provenance[(x, y)]) for x, y in zip(back, back[1:])]
            self.cycles.append(cyc)
            if self.strict:
                raise OrderCycle(cyc)
        self.succ.setdefault(a, set()).add(b)
        self.provenance[(a, b)] = windex

    def add_location(self, loc: Location, value, windex: int) -> None:
        if value is ABSENT or not self.model.ordered(loc):
            return
        for n in self.model.order_successors(loc, value):
            if self.model.ordered(n):
                self.add_edge(loc, n, windex)

    @classmethod
    def from_log(cls, log, model: SearchModel, strict: bool = True) -> "AccumulatedOrder":
        acc = cls(model, strict)
        for loc, v in sorted(log.init.items()):
            acc.add_location(loc, v, 0)
        for w in log.writes:
            acc.add_location(w.loc, w.new, w.windex)
        return acc

    def forward(self, start: Location, upto: int) -> set[Location]:
        """Same-stratum locations >= start using edges introduced at writes <= upto."""
        seen = {start}
        todo = [start]
        while todo:
            cur = todo.pop()
            for n in self.succ.get(cur, ()):
                if n not in seen and self.provenance[(cur, n)] <= upto:
                    seen.add(n)
                    todo.append(n)
        return seen

    def leq(self, a: Location, b: Location, upto: int) -> bool:
        if a == b:
            return True
        if not (self.model.ordered(a) and self.model.ordered(b)):
            return False
        sa, sb = self.model.stratum(a), self.model.stratum(b)
        if sa != sb:
            return sa < sb
        return b in self.forward(a, upto)


def check_accumulated_acyclic(log, model: SearchModel) -> Verdict:
    name = "acyclicity"
    acc = AccumulatedOrder(model, strict=True)
    try:
        for loc, v in sorted(log.init.items()):
            acc.add_location(loc, v, 0)
        for w in log.writes:
            acc.add_location(w.loc, w.new, w.windex)
    except OrderCycle as e:
        edges = [{"from": str(a), "to": str(b), "write": j} for a, b, j in e.cycle]
        closing = e.cycle[0][2]
        return Verdict(
            name,
            False,
            f"write {closing} closes a cycle of {len(edges)} edges: "
            + " -> ".join(str(a) for a, _, _ in e.cycle)
            + f" -> {e.cycle[0][0]}",
            {"write": closing, "cycle": edges},
        )
    return Verdict(name, True, f"{len(acc.provenance)} order edges, no cycle", count=len(acc.provenance))


# ---------------------------------------------------------------------------
# Read-in-order
# ---------------------------------------------------------------------------


def _node_neutral_forward(model: SearchModel, loc: Location, fwd: set[Location]) -> bool:
    """Neutral locations (skip-list key, topLevel) follow their node's ordered fields."""
    return any(f.node == loc.node for f in fwd)


def check_read_in_order(
    result, traversal, model: SearchModel, order: AccumulatedOrder | None = None, current_state: bool = False
) -> Verdict:
    """Each read must lie at or after the previous read's location.

    By default the comparison uses the accumulated order up to the state
    the later read observed.  With ``current_state`` the per-state order of
    that global state is used instead.
    """
    name = "read_in_order"
    log = result.log
    reads = [r for r in result.reads_of(traversal) if model.ordered(r.loc)]
    if len(reads) < 2:
        return Verdict(name, True, "fewer than two ordered reads", count=len(reads))
    if order is None and not current_state:
        order = AccumulatedOrder.from_log(log, model, strict=False)
    for prev, cur in zip(reads, reads[1:]):
        m = log.writes_before(cur.seq)
        if current_state:
            get = log.state_at(m).get
            ok = order_leq(model, get, prev.loc, cur.loc)
        else:
            ok = order.leq(prev.loc, cur.loc, m)
        if not ok:
            return Verdict(
                name,
                False,
                f"traversal {traversal.index} (op {traversal.op}) read {cur.loc} at event {cur.seq} "
                f"after {prev.loc}, which is not ordered before it at state {m}",
                {"traversal": traversal.index, "op": traversal.op, "event": cur.seq, "previous": str(prev.loc),
                 "location": str(cur.loc), "state": m},
            )
    return Verdict(name, True, f"{len(reads)} reads in order", count=len(reads))


def check_read_in_order_all(result, model: SearchModel, current_state: bool = False) -> Verdict:
    order = None if current_state else AccumulatedOrder.from_log(result.log, model, strict=False)
    total = 0
    for t in completed_traversals(result):
        v = check_read_in_order(result, t, model, order, current_state)
        if v.failed:
            return v
        total += v.count
    return Verdict("read_in_order", True, f"{total} reads across traversals in order", count=total)


def completed_traversals(result) -> list:
    return [t for t in result.traversals if t.closed and t.seqs]


# ---------------------------------------------------------------------------
# Preservation
# ---------------------------------------------------------------------------


def _skip_write(w) -> bool:
    return w.old == w.new or w.old is ABSENT


def check_preservation(result, model: SearchModel, keys: Iterable | None = None, view: RunView | None = None,
                       per_traversal: bool = False) -> Verdict:
    """A written location that was k-reachable earlier must be k-reachable just before the write.

    The global form looks back to the start of the execution.  With
    ``per_traversal`` the look-back starts at each traversal's first read and
    only writes up to its last read are checked.
    """
    name = "preservation"
    view = view or RunView.of(result, model, keys)
    ks = view.keys
    writes = view.writes
    if per_traversal:
        windows = []
        for t in completed_traversals(result):
            evs = result.reads_of(t)
            windows.append((view.write_state_index(evs[0].seq), view.write_state_index(evs[-1].seq)))
    else:
        windows = [(0, len(writes))]
    checked = 0
    for k in ks:
        reach = view.reach(k)
        for lo, hi in windows:
            ever: set = set()
            last = None
            first_seen: dict = {}
            for m in range(lo + 1, hi + 1):
                r = reach[m - 1]
                if r is not last:
                    for loc in r:
                        if loc not in ever:
                            ever.add(loc)
                            first_seen[loc] = m - 1
                    last = r
                w = writes[m - 1]
                if _skip_write(w) or not model.ordered(w.loc):
                    continue
                checked += 1
                if w.loc in ever and w.loc not in r:
                    i = first_seen[w.loc]
                    path = one_path(model, view.log.state_at(i).get, k, w.loc)
                    return Verdict(
                        name,
                        False,
                        f"write {m} to {w.loc} (op {w.op}): {k}-reachable at state {i} but not at state {m - 1}",
                        {"write": m, "k": k, "location": str(w.loc), "op": w.op, "reachable_at": i,
                         "path": _fmt_path(path), "lost_at": m - 1},
                    )
    scope = "per-traversal" if per_traversal else "global"
    return Verdict(name, True, f"{checked} (write, key) pairs preserved ({scope})", count=checked)


# ---------------------------------------------------------------------------
# Hindsight
# ---------------------------------------------------------------------------


def check_hindsight(result, traversal, model: SearchModel, view: RunView | None = None,
                    keys: Iterable | None = None, field_extended: bool = True) -> Verdict:
    """Everything k-reachable in the traversal's local view was k-reachable in
    some global state between its first and last read.

    With ``field_extended`` the witness state must also hold the value the
    traversal read at that location.
    """
    name = "hindsight"
    view = view or RunView.of(result, model)
    reads = result.reads_of(traversal)
    if not reads:
        return Verdict(name, True, "empty traversal")
    lv = local_view(reads)
    get_lv = lv.get
    lo = view.write_state_index(reads[0].seq)
    hi = view.write_state_index(reads[-1].seq)
    ks = [traversal.key] if keys is None else list(keys)
    checked = 0
    for k in ks:
        if not isinstance(k, int):
            continue
        local, _ = reach_set(model, get_lv, k)
        reach = _reach_for(view, model, k)
        for d in sorted(local):
            checked += 1
            want = lv.get(d) if (field_extended and d in lv) else ABSENT
            found = None
            for i in range(lo, hi + 1):
                if d not in reach[i]:
                    continue
                if want is not ABSENT and view.log.state_at(i).get(d) != want:
                    continue
                found = i
                break
            if found is None:
                path = one_path(model, get_lv, k, d)
                return Verdict(
                    name,
                    False,
                    f"traversal {traversal.index} (op {traversal.op}): {d} is {k}-reachable in the local view"
                    + (f" holding {format_value(want)}" if want is not ABSENT else "")
                    + f" but in no global state {lo}..{hi}",
                    {"traversal": traversal.index, "op": traversal.op, "k": k, "location": str(d),
                     "window": [lo, hi], "local_path": _fmt_path(path)},
                )
    return Verdict(name, True, f"{checked} local-view facts witnessed", count=checked)


def _reach_for(view: RunView, model: SearchModel, k):
    if view.model is model:
        return view.reach(k)
    return RunView(view.log, model, [k]).reach(k)


def check_hindsight_all(result, model: SearchModel, view: RunView | None = None,
                        field_extended: bool = True) -> Verdict:
    view = view or RunView.of(result, model)
    total = 0
    trav = completed_traversals(result)
    for t in trav:
        v = check_hindsight(result, t, model, view, field_extended=field_extended)
        if v.failed:
            return v
        total += v.count
    return Verdict("hindsight", True, f"witness found for all {len(trav)} completed traversals ({total} facts)",
                   count=len(trav))


def local_view_paths_absent(result, traversal, model: SearchModel, k) -> list[tuple[Location, list]]:
    """Local-view k-paths (root to a reachable location) that appear as a whole in no global state.

    A path "appears" in a state when every hop is a path step there.
    """
    reads = result.reads_of(traversal)
    lv = local_view(reads)
    local, _ = reach_set(model, lv.get, k)
    states = [s.copy() for _, s in result.log.iter_states()]
    out = []
    for d in sorted(local):
        path = one_path(model, lv.get, k, d)
        if path is None:
            continue
        present = False
        for h in states:
            get = lambda loc, h=h: h.get(loc, ABSENT)  # noqa: E731
            if all(b in model.path_step(get, a, k)[0] for a, b in zip(path, path[1:])):
                present = True
                break
        if not present:
            out.append((d, path))
    return out


# ---------------------------------------------------------------------------
# Fabricated state
# ---------------------------------------------------------------------------


class HypothesisViolated(Exception):
    pass


@dataclass
class FabricatedTrace:
    traversal: int
    selected: list[int]  # 1-based write indices, ascending
    init: StateSnapshot
    writes: list  # all writes of the log
    local: StateSnapshot

    def states(self) -> Iterator[tuple[int, int, dict, dict]]:
        """Yield (j, i_j, fabricated-before, fabricated-after) as fresh dicts."""
        cur = dict(self.init._map)
        for j, i in enumerate(self.selected, 1):
            before = dict(cur)
            w = self.writes[i - 1]
            cur[w.loc] = w.new
            yield j, i, before, dict(cur)

    def final(self) -> StateSnapshot:
        cur = dict(self.init._map)
        for i in self.selected:
            w = self.writes[i - 1]
            cur[w.loc] = w.new
        return StateSnapshot(cur)


def build_fabricated(result, traversal, model: SearchModel, order: AccumulatedOrder | None = None) -> FabricatedTrace:
    """Writes that happened before some read and hit a location at or after the read's location."""
    log = result.log
    if order is None:
        order = AccumulatedOrder(model, strict=True)
        try:
            order = AccumulatedOrder.from_log(log, model, strict=True)
        except OrderCycle as e:
            raise HypothesisViolated("accumulated order is cyclic; fabricated state undefined") from e
    elif order.cycles:
        raise HypothesisViolated("accumulated order is cyclic; fabricated state undefined")
    writes = log.writes
    reads = result.reads_of(traversal)
    chosen: set[int] = set()
    for r in reads:
        m = log.writes_before(r.seq)
        if not model.ordered(r.loc):
            # unordered reads only need their own value in the fabricated state
            for j in range(m, 0, -1):
                if writes[j - 1].loc == r.loc:
                    chosen.add(j)
                    break
            continue
        fwd = order.forward(r.loc, m)
        s0 = model.stratum(r.loc)
        for j in range(1, m + 1):
            loc = writes[j - 1].loc
            if loc in fwd:
                chosen.add(j)
            elif model.ordered(loc):
                if model.stratum(loc) > s0:
                    chosen.add(j)
            elif model.neutral(loc) and _node_neutral_forward(model, loc, fwd):
                chosen.add(j)
    return FabricatedTrace(traversal.index, sorted(chosen), log.init, writes, local_view(reads))


def check_fabricated_containment(trace: FabricatedTrace) -> Verdict:
    final = trace.final()
    if subsumes(final, trace.local):
        return Verdict("fabricated_containment", True, f"local view ({len(trace.local)} locations) inside fabricated state",
                       count=len(trace.local))
    bad = [str(l) for l, v in trace.local.items() if final.get(l) != v]
    return Verdict("fabricated_containment", False, f"traversal {trace.traversal}: fabricated state differs at {bad}",
                   {"traversal": trace.traversal, "locations": bad})


def check_forward_agreement(trace: FabricatedTrace, log, model: SearchModel) -> Verdict:
    """Before each selected write, fabricated and global states agree on every
    location ordered at or after the written one (in the fabricated state
    just before or just after the write)."""
    name = "forward_agreement"
    glob = dict(log.init._map)
    gi = 0
    writes = log.writes
    for j, i, before, after in trace.states():
        while gi < i - 1:
            w = writes[gi]
            glob[w.loc] = w.new
            gi += 1
        w = writes[i - 1]
        diff = [l for l in set(before) | set(glob) if model.ordered(l) and before.get(l, ABSENT) != glob.get(l, ABSENT)]
        gb = lambda l: before.get(l, ABSENT)  # noqa: E731
        ga = lambda l: after.get(l, ABSENT)  # noqa: E731
        for d in diff:
            if order_leq(model, gb, w.loc, d) or order_leq(model, ga, w.loc, d):
                return Verdict(
                    name,
                    False,
                    f"traversal {trace.traversal}: before write {i} to {w.loc}, {d} is forward but "
                    f"fabricated={format_value(before[d]) if d in before else 'absent'} "
                    f"global={format_value(glob[d]) if d in glob else 'absent'}",
                    {"traversal": trace.traversal, "write": i, "location": str(d)},
                )
    return Verdict(name, True, f"{len(trace.selected)} selected writes forward-agree", count=len(trace.selected))


def check_simulation(trace: FabricatedTrace, view: RunView, model: SearchModel, keys: Iterable | None = None) -> Verdict:
    """For every k and location x: a selected write that makes x k-reachable in
    the fabricated state also makes it so globally, unless it already was."""
    name = "simulation"
    ks = view.keys if keys is None else list(keys)
    checked = 0
    for k in ks:
        reach = view.reach(k)
        cur = dict(trace.init._map)
        get = lambda l: cur.get(l, ABSENT)  # noqa: E731
        a, sup = reach_set(model, get, k)
        for j, i in enumerate(trace.selected, 1):
            w = trace.writes[i - 1]
            cur[w.loc] = w.new
            if w.loc in sup:
                a2, sup = reach_set(model, get, k)
            else:
                a2 = a
            gained = a2 - a
            if gained:
                checked += 1
                bad = gained - reach[i - 1] - reach[i]
                if bad:
                    x = min(bad)
                    return Verdict(
                        name,
                        False,
                        f"traversal {trace.traversal}: write {i} makes {x} {k}-reachable in the fabricated "
                        f"state but not globally",
                        {"traversal": trace.traversal, "write": i, "k": k, "location": str(x)},
                    )
            a = a2
    return Verdict(name, True, f"{checked} predicate gains simulated", count=checked)


def check_fabrication(result, model: SearchModel, view: RunView | None = None) -> Verdict:
    """Containment, forward-agreement and simulation for every completed traversal."""
    view = view or RunView.of(result, model)
    try:
        order = AccumulatedOrder.from_log(result.log, model, strict=True)
    except OrderCycle:
        return Verdict("fabrication", None, "accumulated order is cyclic; construction not applicable")
    n = 0
    for t in completed_traversals(result):
        trace = build_fabricated(result, t, model, order)
        for v in (check_fabricated_containment(trace), check_forward_agreement(trace, result.log, model),
                  check_simulation(trace, view, model)):
            if v.failed:
                return v
        n += 1
    return Verdict("fabrication", True, f"{n} traversals: containment, forward-agreement and simulation hold", count=n)


# ---------------------------------------------------------------------------
# Upward absoluteness
# ---------------------------------------------------------------------------


def check_upward_absolute(pred, pairs: Iterable[tuple[dict, dict]]) -> Verdict:
    """pred(h) must imply pred(h2) for every supplied pair with h a sub-map of h2."""
    n = 0
    for h, h2 in pairs:
        if any(h2.get(l, ABSENT) != v for l, v in h.items()):
            raise ValueError("second state does not extend the first")
        n += 1
        if pred(h) and not pred(h2):
            return Verdict("upward_absolute", False, f"pair {n}: predicate lost under extension",
                           {"pair": n, "dropped": len(h2) - len(h)})
    return Verdict("upward_absolute", True, f"{n} extensions preserve the predicate", count=n)


def random_extensions(states: list[dict], count: int, seed: int = 0) -> Iterator[tuple[dict, dict]]:
    """Random (partial state, extension) pairs carved out of full states."""
    rng = random.Random(seed)
    for _ in range(count):
        full = states[rng.randrange(len(states))]
        locs = sorted(full)
        small = {l: full[l] for l in locs if rng.random() < 0.6}
        big = dict(small)
        big.update({l: full[l] for l in locs if rng.random() < 0.5})
        yield small, big


def reach_predicate(model: SearchModel, k, x: Location):
    return lambda h: x in reach_set(model, lambda l: h.get(l, ABSENT), k)[0]


# ---------------------------------------------------------------------------
# Contention-friendly tree transition invariants
# ---------------------------------------------------------------------------


def _children(get, node) -> list[int]:
    out = []
    for f in ("left", "right"):
        t = target_of(get(Location(node, f)))
        if t is not None:
            out.append(t)
    return out


def _heap_reach(get, src: int) -> set[int]:
    seen = {src}
    todo = [src]
    while todo:
        n = todo.pop()
        for c in _children(get, n):
            if c not in seen:
                seen.add(c)
                todo.append(c)
    return seen


def check_transition_invariants_cf(result, view: RunView | None = None) -> Verdict:
    """Root, Key, Rem, Acyclic and Preservation over every consecutive state pair.

    ``locked`` in the first Preservation clause means locked by the thread
    performing the write; the second clause is applied to nodes that were
    reachable from the root at some earlier state and accepts a lock held by
    any thread.
    """
    name = "transition_invariants"
    model = model_for("cf_tree")
    view = view or RunView.of(result, model)
    log = view.log
    writes = view.writes
    reaches = {k: view.reach(k) for k in view.keys}
    cur = dict(log.init._map)
    get = lambda l: cur.get(l, ABSENT)  # noqa: E731
    root = model.root_node
    root_key = cur.get(Location(root, "key"))
    allocated_by: dict[int, int] = {}
    linked: set[int] = set()
    ever_reachable: set[int] = set(_heap_reach(get, root))
    for loc, v in log.init.items():
        if loc.field in ("left", "right") and target_of(v) is not None:
            linked.add(target_of(v))

    def fail(m, clause, detail, **extra):
        return Verdict(name, False, f"write {m}: {clause} violated: {detail}",
                       {"write": m, "clause": clause, **extra})

    for m, w in enumerate(writes, 1):
        loc = w.loc
        before_reach_root = _heap_reach(get, root) if loc.field in ("left", "right") else None
        # Acyclic(H, H') on the written child field
        if loc.field in ("left", "right"):
            o1 = loc.node
            o2 = target_of(w.old) if w.old is not ABSENT else None
            o3 = target_of(w.new)
            if o1 in before_reach_root and o2 is not None and o3 is not None and o2 != o3:
                if o3 not in _heap_reach(get, o2):
                    is_new = allocated_by.get(o3) == w.op and o3 not in linked
                    if not (is_new and o1 not in _heap_reach(get, o3)):
                        return fail(m, "Acyclic", f"n{o1}.{loc.field}: n{o2} -> n{o3}", node=o1)
        # Key: only allocation writes a key
        if loc.field == "key" and w.old is not ABSENT and w.old != w.new:
            return fail(m, "Key", f"{loc} changed {format_value(w.old)} -> {format_value(w.new)}")
        if loc.field == "rem" and w.old == TRUE and w.new != TRUE:
            return fail(m, "Rem", f"{loc} reset")
        if w.old is ABSENT and loc.field == "key":
            allocated_by[loc.node] = w.op

        before = {k: reaches[k][m - 1] for k in reaches}
        cur[loc] = w.new
        if cur.get(Location(root, "key")) != root_key:
            return fail(m, "Root", "root key changed")
        if loc.field in ("left", "right") and target_of(w.new) is not None:
            linked.add(target_of(w.new))

        if w.old == w.new:
            continue
        # Preservation clause 1: k-reachable nodes stay so, or are removed, or are unlinked under the writer's lock
        after_root = _heap_reach(get, root)
        for k, rb in before.items():
            ra = reaches[k][m]
            if ra is rb:
                continue
            for lost in rb - ra:
                if lost.field != "key":
                    continue
                n = lost.node
                if get(Location(n, "rem")) == TRUE:
                    continue
                if get(Location(n, "lock")) == LockOwner(w.thread) and n not in after_root:
                    continue
                return fail(m, "Preservation", f"n{n} lost {k}-reachability", k=k, node=n)
        # Preservation clause 2: once-reachable nodes off the tree are locked or removed
        for n in ever_reachable - after_root:
            lk = get(Location(n, "lock"))
            if get(Location(n, "rem")) == TRUE or (isinstance(lk, LockOwner) and lk != FREE):
                continue
            return fail(m, "Preservation", f"n{n} unreachable from the root while unlocked and not removed", node=n)
        ever_reachable |= after_root
    return Verdict(name, True, f"{len(writes)} transitions satisfy Root, Key, Rem, Acyclic, Preservation",
                   count=len(writes))


# ---------------------------------------------------------------------------
# Lock-free list and skip list invariants
# ---------------------------------------------------------------------------


def _level_chain(get, head: int, fld: str, limit: int = 10_000) -> list[int]:
    out = [head]
    seen = {head}
    n = head
    while len(out) < limit:
        v = get(Location(n, fld))
        t = v.target if isinstance(v, MarkedRef) else None
        if t is None or t in seen:
            break
        out.append(t)
        seen.add(t)
        n = t
    return out


def _key(get, n):
    v = get(Location(n, "key"))
    return v.value if isinstance(v, Int) else None


def _list_invariants(get, fld: str, nodes: Iterable[int], linked: set[int], head: int, tail: int,
                     marked_ties: bool = False) -> str | None:
    chain = _level_chain(get, head, fld)
    on = set(chain)
    if tail not in on:
        return f"I_rT: tail unreachable from head via {fld}"
    for n in nodes:
        v = get(Location(n, fld))
        if not isinstance(v, MarkedRef):
            continue
        if not v.mark and n in linked and n not in on:
            return f"I_UB: unmarked n{n} unreachable via {fld}"
        if v.target is not None:
            a, b = _key(get, n), _key(get, v.target)
            tie_ok = marked_ties and a == b and _marked_at(get, v.target, fld)
            if a is not None and b is not None and not a < b and not tie_ok:
                return f"I_<: n{n}({a}).{fld} -> n{v.target}({b})"
    return None


def _marked_at(get, n, fld) -> bool:
    v = get(Location(n, fld))
    return isinstance(v, MarkedRef) and v.mark


def _nodes_of(cur: dict) -> list[int]:
    return sorted({l.node for l in cur})


def check_lf_invariants(result, head: int = 0, tail: int = 1) -> Verdict:
    """I_rT, I_UB, I_< after every write; TI_k, TI_mn, TI_mr across every write."""
    return _check_marked_lists(result, ["next"], head, tail, skip=False)


def check_sl_invariants(result, head: int = 0, tail: int = 1, literal_sorted: bool = False) -> Verdict:
    """The lock-free list invariants per level plus SL_mu and SL_sub.

    At a level, a node may point to a marked successor with the same key:
    an add that found the successor unmarked links in front of it after it
    was marked.  ``literal_sorted`` insists on strictly increasing keys.
    """
    L = result.structure_options.get("max_level", None)
    if L is None:
        lv = [level_of(l.field) for l in result.log.init._map if level_of(l.field) is not None]
        L = max(lv)
    return _check_marked_lists(result, [level_field(i) for i in range(L + 1)], head, tail, skip=True,
                               marked_ties=not literal_sorted)


def _check_marked_lists(result, fields: list[str], head: int, tail: int, skip: bool,
                        marked_ties: bool = False) -> Verdict:
    name = "sl_invariants" if skip else "lf_invariants"
    log = result.log
    cur = dict(log.init._map)
    get = lambda l: cur.get(l, ABSENT)  # noqa: E731
    linked = {f: set(_level_chain(get, head, f)) for f in fields}

    def fail(m, detail):
        return Verdict(name, False, f"write {m}: {detail}", {"write": m, "detail": detail})

    for m, w in enumerate(log.writes, 1):
        loc = w.loc
        if loc.field == "key" and w.old is not ABSENT and w.old != w.new:
            return fail(m, f"TI_k: {loc} changed")
        if loc.field in fields and isinstance(w.old, MarkedRef) and w.old.mark and w.old != w.new:
            return fail(m, f"TI_mn: marked {loc} modified")
        cur[loc] = w.new
        if w.old is ABSENT:
            continue
        if loc.field in fields and isinstance(w.new, MarkedRef):
            t = w.new.target
            if t is not None:
                linked[loc.field].add(t)
            if w.new.mark and not (isinstance(w.old, MarkedRef) and w.old.mark) and loc.node in linked[loc.field]:
                # a node still being added may be marked at levels it was never linked into
                if loc.node not in _level_chain(get, head, loc.field):
                    return fail(m, f"TI_mr: n{loc.node} unreachable right after marking {loc.field}")
        nodes = _nodes_of(cur)
        for f in fields:
            err = _list_invariants(get, f, nodes, linked[f], head, tail, marked_ties)
            if err:
                return fail(m, err)
        if skip:
            err = _skip_invariants(get, fields, nodes, head)
            if err:
                return fail(m, err)
    return Verdict(name, True, f"{len(log.writes)} writes keep the list invariants", count=len(log.writes))


def _skip_invariants(get, fields: list[str], nodes: list[int], head: int) -> str | None:
    def marked(n, i):
        v = get(Location(n, fields[i]))
        return isinstance(v, MarkedRef) and v.mark

    for n in nodes:
        tl = get(Location(n, "topLevel"))
        top = tl.value if isinstance(tl, Int) else len(fields) - 1
        for i in range(top + 1):
            if marked(n, i) and any(not marked(n, j) for j in range(i + 1, top + 1)):
                return f"SL_mu: n{n} marked at level {i} but not above"
    chains = [_level_chain(get, head, f) for f in fields]
    pos = [{n: p for p, n in enumerate(c)} for c in chains]
    for i in range(1, len(fields)):
        unmarked = [n for n in chains[i] if not marked(n, i)]
        for a, b in zip(unmarked, unmarked[1:]):
            for j in range(i):
                pa, pb = pos[j].get(a), pos[j].get(b)
                if pa is None or pb is None or not pa < pb:
                    return f"SL_sub: n{a} before n{b} at level {i} but not at level {j}"
    return None


__all__ = [
    "AccumulatedOrder",
    "FabricatedTrace",
    "HypothesisViolated",
    "OrderCycle",
    "build_fabricated",
    "check_accumulated_acyclic",
    "check_fabricated_containment",
    "check_fabrication",
    "check_forward_agreement",
    "check_hindsight",
    "check_hindsight_all",
    "check_lf_invariants",
    "check_preservation",
    "check_read_in_order",
    "check_read_in_order_all",
    "check_simulation",
    "check_sl_invariants",
    "check_transition_invariants_cf",
    "check_upward_absolute",
    "completed_traversals",
    "local_view_paths_absent",
    "random_extensions",
    "reach_predicate",
]
