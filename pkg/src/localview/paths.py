"""Per-structure search paths and search orders over memory locations.

A `SearchModel` answers three questions about a (possibly partial) state:

* which locations a k-search path may step to from a given location
  (`path_step`), together with the locations whose values decided that;
* which locations immediately follow a location in the search order, given
  only the value stored there (`order_successors`, locally determined);
* the static stratum of a location (only the skip list uses more than one:
  every entry at a higher level precedes every entry at a lower level).

Lock fields are never on paths or in orders.  Skip-list ``key`` and
``topLevel`` fields are *neutral*: immutable, absent from the order, and
ignored by the read-in-order check.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable

from .shared_memory import ABSENT, NULL, Bool, Int, Location, MarkedRef, Ref
from .structures.skip_list import MAX_LEVEL, level_field, level_of

Lookup = Callable[[Location], object]


class SearchModel:
    name = "abstract"
    root_node = 0
    # fields whose writes can change reachability or membership
    shape_fields: frozenset = frozenset()
    membership_fields: frozenset = frozenset()

    def root_location(self) -> Location:
        raise NotImplementedError

    def designated(self, node: int) -> Location:
        """The location standing for a whole node in node-level reachability."""
        return Location(node, "key")

    def path_step(self, get: Lookup, loc: Location, k) -> tuple[list[Location], tuple[Location, ...]]:
        raise NotImplementedError

    def order_successors(self, loc: Location, value) -> list[Location]:
        raise NotImplementedError

    def stratum(self, loc: Location) -> int:
        return 0

    def neutral(self, loc: Location) -> bool:
        return False

    def ordered(self, loc: Location) -> bool:
        return loc.field != "lock" and not self.neutral(loc)

    def node_locations(self, node: int, fields: Iterable[str]) -> list[Location]:
        return [Location(node, f) for f in fields]


def _key_value(v):
    return v.value if isinstance(v, Int) else None


class CFModel(SearchModel):
    name = "cf_tree"
    shape_fields = frozenset({"left", "right"})
    membership_fields = frozenset({"left", "right", "del"})

    def __init__(self, null_to_root: bool = False):
        # the wandering traversal's order also steps from NULL children back to the root
        self.null_to_root = null_to_root

    def root_location(self):
        return Location(self.root_node, "key")

    def path_step(self, get, loc, k):
        f = loc.field
        if f == "key":
            kv = _key_value(get(loc))
            if kv is None:
                return [], (loc,)
            out = [Location(loc.node, "del")]
            if kv > k:
                out.append(Location(loc.node, "left"))
            elif kv < k:
                out.append(Location(loc.node, "right"))
            return out, (loc,)
        if f in ("left", "right"):
            v = get(loc)
            if isinstance(v, Ref):
                return [Location(v.node, "key")], (loc,)
            return [], (loc,)
        return [], ()

    def order_successors(self, loc, value):
        f = loc.field
        n = loc.node
        if f == "key":
            return [Location(n, "del"), Location(n, "rem")]
        if f in ("del", "rem"):
            return [Location(n, "left"), Location(n, "right")]
        if f in ("left", "right"):
            if isinstance(value, Ref):
                return [Location(value.node, "key")]
            if self.null_to_root and value is NULL:
                return [self.root_location()]
        return []


class LazyModel(SearchModel):
    name = "lazy_list"
    shape_fields = frozenset({"next"})
    membership_fields = frozenset({"next", "mark"})

    def root_location(self):
        return Location(self.root_node, "key")

    def path_step(self, get, loc, k):
        f = loc.field
        if f == "key":
            kv = _key_value(get(loc))
            if kv is None:
                return [], (loc,)
            out = []
            if kv <= k:
                out.append(Location(loc.node, "mark"))
            if kv < k:
                out.append(Location(loc.node, "next"))
            return out, (loc,)
        if f == "next":
            v = get(loc)
            if isinstance(v, Ref):
                return [Location(v.node, "key")], (loc,)
            return [], (loc,)
        return [], ()

    def order_successors(self, loc, value):
        f = loc.field
        if f == "key":
            return [Location(loc.node, "mark")]
        if f == "mark":
            return [Location(loc.node, "next")]
        if f == "next" and isinstance(value, Ref):
            return [Location(value.node, "key")]
        return []


class LFModel(SearchModel):
    """Strict paths by default: follow o.next only when o.key < k.

    With ``mark_tolerant`` a path may also leave a marked node regardless
    of its key, which is the reading needed to state ``curr.mark <=> marked``.
    """

    name = "lf_list"
    shape_fields = frozenset({"next"})
    membership_fields = frozenset({"next"})

    def __init__(self, mark_tolerant: bool = False):
        self.mark_tolerant = mark_tolerant

    def root_location(self):
        return Location(self.root_node, "key")

    def path_step(self, get, loc, k):
        f = loc.field
        if f == "key":
            if self.mark_tolerant:
                return [Location(loc.node, "next")], ()
            kv = _key_value(get(loc))
            if kv is not None and kv < k:
                return [Location(loc.node, "next")], (loc,)
            return [], (loc,)
        if f == "next":
            v = get(loc)
            if not isinstance(v, MarkedRef) or v.target is None:
                return [], (loc,)
            if self.mark_tolerant:
                kloc = Location(loc.node, "key")
                kv = _key_value(get(kloc))
                if v.mark or (kv is not None and kv < k):
                    return [Location(v.target, "key")], (loc, kloc)
                return [], (loc, kloc)
            return [Location(v.target, "key")], (loc,)
        return [], ()

    def order_successors(self, loc, value):
        if loc.field == "key":
            return [Location(loc.node, "next")]
        if loc.field == "next" and isinstance(value, MarkedRef) and value.target is not None:
            return [Location(value.target, "key")]
        return []


class SkipModel(SearchModel):
    """Paths start at head.next[L]; they move along a level past nodes that are
    marked there or whose key is below k, and descend inside a node that is
    unmarked at the current level with key <= k.  The node key consulted by
    both steps is immutable and not itself a path location.
    """

    name = "skip_list"
    shape_fields = frozenset(level_field(i) for i in range(MAX_LEVEL + 1))
    membership_fields = shape_fields

    def __init__(self, max_level: int = MAX_LEVEL):
        self.max_level = max_level
        self.shape_fields = frozenset(level_field(i) for i in range(max_level + 1))
        self.membership_fields = self.shape_fields

    def root_location(self):
        return Location(self.root_node, level_field(self.max_level))

    def designated(self, node):
        return Location(node, level_field(0))

    def neutral(self, loc):
        return loc.field in ("key", "topLevel")

    def stratum(self, loc):
        lvl = level_of(loc.field)
        return 0 if lvl is None else self.max_level - lvl

    def path_step(self, get, loc, k):
        lvl = level_of(loc.field)
        if lvl is None:
            return [], ()
        v = get(loc)
        if not isinstance(v, MarkedRef):
            return [], (loc,)
        kloc = Location(loc.node, "key")
        kv = _key_value(get(kloc))
        out = []
        if v.target is not None and (v.mark or (kv is not None and kv < k)):
            out.append(Location(v.target, loc.field))
        if lvl > 0 and not v.mark and kv is not None and kv <= k:
            out.append(Location(loc.node, level_field(lvl - 1)))
        return out, (loc, kloc)

    def order_successors(self, loc, value):
        lvl = level_of(loc.field)
        if lvl is not None and isinstance(value, MarkedRef) and value.target is not None:
            return [Location(value.target, loc.field)]
        return []


def model_for(structure_name: str, **options) -> SearchModel:
    if structure_name in ("cf_tree", "cf_inplace"):
        return CFModel()
    if structure_name == "cf_wandering":
        return CFModel(null_to_root=options.get("null_to_root", False))
    if structure_name == "lazy_list":
        return LazyModel()
    if structure_name == "lf_list":
        return LFModel(mark_tolerant=options.get("mark_tolerant", False))
    if structure_name == "skip_list":
        return SkipModel(options.get("max_level", MAX_LEVEL))
    raise KeyError(f"no search model for {structure_name!r}")


# ---------------------------------------------------------------------------
# Reachability
# ---------------------------------------------------------------------------


def reach_set(model: SearchModel, get: Lookup, k) -> tuple[frozenset, frozenset]:
    """All locations k-reachable from the root, and the locations consulted.

    Graph search with a visited set, so cyclic heaps (broken variants) terminate.
    The root location is reachable by the empty path even if unmapped.
    """
    root = model.root_location()
    seen = {root}
    support: set = set()
    todo = deque([root])
    step = model.path_step
    while todo:
        loc = todo.popleft()
        nxt, used = step(get, loc, k)
        support.update(used)
        for n in nxt:
            if n not in seen:
                seen.add(n)
                todo.append(n)
    return frozenset(seen), frozenset(support)


def as_lookup(state) -> Lookup:
    """Accept a StateSnapshot, a plain dict or a lookup function."""
    if isinstance(state, dict):
        return lambda loc: state.get(loc, ABSENT)
    if callable(state):
        return state
    return state.get


def reaches(model: SearchModel, state, k, x: Location) -> bool:
    return x in reach_set(model, as_lookup(state), k)[0]


def search_paths(model: SearchModel, get: Lookup, k, x: Location, limit: int = 10_000) -> list[list[Location]]:
    """Enumerate simple k-search paths root -> x (brute force, for oracles and witnesses)."""
    root = model.root_location()
    out: list[list[Location]] = []
    stack = [(root, [root])]
    while stack and len(out) < limit:
        loc, path = stack.pop()
        if loc == x:
            out.append(path)
        for n in model.path_step(get, loc, k)[0]:
            if n not in path:
                stack.append((n, path + [n]))
    return out


def one_path(model: SearchModel, get: Lookup, k, x: Location) -> list[Location] | None:
    """A shortest k-search path root -> x, or None."""
    root = model.root_location()
    parent = {root: None}
    todo = deque([root])
    while todo:
        loc = todo.popleft()
        if loc == x:
            path = []
            while loc is not None:
                path.append(loc)
                loc = parent[loc]
            return path[::-1]
        for n in model.path_step(get, loc, k)[0]:
            if n not in parent:
                parent[n] = loc
                todo.append(n)
    return None


def order_leq(model: SearchModel, get: Lookup, a: Location, b: Location, universe: Iterable[Location] = ()) -> bool:
    """a <= b in the per-state order of the state `get`."""
    if a == b:
        return True
    if not (model.ordered(a) and model.ordered(b)):
        return False
    sa, sb = model.stratum(a), model.stratum(b)
    if sa != sb:
        return sa < sb
    seen = {a}
    todo = [a]
    while todo:
        loc = todo.pop()
        v = get(loc)
        if v is ABSENT:
            continue
        for n in model.order_successors(loc, v):
            if model.stratum(n) != sa or n in seen:
                continue
            if n == b:
                return True
            seen.add(n)
            todo.append(n)
    return False


def is_bool(v, expected: bool) -> bool:
    return isinstance(v, Bool) and v.value is expected
