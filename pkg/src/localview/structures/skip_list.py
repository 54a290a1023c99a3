"""Lock-free skip list with levels 0..L, each level a lock-free list.

Two changes relative to the textbook version are kept: ``find`` restarts
when the node it descends from is marked at the new level, and ``add``
installs the successor of an upper-level entry with a CAS on the new
node's own ``next[level]``.
"""

from __future__ import annotations

from ..shared_memory import MINUS_INF, PLUS_INF, Int, MarkedRef
from .base import ALLOC, CAS, RAND, TBEGIN, TEND, R, SetStructure, W

HEAD, TAIL = 0, 1
MAX_LEVEL = 4


def level_field(i: int) -> str:
    return f"next[{i}]"


def level_of(field: str) -> int | None:
    if field.startswith("next[") and field.endswith("]"):
        return int(field[5:-1])
    return None


def fresh_node(key, top_level, targets, max_level=MAX_LEVEL) -> dict:
    d = {"key": Int(key), "topLevel": Int(top_level)}
    for i in range(max_level + 1):
        d[level_field(i)] = MarkedRef(targets, False)
    return d


class SkipList(SetStructure):
    name = "skip_list"
    methods = ("contains", "add", "remove", "insert", "delete")
    root = HEAD

    def __init__(self, universe=(), max_level: int = MAX_LEVEL, **options):
        super().__init__(universe, **options)
        self.max_level = max_level
        self.node_fields = ("key", "topLevel") + tuple(level_field(i) for i in range(max_level + 1))

    def initial_nodes(self):
        L = self.max_level
        return [fresh_node(MINUS_INF, L, TAIL, L), fresh_node(PLUS_INF, L, None, L)]

    def random_level(self):
        """Geometric with p = 1/2, capped at L."""
        lvl = 0
        while lvl < self.max_level and (yield RAND(2)) == 1:
            lvl += 1
        return lvl

    def _key(self, node, cache):
        if node not in cache:
            cache[node] = (yield R(node, "key")).value
        return cache[node]

    def find(self, k, preds, succs):
        keys: dict = {}
        while True:
            pred = self.root
            restarted = False
            curr = None
            for level in range(self.max_level, -1, -1):
                f = level_field(level)
                nxt = yield R(pred, f)
                curr = nxt.target
                if nxt.mark:
                    restarted = True
                    break
                while True:
                    nxt = yield R(curr, f)
                    succ, marked = nxt.target, nxt.mark
                    while marked:
                        snip = yield CAS(pred, f, MarkedRef(curr, False), MarkedRef(succ, False), "find.snip")
                        if not snip:
                            restarted = True
                            break
                        curr = succ
                        nxt = yield R(curr, f)
                        succ, marked = nxt.target, nxt.mark
                    if restarted:
                        break
                    ckey = yield from self._key(curr, keys)
                    if ckey < k:
                        pred, curr = curr, succ
                    else:
                        break
                if restarted:
                    break
                preds[level] = pred
                succs[level] = curr
            if not restarted:
                return (yield from self._key(curr, keys)) == k

    def op_add(self, k):
        L = self.max_level
        while True:
            top = yield from self.random_level()
            preds = [None] * (L + 1)
            succs = [None] * (L + 1)
            if (yield from self.find(k, preds, succs)):
                return False
            n = yield ALLOC(fresh_node(k, top, None, L))
            succ = succs[0]
            yield W(n, level_field(0), MarkedRef(succ, False), "add.prepare")
            linked = yield CAS(preds[0], level_field(0), MarkedRef(succ, False), MarkedRef(n, False), "add.link0")
            if linked:
                break
        for level in range(1, top + 1):
            f = level_field(level)
            while True:
                succ = succs[level]
                new_succ = (yield R(n, f)).target
                if not (yield CAS(n, f, MarkedRef(new_succ, False), MarkedRef(succ, False), "add.setnext")):
                    return True
                if (yield CAS(preds[level], f, MarkedRef(succ, False), MarkedRef(n, False), "add.link")):
                    break
                if (yield R(n, f)).mark:
                    return True
                yield from self.find(k, preds, succs)
        return True

    def op_remove(self, k):
        L = self.max_level
        preds = [None] * (L + 1)
        succs = [None] * (L + 1)
        if not (yield from self.find(k, preds, succs)):
            return False
        victim = succs[0]
        top = (yield R(victim, "topLevel")).value
        for level in range(top, 0, -1):
            f = level_field(level)
            nxt = yield R(victim, f)
            while not nxt.mark:
                yield CAS(victim, f, MarkedRef(nxt.target, False), MarkedRef(nxt.target, True), "remove.mark_upper")
                nxt = yield R(victim, f)
        f0 = level_field(0)
        succ = (yield R(victim, f0)).target
        while True:
            marked_it = yield CAS(victim, f0, MarkedRef(succ, False), MarkedRef(succ, True), "remove.mark")
            nxt = yield R(victim, f0)
            succ = nxt.target
            if marked_it:
                yield from self.find(k, preds, succs)
                return True
            if nxt.mark:
                return False

    def op_contains(self, k):
        yield TBEGIN(k)
        keys: dict = {}
        pred = self.root
        curr = None
        for level in range(self.max_level, -1, -1):
            f = level_field(level)
            curr = (yield R(pred, f)).target
            while True:
                nxt = yield R(curr, f)
                succ, marked = nxt.target, nxt.mark
                while marked:
                    curr = succ
                    nxt = yield R(curr, f)
                    succ, marked = nxt.target, nxt.mark
                ckey = yield from self._key(curr, keys)
                if ckey < k:
                    pred, curr = curr, succ
                else:
                    break
        ckey = yield from self._key(curr, keys)
        yield TEND
        return ckey == k

    op_insert = op_add
    op_delete = op_remove
