"""Lock-free list: each node's (ref, mark) pair is one CAS-able location.

A node's immutable key is read when the traversal first reaches the node,
before its ``next`` field; keys never change, so this is equivalent to
reading it at the comparison.
"""

from __future__ import annotations

from ..shared_memory import MINUS_INF, PLUS_INF, Int, MarkedRef
from .base import ALLOC, CAS, TBEGIN, TEND, R, SetStructure

HEAD, TAIL = 0, 1


def fresh_node(key, target, mark=False) -> dict:
    return {"key": Int(key), "next": MarkedRef(target, mark)}


class LFList(SetStructure):
    name = "lf_list"
    methods = ("contains", "add", "remove", "insert", "delete")
    node_fields = ("key", "next")
    root = HEAD

    def initial_nodes(self):
        return [fresh_node(MINUS_INF, TAIL), fresh_node(PLUS_INF, None)]

    def find(self, k):
        """Returns (pred, curr, curr.key), snipping marked nodes on the way."""
        while True:
            pred = self.root
            curr = (yield R(pred, "next")).target
            restarted = False
            while True:
                ckey = (yield R(curr, "key")).value
                nxt = yield R(curr, "next")
                succ, marked = nxt.target, nxt.mark
                while marked:
                    snip = yield CAS(pred, "next", MarkedRef(curr, False), MarkedRef(succ, False), "find.snip")
                    if not snip:
                        restarted = True
                        break
                    curr = succ
                    ckey = (yield R(curr, "key")).value
                    nxt = yield R(curr, "next")
                    succ, marked = nxt.target, nxt.mark
                if restarted:
                    break
                if ckey < k:
                    pred, curr = curr, succ
                else:
                    return pred, curr, ckey

    def op_add(self, k):
        while True:
            pred, curr, ckey = yield from self.find(k)
            if ckey == k:
                return False
            n = yield ALLOC(fresh_node(k, curr))
            added = yield CAS(pred, "next", MarkedRef(curr, False), MarkedRef(n, False), "add.link")
            if added:
                return True

    def op_remove(self, k):
        _, curr, ckey = yield from self.find(k)
        if ckey != k:
            return False
        victim = curr
        succ = (yield R(victim, "next")).target
        while True:
            marked_it = yield CAS(victim, "next", MarkedRef(succ, False), MarkedRef(succ, True), "remove.mark")
            nxt = yield R(victim, "next")
            succ, marked = nxt.target, nxt.mark
            if marked_it:
                yield from self.find(k)
                return True
            if marked:
                return False

    def op_contains(self, k):
        yield TBEGIN(k)
        curr = self.root
        ckey = (yield R(curr, "key")).value
        nxt = yield R(curr, "next")
        succ, marked = nxt.target, nxt.mark
        while ckey < k:
            curr = succ
            ckey = (yield R(curr, "key")).value
            nxt = yield R(curr, "next")
            succ, marked = nxt.target, nxt.mark
        yield TEND
        return ckey == k and not marked

    op_insert = op_add
    op_delete = op_remove
