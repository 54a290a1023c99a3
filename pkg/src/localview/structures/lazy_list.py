"""Lazy list: sorted linked list with lock-based updates and a mark bit.

``variant`` selects what contains returns on a marked node: "A" answers
false (logical deletion decides membership), "B" answers true (only
physical removal does).
"""

from __future__ import annotations

from ..shared_memory import FALSE, FREE, MINUS_INF, NULL, PLUS_INF, TRUE, Int, Ref, target_of
from .base import ALLOC, ASSERT, LOCK, RESTART, TBEGIN, TEND, R, SetStructure, W

HEAD, TAIL = 0, 1


def fresh_node(key, nxt=NULL) -> dict:
    return {"key": Int(key), "next": nxt, "mark": FALSE, "lock": FREE}


class LazyList(SetStructure):
    name = "lazy_list"
    methods = ("contains", "insert", "delete")
    node_fields = ("key", "next", "mark", "lock")
    root = HEAD

    def __init__(self, universe=(), variant: str = "A", **options):
        super().__init__(universe, **options)
        if variant not in ("A", "B"):
            raise ValueError(f"lazy list variant must be A or B, got {variant!r}")
        self.variant = variant

    def initial_nodes(self):
        return [fresh_node(MINUS_INF, Ref(TAIL)), fresh_node(PLUS_INF)]

    def locate(self, k, close=True):
        yield TBEGIN(k)
        x = y = self.root
        ykey = (yield R(y, "key")).value
        while y is not None and ykey < k:
            x = y
            y = target_of((yield R(x, "next")))
            if y is not None:
                ykey = (yield R(y, "key")).value
        if close:
            yield TEND
        return x, y, (ykey if y is not None else None)

    def op_contains(self, k):
        _, y, ykey = yield from self.locate(k, close=False)
        if y is None or ykey != k:
            yield TEND
            return False
        marked = (yield R(y, "mark")).value
        yield TEND
        if not marked:
            return True
        return self.variant == "B"

    def op_insert(self, k):
        x, y, ykey = yield from self.locate(k)
        if y is not None and ykey == k:
            return False
        yield LOCK(x)
        yield LOCK(y)
        if (yield R(x, "mark")).value or target_of((yield R(x, "next"))) != y:
            yield RESTART
        yield ASSERT("insert.validate", lambda get: get((x, "mark")) == FALSE and get((x, "next")) == Ref(y))
        z = yield ALLOC(fresh_node(k))
        yield W(z, "next", Ref(y), "insert.prepare")
        yield W(x, "next", Ref(z), "insert.link")
        return True

    def op_delete(self, k):
        x, y, ykey = yield from self.locate(k)
        if y is None or ykey != k:
            return False
        yield LOCK(x)
        yield LOCK(y)
        if (
            (yield R(x, "mark")).value
            or (yield R(y, "mark")).value
            or target_of((yield R(x, "next"))) != y
        ):
            yield RESTART
        yield W(y, "mark", TRUE, "delete.mark")
        yield W(x, "next", (yield R(y, "next")), "delete.unlink")
        return True
