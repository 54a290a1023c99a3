"""Contention-friendly binary search tree (the running example).

Every node has key, left, right, del, rem and a lock.  The root is a
sentinel with key +inf, so all real keys live in its left subtree.
Traversals are unsynchronized; updates lock, validate ``rem`` and restart.
"""

from __future__ import annotations

from ..shared_memory import FALSE, FREE, NULL, PLUS_INF, TRUE, Int, Ref, target_of
from .base import ALLOC, ASSERT, LOCK, RESTART, TBEGIN, TEND, R, SetStructure, W

ROOT = 0


def fresh_node(key, left=NULL, right=NULL, deleted=FALSE) -> dict:
    return {"key": Int(key), "left": left, "right": right, "del": deleted, "rem": FALSE, "lock": FREE}


def _key_is(node, k):
    return lambda get: get((node, "key")) == Int(k)


def _not_removed(node):
    return lambda get: get((node, "rem")) == FALSE


class CFTree(SetStructure):
    name = "cf_tree"
    methods = ("contains", "insert", "delete")
    maintenance = ("remove_right", "remove_left", "rotate_right_left", "rotate_left_right")
    node_fields = ("key", "left", "right", "del", "rem", "lock")
    root = ROOT

    def initial_nodes(self):
        return [fresh_node(PLUS_INF)]

    # -- traversal -----------------------------------------------------------

    def locate(self, k, close=True):
        """Returns (x, x.key, y, y.key); y is None when the search fell off the tree."""
        yield TBEGIN(k)
        x = y = self.root
        ykey = (yield R(y, "key")).value
        xkey = ykey
        while y is not None and ykey != k:
            x, xkey = y, ykey
            if xkey < k:
                y = target_of((yield R(x, "right")))
            else:
                y = target_of((yield R(x, "left")))
            if y is not None:
                ykey = (yield R(y, "key")).value
        if close:
            yield TEND
        return x, xkey, y, (ykey if y is not None else None)

    # -- set operations ------------------------------------------------------

    def op_contains(self, k):
        _, _, y, _ = yield from self.locate(k, close=False)
        if y is None:
            yield TEND
            return False
        deleted = (yield R(y, "del")).value
        yield TEND
        return not deleted

    def op_delete(self, k):
        _, _, y, _ = yield from self.locate(k)
        if y is None:
            return False
        yield LOCK(y)
        if (yield R(y, "rem")).value:
            yield RESTART
        ret = not (yield R(y, "del")).value
        yield ASSERT("delete.set_del", lambda get: _key_is(y, k)(get) and _not_removed(y)(get))
        yield W(y, "del", TRUE, "delete.del")
        return ret

    def op_insert(self, k):
        x, xkey, y, _ = yield from self.locate(k)
        if y is not None:
            yield LOCK(y)
            if (yield R(y, "rem")).value:
                yield RESTART
            ret = (yield R(y, "del")).value
            yield ASSERT("insert.revive", lambda get: _key_is(y, k)(get) and _not_removed(y)(get))
            yield W(y, "del", FALSE, "insert.revive")
            return ret
        yield LOCK(x)
        if (yield R(x, "rem")).value:
            yield RESTART
        # The else-branch is taken only for k > x.key, as its assertion states.
        side = "left" if k < xkey else "right"
        if (yield R(x, side)) is not NULL:
            yield RESTART
        n = yield ALLOC(fresh_node(k))
        yield W(x, side, Ref(n), "insert.link")
        return True

    # -- maintenance ---------------------------------------------------------

    def _remove(self, pinned, side):
        k = yield from self.arbitrary_key(pinned)
        z, _, _, _ = yield from self.locate(k)
        yield LOCK(z)
        y = target_of((yield R(z, side)))
        if y is None:
            return None
        if (yield R(z, "rem")).value:
            return None
        yield LOCK(y)
        # Only logically deleted nodes are unlinked.
        if not (yield R(y, "del")).value:
            return None
        left = yield R(y, "left")
        if left is NULL:
            yield W(z, side, (yield R(y, "right")), f"remove_{side}.unlink")
        else:
            right = yield R(y, "right")
            if right is NULL:
                yield W(z, side, left, f"remove_{side}.unlink")
            else:
                return None
        yield W(y, "rem", TRUE, f"remove_{side}.rem")
        return None

    def op_remove_right(self, pinned=None):
        return (yield from self._remove(pinned, "right"))

    def op_remove_left(self, pinned=None):
        return (yield from self._remove(pinned, "left"))

    def _rotate(self, pinned, outer, inner, tag):
        # outer = "left" for rotateRightLeft: y = p.left, x = y.left
        k = yield from self.arbitrary_key(pinned)
        p, _, _, _ = yield from self.locate(k)
        yield LOCK(p)
        y = target_of((yield R(p, outer)))
        if y is None:
            return None
        if (yield R(p, "rem")).value:
            return None
        yield LOCK(y)
        x = target_of((yield R(y, outer)))
        if x is None:
            return None
        yield LOCK(x)
        z = yield from self.duplicate(y, inner)
        yield W(z, outer, (yield R(x, inner)), f"{tag}.fresh")
        yield W(x, inner, Ref(z), f"{tag}.x_{inner}")
        yield W(p, outer, Ref(x), f"{tag}.p_{outer}")
        yield W(y, "rem", TRUE, f"{tag}.rem")
        return None

    def duplicate(self, y, keep):
        """Fresh copy of y's key, del bit and its `keep` child.

        The other child starts NULL: the rotation overwrites it right away,
        and copying it would briefly point the copy back at x.
        """
        key = (yield R(y, "key")).value
        child = yield R(y, keep)
        deleted = yield R(y, "del")
        links = {"left": NULL, "right": NULL, keep: child}
        return (yield ALLOC(fresh_node(key, links["left"], links["right"], deleted)))

    def op_rotate_right_left(self, pinned=None):
        return (yield from self._rotate(pinned, "left", "right", "rotate"))

    def op_rotate_left_right(self, pinned=None):
        return (yield from self._rotate(pinned, "right", "left", "rotate"))
