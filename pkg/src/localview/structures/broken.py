"""Deliberately broken CF-tree variants used as negative fixtures.

``InPlaceRotationTree`` rotates by rewiring y and x directly instead of
copying y, so a concurrent search can lose a key that never left the set.
``WanderingTree`` adds a contains that starts from an arbitrary node and
only then goes back to the root, so it reads against the search order.
"""

from __future__ import annotations

from ..shared_memory import Int, Ref, target_of
from .base import LOCK, TBEGIN, TEND, ProgramError, R, W
from .cf_tree import CFTree


class InPlaceRotationTree(CFTree):
    name = "cf_inplace"
    maintenance = CFTree.maintenance + ("inplace_rotate_right", "inplace_rotate_left")

    def _inplace(self, pinned, outer, inner):
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
        b = yield R(x, inner)
        # x and y point at each other until the last write
        yield W(x, inner, Ref(y), f"inplace.x_{inner}")
        yield W(p, outer, Ref(x), f"inplace.p_{outer}")
        yield W(y, outer, b, f"inplace.y_{outer}")
        return None

    def op_inplace_rotate_right(self, pinned=None):
        return (yield from self._inplace(pinned, "left", "right"))

    def op_inplace_rotate_left(self, pinned=None):
        return (yield from self._inplace(pinned, "right", "left"))


class WanderingTree(CFTree):
    """contains(k) first searches below a start node, then from the root."""

    name = "cf_wandering"
    methods = CFTree.methods + ("wandering_contains",)

    def __init__(self, universe=(), start_key=None, **options):
        super().__init__(universe, **options)
        self.start_key = start_key
        self.start_node: int | None = None

    def resolve_start(self, lookup, node_count: int):
        """Pick the start node by key from the initial heap."""
        if self.start_key is None:
            self.start_node = self.root
            return
        for n in range(node_count):
            if lookup((n, "key")) == Int(self.start_key):
                self.start_node = n
                return
        raise ProgramError(f"no node with key {self.start_key} to start from")

    def _descend(self, start, k, stop=None):
        y = start
        ykey = (yield R(y, "key")).value
        while y is not None and y != stop and ykey != k:
            side = "right" if ykey < k else "left"
            y = target_of((yield R(y, side)))
            if y is not None and y != stop:
                ykey = (yield R(y, "key")).value
        return y, (ykey if y is not None else None)

    def op_wandering_contains(self, k):
        start = self.start_node if self.start_node is not None else self.root
        yield TBEGIN(k)
        y, ykey = yield from self._descend(start, k)
        if y is None and start != self.root:
            y, ykey = yield from self._descend(self.root, k, stop=start)
            if y == start:
                y = None
        if y is None or ykey != k:
            yield TEND
            return False
        deleted = (yield R(y, "del")).value
        yield TEND
        return not deleted
