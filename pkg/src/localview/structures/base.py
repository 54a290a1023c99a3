"""Step-program protocol shared by every instrumented structure.

An operation is a generator.  Each ``yield`` hands one action tuple to the
engine (see `localview.scheduler`) and receives the action's result:

``("R", loc)``                      atomic read, returns the value
``("W", loc, new[, label])``        atomic write
``("CAS", loc, expected, new[, label])``  returns True on success; a failed
                                     CAS is still logged as a write with old = new
``("LOCK", node)`` / ``("UNLOCK", node)``  lock field writes; LOCK blocks
``("ALLOC", fields)``               fresh node, one write per field, returns its id

The following are bookkeeping markers and take no scheduling step:

``("TBEGIN", k)`` / ``("TEND",)``   delimit a read-only traversal for key k
``("RAND", n)``                     draw from the thread's RNG, returns 0..n-1
``("ASSERT", name, fn)``            fn(lookup) checked against the live heap
``("RESTART",)``                    release held locks and re-enter the operation
"""

from __future__ import annotations

from typing import Callable, Iterable

from ..shared_memory import FALSE, Location

SET_KINDS = {
    "contains": "contains",
    "insert": "insert",
    "add": "insert",
    "delete": "delete",
    "remove": "delete",
    "wandering_contains": "contains",
}


class ProgramError(RuntimeError):
    """A structure program reached a state its sequential contract rules out."""


def R(node: int, field: str):
    return ("R", Location(node, field))


def W(node: int, field: str, value, label: str | None = None):
    return ("W", Location(node, field), value, label)


def CAS(node: int, field: str, expected, new, label: str | None = None):
    return ("CAS", Location(node, field), expected, new, label)


def LOCK(node: int):
    return ("LOCK", node)


def ALLOC(fields: dict):
    return ("ALLOC", fields)


TEND = ("TEND",)
RESTART = ("RESTART",)


def TBEGIN(k):
    return ("TBEGIN", k)


def RAND(n: int):
    return ("RAND", n)


def ASSERT(name: str, fn: Callable):
    return ("ASSERT", name, fn)


class SetStructure:
    """Base class: a concurrent set whose operations are step programs."""

    name = "abstract"
    methods: tuple[str, ...] = ()
    maintenance: tuple[str, ...] = ()
    node_fields: tuple[str, ...] = ()

    def __init__(self, universe: Iterable[int] = (), **options):
        self.universe = sorted(set(universe))
        self.options = options

    def initial_nodes(self) -> list[dict]:
        """Field maps for the sentinel/root nodes, allocated as ids 0, 1, ..."""
        raise NotImplementedError

    def program(self, method: str, key=None):
        fn = getattr(self, "op_" + method, None)
        if fn is None or method not in self.methods + self.maintenance:
            raise KeyError(f"{self.name} has no operation {method!r}")
        return fn(key)

    def kind(self, method: str) -> str | None:
        return SET_KINDS.get(method)

    def arbitrary_key(self, pinned):
        """Key for locate(*): the pinned key if given, else a draw from the universe."""
        if pinned is not None:
            return pinned
        if not self.universe:
            raise ProgramError("locate(*) needs a non-empty key universe")
        i = yield RAND(len(self.universe))
        return self.universe[i]


__all__ = [
    "ALLOC",
    "ASSERT",
    "CAS",
    "FALSE",
    "LOCK",
    "ProgramError",
    "R",
    "RAND",
    "RESTART",
    "SET_KINDS",
    "SetStructure",
    "TBEGIN",
    "TEND",
    "W",
]
