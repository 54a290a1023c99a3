"""Instrumented concurrent set algorithms, addressable by name."""

from __future__ import annotations

from .base import SET_KINDS, ProgramError, SetStructure
from .broken import InPlaceRotationTree, WanderingTree
from .cf_tree import CFTree
from .lazy_list import LazyList
from .lf_list import LFList
from .skip_list import MAX_LEVEL, SkipList, level_field, level_of

REGISTRY: dict[str, type[SetStructure]] = {
    cls.name: cls for cls in (CFTree, LazyList, LFList, SkipList, InPlaceRotationTree, WanderingTree)
}


def make_structure(name: str, universe=(), **options) -> SetStructure:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown structure {name!r}; known: {sorted(REGISTRY)}") from None
    return cls(universe, **options)


__all__ = [
    "CFTree",
    "InPlaceRotationTree",
    "LFList",
    "LazyList",
    "MAX_LEVEL",
    "ProgramError",
    "REGISTRY",
    "SET_KINDS",
    "SetStructure",
    "SkipList",
    "WanderingTree",
    "level_field",
    "level_of",
    "make_structure",
]
