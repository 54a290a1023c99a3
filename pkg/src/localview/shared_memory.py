"""Simulated heap: locations, values, atomic events and state reconstruction.

Every shared access made by a structure becomes one `Event` in an
`ExecutionLog`.  Any intermediate global state can be rebuilt from the log,
and a traversal's reads can be folded into its local view.

Text encoding of a log (one record per line, ``|`` separated)::

    init|<loc>|<value>                      initial binding
    <seq>|<thread>|<op>|<kind>|<loc>|<old>|<new>

``kind`` is ``R`` or ``W``.  For reads ``old`` is ``-`` and ``new`` holds the
value read.  Locations print as ``n<id>.<field>``; values as ``i:<key>``,
``r:<id>``, ``null``, ``b:0|1``, ``m:<id|null>:0|1``, ``lk:<thread|free>``
and ``absent``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Union

MINUS_INF = float("-inf")
PLUS_INF = float("inf")

Key = Union[int, float]

CHECKPOINT_INTERVAL = 64


def format_key(k: Key) -> str:
    if k == MINUS_INF:
        return "-inf"
    if k == PLUS_INF:
        return "+inf"
    return str(int(k))


def parse_key(s: str) -> Key:
    if s == "-inf":
        return MINUS_INF
    if s == "+inf":
        return PLUS_INF
    return int(s)


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Int:
    value: Key


@dataclass(frozen=True, slots=True)
class Ref:
    node: int


@dataclass(frozen=True, slots=True)
class Bool:
    value: bool


@dataclass(frozen=True, slots=True)
class MarkedRef:
    target: int | None
    mark: bool


@dataclass(frozen=True, slots=True)
class LockOwner:
    owner: int | None  # None means free


class _Null:
    __slots__ = ()

    def __repr__(self) -> str:
        return "NULL"

    def __reduce__(self):
        return "NULL"


class _Absent:
    __slots__ = ()

    def __repr__(self) -> str:
        return "ABSENT"

    def __reduce__(self):
        return "ABSENT"


NULL = _Null()
ABSENT = _Absent()  # lookup of an unmapped location; never a stored value
FREE = LockOwner(None)
TRUE = Bool(True)
FALSE = Bool(False)

Value = Union[Int, Ref, _Null, Bool, MarkedRef, LockOwner]


def ref_or_null(node: int | None) -> Value:
    return NULL if node is None else Ref(node)


def target_of(v) -> int | None:
    """Node referenced by a pointer value, or None."""
    if isinstance(v, Ref):
        return v.node
    if isinstance(v, MarkedRef):
        return v.target
    return None


def format_value(v) -> str:
    if v is NULL:
        return "null"
    if v is ABSENT:
        return "absent"
    if isinstance(v, Int):
        return "i:" + format_key(v.value)
    if isinstance(v, Ref):
        return f"r:{v.node}"
    if isinstance(v, Bool):
        return "b:1" if v.value else "b:0"
    if isinstance(v, MarkedRef):
        t = "null" if v.target is None else str(v.target)
        return f"m:{t}:{1 if v.mark else 0}"
    if isinstance(v, LockOwner):
        return "lk:free" if v.owner is None else f"lk:{v.owner}"
    raise TypeError(f"not a value: {v!r}")


def parse_value(s: str):
    if s == "null":
        return NULL
    if s == "absent":
        return ABSENT
    tag, _, rest = s.partition(":")
    if tag == "i":
        return Int(parse_key(rest))
    if tag == "r":
        return Ref(int(rest))
    if tag == "b":
        return TRUE if rest == "1" else FALSE
    if tag == "m":
        t, _, m = rest.rpartition(":")
        return MarkedRef(None if t == "null" else int(t), m == "1")
    if tag == "lk":
        return FREE if rest == "free" else LockOwner(int(rest))
    raise ValueError(f"cannot parse value {s!r}")


# ---------------------------------------------------------------------------
# Locations and events
# ---------------------------------------------------------------------------


class Location(NamedTuple):
    node: int
    field: str

    def __str__(self) -> str:
        return f"n{self.node}.{self.field}"


def parse_location(s: str) -> Location:
    node, _, fld = s.partition(".")
    if not node.startswith("n") or not fld:
        raise ValueError(f"cannot parse location {s!r}")
    return Location(int(node[1:]), fld)


@dataclass(slots=True)
class Event:
    seq: int
    thread: int
    op: int
    kind: str  # "R" or "W"
    loc: Location
    old: object  # None for reads
    new: object  # value read, or value written
    windex: int = 0  # 1-based write index; 0 for reads

    @property
    def is_write(self) -> bool:
        return self.kind == "W"

    @property
    def value(self):
        return self.new

    @property
    def noop(self) -> bool:
        return self.kind == "W" and self.old == self.new

    def format(self) -> str:
        old = "-" if self.kind == "R" else format_value(self.old)
        return f"{self.seq}|{self.thread}|{self.op}|{self.kind}|{self.loc}|{old}|{format_value(self.new)}"


def parse_event(line: str, windex: int = 0) -> Event:
    seq, thread, op, kind, loc, old, new = line.split("|")
    return Event(
        int(seq),
        int(thread),
        int(op),
        kind,
        parse_location(loc),
        None if kind == "R" else parse_value(old),
        parse_value(new),
        windex,
    )


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


class StateSnapshot:
    """Immutable finite map Location -> Value plus the number of writes applied."""

    __slots__ = ("_map", "version")

    def __init__(self, mapping: dict | None = None, version: int = 0):
        self._map = dict(mapping) if mapping else {}
        self.version = version

    @classmethod
    def _adopt(cls, mapping: dict, version: int) -> "StateSnapshot":
        s = cls.__new__(cls)
        s._map = mapping
        s.version = version
        return s

    def get(self, loc: Location):
        return self._map.get(loc, ABSENT)

    def __getitem__(self, loc: Location):
        return self._map.get(loc, ABSENT)

    def __contains__(self, loc: Location) -> bool:
        return loc in self._map

    def __len__(self) -> int:
        return len(self._map)

    def __iter__(self) -> Iterator[Location]:
        return iter(self._map)

    def items(self):
        return self._map.items()

    def as_dict(self) -> dict:
        return dict(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, StateSnapshot) and self._map == other._map

    def __hash__(self):
        raise TypeError("StateSnapshot is not hashable")

    def __repr__(self) -> str:
        body = ", ".join(f"{loc}: {format_value(v)}" for loc, v in sorted(self._map.items()))
        return f"StateSnapshot(v{self.version}; {body})"


def apply_write(state: StateSnapshot, w: Event) -> StateSnapshot:
    m = dict(state._map)
    m[w.loc] = w.new
    return StateSnapshot._adopt(m, state.version + 1)


def subsumes(h1: StateSnapshot, h2: StateSnapshot) -> bool:
    """True iff every binding of h2 appears identically in h1."""
    get = h1._map.get
    for loc, v in h2._map.items():
        if get(loc, ABSENT) != v:
            return False
    return True


def local_view(reads: Iterable[Event]) -> StateSnapshot:
    m: dict = {}
    for r in reads:
        m[r.loc] = r.new
    return StateSnapshot._adopt(m, 0)


# ---------------------------------------------------------------------------
# Execution log
# ---------------------------------------------------------------------------


@dataclass
class ExecutionLog:
    init: StateSnapshot
    events: list[Event] = field(default_factory=list)
    _writes: list[Event] | None = field(default=None, repr=False)
    _seen: int = field(default=-1, repr=False)
    _checkpoints: list[dict] | None = field(default=None, repr=False)

    @property
    def writes(self) -> list[Event]:
        if self._seen != len(self.events):
            self._writes = [e for e in self.events if e.kind == "W"]
            self._seen = len(self.events)
            self._checkpoints = None
        return self._writes

    @property
    def n_writes(self) -> int:
        return len(self.writes)

    def writes_before(self, seq: int) -> int:
        """Number of writes with sequence number < seq (the state a read at seq saw)."""
        ws = self.writes
        lo, hi = 0, len(ws)
        while lo < hi:
            mid = (lo + hi) // 2
            if ws[mid].seq < seq:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def _build_checkpoints(self) -> list[dict]:
        cps = [self.init._map]
        cur = dict(self.init._map)
        for i, w in enumerate(self.writes, 1):
            cur[w.loc] = w.new
            if i % CHECKPOINT_INTERVAL == 0:
                cps.append(dict(cur))
        self._checkpoints = cps
        return cps

    def state_at(self, m: int) -> StateSnapshot:
        ws = self.writes
        if not 0 <= m <= len(ws):
            raise IndexError(f"write index {m} out of range 0..{len(ws)}")
        cps = self._checkpoints or self._build_checkpoints()
        base = m // CHECKPOINT_INTERVAL
        cur = dict(cps[base])
        for w in ws[base * CHECKPOINT_INTERVAL : m]:
            cur[w.loc] = w.new
        return StateSnapshot._adopt(cur, m)

    def iter_states(self) -> Iterator[tuple[int, dict]]:
        """Yield (m, mutable map of Ĥ_m) for m = 0..n; the map is reused, copy to keep."""
        cur = dict(self.init._map)
        yield 0, cur
        for i, w in enumerate(self.writes, 1):
            cur[w.loc] = w.new
            yield i, cur

    def format_lines(self) -> list[str]:
        lines = [f"init|{loc}|{format_value(v)}" for loc, v in sorted(self.init.items())]
        lines.extend(e.format() for e in self.events)
        return lines

    def dumps(self) -> str:
        return "\n".join(self.format_lines()) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExecutionLog":
        init: dict = {}
        events: list[Event] = []
        nw = 0
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("init|"):
                _, loc, v = line.split("|")
                init[parse_location(loc)] = parse_value(v)
                continue
            if not line[0].isdigit():
                continue  # metadata records are handled by higher layers
            parts = line.split("|")
            w = 0
            if parts[3] == "W":
                nw += 1
                w = nw
            events.append(parse_event(line, w))
        return cls(StateSnapshot(init), events)
