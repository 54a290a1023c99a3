"""Per-run caches shared by the linearizability and framework checkers.

`RunView` replays a log once per key and keeps, for every state index m,
the set of k-reachable locations.  Reach sets are recomputed only when a
write hits a location whose value the previous search consulted; otherwise
the frozenset object is shared with the previous state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .paths import SearchModel, model_for, reach_set
from .shared_memory import ABSENT, MINUS_INF, PLUS_INF, ExecutionLog, Int


def check_universe(keys) -> list:
    """Scenario keys plus each key +- 1.

    Search-path truth only changes where k crosses a stored key, so one
    representative per interval between occurring keys is enough.
    """
    out = set()
    for k in keys:
        out.update((k - 1, k, k + 1))
    return sorted(out)


class RunView:
    def __init__(self, log: ExecutionLog, model: SearchModel, keys):
        self.log = log
        self.model = model
        self.keys = check_universe(keys)
        self.writes = log.writes
        self.n = len(self.writes)
        self._reach: dict = {}

    @classmethod
    def of(cls, result, model: SearchModel | None = None, keys=None) -> "RunView":
        model = model or model_for(result.structure_name, **result.structure_options)
        ks = keys if keys is not None else list(result.universe) + result_keys(result)
        return cls(result.log, model, ks)

    def state_map(self, m: int) -> dict:
        return self.log.state_at(m)._map

    def reach(self, k) -> list[frozenset]:
        """reach(k)[m] = locations k-reachable in the state after m writes."""
        cached = self._reach.get(k)
        if cached is not None:
            return cached
        cur = dict(self.log.init._map)
        get = lambda loc: cur.get(loc, ABSENT)  # noqa: E731
        r, sup = reach_set(self.model, get, k)
        out = [r]
        for w in self.writes:
            cur[w.loc] = w.new
            if w.loc in sup and w.old != w.new:
                r, sup = reach_set(self.model, get, k)
            out.append(r)
        self._reach[k] = out
        return out

    @cached_property
    def set_keys(self) -> list:
        """Finite keys stored anywhere in the run."""
        ks = set()
        for loc, v in self.log.init.items():
            if loc.field == "key" and isinstance(v, Int) and v.value not in (MINUS_INF, PLUS_INF):
                ks.add(v.value)
        for w in self.writes:
            if w.loc.field == "key" and isinstance(w.new, Int) and w.new.value not in (MINUS_INF, PLUS_INF):
                ks.add(w.new.value)
        return sorted(ks)

    def write_state_index(self, seq: int) -> int:
        return self.log.writes_before(seq)


def result_keys(result) -> list:
    ks = {o.key for o in result.ops if isinstance(o.key, int)}
    return sorted(ks)


@dataclass
class Verdict:
    """Outcome of one checker: passed is None when the check did not apply."""

    name: str
    passed: bool | None
    detail: str = ""
    witness: dict = field(default_factory=dict)
    count: int = 0  # items checked

    @property
    def failed(self) -> bool:
        return self.passed is False

    def to_record(self) -> dict:
        status = "skip" if self.passed is None else ("pass" if self.passed else "fail")
        return {"checker": self.name, "status": status, "detail": self.detail, "checked": self.count, "witness": self.witness}
