"""Deterministic interleaving of logical threads at atomic-action granularity.

The engine (`Machine`) runs each thread's operations as step programs and
asks a chooser which runnable thread performs the next atomic action.  Three
choosers are provided: seeded random, scripted, and bounded exhaustive
enumeration.

Randomness comes from SplitMix64 (Steele, Lea and Flood's 64-bit mixer):
``state += 0x9E3779B97F4A7C15``, then two xor-shift-multiply rounds.  A
draw below ``n`` is ``(x * n) >> 64``.  Stream derivation: the scheduler
stream is ``SplitMix64(seed)``; the stream for tag ``t`` (thread index, or
``WORKLOAD_TAG`` for op generation) is seeded with the first output of
``SplitMix64(seed ^ ((t + 1) * 0xD1B54A32D192ED03 mod 2**64))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .shared_memory import ABSENT, FREE, Event, ExecutionLog, Location, LockOwner, StateSnapshot
from .structures import REGISTRY, SET_KINDS, ProgramError, SetStructure, make_structure

MASK64 = (1 << 64) - 1
WORKLOAD_TAG = 0xFFFF
DEFAULT_FUEL = 10_000
DEFAULT_PREEMPTION_BOUND = 3
DEFAULT_STEP_BOUND = 60


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return (self.next() * n) >> 64

    @classmethod
    def stream(cls, seed: int, tag: int) -> "SplitMix64":
        mixed = (seed ^ (((tag + 1) * 0xD1B54A32D192ED03) & MASK64)) & MASK64
        return cls(cls(mixed).next())


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpSpec:
    method: str
    key: int | None = None

    def __str__(self) -> str:
        return self.method if self.key is None else f"{self.method}({self.key})"


@dataclass
class OperationRecord:
    op: int
    thread: int
    method: str
    key: int | None
    inv: int | None = None  # seq of the op's first event
    resp: int | None = None  # seq of its last event + 1
    result: object = None
    status: str = "pending"  # pending | ok | running
    traversals: list[int] = field(default_factory=list)
    restarts: int = 0

    @property
    def kind(self) -> str | None:
        return SET_KINDS.get(self.method)

    @property
    def completed(self) -> bool:
        return self.status == "ok"


@dataclass
class Traversal:
    index: int
    op: int
    thread: int
    key: object
    seqs: list[int] = field(default_factory=list)
    closed: bool = False


@dataclass
class AssertionFailure:
    name: str
    op: int
    thread: int
    seq: int


@dataclass
class RunResult:
    structure_name: str
    structure_options: dict
    universe: list
    seed: int
    log: ExecutionLog
    ops: list[OperationRecord]
    traversals: list[Traversal]
    schedule: list[int]
    labels: dict[int, str]
    status: str = "ok"  # ok | fuel | deadlock | overflow | partial
    detail: str = ""
    assertion_failures: list[AssertionFailure] = field(default_factory=list)
    scenario_name: str = ""
    structure: SetStructure | None = field(default=None, repr=False)

    @property
    def conclusive(self) -> bool:
        return self.status == "ok"

    def reads_of(self, trav: Traversal) -> list[Event]:
        ev = self.log.events
        return [ev[s] for s in trav.seqs]


class FuelExhausted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class _Thread:
    __slots__ = (
        "idx", "ops", "op_i", "gen", "send", "pending", "held", "unlocks", "after",
        "result", "record", "rng", "steps", "trav",
    )

    def __init__(self, idx: int, ops: list[tuple[int, OpSpec]], rng: SplitMix64):
        self.idx = idx
        self.ops = ops
        self.op_i = 0
        self.gen = None
        self.send = None
        self.pending = None
        self.held: list[int] = []
        self.unlocks: list[int] = []
        self.after: str | None = None
        self.result = None
        self.record: OperationRecord | None = None
        self.rng = rng
        self.steps = 0
        self.trav: Traversal | None = None


class Machine:
    """Runs step programs of one structure against a simulated heap."""

    def __init__(self, structure: SetStructure, seed: int = 0, fuel: int = DEFAULT_FUEL):
        self.structure = structure
        self.seed = seed
        self.fuel = fuel
        self.heap: dict[Location, object] = {}
        self.events: list[Event] = []
        self.n_writes = 0
        self.next_node = 0
        self.labels: dict[int, str] = {}
        self.ops: list[OperationRecord] = []
        self.traversals: list[Traversal] = []
        self.assertion_failures: list[AssertionFailure] = []
        self.threads: list[_Thread] = []
        self.schedule: list[int] = []
        self.init: StateSnapshot | None = None
        for fields in structure.initial_nodes():
            n = self.next_node
            self.next_node += 1
            for f, v in fields.items():
                self.heap[Location(n, f)] = v

    # -- setup ---------------------------------------------------------------

    def prefill(self, ops: Sequence[OpSpec]) -> None:
        """Run ops sequentially, then forget the events: the result is the new initial heap."""
        if not ops:
            return
        saved = (self.threads, self.ops)
        self.threads = []
        self.ops = []
        self.add_threads([list(ops)], first_op_id=0)
        t = self.threads[0]
        while t.pending is not None:
            self._step(t)
            self._settle(t)
        if any(r.status != "ok" for r in self.ops):
            raise ProgramError("prefill did not complete")
        self.threads, self.ops = saved
        self.events = []
        self.n_writes = 0
        self.labels = {}
        self.traversals = []
        self.assertion_failures = []

    def add_threads(self, scripts: Sequence[Sequence[OpSpec]], first_op_id: int | None = None) -> None:
        op_id = len(self.ops) if first_op_id is None else first_op_id
        base = len(self.threads)
        for ti, script in enumerate(scripts):
            idx = base + ti
            ops = []
            for spec in script:
                ops.append((op_id, spec))
                op_id += 1
            t = _Thread(idx, ops, SplitMix64.stream(self.seed, idx))
            self.threads.append(t)
        for t in self.threads[base:]:
            self._settle(t)

    def snapshot(self) -> StateSnapshot:
        return StateSnapshot(self.heap)

    # -- thread state machine ------------------------------------------------

    def _start_op(self, t: _Thread) -> None:
        op_id, spec = t.ops[t.op_i]
        rec = OperationRecord(op_id, t.idx, spec.method, spec.key, status="running")
        self.ops.append(rec)
        t.record = rec
        t.gen = self.structure.program(spec.method, spec.key)
        t.send = None
        t.steps = 0

    def _restart_op(self, t: _Thread) -> None:
        _, spec = t.ops[t.op_i]
        t.gen = self.structure.program(spec.method, spec.key)
        t.send = None
        t.record.restarts += 1

    def _close_traversal(self, t: _Thread, closed: bool) -> None:
        if t.trav is not None:
            t.trav.closed = closed
            t.trav = None

    def _settle(self, t: _Thread) -> None:
        """Advance t's program until it names its next atomic action (or finishes)."""
        while True:
            if t.unlocks:
                t.pending = ("UNLOCK", t.unlocks[0])
                return
            if t.after == "restart":
                t.after = None
                self._restart_op(t)
                continue
            if t.after == "done":
                t.after = None
                rec = t.record
                rec.result = t.result
                rec.status = "ok"
                if rec.inv is None:
                    rec.inv = len(self.events)
                rec.resp = len(self.events)
                t.record = None
                t.gen = None
                t.op_i += 1
                continue
            if t.gen is None:
                if t.op_i >= len(t.ops):
                    t.pending = None
                    return
                self._start_op(t)
            try:
                act = t.gen.send(t.send)
            except StopIteration as stop:
                t.result = stop.value
                self._close_traversal(t, closed=False)
                t.unlocks = sorted(t.held)
                t.after = "done"
                continue
            tag = act[0]
            t.send = None
            if tag == "TBEGIN":
                self._close_traversal(t, closed=False)
                tr = Traversal(len(self.traversals), t.record.op, t.idx, act[1])
                self.traversals.append(tr)
                t.record.traversals.append(tr.index)
                t.trav = tr
            elif tag == "TEND":
                self._close_traversal(t, closed=True)
            elif tag == "RAND":
                t.send = t.rng.below(act[1])
            elif tag == "ASSERT":
                if not act[2](self._lookup):
                    self.assertion_failures.append(
                        AssertionFailure(act[1], t.record.op, t.idx, len(self.events))
                    )
            elif tag == "RESTART":
                self._close_traversal(t, closed=False)
                t.unlocks = sorted(t.held)
                t.after = "restart"
            else:
                t.pending = act
                return

    def _lookup(self, loc):
        return self.heap.get(Location(*loc), ABSENT)

    def runnable(self, t: _Thread) -> bool:
        act = t.pending
        if act is None:
            return False
        if act[0] == "LOCK":
            owner = self.heap.get(Location(act[1], "lock"), ABSENT)
            if owner == LockOwner(t.idx):
                raise ProgramError(f"thread {t.idx} re-locks node {act[1]}")
            return owner == FREE
        return True

    # -- atomic actions ------------------------------------------------------

    def _emit(self, t: _Thread, kind: str, loc: Location, old, new, label=None) -> Event:
        seq = len(self.events)
        rec = t.record
        if rec.inv is None:
            rec.inv = seq
        w = 0
        if kind == "W":
            self.n_writes += 1
            w = self.n_writes
            self.heap[loc] = new
            if label:
                self.labels[w] = label
        ev = Event(seq, t.idx, rec.op, kind, loc, old, new, w)
        self.events.append(ev)
        return ev

    def _step(self, t: _Thread) -> None:
        t.steps += 1
        if t.steps > self.fuel:
            raise FuelExhausted(f"op {t.record.op} on thread {t.idx} exceeded {self.fuel} steps")
        act = t.pending
        t.pending = None
        tag = act[0]
        heap = self.heap
        if tag == "R":
            loc = act[1]
            ev = self._emit(t, "R", loc, None, heap.get(loc, ABSENT))
            if t.trav is not None:
                t.trav.seqs.append(ev.seq)
            t.send = ev.new
        elif tag == "W":
            loc = act[1]
            self._emit(t, "W", loc, heap.get(loc, ABSENT), act[2], act[3] if len(act) > 3 else None)
        elif tag == "CAS":
            loc, expected, new = act[1], act[2], act[3]
            label = act[4] if len(act) > 4 else None
            cur = heap.get(loc, ABSENT)
            if cur == expected:
                self._emit(t, "W", loc, cur, new, label)
                t.send = True
            else:
                self._emit(t, "W", loc, cur, cur, label and label + ".failed")
                t.send = False
        elif tag == "LOCK":
            loc = Location(act[1], "lock")
            self._emit(t, "W", loc, heap.get(loc, ABSENT), LockOwner(t.idx))
            t.held.append(act[1])
        elif tag == "UNLOCK":
            loc = Location(act[1], "lock")
            self._emit(t, "W", loc, heap.get(loc, ABSENT), FREE)
            t.held.remove(act[1])
            if t.unlocks and t.unlocks[0] == act[1]:
                t.unlocks.pop(0)
        elif tag == "ALLOC":
            n = self.next_node
            self.next_node += 1
            for f, v in act[1].items():
                self._emit(t, "W", Location(n, f), ABSENT, v)
            t.send = n
        else:
            raise ProgramError(f"unknown action {act!r}")

    # -- driving -------------------------------------------------------------

    def step_thread(self, i: int) -> None:
        t = self.threads[i]
        self.schedule.append(i)
        self._step(t)
        self._settle(t)

    def runnable_threads(self) -> list[int]:
        return [t.idx for t in self.threads if self.runnable(t)]

    def unfinished(self) -> bool:
        return any(t.pending is not None for t in self.threads)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass
class Strategy:
    kind: str = "random"  # random | exhaustive | scripted
    runs: int = 1
    preemption_bound: int = DEFAULT_PREEMPTION_BOUND
    step_bound: int = DEFAULT_STEP_BOUND
    script: str | list = ""  # see parse_schedule


@dataclass
class Scenario:
    name: str
    structure: str
    keys: list[int]
    threads: list[list[OpSpec]] | None = None
    n_threads: int = 2
    ops_per_thread: int = 3
    op_mix: dict[str, float] = field(default_factory=lambda: {"contains": 1, "insert": 1, "delete": 1})
    prefill: list[OpSpec] = field(default_factory=list)
    options: dict = field(default_factory=dict)
    seed: int = 0
    strategy: Strategy = field(default_factory=Strategy)
    checkers: list[str] | None = None
    fuel: int = DEFAULT_FUEL
    checker_options: dict = field(default_factory=dict)
    keep_logs: str = "failures"  # failures | all | none

    def __post_init__(self):
        if self.structure not in REGISTRY:
            raise ValueError(f"unknown structure {self.structure!r}")
        if any(not isinstance(k, int) for k in self.keys):
            raise ValueError("key universe must be finite integers (no sentinels)")
        n = len(self.threads) if self.threads is not None else self.n_threads
        if n < 1:
            raise ValueError("a scenario needs at least one thread")

    def thread_scripts(self, seed: int) -> list[list[OpSpec]]:
        if self.threads is not None:
            return [list(t) for t in self.threads]
        rng = SplitMix64.stream(seed, WORKLOAD_TAG)
        methods = sorted(self.op_mix)
        weights = [self.op_mix[m] for m in methods]
        total = sum(weights)
        if total <= 0:
            raise ValueError("op_mix weights must sum to a positive number")
        scripts = []
        for _ in range(self.n_threads):
            ops = []
            for _ in range(self.ops_per_thread):
                x = rng.next() / 2.0**64 * total
                acc = 0.0
                choice = methods[-1]
                for m, w in zip(methods, weights):
                    acc += w
                    if x < acc:
                        choice = m
                        break
                key = None
                if SET_KINDS.get(choice) is not None:
                    key = self.keys[rng.below(len(self.keys))]
                ops.append(OpSpec(choice, key))
            scripts.append(ops)
        return scripts

    def make_structure(self) -> SetStructure:
        return make_structure(self.structure, self.keys, **self.options)


def _build(scenario: Scenario, seed: int) -> Machine:
    st = scenario.make_structure()
    m = Machine(st, seed=seed, fuel=scenario.fuel)
    m.prefill(scenario.prefill)
    if hasattr(st, "resolve_start"):
        st.resolve_start(m._lookup, m.next_node)
    m.init = StateSnapshot(m.heap)
    m.add_threads(scenario.thread_scripts(seed))
    return m


def _finish(m: Machine, scenario: Scenario, seed: int, status: str, detail: str = "") -> RunResult:
    log = ExecutionLog(m.init, m.events)
    return RunResult(
        structure_name=scenario.structure,
        structure_options=dict(scenario.options),
        universe=list(scenario.keys),
        seed=seed,
        log=log,
        ops=sorted(m.ops, key=lambda r: r.op),
        traversals=m.traversals,
        schedule=list(m.schedule),
        labels=dict(m.labels),
        status=status,
        detail=detail,
        assertion_failures=list(m.assertion_failures),
        scenario_name=scenario.name,
        structure=m.structure,
    )


def _drive(m: Machine, choose: Callable[[list[int], Machine], int | None], step_bound: int | None = None):
    """Returns (status, detail)."""
    try:
        while True:
            runnable = m.runnable_threads()
            if not runnable:
                if m.unfinished():
                    return "deadlock", "no runnable thread while operations are pending"
                return "ok", ""
            if step_bound is not None and len(m.schedule) >= step_bound:
                return "overflow", f"step bound {step_bound} reached"
            i = choose(runnable, m)
            if i is None:
                return "partial", "schedule ended before all operations completed"
            m.step_thread(i)
    except FuelExhausted as e:
        return "fuel", str(e)


def run_random(scenario: Scenario, seed: int | None = None) -> RunResult:
    seed = scenario.seed if seed is None else seed
    m = _build(scenario, seed)
    rng = SplitMix64(seed)

    def choose(runnable, _m):
        return runnable[rng.below(len(runnable))]

    status, detail = _drive(m, choose)
    return _finish(m, scenario, seed, status, detail)


def parse_schedule(text: str) -> list[tuple[int, int | None]]:
    """Whitespace-separated tokens: ``i`` (one step of thread i), ``i*n``
    (n steps) or ``i*`` (thread i until it can no longer run)."""
    out: list[tuple[int, int | None]] = []
    for tok in text.split():
        idx, star, count = tok.partition("*")
        try:
            i = int(idx)
            n = (int(count) if count else None) if star else 1
        except ValueError:
            raise ValueError(f"bad schedule token {tok!r}") from None
        if i < 0 or (n is not None and n < 0):
            raise ValueError(f"bad schedule token {tok!r}")
        out.append((i, n))
    return out


def format_schedule(schedule: Sequence[int]) -> str:
    return " ".join(str(i) for i in schedule)


def _normalize_schedule(schedule) -> list[tuple[int, int | None]]:
    if isinstance(schedule, str):
        return parse_schedule(schedule)
    return [s if isinstance(s, tuple) else (int(s), 1) for s in schedule]


def run_script(scenario: Scenario, schedule, seed: int | None = None) -> RunResult:
    """Replay a thread schedule; a blocked or finished pick is an error.

    `schedule` is a sequence of thread indices, a list of (thread, count)
    pairs with count None meaning "until it stops", or the text form read by
    `parse_schedule`.  The recorded `RunResult.schedule` is always plain.
    """
    seed = scenario.seed if seed is None else seed
    m = _build(scenario, seed)
    queue = _normalize_schedule(schedule)
    state = {"pos": 0, "done": 0}

    def choose(runnable, _m):
        while state["pos"] < len(queue):
            i, n = queue[state["pos"]]
            if n is None:
                if i in runnable:
                    return i
                state["pos"] += 1
                continue
            if state["done"] >= n:
                state["pos"] += 1
                state["done"] = 0
                continue
            if i not in runnable:
                raise ValueError(f"scripted thread {i} is not runnable at step {len(_m.schedule)}")
            state["done"] += 1
            return i
        return None

    status, detail = _drive(m, choose)
    return _finish(m, scenario, seed, status, detail)


@dataclass
class _Trace:
    choices: list[int]
    runnable: list[list[int]]


def run_exhaustive(
    scenario: Scenario,
    preemption_bound: int | None = None,
    step_bound: int | None = None,
    seed: int | None = None,
    limit: int | None = None,
) -> list[RunResult]:
    """All schedules with at most `preemption_bound` preemptions, by stateless DFS.

    A preemption is a switch away from a thread that could still run.  The
    default continuation keeps running the current thread, else the lowest
    runnable index.  Runs longer than `step_bound` are reported as overflow.
    """
    seed = scenario.seed if seed is None else seed
    pb = scenario.strategy.preemption_bound if preemption_bound is None else preemption_bound
    sb = scenario.strategy.step_bound if step_bound is None else step_bound
    results: list[RunResult] = []
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        m = _build(scenario, seed)
        trace = _Trace([], [])
        pos = [0]

        def choose(runnable, _m):
            j = pos[0]
            pos[0] += 1
            if j < len(prefix):
                c = prefix[j]
            else:
                last = trace.choices[-1] if trace.choices else None
                c = last if last in runnable else runnable[0]
            trace.choices.append(c)
            trace.runnable.append(list(runnable))
            return c

        status, detail = _drive(m, choose, sb)
        results.append(_finish(m, scenario, seed, status, detail))
        if limit is not None and len(results) >= limit:
            break
        # preemptions along the explored default suffix
        counts = []
        c = 0
        for j, ch in enumerate(trace.choices):
            prev = trace.choices[j - 1] if j else None
            counts.append(c)
            if prev is not None and ch != prev and prev in trace.runnable[j]:
                c += 1
        for j in range(len(trace.choices) - 1, len(prefix) - 1, -1):
            prev = trace.choices[j - 1] if j else None
            for alt in trace.runnable[j]:
                if alt == trace.choices[j]:
                    continue
                extra = 1 if (prev is not None and alt != prev and prev in trace.runnable[j]) else 0
                if counts[j] + extra <= pb:
                    stack.append(trace.choices[:j] + [alt])
    return results
