"""Text serialization of whole runs.

A run file is line oriented, ``|`` separated, and sorted so that the same
run always produces the same bytes::

    # localview run v1
    meta|structure|cf_tree
    meta|options|{"variant": "B"}
    meta|universe|1 2 3
    meta|seed|7
    meta|scenario|rotation_race
    meta|status|ok|
    meta|schedule|0 0 0 1 1 2
    op|0|0|contains|4|0|43|true|ok|0
    trav|0|0|0|4|1|0 1 2 3
    label|3|rotate.fresh
    assert|locate.y_key|0|0|12
    init|n0.key|i:+inf
    0|0|0|R|n0.key|-|i:+inf
    5|1|1|W|n0.left|r:1|r:2

Event lines are ``seq|thread|op|kind|location|old|new`` with ``-`` as the
old value of a read.  Values use the compact forms of
`shared_memory.format_value` (``i:5``, ``r:3``, ``null``, ``b:1``,
``m:3:0``, ``lk:free``).  ``op`` lines hold id, thread, method, key
(``-`` if none), invocation seq, response seq, result, status and restart
count.  Verdict lines (``verdict|{json}``) are appended to witness files
and ignored when a run is loaded.
"""

from __future__ import annotations

import json

from .scheduler import AssertionFailure, OperationRecord, RunResult, Traversal
from .shared_memory import ExecutionLog

HEADER = "# localview run v1"


def _fmt_result(v) -> str:
    if v is None:
        return "-"
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


def _parse_result(s: str):
    return {"-": None, "true": True, "false": False}.get(s, s)


def _opt(v) -> str:
    return "-" if v is None else str(v)


def dumps(result: RunResult) -> str:
    lines = [HEADER]
    lines.append(f"meta|structure|{result.structure_name}")
    lines.append(f"meta|options|{json.dumps(result.structure_options, sort_keys=True)}")
    lines.append(f"meta|universe|{' '.join(str(k) for k in result.universe)}")
    lines.append(f"meta|seed|{result.seed}")
    lines.append(f"meta|scenario|{result.scenario_name}")
    lines.append(f"meta|status|{result.status}|{result.detail}")
    lines.append(f"meta|schedule|{' '.join(str(i) for i in result.schedule)}")
    for o in result.ops:
        lines.append(
            f"op|{o.op}|{o.thread}|{o.method}|{_opt(o.key)}|{_opt(o.inv)}|{_opt(o.resp)}|"
            f"{_fmt_result(o.result)}|{o.status}|{o.restarts}"
        )
    for t in result.traversals:
        lines.append(f"trav|{t.index}|{t.op}|{t.thread}|{_opt(t.key)}|{int(t.closed)}|{' '.join(map(str, t.seqs))}")
    for w, lab in sorted(result.labels.items()):
        lines.append(f"label|{w}|{lab}")
    for a in result.assertion_failures:
        lines.append(f"assert|{a.name}|{a.op}|{a.thread}|{a.seq}")
    lines.extend(result.log.format_lines())
    return "\n".join(lines) + "\n"


def _int_or_none(s: str):
    return None if s == "-" else int(s)


def loads(text: str) -> RunResult:
    meta: dict[str, str] = {}
    ops: list[OperationRecord] = []
    travs: list[Traversal] = []
    labels: dict[int, str] = {}
    asserts: list[AssertionFailure] = []
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ValueError("not a localview run file (missing header)")
    for n, line in enumerate(lines, 1):
        if not line or line.startswith("#"):
            continue
        kind, _, rest = line.partition("|")
        try:
            if kind == "meta":
                key, _, val = rest.partition("|")
                meta[key] = val
            elif kind == "op":
                i, th, method, key, inv, resp, res, status, restarts = rest.split("|")
                rec = OperationRecord(int(i), int(th), method, _int_or_none(key), _int_or_none(inv),
                                      _int_or_none(resp), _parse_result(res), status, [], int(restarts))
                ops.append(rec)
            elif kind == "trav":
                i, op, th, key, closed, seqs = rest.split("|")
                travs.append(Traversal(int(i), int(op), int(th), _int_or_none(key),
                                       [int(s) for s in seqs.split()], closed == "1"))
            elif kind == "label":
                w, lab = rest.split("|")
                labels[int(w)] = lab
            elif kind == "assert":
                name, op, th, seq = rest.split("|")
                asserts.append(AssertionFailure(name, int(op), int(th), int(seq)))
        except ValueError as e:
            raise ValueError(f"line {n}: {e}") from None
    for key in ("structure", "options", "universe", "seed", "status", "schedule"):
        if key not in meta:
            raise ValueError(f"run file lacks meta|{key}")
    by_op = {o.op: o for o in ops}
    for t in travs:
        if t.op in by_op:
            by_op[t.op].traversals.append(t.index)
    status, _, detail = meta["status"].partition("|")
    return RunResult(
        structure_name=meta["structure"],
        structure_options=json.loads(meta["options"]),
        universe=[int(k) for k in meta["universe"].split()],
        seed=int(meta["seed"]),
        log=ExecutionLog.loads(text),
        ops=ops,
        traversals=travs,
        schedule=[int(i) for i in meta["schedule"].split()],
        labels=labels,
        status=status,
        detail=detail,
        assertion_failures=asserts,
        scenario_name=meta.get("scenario", ""),
    )


def verdict_lines(records: list[dict]) -> str:
    return "".join("verdict|" + json.dumps(r, sort_keys=True) + "\n" for r in records)


def read_verdicts(text: str) -> list[dict]:
    return [json.loads(line[len("verdict|"):]) for line in text.splitlines() if line.startswith("verdict|")]
