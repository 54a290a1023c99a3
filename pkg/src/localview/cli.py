"""Command line: ``localview run | replay | explain``.

Exit codes: 0 when every enabled checker passed on every conclusive run,
1 when some checker failed, 2 for unreadable or invalid input.  The
default output directory comes from ``LOCALVIEW_OUT_DIR`` (else
``./localview-out``); everything else is read from the scenario file.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click

from . import runlog
from .lab import evaluate, failed, run_record
from .paths import model_for, one_path
from .scenario_file import (
    ScenarioError,
    load_scenario,
    parse_scenario,
    resolve_scenario_path,
    scenario_digest,
    scenario_to_dict,
)
from .scheduler import Scenario, format_schedule, run_exhaustive, run_random, run_script
from .shared_memory import Location, format_value, parse_location

OUT_DIR_ENV = "LOCALVIEW_OUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass
class Report:
    scenario: str
    digest: str
    records: list[dict] = field(default_factory=list)
    witnesses: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        runs = len(self.records)
        judged = [r for r in self.records if r["status"] == "ok"]
        bad = [r for r in judged if any(v["status"] == "fail" for v in r["verdicts"])]
        per_checker: dict[str, dict[str, int]] = {}
        for r in self.records:
            for v in r["verdicts"]:
                c = per_checker.setdefault(v["checker"], {"pass": 0, "fail": 0, "skip": 0})
                c[v["status"]] += 1
        return {
            "runs": runs,
            "conclusive": len(judged),
            "inconclusive": runs - len(judged),
            "failing_runs": len(bad),
            "checkers": per_checker,
        }

    @property
    def exit_code(self) -> int:
        return EXIT_FAIL if self.summary()["failing_runs"] else EXIT_OK


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def execute(scenario: Scenario, seed: int | None = None, runs: int | None = None, strategy: str | None = None):
    kind = strategy or scenario.strategy.kind
    base = scenario.seed if seed is None else seed
    if kind == "random":
        n = runs if runs is not None else scenario.strategy.runs
        return [run_random(scenario, base + i) for i in range(n)]
    if kind == "exhaustive":
        return run_exhaustive(scenario, seed=base, limit=runs)
    if kind == "scripted":
        if not scenario.strategy.script:
            raise ScenarioError("scripted strategy needs strategy.script in the scenario file")
        return [run_script(scenario, scenario.strategy.script, base)]
    raise ScenarioError(f"unknown strategy {kind!r}")


def _stem(scenario_name: str, result, index: int) -> str:
    return f"{scenario_name or 'run'}-seed{result.seed}-run{index}"


def witness_text(result, records: list[dict], scenario: Scenario | None) -> str:
    text = runlog.dumps(result)
    if scenario is not None:
        text += "scenario|" + json.dumps(scenario_to_dict(scenario), sort_keys=True) + "\n"
    return text + runlog.verdict_lines(records)


def run_scenario(scenario: Scenario, out_dir: Path | None, checkers=None, seed=None, runs=None, strategy=None) -> Report:
    report = Report(scenario.name, scenario_digest(scenario))
    names = checkers or scenario.checkers
    for i, result in enumerate(execute(scenario, seed, runs, strategy)):
        verdicts = evaluate(result, names, scenario.checker_options)
        rec = run_record(result, verdicts)
        rec["run"] = i
        bad = failed(verdicts) and result.conclusive
        keep = scenario.keep_logs == "all" or (bad and scenario.keep_logs != "none")
        if out_dir is not None and keep:
            out_dir.mkdir(parents=True, exist_ok=True)
            stem = _stem(scenario.name, result, i)
            suffix = ".witness" if bad else ".log"
            path = out_dir / (stem + suffix)
            path.write_text(witness_text(result, rec["verdicts"], scenario))
            (out_dir / (stem + ".schedule")).write_text(format_schedule(result.schedule) + "\n")
            rec["witness"] = str(path)
            if bad:
                report.witnesses.append(str(path))
        report.records.append(rec)
    return report


def replay_path(path: Path, scenario: Scenario | None = None, checkers=None, seed=None) -> Report:
    text = path.read_text()
    if text.startswith(runlog.HEADER):
        result = runlog.loads(text)
        stored = _stored_scenario(text)
        if scenario is None and stored is not None:
            scenario = stored
        opts = scenario.checker_options if scenario is not None else {}
        names = checkers or (scenario.checkers if scenario is not None else None)
        if not names:
            old = runlog.read_verdicts(text)
            names = [v["checker"] for v in old] or None
        verdicts = evaluate(result, names, opts)
        report = Report(result.scenario_name, scenario_digest(scenario) if scenario else "-")
        rec = run_record(result, verdicts)
        rec["run"] = 0
        report.records.append(rec)
        return report
    if scenario is None:
        raise ScenarioError("replaying a schedule file needs --scenario")
    result = run_script(scenario, text, seed)
    verdicts = evaluate(result, checkers or scenario.checkers, scenario.checker_options)
    report = Report(scenario.name, scenario_digest(scenario))
    rec = run_record(result, verdicts)
    rec["run"] = 0
    report.records.append(rec)
    return report


def _stored_scenario(text: str) -> Scenario | None:
    for line in text.splitlines():
        if line.startswith("scenario|"):
            import yaml

            return parse_scenario(yaml.safe_dump(json.loads(line[len("scenario|"):])), "<witness>")
    return None


# ---------------------------------------------------------------------------
# Explanations
# ---------------------------------------------------------------------------


def _loc(s: str) -> Location:
    return parse_location(s)


def _path_str(path) -> str:
    return " -> ".join(path) if path else "(none)"


def explain_text(text: str) -> str:
    result = runlog.loads(text)
    verdicts = runlog.read_verdicts(text)
    bad = [v for v in verdicts if v["status"] == "fail"]
    head = f"run of {result.scenario_name or result.structure_name} (seed {result.seed}, status {result.status})"
    if not bad:
        return head + "\nno violations\n"
    out = [head]
    writes = result.log.writes
    for v in bad:
        w = v.get("witness", {})
        out.append(f"\n[{v['checker']}] {v['detail']}")
        if v["checker"] == "preservation":
            m = w["write"]
            ev = writes[m - 1]
            label = result.labels.get(m)
            out.append(
                f"  offending write: #{m} (event {ev.seq}, thread {ev.thread}, op {ev.op}"
                + (f", {label}" if label else "")
                + f") {ev.loc}: {format_value(ev.old)} -> {format_value(ev.new)}"
            )
            out.append(f"  key k = {w['k']}")
            out.append(f"  path before, at state {w['reachable_at']}: {_path_str(w.get('path'))}")
            model = model_for(result.structure_name, **result.structure_options)
            after = one_path(model, result.log.state_at(w["lost_at"]).get, w["k"], _loc(w["location"]))
            out.append(f"  path just before the write, at state {w['lost_at']}: "
                       + (_path_str([str(p) for p in after]) if after else "none (lost)"))
        elif v["checker"] == "acyclicity":
            out.append("  cycle edges (introduced by write):")
            for e in w.get("cycle", []):
                out.append(f"    {e['from']} -> {e['to']}  (write {e['write']})")
        elif v["checker"] == "hindsight":
            out.append(f"  key k = {w['k']}, window of global states {w['window'][0]}..{w['window'][1]}")
            out.append(f"  local-view path: {_path_str(w.get('local_path'))}")
        elif v["checker"] == "read_in_order":
            out.append(f"  read of {w['location']} (event {w['event']}) after {w['previous']}, global state {w['state']}")
        elif v["checker"] == "linearizability":
            op = next((o for o in result.ops if o.op == w.get("op")), None)
            if op is not None:
                out.append(f"  operation: {op.method}({op.key}) = {op.result}, thread {op.thread}, events {op.inv}..{op.resp}")
        elif w:
            out.append("  witness: " + json.dumps(w, sort_keys=True))
    out.append(f"\nreplay schedule: {format_schedule(result.schedule)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def emit(report: Report, fmt: str) -> None:
    if fmt == "records":
        click.echo(json.dumps({"type": "scenario", "name": report.scenario, "digest": report.digest}, sort_keys=True))
        for r in report.records:
            click.echo(json.dumps({"type": "run", **r}, sort_keys=True))
        click.echo(json.dumps({"type": "summary", **report.summary(), "witnesses": report.witnesses}, sort_keys=True))
        return
    s = report.summary()
    click.echo(f"scenario {report.scenario} [{report.digest}]")
    for r in report.records:
        fails = [v for v in r["verdicts"] if v["status"] == "fail"]
        if fails:
            click.echo(f"  run {r['run']} (seed {r['seed']}): FAIL")
            for v in fails:
                click.echo(f"    {v['checker']}: {v['detail']}")
            if "witness" in r:
                click.echo(f"    witness: {r['witness']}")
    click.echo(
        f"{s['runs']} runs, {s['conclusive']} conclusive, {s['inconclusive']} inconclusive, "
        f"{s['failing_runs']} failing"
    )
    for name, c in sorted(s["checkers"].items()):
        click.echo(f"  {name}: {c['pass']} pass, {c['fail']} fail, {c['skip']} skip")


def _checkers(value: str | None):
    if not value:
        return None
    return [c.strip() for c in value.split(",") if c.strip()]


def _out_dir(value: str | None) -> Path:
    return Path(value or os.environ.get(OUT_DIR_ENV) or "localview-out")


def _input_error(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_INPUT)


@click.group()
def main() -> None:
    """Explore interleavings of concurrent set algorithms and check local-view conditions."""


@main.command()
@click.option("--scenario", "scenario_path", required=True, help="Scenario YAML file or bundled scenario name.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--runs", type=int, default=None, help="Override the number of random runs (or cap exhaustive runs).")
@click.option("--strategy", type=click.Choice(["random", "exhaustive", "scripted"]), default=None)
@click.option("--checkers", default=None, help="Comma-separated checker names.")
@click.option("--report", "fmt", type=click.Choice(["human", "records"]), default="human")
@click.option("--out-dir", default=None, help=f"Where witnesses go (default ${OUT_DIR_ENV} or ./localview-out).")
def run(scenario_path, seed, runs, strategy, checkers, fmt, out_dir):
    """Execute a scenario and report checker verdicts."""
    try:
        scenario = load_scenario(resolve_scenario_path(scenario_path))
        report = run_scenario(scenario, _out_dir(out_dir), _checkers(checkers), seed, runs, strategy)
    except (ScenarioError, OSError, KeyError) as e:
        _input_error(str(e))
    emit(report, fmt)
    sys.exit(report.exit_code)


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", "scenario_path", default=None, help="Scenario for schedule files (or to override a log's).")
@click.option("--seed", type=int, default=None)
@click.option("--checkers", default=None, help="Comma-separated checker names.")
@click.option("--report", "fmt", type=click.Choice(["human", "records"]), default="human")
def replay(path, scenario_path, seed, checkers, fmt):
    """Re-check a saved run/witness file, or re-run a schedule file."""
    try:
        scenario = load_scenario(resolve_scenario_path(scenario_path)) if scenario_path else None
        report = replay_path(Path(path), scenario, _checkers(checkers), seed)
    except (ScenarioError, OSError, KeyError, ValueError) as e:
        _input_error(str(e))
    emit(report, fmt)
    sys.exit(report.exit_code)


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def explain(path):
    """Describe the violations recorded in a witness file."""
    try:
        text = Path(path).read_text()
        click.echo(explain_text(text), nl=False)
    except (OSError, ValueError) as e:
        _input_error(str(e))


if __name__ == "__main__":
    main()
