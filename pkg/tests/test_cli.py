from __future__ import annotations

import hashlib
import json
from pathlib import Path

from click.testing import CliRunner

from localview.cli import explain_text, main

GOLDEN = Path(__file__).parent / "golden"


def invoke(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env, catch_exceptions=False)


def records(output):
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]


def test_lazy_smoke_exits_zero(tmp_path):
    res = invoke("run", "--scenario", "lazy_smoke", "--out-dir", str(tmp_path))
    assert res.exit_code == 0, res.output
    assert "0 failing" in res.output
    assert not list(tmp_path.iterdir())  # nothing kept for passing runs


def test_inplace_counterexample_exits_nonzero_with_witness(tmp_path):
    res = invoke("run", "--scenario", "inplace_rotation_counterexample", "--runs", "5", "--out-dir", str(tmp_path))
    assert res.exit_code == 1
    witnesses = sorted(tmp_path.glob("*.witness"))
    assert len(witnesses) == 5
    assert len(list(tmp_path.glob("*.schedule"))) == 5
    assert "preservation" in witnesses[0].read_text()


def test_records_report_and_stability(tmp_path):
    res = invoke("run", "--scenario", "rotation_race", "--report", "records", "--out-dir", str(tmp_path))
    assert res.exit_code == 0
    recs = records(res.output)
    assert [r["type"] for r in recs] == ["scenario", "run", "summary"]
    assert recs[-1]["failing_runs"] == 0 and recs[-1]["runs"] == 1
    for r in recs:
        assert json.loads(json.dumps(r, sort_keys=True)) == r
    assert {v["checker"] for v in recs[1]["verdicts"]} >= {"hindsight", "preservation", "brute_force"}


def test_replay_reproduces_witness_and_schedule(tmp_path):
    invoke("run", "--scenario", "inplace_rotation_counterexample", "--runs", "1", "--out-dir", str(tmp_path))
    (w,) = tmp_path.glob("*.witness")
    (s,) = tmp_path.glob("*.schedule")
    original = [v for v in json.loads("[" + ",".join(
        line[len("verdict|"):] for line in w.read_text().splitlines() if line.startswith("verdict|")) + "]")]
    res = invoke("replay", str(w), "--report", "records")
    assert res.exit_code == 1
    assert records(res.output)[1]["verdicts"] == original
    res = invoke("replay", str(s), "--scenario", "inplace_rotation_counterexample", "--report", "records")
    assert res.exit_code == 1
    assert records(res.output)[1]["verdicts"] == original


def test_replay_with_other_checkers_only_runs_those(tmp_path):
    invoke("run", "--scenario", "inplace_rotation_counterexample", "--runs", "1", "--out-dir", str(tmp_path))
    (w,) = tmp_path.glob("*.witness")
    res = invoke("replay", str(w), "--checkers", "linearizability", "--report", "records")
    assert [v["checker"] for v in records(res.output)[1]["verdicts"]] == ["linearizability"]
    assert res.exit_code == 0


def test_schedule_replay_needs_a_scenario(tmp_path):
    p = tmp_path / "x.schedule"
    p.write_text("0 1 0\n")
    res = invoke("replay", str(p))
    assert res.exit_code == 2 and "--scenario" in res.output


def test_invalid_scenario_exits_two(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nstructure: lf_list\nkeys: []\n")
    res = invoke("run", "--scenario", str(bad))
    assert res.exit_code == 2 and "keys" in res.output
    assert invoke("run", "--scenario", "missing_file.yaml").exit_code == 2


def test_env_var_sets_default_out_dir(tmp_path):
    out = tmp_path / "env-out"
    res = invoke("run", "--scenario", "inplace_rotation_counterexample", "--runs", "1",
                 env={"LOCALVIEW_OUT_DIR": str(out)})
    assert res.exit_code == 1
    assert list(out.glob("*.witness"))


def test_seed_override_changes_log_not_verdicts(tmp_path):
    digests, statuses = set(), set()
    for seed in ("1", "2", "3"):
        d = tmp_path / seed
        res = invoke("run", "--scenario", "lf_sweep", "--runs", "1", "--seed", seed, "--report", "records",
                     "--out-dir", str(d))
        (run,) = [r for r in records(res.output) if r["type"] == "run"]
        digests.add(hashlib.sha256(run["schedule"].encode()).hexdigest())
        statuses.add(tuple((v["checker"], v["status"]) for v in run["verdicts"]))
        assert res.exit_code == 0
    assert len(digests) == 3 and len(statuses) == 1


def test_keep_logs_all_writes_passing_runs(tmp_path):
    sc = tmp_path / "keep.yaml"
    sc.write_text("name: keep\nstructure: lf_list\nkeys: [1, 2]\nkeep_logs: all\nstrategy: {runs: 2}\n")
    res = invoke("run", "--scenario", str(sc), "--out-dir", str(tmp_path / "o"))
    assert res.exit_code == 0
    assert len(list((tmp_path / "o").glob("*.log"))) == 2


def test_explain_preservation_witness():
    res = invoke("explain", str(GOLDEN / "inplace_rotation.witness"))
    assert res.exit_code == 0
    assert res.output == (GOLDEN / "inplace_rotation.explain").read_text()
    assert "offending write: #6" in res.output and "key k = 2" in res.output and "none (lost)" in res.output


def test_explain_cycle_and_clean_runs(tmp_path):
    res = invoke("run", "--scenario", "wandering", "--runs", "1", "--out-dir", str(tmp_path))
    assert res.exit_code == 1
    (w,) = tmp_path.glob("*.witness")
    text = invoke("explain", str(w)).output
    assert "cycle edges" in text and "(write 0)" in text
    clean = (GOLDEN / "rotation_race.run").read_text()
    assert "no violations" in explain_text(clean)


def test_scripted_strategy_without_script_is_an_input_error(tmp_path):
    res = invoke("run", "--scenario", "lazy_smoke", "--strategy", "scripted")
    assert res.exit_code == 2
