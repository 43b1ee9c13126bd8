import json

import pytest
from click.testing import CliRunner

from chatnet.cli import main
from chatnet.records import RunRecord

QUICK = ["--set", "schedule.num_stages=2", "--set", "dmc.test_count=6"]


def run(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


@pytest.fixture
def dmc_run(tmp_path):
    out = tmp_path / "dmc"
    res = run("run-dmc", "--out", str(out), "--repeats", "2", *QUICK)
    assert res.exit_code == 0, res.output
    return out


def test_run_dmc_outputs(dmc_run):
    assert (dmc_run / "config.toml").is_file()
    assert sorted(p.name for p in (dmc_run / "records").iterdir()) == ["run-000.jsonl", "run-001.jsonl"]
    header = (dmc_run / "metrics.csv").read_text().splitlines()[0]
    assert header == "repeat,system,stage,node,accuracy"
    table = (dmc_run / "table.csv").read_text().splitlines()
    assert table[0] == "system,1,2"
    assert {row.split(",")[0] for row in table[1:]} == {"no_feedback", "refine", "ensemble", "network_members", "network"}
    summary = (dmc_run / "summary.csv").read_text().splitlines()
    assert summary[0] == "system,stage,mean,std,spread_pct,n"


def test_replay_ok_and_mutation(dmc_run):
    res = run("replay", str(dmc_run))
    assert res.exit_code == 0
    assert "0 divergences" in res.output
    path = dmc_run / "records" / "run-000.jsonl"
    lines = path.read_text().splitlines()
    for i, line in enumerate(lines):
        ev = json.loads(line)
        if ev["event"] == "forward":
            ev["nodes"][-1]["input"] = ev["nodes"][-1]["input"].replace("(", "[", 1)
            lines[i] = json.dumps(ev, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            break
    path.write_text("\n".join(lines) + "\n")
    res = CliRunner().invoke(main, ["replay", str(dmc_run)])
    assert res.exit_code == 5


def test_replay_refuses_incomplete(dmc_run):
    path = dmc_run / "records" / "run-000.jsonl"
    lines = path.read_text().splitlines()[:-1]
    path.write_text("\n".join(lines) + "\n")
    assert CliRunner().invoke(main, ["replay", str(dmc_run)]).exit_code == 6


def test_replay_missing_or_garbage(tmp_path):
    assert CliRunner().invoke(main, ["replay", str(tmp_path)]).exit_code == 8
    (tmp_path / "records").mkdir()
    (tmp_path / "records" / "run-000.jsonl").write_text('{"event":"end","complete":true}\n')
    assert CliRunner().invoke(main, ["replay", str(tmp_path)]).exit_code == 8


def test_report(dmc_run, tmp_path):
    res = run("report", str(dmc_run), "--out", str(tmp_path / "rep"))
    assert res.exit_code == 0
    assert (tmp_path / "rep" / "table.csv").read_text() == (dmc_run / "table.csv").read_text()
    assert CliRunner().invoke(main, ["report"]).exit_code == 2


def test_invalid_widths_exit_code(tmp_path):
    res = CliRunner().invoke(main, ["run-dmc", "--out", str(tmp_path), "--set", "topology.layers=[3,2]"])
    assert res.exit_code == 3
    assert "InvalidWidths" in res.output


def test_bad_config_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("[topology]\nlayers = 'x'\n")
    assert CliRunner().invoke(main, ["run-dmc", str(p)]).exit_code == 3
    assert CliRunner().invoke(main, ["run-dmc", str(tmp_path / "none.toml")]).exit_code == 3


def test_unknown_option_is_usage_error():
    assert CliRunner().invoke(main, ["run-dmc", "--frobnicate"]).exit_code == 2


def test_run_sentiment(tmp_path):
    out = tmp_path / "s"
    res = run("run-sentiment", "--out", str(out), "--set", "sentiment.limit=6")
    assert res.exit_code == 0, res.output
    rows = (out / "tallies.csv").read_text().splitlines()
    assert rows[0] == "repeat,phase,system,win,loss,tie,total"
    assert all(r.endswith(",6") for r in rows[1:])
    assert len((out / "results.jsonl").read_text().splitlines()) == 12
    assert run("replay", str(out)).exit_code == 0


def test_missing_sentiment_dataset(tmp_path):
    res = CliRunner().invoke(main, ["run-sentiment", "--out", str(tmp_path), "--set", f"sentiment.dataset={tmp_path}/x.tsv"])
    assert res.exit_code == 7


def test_gen_data(tmp_path):
    assert run("gen-data", "dmc", "--count", "9", "--seed", "1", "--out", str(tmp_path / "v.csv")).exit_code == 0
    assert len((tmp_path / "v.csv").read_text().splitlines()) == 9
    assert CliRunner().invoke(main, ["gen-data", "dmc", "--low", "5", "--high", "5", "--out", str(tmp_path / "x")]).exit_code == 3
    assert run("gen-data", "sentiment", "--count", "4", "--out", str(tmp_path / "s.tsv")).exit_code == 0
    assert len((tmp_path / "s.tsv").read_text().splitlines()) == 4


def test_gen_sentiment_from_backend(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[sentiment.single]\nkind = "scripted"\npolicy = "replay"\n'
                   'params = { replies = ["Great day.\\tpositive\\nAwful food.\\tnegative\\nnoise"] }\n')
    res = run("gen-data", "sentiment", "--config", str(cfg), "--out", str(tmp_path / "s.tsv"))
    assert res.exit_code == 0
    assert (tmp_path / "s.tsv").read_text() == "Great day.\tpositive\nAwful food.\tnegative\n"


def test_probe():
    res = run("probe")
    assert res.exit_code == 0 and "healthy=True" in res.output
    res = CliRunner().invoke(main, ["probe", "--set", 'backends.default={kind="http",endpoint="http://127.0.0.1:9/x",model="m",max_retries=0,timeout=2}'])
    assert res.exit_code == 4


def test_incomplete_run_exit_code(tmp_path):
    res = CliRunner().invoke(main, ["run-dmc", "--out", str(tmp_path), *QUICK,
                                    "--set", 'backends.nodes."2,1"={kind="scripted",policy="replay"}'])
    assert res.exit_code == 4
    rec = RunRecord.read(tmp_path / "records" / "run-000.jsonl")
    assert rec.closed and not rec.complete
