import pytest

from chatnet import config as cfgmod
from chatnet.config import RunConfig, apply_overrides
from chatnet.errors import ConfigError, InvalidWidths
from chatnet.records import RunRecord, dumps
from chatnet.report import summarize, stage_table
from chatnet.trainer import StageMetrics


def test_toml_round_trip_byte_identical(tmp_path):
    cfg = cfgmod.load("configs/dmc_scripted.toml")
    text = cfgmod.dumps(cfg)
    again = cfgmod.loads(text)
    assert again == cfg
    assert cfgmod.dumps(again) == text
    cfgmod.save(cfg, tmp_path / "c.toml")
    assert (tmp_path / "c.toml").read_text() == text


def test_all_shipped_configs_load():
    for name in ("dmc_scripted", "sentiment_scripted", "live_example"):
        cfgmod.load(f"configs/{name}.toml").validate_topology()


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        cfgmod.loads("bogus = 1")
    with pytest.raises(ConfigError):
        cfgmod.loads("[topology]\nlayers = [3, 1]\ndrop = 0.1")


def test_invalid_topology_surfaces():
    cfg = cfgmod.loads("[topology]\nlayers = [3, 2]")
    with pytest.raises(InvalidWidths):
        cfg.validate_topology()


def test_overrides():
    cfg = apply_overrides(RunConfig(), [
        "topology.layers=[2,2,1]", "seed=9", 'backends.nodes."1,2".policy=noisy',
        'backends.nodes."1,2".params={p=0.2}', "output_dir=runs/x",
    ])
    assert cfg.topology.layers == [2, 2, 1]
    assert cfg.seed == 9
    assert cfg.output_dir == "runs/x"
    assert cfg.backends.spec_for("1,2").params == {"p": 0.2}
    assert cfg.backends.spec_for("1,1").policy == "argmax"
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), ["novalue"])
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), ["backends.nodes.bad.policy=argmax"])


def test_bad_scripted_params():
    cfg = apply_overrides(RunConfig(), ["backends.default.policy=noisy", "backends.default.params={p=3}"])
    with pytest.raises(ConfigError):
        cfg.backends.spec_for("1,1").binding(0)


def test_record_file_streaming(tmp_path):
    rec = RunRecord().open(tmp_path / "r.jsonl")
    rec.emit("header", task="dmc")
    assert (tmp_path / "r.jsonl").read_text() == '{"event":"header","seq":0,"task":"dmc"}\n'
    rec.close(complete=True)
    back = RunRecord.read(tmp_path / "r.jsonl")
    assert back.complete and back.events == rec.events
    assert back.to_text() == (tmp_path / "r.jsonl").read_text()


def test_dumps_canonical():
    assert dumps({"b": 1, "a": "é"}) == '{"a":"é","b":1}'


def test_summary_spread():
    rows = [{"repeat": r, "system": "network", "stage": 1, "node": "final", "accuracy": a}
            for r, a in enumerate([0.4, 0.6])]
    (s,) = summarize(rows)
    assert s["mean"] == pytest.approx(0.5)
    assert s["std"] == pytest.approx(0.1)
    assert s["spread_pct"] == pytest.approx(20.0)
    table = stage_table([s])
    assert table[0][0] == "system"


def test_stage_metrics_round_trip():
    m = StageMetrics(2, 0.5, {"2,1": 0.5}, 6, 0.4)
    assert StageMetrics.from_dict(m.to_dict()) == m
