"""Command-line entry point: ``chatnet run-dmc|run-sentiment|gen-data|replay|report|probe``."""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import click

from . import config as config_mod
from . import report
from .backend import probe as probe_backend
from .config import RunConfig
from .errors import (
    BackendError,
    ChatNetError,
    ConfigError,
    DatasetNotFound,
    DivergenceDetected,
    RefusedIncomplete,
)
from .experiment import config_bindings, replay_record, run_once
from .records import RunRecord
from .session import NodeSession
from .tasks import dmc
from .tasks import sentiment as st
from .topology import NodeRef

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_BACKEND = 4
EXIT_DIVERGENCE = 5
EXIT_INCOMPLETE = 6
EXIT_DATASET = 7
EXIT_RECORD = 8

log = logging.getLogger("chatnet")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: Optional[str], task: str, overrides: tuple[str, ...], seed, repeats, out) -> RunConfig:
    try:
        cfg = config_mod.load(path) if path else RunConfig(task=task, output_dir=f"runs/{task}")
        extra = list(overrides)
        extra.append(f'task="{task}"')
        if seed is not None:
            extra.append(f"seed={seed}")
        if repeats is not None:
            extra.append(f"repeats={repeats}")
        if out is not None:
            extra.append(f"output_dir={json.dumps(str(out))}")
        cfg = config_mod.apply_overrides(cfg, extra)
        cfg.validate_topology()
    except ChatNetError as exc:
        _fail(EXIT_CONFIG, f"{type(exc).__name__}: {exc}")
    return cfg


def _record_paths(run_dir: Path) -> list[Path]:
    return sorted((run_dir / "records").glob("run-*.jsonl"))


def _run(cfg: RunConfig, parallel: bool) -> list[RunRecord]:
    out = Path(cfg.output_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)
    config_mod.save(cfg, out / "config.toml")

    def one(r: int) -> RunRecord:
        return run_once(cfg, r, path=out / "records" / f"run-{r:03d}.jsonl")

    try:
        if parallel and cfg.repeats > 1:
            with ThreadPoolExecutor(max_workers=cfg.repeats) as pool:
                records = list(pool.map(one, range(cfg.repeats)))
        else:
            records = [one(r) for r in range(cfg.repeats)]
    except DatasetNotFound as exc:
        _fail(EXIT_DATASET, f"DatasetNotFound: {exc}")
    except ChatNetError as exc:
        _fail(EXIT_CONFIG, f"{type(exc).__name__}: {exc}")
    return records


def _finish(records: list[RunRecord]) -> None:
    failed = [r for r in records if not r.complete]
    if failed:
        _fail(EXIT_BACKEND, f"{len(failed)} run(s) incomplete: {failed[0].error}")


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logging")
def main(verbose: int) -> None:
    """Layered dialogue-model networks with forward aggregation and language feedback."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


_run_options = [
    click.argument("config_path", required=False, type=click.Path(dir_okay=False)),
    click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="override any config key (dotted path, TOML value)"),
    click.option("--seed", type=int),
    click.option("--repeats", type=int),
    click.option("--out", type=click.Path(file_okay=False), help="output run directory"),
    click.option("--parallel", is_flag=True, help="run repeats concurrently"),
]


def run_options(f):
    for opt in reversed(_run_options):
        f = opt(f)
    return f


@main.command("run-dmc")
@run_options
def run_dmc(config_path, overrides, seed, repeats, out, parallel):
    """Train the network on digit-mode classification and run the baselines."""
    cfg = _load_config(config_path, "dmc", overrides, seed, repeats, out)
    records = _run(cfg, parallel)
    out_dir = Path(cfg.output_dir)
    rows = [row for r in records for row in report.metrics_rows(r)]
    summary = report.summarize(rows)
    (out_dir / "metrics.csv").write_text(report.to_csv(rows, report.METRICS_COLUMNS))
    (out_dir / "summary.csv").write_text(report.to_csv(summary, report.SUMMARY_COLUMNS))
    table = report.table_csv(report.stage_table(summary))
    (out_dir / "table.csv").write_text(table)
    click.echo(table, nl=False)
    _finish(records)


@main.command("run-sentiment")
@run_options
def run_sentiment(config_path, overrides, seed, repeats, out, parallel):
    """Sentiment reversal without and with feedback, judged pairwise."""
    cfg = _load_config(config_path, "sentiment", overrides, seed, repeats, out)
    records = _run(cfg, parallel)
    out_dir = Path(cfg.output_dir)
    tallies = [row for r in records for row in report.tally_rows(r)]
    pairs = [row for r in records for row in report.pair_rows(r)]
    text = report.to_csv(tallies, report.TALLY_COLUMNS)
    (out_dir / "tallies.csv").write_text(text)
    (out_dir / "results.jsonl").write_text("".join(json.dumps(p, ensure_ascii=False) + "\n" for p in pairs))
    click.echo(text, nl=False)
    _finish(records)


@main.group("gen-data")
def gen_data():
    """Generate datasets."""


@gen_data.command("dmc")
@click.option("--count", type=int, default=24, show_default=True)
@click.option("--dims", type=int, default=3, show_default=True)
@click.option("--low", type=int, default=1, show_default=True)
@click.option("--high", type=int, default=99, show_default=True)
@click.option("--max-gap", type=int, default=None, help="keep only vectors whose top two components differ by at most this")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_dmc(count, dims, low, high, max_gap, seed, out):
    """Labeled vectors, one `c1,c2,...,label` line each."""
    try:
        vecs = dmc.generate_dataset(count, dims, (low, high), seed, max_gap=max_gap)
    except (ChatNetError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"{type(exc).__name__}: {exc}")
    dmc.write_dataset(Path(out), vecs)
    click.echo(f"wrote {len(vecs)} vectors to {out}")


_GEN_PROMPT = (
    "Write {count} short, emotionally biased English sentences, half positive and half negative. "
    "Output one per line as: sentence<TAB>positive or sentence<TAB>negative. No numbering."
)


@gen_data.command("sentiment")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="use this config's single-model backend to write new sentences")
@click.option("--count", type=int, default=60, show_default=True)
def gen_sentiment(out, config_path, count):
    """Copy the bundled sentence set, or ask a live backend for a new one."""
    if config_path is None:
        samples = st.load_dataset()[:count]
    else:
        cfg = _load_config(config_path, "sentiment", (), None, None, None)
        binding = config_bindings(cfg)("single", "1,1", cfg.seed)
        session = NodeSession(NodeRef(1, 1), binding, system="single")
        try:
            reply = session.ask(_GEN_PROMPT.format(count=count), "generate")
        except BackendError as exc:
            _fail(EXIT_BACKEND, f"{type(exc).__name__}: {exc}")
        samples = []
        for line in reply.splitlines():
            if "\t" in line:
                sentence, label = line.rsplit("\t", 1)
                if label.strip().lower() in ("positive", "negative") and sentence.strip():
                    samples.append(st.SentimentSample(sentence.strip(), label.strip().lower()))
        if not samples:
            _fail(EXIT_BACKEND, "backend reply contained no usable sentence lines")
    st.write_dataset(out, samples)
    click.echo(f"wrote {len(samples)} sentences to {out}")


@main.command()
@click.argument("run_dir", type=click.Path(file_okay=False))
def replay(run_dir):
    """Re-run every record in RUN_DIR against its recorded replies and verify each prompt."""
    paths = _record_paths(Path(run_dir))
    if not paths:
        _fail(EXIT_RECORD, f"no run records under {run_dir}/records")
    for path in paths:
        try:
            record = RunRecord.read(path)
            n = replay_record(record)
        except RefusedIncomplete as exc:
            _fail(EXIT_INCOMPLETE, f"{path.name}: RefusedIncomplete: {exc}")
        except DivergenceDetected as exc:
            _fail(EXIT_DIVERGENCE, f"{path.name}: DivergenceDetected: {exc}")
        except (ValueError, KeyError, StopIteration, ConfigError) as exc:
            _fail(EXIT_RECORD, f"{path.name}: unreadable record: {exc!r}")
        click.echo(f"{path.name}: {n} calls replayed, 0 divergences")


@main.command("report")
@click.argument("run_dirs", nargs=-1, type=click.Path(file_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="write CSV files here instead of only printing")
def report_cmd(run_dirs, out):
    """Stage-by-stage accuracy tables or win/loss tallies across run directories."""
    if not run_dirs:
        _fail(EXIT_USAGE, "report needs at least one run directory")
    records = []
    for d in run_dirs:
        paths = _record_paths(Path(d))
        if not paths:
            _fail(EXIT_RECORD, f"no run records under {d}/records")
        try:
            records += [RunRecord.read(p) for p in paths]
        except (OSError, ValueError) as exc:
            _fail(EXIT_RECORD, f"unreadable record in {d}: {exc}")
    outputs: dict[str, str] = {}
    dmc_records = [r for r in records if r.header()["task"] == "dmc"]
    sent_records = [r for r in records if r.header()["task"] == "sentiment"]
    if dmc_records:
        rows = [row for r in dmc_records for row in report.metrics_rows(r)]
        summary = report.summarize(rows)
        outputs["summary.csv"] = report.to_csv(summary, report.SUMMARY_COLUMNS)
        outputs["table.csv"] = report.table_csv(report.stage_table(summary))
    if sent_records:
        outputs["tallies.csv"] = report.to_csv(
            [row for r in sent_records for row in report.tally_rows(r)], report.TALLY_COLUMNS
        )
    for name, text in outputs.items():
        click.echo(f"# {name}")
        click.echo(text, nl=False)
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / name).write_text(text)


@main.command()
@click.argument("config_path", required=False, type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--node", default="2,1", show_default=True, help="network node whose backend to probe")
def probe(config_path, overrides, node):
    """One round-trip to a configured backend."""
    cfg = _load_config(config_path, "dmc", overrides, None, None, None)
    try:
        health = probe_backend(config_bindings(cfg)("network", node, cfg.seed))
    except BackendError as exc:
        _fail(EXIT_BACKEND, f"{type(exc).__name__}: {exc}")
    click.echo(f"healthy={health.healthy} latency={health.latency:.3f}s {health.detail}")


if __name__ == "__main__":
    main()
