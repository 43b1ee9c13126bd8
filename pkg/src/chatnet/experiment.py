"""End-to-end experiment runs, persisted as run records, and their replay."""

from __future__ import annotations

import logging
from collections import defaultdict
from pathlib import Path
from typing import Callable, Optional

from .backend import BackendBinding, ReplayList
from .config import RunConfig, from_dict
from .errors import BackendError, DivergenceDetected, RefusedIncomplete
from .records import RunRecord
from .seeding import RngStreams
from .session import NodeSession, make_sessions
from .tasks import sentiment as st
from .tasks.baselines import ENSEMBLE_SIZE, run_baseline
from .tasks.dmc import DigitalVector, DmcTask, generate_dataset, read_dataset
from .topology import NodeRef
from .trainer import Network, TrainingSchedule, train

log = logging.getLogger(__name__)

BindingFor = Callable[[str, str, int], BackendBinding]


def config_bindings(cfg: RunConfig) -> BindingFor:
    """Resolve (system, node key, seed) to a fresh backend binding from the config."""

    def binding_for(system: str, node_key: str, seed: int) -> BackendBinding:
        if system == "network":
            spec = cfg.backends.spec_for(node_key, cfg.task)
        elif system == "single":
            spec = cfg.sentiment.single
        elif system == "judge":
            spec = cfg.sentiment.judge
        else:
            member = node_key.split(",")[1]
            spec = cfg.dmc.baseline_members.get(member, cfg.dmc.baseline_backend)
        return spec.binding(seed)

    return binding_for


def schedule_of(cfg: RunConfig) -> TrainingSchedule:
    s = cfg.schedule
    return TrainingSchedule(s.samples_per_stage, s.num_stages, s.max_iterations, s.patience)


def dmc_task(cfg: RunConfig) -> DmcTask:
    t = cfg.templates
    return DmcTask(cfg.dmc.dims, t.forward_template(), t.batch_template(), t.feedback_templates(), t.instruction)


def network_of(cfg: RunConfig, sessions) -> Network:
    tc = cfg.topology
    return Network(cfg.validate_topology(), sessions, tc.mask_mode, tc.allow_empty, tc.fanin, tc.scope, cfg.workers)


def dmc_dataset(cfg: RunConfig, streams: RngStreams) -> tuple[list[DigitalVector], list[DigitalVector]]:
    d = cfg.dmc
    n_train = schedule_of(cfg).max_iterations
    if d.train_file:
        train_set = read_dataset(Path(d.train_file))
    else:
        train_set = generate_dataset(n_train, d.dims, (d.low, d.high), streams.seed("data", "train"))
    if d.test_file:
        test_set = read_dataset(Path(d.test_file))
    else:
        test_set = generate_dataset(
            d.test_count, d.dims, (d.low, d.high), streams.seed("data", "test"), max_gap=d.test_max_gap
        )
    return train_set, test_set


def _header(record: RunRecord, cfg: RunConfig, repeat: int) -> None:
    record.emit("header", task=cfg.task, repeat=repeat, master_seed=cfg.seed + repeat,
                config=cfg.model_dump(mode="json", exclude_none=True))


def run_dmc_once(
    cfg: RunConfig,
    repeat: int = 0,
    binding_for: Optional[BindingFor] = None,
    dataset: Optional[tuple[list[DigitalVector], list[DigitalVector]]] = None,
    path: Optional[Path] = None,
) -> RunRecord:
    """Network training plus the configured baselines for one seed."""
    binding_for = binding_for or config_bindings(cfg)
    streams = RngStreams(cfg.seed + repeat)
    topology = cfg.validate_topology()
    schedule = schedule_of(cfg)
    train_vecs, test_vecs = dataset or dmc_dataset(cfg, streams)
    record = RunRecord()
    if path is not None:
        record.open(path)
    _header(record, cfg, repeat)
    record.emit("dataset", train=[v.to_line() for v in train_vecs], test=[v.to_line() for v in test_vecs])
    task = dmc_task(cfg)
    train_samples = [task.sample(v) for v in train_vecs]
    test_samples = [task.sample(v) for v in test_vecs]

    bindings = {n: binding_for("network", n.key(), streams.seed("backend", "network", n.key())) for n in topology}
    net = network_of(cfg, make_sessions(topology, bindings, "network", task.instruction()))
    train(net, task, train_samples, test_samples, schedule, streams, record)
    if record.closed:
        return record
    for kind in cfg.dmc.baselines:
        def member(j: int, kind=kind) -> BackendBinding:
            key = f"1,{j}"
            return binding_for(kind, key, streams.seed("backend", kind, key))
        try:
            run_baseline(kind, train_samples, test_samples, member, schedule, task, record)
        except BackendError as exc:
            log.error("baseline %s aborted: %s", kind, exc)
            record.close(complete=False, error=f"{type(exc).__name__}: {exc}")
            return record
    record.close(complete=True)
    return record


def run_sentiment_once(
    cfg: RunConfig,
    repeat: int = 0,
    binding_for: Optional[BindingFor] = None,
    dataset: Optional[list[st.SentimentSample]] = None,
    path: Optional[Path] = None,
) -> RunRecord:
    binding_for = binding_for or config_bindings(cfg)
    streams = RngStreams(cfg.seed + repeat)
    topology = cfg.validate_topology()
    if dataset is None:
        dataset = st.load_dataset(cfg.sentiment.dataset)
        if cfg.sentiment.limit is not None:
            dataset = dataset[: cfg.sentiment.limit]
    record = RunRecord()
    if path is not None:
        record.open(path)
    _header(record, cfg, repeat)
    record.emit("dataset", samples=[[s.sentence, s.sentiment] for s in dataset])

    single = NodeSession(NodeRef(1, 1), binding_for("single", "1,1", streams.seed("backend", "single", "1,1")), system="single")
    single.instruct(st.INSTRUCTION)
    judge = NodeSession(NodeRef(1, 1), binding_for("judge", "1,1", streams.seed("backend", "judge", "1,1")), system="judge")
    judge.instruct(st.JUDGE_INSTRUCTION)
    bindings = {n: binding_for("network", n.key(), streams.seed("backend", "network", n.key())) for n in topology}
    net = network_of(cfg, make_sessions(topology, bindings, "network", st.INSTRUCTION))
    try:
        verdicts = st.run_protocol(
            dataset, st.SingleSystem(single), st.NetworkSystem(net), judge, streams.get("judge"), record
        )
    except BackendError as exc:
        record.close(complete=False, error=f"{type(exc).__name__}: {exc}")
        return record
    for row in st.table_rows(verdicts):
        record.emit("tally", **row)
    record.close(complete=True)
    return record


def run_once(cfg: RunConfig, repeat: int = 0, **kw) -> RunRecord:
    return (run_dmc_once if cfg.task == "dmc" else run_sentiment_once)(cfg, repeat, **kw)


# --- replay -----------------------------------------------------------------

def recorded_calls(record: RunRecord) -> dict[str, tuple[list[str], list[str]]]:
    """Per ``system:node`` key, the prompts and replies in call order."""
    calls: dict[str, tuple[list[str], list[str]]] = defaultdict(lambda: ([], []))
    for ev in record.events:
        if "nodes" not in ev or "system" not in ev:
            continue
        for entry in ev["nodes"]:
            prompts, replies = calls[f"{ev['system']}:{entry['node']}"]
            prompts.append(entry["input"])
            replies.append(entry["output"])
    return dict(calls)


def replay_record(record: RunRecord) -> int:
    """Re-run a record against its own replies; returns the number of verified calls.

    Raises DivergenceDetected at the first prompt that differs from the
    recorded one, and RefusedIncomplete for unfinished records.
    """
    if not record.complete:
        raise RefusedIncomplete("run record is incomplete; refusing to replay")
    head = record.header()
    cfg = from_dict(head["config"])
    calls = recorded_calls(record)
    policies: dict[str, ReplayList] = {}

    def binding_for(system: str, node_key: str, seed: int) -> BackendBinding:
        label = f"{system}:{node_key}"
        prompts, replies = calls.get(label, ([], []))
        policy = policies[label] = ReplayList(list(replies), list(prompts), label=label)
        return BackendBinding.scripted_policy(policy, seed)

    data = next(record.of("dataset"))
    if cfg.task == "dmc":
        dataset = ([DigitalVector.from_line(s) for s in data["train"]], [DigitalVector.from_line(s) for s in data["test"]])
        fresh = run_dmc_once(cfg, head["repeat"], binding_for, dataset)
    else:
        samples = [st.SentimentSample(s, m) for s, m in data["samples"]]
        fresh = run_sentiment_once(cfg, head["repeat"], binding_for, samples)
    if not fresh.complete:
        raise DivergenceDetected("run", 0, 0, "complete replay", fresh.error or "incomplete replay")
    for label, policy in policies.items():
        if policy.cursor != len(policy.replies):
            raise DivergenceDetected(label, policy.cursor, 0, "further recorded calls", "replay ended early")
    unused = set(calls) - set(policies)
    if unused:
        raise DivergenceDetected(sorted(unused)[0], 0, 0, "recorded calls", "node never called on replay")
    old_lines, new_lines = record.to_text().splitlines(), fresh.to_text().splitlines()
    for i, (a, b) in enumerate(zip(old_lines, new_lines)):
        if a != b:
            offset = next((k for k, (x, y) in enumerate(zip(a, b)) if x != y), min(len(a), len(b)))
            raise DivergenceDetected("record", i, offset, a, b)
    if len(old_lines) != len(new_lines):
        raise DivergenceDetected("record", min(len(old_lines), len(new_lines)), 0, "same length", "different length")
    return sum(p.cursor for p in policies.values())
