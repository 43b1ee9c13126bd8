"""Per-sample train/feedback loop with staged evaluation and early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterable, Literal, Optional, Sequence

from .conversation import FeedbackTemplates
from .errors import BackendError
from .feedback import FeedbackResult, backward_pass
from .forward import ForwardResult, MaskMode, forward_pass
from .records import RunRecord
from .seeding import RngStreams
from .session import Sessions, restore, snapshot
from .task import Task, TaskSample
from .topology import NetworkTopology, NodeRef

log = logging.getLogger(__name__)


@dataclass
class TrainingSchedule:
    samples_per_stage: int = 3
    num_stages: int = 8
    max_iterations: Optional[int] = None  # training samples; defaults to the full schedule
    patience: Optional[int] = None  # stages without strict improvement; None disables

    def __post_init__(self):
        for name in ("samples_per_stage", "num_stages"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations is None:
            self.max_iterations = self.samples_per_stage * self.num_stages
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be positive")


@dataclass
class StageMetrics:
    stage: int
    accuracy: float
    per_node_accuracy: dict[str, float]
    timestamp: int  # training samples consumed when evaluated
    member_mean: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "accuracy": self.accuracy,
            "per_node_accuracy": dict(self.per_node_accuracy),
            "timestamp": self.timestamp,
            "member_mean": self.member_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StageMetrics":
        return cls(d["stage"], d["accuracy"], dict(d["per_node_accuracy"]), d["timestamp"], d.get("member_mean"))


@dataclass
class Network:
    """A topology bound to live sessions plus the knobs of its passes."""

    topology: NetworkTopology
    sessions: Sessions
    mask_mode: MaskMode = "bernoulli"
    allow_empty: bool = False
    fanin: Literal["mask", "all"] = "mask"
    scope: Literal["leaders", "ancestors"] = "leaders"
    workers: int = 1
    system: str = "network"

    @property
    def members(self) -> list[NodeRef]:
        return [n for n in self.topology if n != self.topology.top]


def _score(preds: Sequence[Optional[str]], gold: Sequence[str]) -> float:
    return sum(p == g for p, g in zip(preds, gold)) / len(gold)


def run_stage(
    net: Network,
    task: Task,
    train_samples: Sequence[TaskSample],
    rng: RngStreams,
    record: Optional[RunRecord] = None,
    stage: int = 0,
) -> list[tuple[ForwardResult, FeedbackResult]]:
    if not train_samples:
        raise ValueError("a stage needs at least one training sample")
    out = []
    for k, sample in enumerate(train_samples):
        fwd = forward_pass(
            net.topology, net.sessions, sample.question, rng, eval_mode=False,
            template=task.forward_template, mask_mode=net.mask_mode,
            allow_empty=net.allow_empty, workers=net.workers,
        )
        fb = backward_pass(
            net.topology, net.sessions, sample.answer, fwd, task.feedback_templates, task.matcher,
            answer_text=sample.answer_text, fanin=net.fanin, scope=net.scope, workers=net.workers,
        )
        if record is not None:
            record.emit("forward", system=net.system, stage=stage, sample=k, **fwd.to_dict())
            record.emit("feedback", system=net.system, stage=stage, sample=k, **fb.to_dict())
        out.append((fwd, fb))
    return out


def evaluate_traced(
    net: Network, task: Task, test_samples: Sequence[TaskSample], stage: int = 0, timestamp: int = 0
) -> tuple[StageMetrics, ForwardResult]:
    if not test_samples:
        raise ValueError("test set must be non-empty")
    marks = snapshot(net.sessions)
    try:
        fwd = forward_pass(
            net.topology, net.sessions, task.batch_question(test_samples), None, eval_mode=True,
            template=task.batch_template, workers=net.workers, kind="eval",
        )
    finally:
        # evaluation leaves no trace in the in-context training memory
        restore(net.sessions, marks)
    gold = [s.answer for s in test_samples]
    per_node = {
        n.key(): _score(task.parse_batch(io.output, len(gold)), gold) for n, io in fwd.per_node.items()
    }
    members = [per_node[n.key()] for n in net.members]
    metrics = StageMetrics(
        stage, per_node[net.topology.top.key()], per_node, timestamp,
        sum(members) / len(members) if members else None,
    )
    return metrics, fwd


def evaluate(net: Network, task: Task, test_samples: Sequence[TaskSample]) -> StageMetrics:
    return evaluate_traced(net, task, test_samples)[0]


def early_stop_check(history: Sequence[StageMetrics], schedule: TrainingSchedule) -> bool:
    if not history:
        raise ValueError("history must be non-empty")
    if len(history) >= schedule.num_stages:
        return True
    if history[-1].timestamp >= schedule.max_iterations:
        return True
    if schedule.patience is not None:
        accs = [m.accuracy for m in history]
        best_stage = accs.index(max(accs))  # first time the running best was reached
        if len(accs) - 1 - best_stage >= schedule.patience:
            return True
    return False


def train(
    net: Network,
    task: Task,
    train_stream: Iterable[TaskSample],
    test_set: Sequence[TaskSample],
    schedule: TrainingSchedule,
    rng: RngStreams,
    record: Optional[RunRecord] = None,
) -> RunRecord:
    """Alternate training stages and evaluations until a stopping rule fires.

    Stage metrics are appended to ``record`` (a fresh one when omitted).
    The record is left open for further events unless a backend failure
    aborts training, in which case it is closed and flagged incomplete.
    """
    record = record if record is not None else RunRecord()
    stream = iter(train_stream)
    if not test_set:
        raise ValueError("test set must be non-empty")
    history: list[StageMetrics] = []
    consumed = 0
    stage = 0
    try:
        while True:
            batch = list(islice(stream, schedule.samples_per_stage))
            if len(batch) < schedule.samples_per_stage:
                if stage == 0:
                    raise ValueError("training stream too short for a single stage")
                log.info("training stream exhausted after %d stages", stage)
                break
            stage += 1
            run_stage(net, task, batch, rng, record, stage)
            consumed += len(batch)
            metrics, fwd = evaluate_traced(net, task, test_set, stage, consumed)
            record.emit("eval", system=net.system, stage=stage, **fwd.to_dict())
            record.emit("stage", system=net.system, **metrics.to_dict())
            history.append(metrics)
            log.info("%s stage %d: accuracy %.3f", net.system, stage, metrics.accuracy)
            if early_stop_check(history, schedule):
                break
    except BackendError as exc:
        log.error("%s training aborted at stage %d: %s", net.system, stage, exc)
        record.close(complete=False, error=f"{type(exc).__name__}: {exc}")
    return record


def stage_history(record: RunRecord, system: str = "network") -> list[StageMetrics]:
    return [StageMetrics.from_dict(ev) for ev in record.of("stage", system)]


__all__ = [
    "BackendError",
    "FeedbackTemplates",
    "Network",
    "StageMetrics",
    "TrainingSchedule",
    "early_stop_check",
    "evaluate",
    "evaluate_traced",
    "run_stage",
    "stage_history",
    "train",
]
