"""Single-model and voting baselines for digit-mode classification."""

from __future__ import annotations

import logging
from typing import Callable, Literal, Optional, Sequence

from ..backend import BackendBinding
from ..feedback import judge_correct
from ..records import RunRecord
from ..session import NodeSession, restore, snapshot
from ..task import TaskSample
from ..topology import NodeRef
from ..trainer import StageMetrics, TrainingSchedule
from .dmc import DmcTask, labeled_example, majority_vote

log = logging.getLogger(__name__)

BaselineKind = Literal["no_feedback", "refine", "ensemble"]
BASELINES: tuple[str, ...] = ("no_feedback", "refine", "ensemble")
REFINE_PROMPT = "refine your answer"
ENSEMBLE_SIZE = 3


def _call(session: NodeSession, text: str, kind: str, calls: list) -> str:
    reply = session.ask(text, kind)
    calls.append({"node": session.node.key(), "kind": kind, "input": text, "output": reply})
    return reply


def _train_step(kind: str, sessions: list[NodeSession], sample: TaskSample, task: DmcTask, calls: list) -> int:
    """One training sample; returns the number of refine turns issued."""
    refines = 0
    if kind == "refine":
        s = sessions[0]
        guess = _call(s, sample.question, "forward", calls)
        if not judge_correct(guess, sample.answer, task.matcher, s.node).correct:
            _call(s, REFINE_PROMPT, "refine", calls)
            refines += 1
    for s in sessions:
        _call(s, labeled_example(sample.payload), "example", calls)
    return refines


def run_baseline(
    kind: BaselineKind,
    samples: Sequence[TaskSample],
    test_set: Sequence[TaskSample],
    backend: Callable[[int], BackendBinding],
    schedule: TrainingSchedule,
    task: Optional[DmcTask] = None,
    record: Optional[RunRecord] = None,
) -> list[StageMetrics]:
    """Run a baseline over the fixed stage schedule (no early stopping).

    ``backend(j)`` yields the binding for member ``j`` (1-based); only the
    ensemble uses more than one member.  Ensemble ties go to the
    lowest-index member's answer.
    """
    if kind not in BASELINES:
        raise ValueError(f"unknown baseline {kind!r}")
    if not test_set:
        raise ValueError("test set must be non-empty")
    task = task or DmcTask()
    size = ENSEMBLE_SIZE if kind == "ensemble" else 1
    sessions = [NodeSession(NodeRef(1, j), backend(j), system=kind) for j in range(1, size + 1)]
    for s in sessions:
        s.instruct(task.instruction())
    record = record if record is not None else RunRecord()
    gold = [t.answer for t in test_set]
    question = task.batch_question(test_set)
    history: list[StageMetrics] = []
    pos = 0
    for stage in range(1, schedule.num_stages + 1):
        batch = list(samples[pos: pos + schedule.samples_per_stage])
        if len(batch) < schedule.samples_per_stage:
            break
        pos += len(batch)
        calls: list = []
        refines = sum(_train_step(kind, sessions, sample, task, calls) for sample in batch)
        record.emit("calls", system=kind, stage=stage, refine_turns=refines, nodes=calls)

        marks = snapshot({s.node: s for s in sessions})
        eval_calls: list = []
        preds = [task.parse_batch(_call(s, question, "eval", eval_calls), len(gold)) for s in sessions]
        restore({s.node: s for s in sessions}, marks)
        record.emit("calls", system=kind, stage=stage, refine_turns=0, nodes=eval_calls)

        per_node = {s.node.key(): _acc(p, gold) for s, p in zip(sessions, preds)}
        if kind == "ensemble":
            votes = [majority_vote([_int(p[i]) for p in preds]) for i in range(len(gold))]
            acc = _acc([None if v is None else str(v) for v in votes], gold)
        else:
            acc = per_node[sessions[0].node.key()]
        metrics = StageMetrics(stage, acc, per_node, pos, sum(per_node.values()) / len(per_node))
        record.emit("stage", system=kind, **metrics.to_dict())
        history.append(metrics)
        log.info("%s stage %d: accuracy %.3f", kind, stage, acc)
    return history


def _int(v: Optional[str]) -> Optional[int]:
    return None if v is None else int(v)


def _acc(preds, gold) -> float:
    return sum(p == g for p, g in zip(preds, gold)) / len(gold)
