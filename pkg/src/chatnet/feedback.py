"""Top-down language feedback: leaders are judged and reflect first, then their employees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

from .conversation import DEFAULT_FEEDBACK, FeedbackTemplates, assemble_feedback_input
from .errors import BackendError
from .forward import ForwardResult, run_layer
from .session import Sessions, restore, snapshot
from .topology import NetworkTopology, NodeRef

Matcher = Callable[[str], Optional[str]]


@dataclass(frozen=True)
class CorrectnessJudgment:
    node: NodeRef
    extracted_answer: Optional[str]
    correct: bool
    reason: Literal["matched", "mismatched", "unparseable"]

    def to_dict(self) -> dict:
        return {"extracted": self.extracted_answer, "correct": self.correct, "reason": self.reason}


def judge_correct(output: str, answer: str, matcher: Matcher, node: NodeRef = NodeRef(1, 1)) -> CorrectnessJudgment:
    extracted = matcher(output)
    if extracted is None:
        return CorrectnessJudgment(node, None, False, "unparseable")
    if extracted == answer:
        return CorrectnessJudgment(node, extracted, True, "matched")
    return CorrectnessJudgment(node, extracted, False, "mismatched")


@dataclass(frozen=True)
class NodeFeedback:
    judgment: CorrectnessJudgment
    feedback_input: str
    reflection_output: str
    input_seq: int
    output_seq: int


@dataclass
class FeedbackResult:
    per_node: dict[NodeRef, NodeFeedback]

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"node": n.key(), **fb.judgment.to_dict(), "input": fb.feedback_input,
                 "output": fb.reflection_output, "input_seq": fb.input_seq, "output_seq": fb.output_seq}
                for n, fb in self.per_node.items()
            ]
        }


def _sources(
    topology: NetworkTopology, fwd: ForwardResult, node: NodeRef, fanin: str, scope: str
) -> list[NodeRef]:
    """Nodes whose reflections a wrong ``node`` hears, nearest layer first."""
    out = []
    for layer in range(node.layer + 1, topology.depth + 1):
        for leader in topology.layer(layer):
            if layer == node.layer + 1 and fanin == "mask":
                mask = fwd.mask_for(leader)
                if mask is not None and not mask.keeps(node):
                    continue
            out.append(leader)
        if scope == "leaders":
            break
    return out


def backward_pass(
    topology: NetworkTopology,
    sessions: Sessions,
    answer: str,
    fwd: ForwardResult,
    templates: FeedbackTemplates = DEFAULT_FEEDBACK,
    matcher: Optional[Matcher] = None,
    *,
    answer_text: Optional[str] = None,
    fanin: Literal["mask", "all"] = "mask",
    scope: Literal["leaders", "ancestors"] = "leaders",
    workers: int = 1,
) -> FeedbackResult:
    """Judge and give feedback to every node, layer n first.

    ``answer`` is the gold key compared against ``matcher(output)``;
    ``answer_text`` is what the prompt shows (defaults to ``answer``).
    Wrong nodes receive the reflections their leaders produced earlier in
    this same pass; with ``fanin="mask"`` only leaders they informed during
    the forward pass.
    """
    missing = [n for n in topology if n not in fwd.per_node]
    if missing:
        raise ValueError(f"forward result lacks nodes {missing}")
    matcher = matcher or (lambda text: text)
    shown = answer if answer_text is None else answer_text
    marks = snapshot(sessions)
    per_node: dict[NodeRef, NodeFeedback] = {}
    seq = 0
    try:
        for layer in range(topology.depth, 0, -1):
            prompts, judgments, in_seq = {}, {}, {}
            for node in topology.layer(layer):
                j = judge_correct(fwd.per_node[node].output, answer, matcher, node)
                refs = [] if j.correct else [
                    per_node[s].reflection_output for s in _sources(topology, fwd, node, fanin, scope)
                ]
                prompts[node] = assemble_feedback_input(shown, j.correct, refs, templates)
                judgments[node] = j
                in_seq[node] = seq
                seq += 1
            replies = run_layer(sessions, prompts, "feedback", workers)
            for node in topology.layer(layer):
                per_node[node] = NodeFeedback(judgments[node], prompts[node], replies[node], in_seq[node], seq)
                seq += 1
    except BackendError:
        restore(sessions, marks)
        raise
    return FeedbackResult(per_node)
