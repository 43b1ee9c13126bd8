"""Forward aggregation: employees answer, leaders read the question plus surviving employee outputs."""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

from .conversation import FORWARD_DEFAULT, PromptTemplate, assemble_forward_input
from .errors import BackendError
from .seeding import RngStreams
from .session import Sessions, restore, snapshot
from .topology import NetworkTopology, NodeRef, employees_of

MaskMode = Literal["bernoulli", "fixed_count"]


@dataclass(frozen=True)
class DropoutMask:
    receiver: NodeRef
    selections: tuple[tuple[NodeRef, bool], ...]

    @property
    def selected(self) -> list[NodeRef]:
        return [s for s, keep in self.selections if keep]

    def keeps(self, sender: NodeRef) -> bool:
        return any(s == sender and keep for s, keep in self.selections)

    def to_dict(self) -> dict:
        return {
            "receiver": self.receiver.key(),
            "selected": [s.key() for s, keep in self.selections if keep],
            "dropped": [s.key() for s, keep in self.selections if not keep],
        }


def sample_dropout_mask(
    rng: random.Random,
    receiver: NodeRef,
    senders: Sequence[NodeRef],
    rate: float,
    mode: MaskMode = "bernoulli",
    allow_empty: bool = False,
) -> DropoutMask:
    """Keep each sender with probability ``rate``.

    Unless ``allow_empty``, the mask is drawn conditioned on at least one
    sender surviving (the same distribution as redrawing all-dropped masks,
    but in exactly ``k`` draws even for tiny rates), so every sender's
    marginal keep probability becomes ``rate / (1 - (1 - rate) ** k)``.  At ``rate == 0`` this reduces to
    keeping one uniformly chosen sender.  ``fixed_count`` keeps exactly
    ``ceil(rate * k)`` senders chosen uniformly.
    """
    senders = list(senders)
    if not senders:
        raise ValueError("dropout mask needs at least one sender")
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    k = len(senders)
    if mode == "fixed_count":
        count = math.ceil(rate * k)
        if not allow_empty:
            count = max(count, 1)
        chosen = set(rng.sample(range(k), count))
        keep = [i in chosen for i in range(k)]
    elif mode == "bernoulli":
        if rate == 0.0 and not allow_empty:
            pick = rng.randrange(k)
            keep = [i == pick for i in range(k)]
        elif allow_empty:
            keep = [rng.random() < rate for _ in range(k)]
        else:
            keep = []
            for i in range(k):
                if any(keep):
                    p = rate
                else:
                    # keep probability given that at least one of senders i..k-1 survives
                    p = rate / -math.expm1((k - i) * math.log1p(-rate)) if rate < 1.0 else 1.0
                keep.append(rng.random() < p)
    else:
        raise ValueError(f"unknown mask mode {mode!r}")
    return DropoutMask(receiver, tuple(zip(senders, keep)))


def full_mask(receiver: NodeRef, senders: Sequence[NodeRef]) -> DropoutMask:
    return DropoutMask(receiver, tuple((s, True) for s in senders))


@dataclass(frozen=True)
class NodeIO:
    input: str
    output: str
    input_seq: int
    output_seq: int


@dataclass
class ForwardResult:
    question: str
    per_node: dict[NodeRef, NodeIO]
    masks: list[DropoutMask] = field(default_factory=list)
    final_output: str = ""

    def mask_for(self, receiver: NodeRef) -> Optional[DropoutMask]:
        for m in self.masks:
            if m.receiver == receiver:
                return m
        return None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "masks": [m.to_dict() for m in self.masks],
            "nodes": [
                {"node": n.key(), "input": io.input, "output": io.output,
                 "input_seq": io.input_seq, "output_seq": io.output_seq}
                for n, io in self.per_node.items()
            ],
            "final_output": self.final_output,
        }


def run_layer(sessions: Sessions, prompts: dict[NodeRef, str], kind: str, workers: int = 1) -> dict[NodeRef, str]:
    """Send one prompt to each node in the layer; replies come back keyed by node."""
    nodes = list(prompts)
    if workers > 1 and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(nodes))) as pool:
            futures = {n: pool.submit(sessions[n].ask, prompts[n], kind) for n in nodes}
            return {n: futures[n].result() for n in nodes}
    return {n: sessions[n].ask(prompts[n], kind) for n in nodes}


def forward_pass(
    topology: NetworkTopology,
    sessions: Sessions,
    question: str,
    rng: Optional[RngStreams],
    eval_mode: bool = False,
    *,
    template: PromptTemplate = FORWARD_DEFAULT,
    mask_mode: MaskMode = "bernoulli",
    allow_empty: bool = False,
    workers: int = 1,
    kind: str = "forward",
) -> ForwardResult:
    """Run one question through every layer in order.

    Masks are drawn from the per-receiver stream ``rng.get("mask", <node>)``.
    On a backend failure all transcripts are rolled back and the error re-raised.
    """
    if not question:
        raise ValueError("question must be non-empty")
    if not eval_mode and rng is None:
        raise ValueError("training passes need an rng for dropout")
    marks = snapshot(sessions)
    per_node: dict[NodeRef, NodeIO] = {}
    masks: list[DropoutMask] = []
    seq = 0
    try:
        for layer in range(1, topology.depth + 1):
            prompts: dict[NodeRef, str] = {}
            in_seq: dict[NodeRef, int] = {}
            for node in topology.layer(layer):
                if layer == 1:
                    prompts[node] = question
                else:
                    senders = employees_of(topology, node)
                    if eval_mode:
                        mask = full_mask(node, senders)
                    else:
                        mask = sample_dropout_mask(
                            rng.get("mask", node.key()), node, senders,
                            topology.dropout_rate, mask_mode, allow_empty,
                        )
                    masks.append(mask)
                    refs = [per_node[s].output for s in mask.selected]
                    prompts[node] = assemble_forward_input(question, list(enumerate(refs, start=1)), template)
                in_seq[node] = seq
                seq += 1
            replies = run_layer(sessions, prompts, kind, workers)
            for node in topology.layer(layer):
                per_node[node] = NodeIO(prompts[node], replies[node], in_seq[node], seq)
                seq += 1
    except BackendError:
        restore(sessions, marks)
        raise
    return ForwardResult(question, per_node, masks, per_node[topology.top].output)
