"""Sentiment reversal with a pairwise judge: single model versus network."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

from ..conversation import FeedbackTemplates, PromptTemplate
from ..errors import DatasetNotFound
from ..feedback import backward_pass
from ..forward import ForwardResult, forward_pass
from ..records import RunRecord
from ..session import NodeSession, restore, snapshot
from ..trainer import Network

INTENSIFY_PROMPT = "Make the emotionally reversed sentences more emotionally intense."
INTENSIFY_KEY = "<more intense>"

REVERSE_TEMPLATE = PromptTemplate(
    "sentiment_forward",
    "{question}\nHere are {responses} for your reference:",
    item="The {ordinal} person: {output}",
)
INTENSIFY_TEMPLATES = FeedbackTemplates(
    PromptTemplate("sentiment_right", 'Your sentence: "{answer}"\nWell done, keep it.'),
    PromptTemplate(
        "sentiment_wrong",
        'Your sentence: "{answer}"\n' + INTENSIFY_PROMPT,
        item="Here is one person's thinking for your reference:\n{output}",
    ),
)
INSTRUCTION = (
    "You rewrite sentences so that their sentiment is reversed: positive becomes negative "
    "and negative becomes positive. Reply with the rewritten sentence only."
)
JUDGE_INSTRUCTION = "You compare two sentences and decide which one expresses more intense emotion."


@dataclass(frozen=True)
class SentimentSample:
    sentence: str
    sentiment: Literal["positive", "negative"]

    def __post_init__(self):
        if not self.sentence.strip():
            raise ValueError("sentence must be non-empty")
        if self.sentiment not in ("positive", "negative"):
            raise ValueError(f"sentiment must be positive or negative, got {self.sentiment!r}")

    def question(self) -> str:
        return f'Rewrite the following {self.sentiment} sentence by reversing its sentiment: "{self.sentence}"'


def builtin_dataset_path() -> Path:
    return Path(str(resources.files("chatnet.data").joinpath("sentiment60.tsv")))


def load_dataset(path: Optional[Union[str, Path]] = None) -> list[SentimentSample]:
    p = Path(path) if path is not None else builtin_dataset_path()
    if not p.is_file():
        raise DatasetNotFound(f"sentiment dataset {p} not found")
    out = []
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        sentence, sentiment = line.rsplit("\t", 1)
        out.append(SentimentSample(sentence, sentiment.strip()))
    return out


def write_dataset(path: Union[str, Path], samples: Sequence[SentimentSample]) -> None:
    Path(path).write_text("".join(f"{s.sentence}\t{s.sentiment}\n" for s in samples), encoding="utf-8")


@dataclass
class SingleSystem:
    session: NodeSession
    last_output: Optional[str] = None
    calls: list = field(default_factory=list)

    name = "single"

    def _ask(self, text: str, kind: str) -> str:
        reply = self.session.ask(text, kind)
        self.calls.append({"node": self.session.node.key(), "kind": kind, "input": text, "output": reply})
        return reply

    def reset(self, marks) -> None:
        restore({self.session.node: self.session}, marks)
        self.last_output = None

    def marks(self):
        return snapshot({self.session.node: self.session})


@dataclass
class NetworkSystem:
    net: Network
    last_output: Optional[str] = None
    last_forward: Optional[ForwardResult] = None
    events: list = field(default_factory=list)

    name = "network"

    def reset(self, marks) -> None:
        restore(self.net.sessions, marks)
        self.last_output = None
        self.last_forward = None

    def marks(self):
        return snapshot(self.net.sessions)


System = Union[SingleSystem, NetworkSystem]


def reverse_sentiment(system: System, sample: SentimentSample) -> str:
    if isinstance(system, SingleSystem):
        out = system._ask(sample.question(), "forward")
    else:
        net = system.net
        fwd = forward_pass(
            net.topology, net.sessions, sample.question(), None, eval_mode=True,
            template=REVERSE_TEMPLATE, workers=net.workers,
        )
        system.events.append(("forward", fwd.to_dict()))
        system.last_forward = fwd
        out = fwd.final_output
    system.last_output = out
    return out


def intensify(system: System, prior_output: str) -> str:
    """Second pass: self-refinement for a single model, backward then forward pass for a network."""
    if system.last_output is None:
        raise ValueError("intensify needs a previous reverse_sentiment call on this system")
    if isinstance(system, SingleSystem):
        out = system._ask(INTENSIFY_PROMPT, "refine")
    else:
        net = system.net
        fb = backward_pass(
            net.topology, net.sessions, INTENSIFY_KEY, system.last_forward, INTENSIFY_TEMPLATES,
            lambda text: text, answer_text=prior_output, fanin=net.fanin, scope=net.scope, workers=net.workers,
        )
        system.events.append(("feedback", fb.to_dict()))
        question = system.last_forward.question
        fwd = forward_pass(
            net.topology, net.sessions, question, None, eval_mode=True,
            template=REVERSE_TEMPLATE, workers=net.workers,
        )
        system.events.append(("forward", fwd.to_dict()))
        system.last_forward = fwd
        out = fwd.final_output
    system.last_output = out
    return out


@dataclass(frozen=True)
class JudgeVerdict:
    winner: Literal["a", "b", "tie"]
    rationale: str
    order: Literal["ab", "ba"] = "ab"  # which candidate was shown first

    def __post_init__(self):
        if not self.rationale:
            raise ValueError("a verdict needs a rationale")


_VERDICT_RE = re.compile(r"^\W*(?:sentence\s+)?(A|B|tie)\b[\s:,.-]*(.*)$", re.IGNORECASE | re.DOTALL)


def judge_prompt(first: str, second: str) -> str:
    return (
        "Which of the following two sentences expresses more intense emotion?\n"
        f"Sentence A: {first}\n"
        f"Sentence B: {second}\n"
        "Reply with A, B or tie, followed by the reason for your decision."
    )


def parse_verdict(text: str) -> tuple[str, str]:
    """(slot, rationale) with slot in {"A", "B", "tie"}; unparseable text is a tie."""
    m = _VERDICT_RE.match(text.strip())
    if not m:
        return "tie", "unparseable"
    slot = m.group(1).upper() if m.group(1).lower() != "tie" else "tie"
    rationale = m.group(2).strip() or text.strip()
    return slot, rationale


def judge_pair(judge: NodeSession, sentence_a: str, sentence_b: str, rng: random.Random, calls: Optional[list] = None) -> JudgeVerdict:
    if not sentence_a or not sentence_b:
        raise ValueError("both candidates must be non-empty")
    order = "ab" if rng.random() < 0.5 else "ba"
    first, second = (sentence_a, sentence_b) if order == "ab" else (sentence_b, sentence_a)
    prompt = judge_prompt(first, second)
    mark = len(judge.transcript)
    reply = judge.ask(prompt, "judge")
    judge.transcript.truncate(mark)  # every pair is judged in a fresh conversation
    if calls is not None:
        calls.append({"node": judge.node.key(), "kind": "judge", "input": prompt, "output": reply})
    slot, rationale = parse_verdict(reply)
    if slot == "tie":
        winner = "tie"
    else:
        shown_first = slot == "A"
        winner = "a" if shown_first == (order == "ab") else "b"
    return JudgeVerdict(winner, rationale, order)


def tally(verdicts: Sequence[JudgeVerdict]) -> tuple[int, int, int]:
    """(win, loss, tie) counted from candidate a's side."""
    win = sum(v.winner == "a" for v in verdicts)
    loss = sum(v.winner == "b" for v in verdicts)
    return win, loss, len(verdicts) - win - loss


PHASES = ("without_feedback", "with_feedback")


def run_protocol(
    dataset: Sequence[SentimentSample],
    single: SingleSystem,
    network: NetworkSystem,
    judge: NodeSession,
    rng: random.Random,
    record: Optional[RunRecord] = None,
) -> dict[str, list[JudgeVerdict]]:
    """Both phases for every sample: reverse, judge, intensify, judge.

    Candidate a is the single model and b the network.  Each sample starts
    from the systems' initial conversation state.
    """
    record = record if record is not None else RunRecord()
    single_marks, net_marks = single.marks(), network.marks()
    verdicts: dict[str, list[JudgeVerdict]] = {p: [] for p in PHASES}
    for k, sample in enumerate(dataset):
        single.reset(single_marks)
        network.reset(net_marks)
        single.calls.clear()
        network.events.clear()
        judge_calls: list = []
        outputs = {}
        a = reverse_sentiment(single, sample)
        b = reverse_sentiment(network, sample)
        outputs["without_feedback"] = (a, b)
        a2 = intensify(single, a)
        b2 = intensify(network, b)
        outputs["with_feedback"] = (a2, b2)
        for phase in PHASES:
            va, vb = outputs[phase]
            v = judge_pair(judge, va, vb, rng, judge_calls)
            verdicts[phase].append(v)
        record.emit("calls", system="single", sample=k, refine_turns=1, nodes=list(single.calls))
        for kind, data in network.events:
            record.emit(kind, system="network", sample=k, **data)
        record.emit("calls", system="judge", sample=k, refine_turns=0, nodes=judge_calls)
        for phase in PHASES:
            v = verdicts[phase][-1]
            va, vb = outputs[phase]
            record.emit(
                "pair", system="judge", sample=k, phase=phase, sentence=sample.sentence,
                sentiment=sample.sentiment, a=va, b=vb, winner=v.winner, rationale=v.rationale, order=v.order,
            )
    return verdicts


def table_rows(verdicts: dict[str, list[JudgeVerdict]]) -> list[dict]:
    """Win/loss/tie rows per phase for both systems."""
    rows = []
    for phase in PHASES:
        w, l, t = tally(verdicts[phase])
        rows.append({"phase": phase, "system": "single", "win": w, "loss": l, "tie": t, "total": w + l + t})
        rows.append({"phase": phase, "system": "network", "win": l, "loss": w, "tie": t, "total": w + l + t})
    return rows
