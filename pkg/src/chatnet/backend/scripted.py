"""Deterministic rule-based stand-ins for dialogue models.

Each policy answers from the transcript alone (plus a seed), so a scripted
run is a pure function of its configuration.  Policies branch on the
``kind`` tag of the pending user turn: ``forward`` (one question, possibly
with references), ``eval`` (an enumerated batch), ``feedback``, ``refine``,
``example`` (a labeled training example), ``rewrite``/``judge`` for the
sentiment task.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import ClassVar, Optional, Sequence

from ..conversation import ORDINALS, Transcript
from ..errors import DivergenceDetected, ReplayExhausted
from ..seeding import derive_seed
from ..tasks import dmc, lexicon

_PERSON_RE = re.compile(rf"^The ({'|'.join(ORDINALS)}|\d+\w*) person: ", re.MULTILINE)


def split_references(text: str) -> tuple[str, list[str]]:
    """Split an aggregated prompt into its question head and per-person blocks."""
    marks = list(_PERSON_RE.finditer(text))
    if not marks:
        return text, []
    head = text[: marks[0].start()]
    blocks = [
        text[m.end(): marks[k + 1].start() if k + 1 < len(marks) else len(text)].rstrip("\n")
        for k, m in enumerate(marks)
    ]
    return head, blocks


majority = dmc.majority_vote


def _pending(transcript: Transcript):
    msg = transcript.last
    if msg is None or msg.role != "user":
        raise ValueError("transcript must end with a user message")
    return msg


def _last_question(transcript: Transcript) -> Optional[str]:
    for m in reversed(transcript.messages):
        if m.role == "user" and m.kind in ("forward", None):
            return m.text
    return None


def single_reply(label: Optional[int]) -> str:
    if label is None:
        return "I cannot decide which category this data point belongs to."
    return f"Based on my reasoning, this data point belongs to {dmc.category_phrase(label)}."


def batch_reply(labels: Sequence[Optional[int]]) -> str:
    return "\n".join(
        f"{k}: belongs to {dmc.category_phrase(v)}" if v is not None else f"{k}: unsure"
        for k, v in enumerate(labels, start=1)
    )


def feedback_reply(text: str) -> str:
    first = text.strip().splitlines()[0] if text.strip() else ""
    return f"Thank you for the feedback. I will remember it. {first}".rstrip()


class ScriptedPolicy:
    name: ClassVar[str] = "policy"

    def reply(self, transcript: Transcript, seed: int) -> str:
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class _Classifier(ScriptedPolicy):
    """Shared dispatch for the vector classifiers."""

    def label(self, vector: tuple[int, ...], rng: random.Random) -> Optional[int]:
        raise NotImplementedError

    def aggregate(self, head: str, blocks: list[str], batch: bool, transcript: Transcript, seed: int) -> str:
        return self.classify(head, batch, transcript, seed)

    def classify(self, text: str, batch: bool, transcript: Transcript, seed: int) -> str:
        vectors = dmc.find_vectors(text)
        rngs = [random.Random(derive_seed(seed, len(transcript), k)) for k in range(len(vectors))]
        labels = [self.label(v, r) for v, r in zip(vectors, rngs)]
        if batch:
            return batch_reply(labels)
        return single_reply(labels[0] if labels else None)

    def reply(self, transcript: Transcript, seed: int) -> str:
        msg = _pending(transcript)
        if msg.kind in ("forward", "eval", None):
            head, blocks = split_references(msg.text)
            if blocks:
                return self.aggregate(head, blocks, msg.kind == "eval", transcript, seed)
            return self.classify(head, msg.kind == "eval", transcript, seed)
        if msg.kind == "refine":
            question = _last_question(transcript)
            return self.classify(split_references(question)[0] if question else "", False, transcript, seed)
        if msg.kind == "example":
            return "Noted. I will use this example to refine my classification rule."
        if msg.kind == "feedback":
            return feedback_reply(msg.text)
        return "OK."


def _safe_oracle(vector: tuple[int, ...]) -> Optional[int]:
    try:
        return dmc.oracle_label(vector)
    except (dmc.AmbiguousMax, ValueError):
        return None


@dataclass
class ArgmaxClassifier(_Classifier):
    name: ClassVar[str] = "argmax"

    def label(self, vector, rng):
        return _safe_oracle(vector)


@dataclass
class FixedDimClassifier(_Classifier):
    dim: int = 1
    name: ClassVar[str] = "fixed"

    def label(self, vector, rng):
        return self.dim

    def params(self):
        return {"dim": self.dim}


@dataclass
class NoisyClassifier(_Classifier):
    p: float = 0.0
    name: ClassVar[str] = "noisy"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise probability must lie in [0, 1], got {self.p}")

    def label(self, vector, rng):
        truth = _safe_oracle(vector)
        if truth is None:
            return None
        if rng.random() >= self.p:
            return truth
        wrong = [c for c in range(1, len(vector) + 1) if c != truth]
        return rng.choice(wrong)

    def params(self):
        return {"p": self.p}


@dataclass
class MajorityAggregator(_Classifier):
    """Votes over the categories named in its references; argmax when it has none."""

    name: ClassVar[str] = "majority"

    def label(self, vector, rng):
        return _safe_oracle(vector)

    def aggregate(self, head, blocks, batch, transcript, seed):
        vectors = dmc.find_vectors(head)
        dims = len(vectors[0]) if vectors else 3
        if not batch:
            return single_reply(majority([dmc.parse_category(b, dims) for b in blocks]))
        parsed = [dmc.parse_batch(b, len(vectors), dims) for b in blocks]
        return batch_reply([majority([p[k] for p in parsed]) for k in range(len(vectors))])


@dataclass
class ReplayList(ScriptedPolicy):
    """Returns pre-recorded replies in order.

    When ``expected_prompts`` is given, every incoming prompt is compared
    byte for byte with the recorded one before replying.
    """

    replies: list[str] = field(default_factory=list)
    expected_prompts: Optional[list[str]] = None
    label: str = "replay"
    cursor: int = 0
    name: ClassVar[str] = "replay"

    def reply(self, transcript, seed):
        msg = _pending(transcript)
        if self.cursor >= len(self.replies):
            raise ReplayExhausted(f"{self.label}: all {len(self.replies)} replies consumed")
        k = self.cursor
        if self.expected_prompts is not None:
            expected = self.expected_prompts[k]
            if msg.text != expected:
                offset = next(
                    (i for i, (a, b) in enumerate(zip(expected, msg.text)) if a != b),
                    min(len(expected), len(msg.text)),
                )
                raise DivergenceDetected(self.label, k, offset, expected, msg.text)
        self.cursor += 1
        return self.replies[k]

    def params(self):
        return {"replies": list(self.replies)}


@dataclass
class LexiconRewriter(ScriptedPolicy):
    """Offline sentiment reverser.

    Intensity starts at ``level`` (shifted per sentence by up to ``spread``
    using the seed) and rises by one for every feedback or refine turn
    already in the transcript.  With references it adopts the strongest
    referenced rewrite when that beats its own.
    """

    level: int = 1
    spread: int = 0
    name: ClassVar[str] = "rewriter"

    def _current_level(self, transcript: Transcript, sentence: str, seed: int) -> int:
        bumps = sum(1 for m in transcript.messages if m.role == "user" and m.kind in ("feedback", "refine"))
        jitter = random.Random(derive_seed(seed, sentence)).randint(-self.spread, self.spread) if self.spread else 0
        return self.level + jitter + bumps

    def reply(self, transcript, seed):
        msg = _pending(transcript)
        if msg.kind == "feedback":
            return "Understood. I will make the reversed sentence more emotionally intense."
        if msg.kind == "refine":
            question = _last_question(transcript) or ""
            prior = next(
                (m.text for m in reversed(transcript.messages)
                 if m.role == "assistant" and m.kind in ("forward", "refine", None)),
                "",
            )
            level = self._current_level(transcript, _quoted(question) or "", seed)
            return lexicon.with_level(prior, level)
        head, blocks = split_references(msg.text)
        sentence = _quoted(head)
        own = lexicon.reverse(sentence, self._current_level(transcript, sentence, seed)) if sentence else None
        candidates = ([own] if own else []) + [b.strip() for b in blocks]
        if not candidates:
            return "I cannot find a sentence to rewrite."
        return max(candidates, key=lexicon.intensity)  # first maximal wins

    def params(self):
        return {"level": self.level, "spread": self.spread}


def _quoted(text: str) -> Optional[str]:
    m = re.search(r'"([^"]+)"', text)
    return m.group(1) if m else None


_SLOT_RE = re.compile(r"^Sentence ([AB]): (.*)$", re.MULTILINE)


@dataclass
class LexiconJudge(ScriptedPolicy):
    """Prefers the candidate whose strongest intensifier ranks higher."""

    name: ClassVar[str] = "lexicon_judge"

    def reply(self, transcript, seed):
        msg = _pending(transcript)
        slots = dict(_SLOT_RE.findall(msg.text))
        a, b = slots.get("A", ""), slots.get("B", "")
        sa, sb = lexicon.intensity(a), lexicon.intensity(b)
        if sa == sb:
            return "Tie: both sentences express emotion of the same intensity."
        win, lose = ("A", "B") if sa > sb else ("B", "A")
        wword = lexicon.INTENSIFIERS[max(sa, sb) - 1]
        lword = lexicon.INTENSIFIERS[min(sa, sb) - 1] if min(sa, sb) else "no intensifier"
        return (
            f'{win} is more intense because "{wword}" implies a stronger degree of feeling '
            f'than "{lword}" in sentence {lose}.'
        )


@dataclass
class FirstSlotJudge(ScriptedPolicy):
    """Always picks whichever candidate is shown first; used to measure position bias."""

    name: ClassVar[str] = "first_slot_judge"

    def reply(self, transcript, seed):
        _pending(transcript)
        return "A is more intense because it is presented first."


POLICIES: dict[str, type[ScriptedPolicy]] = {
    cls.name: cls
    for cls in (
        ArgmaxClassifier,
        FixedDimClassifier,
        NoisyClassifier,
        MajorityAggregator,
        ReplayList,
        LexiconRewriter,
        LexiconJudge,
        FirstSlotJudge,
    )
}


def make_policy(name: str, **params) -> ScriptedPolicy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown scripted policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(**params)
