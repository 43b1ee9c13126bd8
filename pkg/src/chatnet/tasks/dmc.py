"""Digital mode classification: label a vector by the position of its largest component."""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..conversation import (
    DEFAULT_FEEDBACK,
    FORWARD_BATCH,
    FORWARD_DEFAULT,
    ORDINALS,
    FeedbackTemplates,
    PromptTemplate,
    ordinal_word,
)
from ..errors import AmbiguousMax, RangeTooNarrow
from ..task import TaskSample


@dataclass(frozen=True)
class DigitalVector:
    components: tuple[int, ...]
    label: int

    @property
    def dims(self) -> int:
        return len(self.components)

    def text(self) -> str:
        return ", ".join(str(c) for c in self.components)

    def to_line(self) -> str:
        return ",".join(str(c) for c in self.components) + f",{self.label}"

    @classmethod
    def from_line(cls, line: str) -> "DigitalVector":
        *comps, label = (int(x) for x in line.split(","))
        vec = cls(tuple(comps), label)
        if oracle_label(vec.components) != label:
            raise ValueError(f"label {label} disagrees with components {comps}")
        return vec


def oracle_label(components: Sequence[int]) -> int:
    if len(components) < 2:
        raise ValueError("need at least two components")
    top = max(components)
    if list(components).count(top) > 1:
        raise AmbiguousMax(f"maximum {top} is not unique in {tuple(components)}")
    return list(components).index(top) + 1


def _gap(components: Sequence[int]) -> int:
    first, second = sorted(components, reverse=True)[:2]
    return first - second


def generate_dataset(
    count: int,
    dims: int = 3,
    value_range: tuple[int, int] = (1, 99),
    seed: int = 0,
    max_gap: Optional[int] = None,
    max_tries: int = 100_000,
) -> list[DigitalVector]:
    """Seeded, label-balanced vectors with a unique maximum.

    ``max_gap`` restricts vectors to a small distance between the largest
    and second-largest component (the "challenging" test split).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if dims < 2:
        raise ValueError("dims must be >= 2")
    low, high = value_range
    if high <= low:
        raise RangeTooNarrow(f"range {value_range} cannot produce a unique maximum")
    if max_gap is not None and max_gap < 1:
        raise RangeTooNarrow("max_gap must be >= 1")
    rng = random.Random(seed)
    targets = [i % dims + 1 for i in range(count)]
    rng.shuffle(targets)
    out = []
    for target in targets:
        for _ in range(max_tries):
            comps = [rng.randint(low, high) for _ in range(dims)]
            top = max(comps)
            if comps.count(top) > 1 or comps.index(top) + 1 != target:
                continue
            if max_gap is not None and _gap(comps) > max_gap:
                continue
            out.append(DigitalVector(tuple(comps), target))
            break
        else:
            raise RangeTooNarrow(f"no vector with label {target} found in {max_tries} draws")
    return out


def write_dataset(path: Path, vectors: Sequence[DigitalVector]) -> None:
    Path(path).write_text("".join(v.to_line() + "\n" for v in vectors))


def read_dataset(path: Path) -> list[DigitalVector]:
    return [DigitalVector.from_line(s) for s in Path(path).read_text().splitlines() if s.strip()]


# --- answer parsing -------------------------------------------------------

_ORD = "|".join(ORDINALS)
_NOUN = r"(?:category|categories|class|classes|group|dimension)"
_CATEGORY_RE = re.compile(
    rf"""
    \b(?P<word>{_ORD})\b(?:\s+\w+)?\s+{_NOUN}\b          # "the second category", "first data category"
    | \b(?P<num>\d+)(?:st|nd|rd|th|-th)\b(?:\s+\w+)?\s+{_NOUN}\b
    | \b{_NOUN}\s*(?:\#|no\.?|number)?\s*(?P<bare>\d+)\b   # "category 2", "class #3"
    | \b{_NOUN}\s+(?P<word2>one|two|three|four|five|six|seven|eight|nine|ten)\b
    """,
    re.IGNORECASE | re.VERBOSE,
)
_TRAILING_RE = re.compile(r"(?:^|(?<!,)[\s:=(])(?P<num>\d+)\s*[.)!]?\s*$")  # not the tail of a vector
_SOLE_ORDINAL_RE = re.compile(rf"^\W*(?:the\s+)?(?P<word>{_ORD})\W*$", re.IGNORECASE)
_NUMBER_WORDS = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"]


def parse_category(text: str, dims: int = 3) -> Optional[int]:
    """Extract the category a free-text reply commits to.

    The last in-range mention wins, since replies often revise an early
    guess ("maybe the first... I guess the second category").
    """
    found: list[int] = []
    for m in _CATEGORY_RE.finditer(text):
        if m.group("word"):
            found.append(ORDINALS.index(m.group("word").lower()) + 1)
        elif m.group("num"):
            found.append(int(m.group("num")))
        elif m.group("bare"):
            found.append(int(m.group("bare")))
        else:
            found.append(_NUMBER_WORDS.index(m.group("word2").lower()) + 1)
    found = [c for c in found if 1 <= c <= dims]
    if found:
        return found[-1]
    stripped = text.strip()
    m = _SOLE_ORDINAL_RE.match(stripped)
    if m:
        value = ORDINALS.index(m.group("word").lower()) + 1
        return value if value <= dims else None
    m = _TRAILING_RE.search(stripped)
    if m and 1 <= int(m.group("num")) <= dims:
        return int(m.group("num"))
    return None


_ITEM_RE = re.compile(r"^\s*(?:item\s*|#)?(\d+)\s*[:.)\]-]\s*(.*)$", re.IGNORECASE)


def parse_batch(text: str, n: int, dims: int = 3) -> list[Optional[int]]:
    """Labels from an enumerated ``<k>: <answer>`` reply; absent items are None."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out: list[Optional[int]] = [None] * n
    for line in text.splitlines():
        m = _ITEM_RE.match(line)
        if not m:
            continue
        k = int(m.group(1))
        if 1 <= k <= n:
            out[k - 1] = parse_category(m.group(2), dims)
    return out


# --- prompts -----------------------------------------------------------------

_VECTOR_RE = re.compile(r"-?\d+(?:\s*,\s*-?\d+)+")


def find_vectors(text: str) -> list[tuple[int, ...]]:
    return [tuple(int(x) for x in m.group(0).split(",")) for m in _VECTOR_RE.finditer(text)]


def category_phrase(label: int) -> str:
    return f"the {ordinal_word(label)} category"


def answer_text(vec: DigitalVector) -> str:
    return f"The correct answer: ({vec.text()}) belongs to {category_phrase(vec.label)}."


def batch_question(vectors: Sequence[DigitalVector]) -> str:
    lines = [
        f"Guess the category of each of the following {len(vectors)} data points. "
        "Reply with one line per data point in the form '<number>: <category>'."
    ]
    lines += [f"{k}: {v.text()}" for k, v in enumerate(vectors, start=1)]
    return "\n".join(lines)


def labeled_example(vec: DigitalVector) -> str:
    return f"{vec.text()} belongs to {category_phrase(vec.label)}."


def instruction(dims: int = 3) -> str:
    return (
        f"Data points are vectors of {dims} integers, and each belongs to one of {dims} categories "
        "(the first category, the second category, ...). You do not know the rule yet. "
        "For every data point you receive, guess its category and explain your reasoning."
    )


def majority_vote(votes: Sequence[Optional[int]]) -> Optional[int]:
    """Most frequent answer; ties go to the tied answer of the lowest-index voter.

    Abstentions (None) are ignored; all-abstain yields None.
    """
    cast = [v for v in votes if v is not None]
    if not cast:
        return None
    counts = Counter(cast)
    best = max(counts.values())
    return next(v for v in cast if counts[v] == best)


def accuracy(predictions: Sequence[Optional[int]], gold: Sequence[int]) -> float:
    if len(predictions) != len(gold):
        raise ValueError("prediction and gold lengths differ")
    if not gold:
        raise ValueError("empty gold set")
    return sum(p == g for p, g in zip(predictions, gold)) / len(gold)


@dataclass(frozen=True)
class DmcTask:
    dims: int = 3
    forward_template: PromptTemplate = FORWARD_DEFAULT
    batch_template: PromptTemplate = FORWARD_BATCH
    feedback_templates: FeedbackTemplates = DEFAULT_FEEDBACK
    instruction_text: Optional[str] = None

    def instruction(self) -> str:
        return self.instruction_text or instruction(self.dims)

    def sample(self, vec: DigitalVector) -> TaskSample:
        return TaskSample(vec.text(), str(vec.label), answer_text(vec), vec)

    def matcher(self, text: str) -> Optional[str]:
        c = parse_category(text, self.dims)
        return None if c is None else str(c)

    def batch_question(self, samples: Sequence[TaskSample]) -> str:
        return batch_question([s.payload for s in samples])

    def parse_batch(self, text: str, n: int) -> list[Optional[str]]:
        return [None if c is None else str(c) for c in parse_batch(text, n, self.dims)]
