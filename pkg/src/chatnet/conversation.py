"""Per-node transcripts and template-driven prompt assembly.

Concatenation of prompt blocks is plain string assembly: a template body is
rendered first and each referenced output is then rendered with the
template's ``item`` format and joined with ``separator``.  Ordinal labels
("The first person") are assigned over the references actually passed in,
so a receiver never sees gaps left by dropped senders.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence

from .errors import AlternationViolation, InvalidCombination, TemplateError
from .topology import NodeRef

Role = Literal["system", "user", "assistant"]

ORDINALS = [
    "first", "second", "third", "fourth", "fifth",
    "sixth", "seventh", "eighth", "ninth", "tenth",
]
NUMBER_WORDS = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"]

PLACEHOLDERS = frozenset(
    {"question", "answer", "referenced_outputs", "ordinal", "output", "responses", "index"}
)


def ordinal_word(n: int) -> str:
    if 1 <= n <= len(ORDINALS):
        return ORDINALS[n - 1]
    suffix = "th" if 10 <= n % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def count_phrase(n: int, noun: str = "response") -> str:
    word = NUMBER_WORDS[n - 1] if 1 <= n <= len(NUMBER_WORDS) else str(n)
    return f"{word} {noun}" if n == 1 else f"{word} {noun}s"


@dataclass(frozen=True)
class Message:
    role: Role
    text: str
    turn_index: int
    # what produced the turn (forward, feedback, eval, ...); never sent over the wire
    kind: Optional[str] = None

    def to_dict(self) -> dict:
        return {"role": self.role, "text": self.text, "turn_index": self.turn_index, "kind": self.kind}


@dataclass
class Transcript:
    node: NodeRef
    messages: list[Message] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.messages)

    @property
    def last(self) -> Optional[Message]:
        return self.messages[-1] if self.messages else None

    def _expected_roles(self) -> set[str]:
        last = self.last
        if last is None:
            return {"system", "user"}
        if last.role in ("system", "assistant"):
            return {"user"}
        return {"assistant"}

    def append(self, role: Role, text: str, kind: Optional[str] = None) -> Message:
        if role not in self._expected_roles():
            prev = self.last.role if self.last else "nothing"
            raise AlternationViolation(f"{self.node}: {role} turn cannot follow {prev}")
        if role != "system" and not text:
            raise ValueError(f"{role} turns need non-empty text")
        msg = Message(role, text, len(self.messages), kind)
        self.messages.append(msg)
        return msg

    def last_input(self) -> Optional[str]:
        for m in reversed(self.messages):
            if m.role == "user":
                return m.text
        return None

    def last_output(self) -> Optional[str]:
        for m in reversed(self.messages):
            if m.role == "assistant":
                return m.text
        return None

    def truncate(self, length: int) -> None:
        """Roll back to an earlier snapshot length (failed pass or evaluation)."""
        del self.messages[length:]

    def window(self, max_pairs: Optional[int] = None) -> list[Message]:
        """Messages to send: leading system turn plus the last ``max_pairs`` exchanges."""
        if max_pairs is None:
            return list(self.messages)
        head = [m for m in self.messages[:1] if m.role == "system"]
        body = self.messages[len(head):]
        # body always ends on a pending user turn when sending
        keep = 2 * max_pairs + (len(body) % 2)
        return head + body[-keep:] if keep else head

    def copy(self) -> "Transcript":
        return Transcript(self.node, list(self.messages))


def append_turn(t: Transcript, role: Role, text: str) -> Transcript:
    t.append(role, text)
    return t


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    separator: str = "\n"
    item: str = "{output}"

    def __post_init__(self) -> None:
        for part in (self.body, self.item):
            names = _field_names(part)
            unknown = names - PLACEHOLDERS
            if unknown:
                raise TemplateError(f"template {self.name!r} uses unknown placeholders {sorted(unknown)}")

    def render(self, references: Sequence[str] = (), **values: str) -> str:
        blocks = [
            _format(self.name, self.item, {**values, "ordinal": ordinal_word(k), "index": str(k), "output": out})
            for k, out in enumerate(references, start=1)
        ]
        joined = self.separator.join(blocks)
        if "referenced_outputs" in _field_names(self.body):
            return _format(self.name, self.body, {**values, "referenced_outputs": joined})
        head = _format(self.name, self.body, values)
        return head + "".join(self.separator + b for b in blocks)


def _field_names(text: str) -> set[str]:
    try:
        return {f for _, f, _, _ in string.Formatter().parse(text) if f is not None}
    except ValueError as exc:
        raise TemplateError(str(exc)) from exc


def _format(name: str, text: str, values: dict) -> str:
    missing = _field_names(text) - values.keys()
    if missing:
        raise TemplateError(f"template {name!r} has unbound placeholders {sorted(missing)}")
    return text.format_map(values)


@dataclass(frozen=True)
class FeedbackTemplates:
    right: PromptTemplate
    wrong: PromptTemplate


FORWARD_DEFAULT = PromptTemplate(
    "forward",
    "You need to guess ({question}), and here are {responses} for your reference:",
    item="The {ordinal} person: {output}",
)
FORWARD_BATCH = PromptTemplate(
    "forward_batch",
    "{question}\nHere are {responses} for your reference:",
    item="The {ordinal} person: {output}",
)
RIGHT_DEFAULT = PromptTemplate(
    "right", "{answer}\nYou guessed it right, remember your reasoning and wait for the next input."
)
WRONG_DEFAULT = PromptTemplate(
    "wrong",
    "{answer}\nYou guessed wrong. Please speculate a possible reason and update your classification criteria.",
    item="Here is one person's thinking for your reference:\n{output}",
)
# phrasing used in the method description rather than the dialogue transcript
RIGHT_PROSE = PromptTemplate("right_prose", "{answer}\nYou guessed it right, remember your reasoning.")
WRONG_PROSE = PromptTemplate(
    "wrong_prose",
    "{answer}\nYou guessed it wrong. Please speculate a possible reason why the answer is this "
    "and update your thinking.",
    item="Here is one person's thinking for your reference:\n{output}",
)

TEMPLATES: dict[str, PromptTemplate] = {
    t.name: t for t in (FORWARD_DEFAULT, FORWARD_BATCH, RIGHT_DEFAULT, WRONG_DEFAULT, RIGHT_PROSE, WRONG_PROSE)
}
DEFAULT_FEEDBACK = FeedbackTemplates(RIGHT_DEFAULT, WRONG_DEFAULT)
PROSE_FEEDBACK = FeedbackTemplates(RIGHT_PROSE, WRONG_PROSE)


def assemble_forward_input(
    question: str,
    referenced_outputs: Iterable[tuple[int, str]],
    template: PromptTemplate = FORWARD_DEFAULT,
) -> str:
    refs = list(referenced_outputs)
    if not refs:
        return question
    ordinals = [k for k, _ in refs]
    if ordinals != list(range(1, len(refs) + 1)):
        raise ValueError(f"reference ordinals must run 1..{len(refs)}, got {ordinals}")
    return template.render(
        [text for _, text in refs], question=question, responses=count_phrase(len(refs))
    )


def assemble_feedback_input(
    answer: str,
    was_correct: bool,
    leader_outputs: Sequence[str],
    templates: FeedbackTemplates = DEFAULT_FEEDBACK,
) -> str:
    if was_correct:
        if leader_outputs:
            raise InvalidCombination("correct nodes receive no leader outputs")
        return templates.right.render(answer=answer)
    return templates.wrong.render(list(leader_outputs), answer=answer)
