"""What the trainer needs to know about a task."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Protocol, Sequence

from .conversation import FeedbackTemplates, PromptTemplate


@dataclass(frozen=True)
class TaskSample:
    question: str
    answer: str  # gold key compared against the task matcher
    answer_text: str  # how the answer is shown in feedback prompts
    payload: Any = None


class Task(Protocol):
    forward_template: PromptTemplate
    batch_template: PromptTemplate
    feedback_templates: FeedbackTemplates

    def instruction(self) -> str: ...

    def matcher(self, text: str) -> Optional[str]: ...

    def batch_question(self, samples: Sequence[TaskSample]) -> str: ...

    def parse_batch(self, text: str, n: int) -> list[Optional[str]]: ...
