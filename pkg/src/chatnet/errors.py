"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ChatNetError(Exception):
    """Base class for all package errors."""


class ConfigError(ChatNetError):
    pass


class InvalidWidths(ConfigError):
    pass


class InvalidRate(ConfigError):
    pass


class NoLeaders(ChatNetError):
    pass


class NoEmployees(ChatNetError):
    pass


class AlternationViolation(ChatNetError):
    pass


class TemplateError(ChatNetError):
    pass


class InvalidCombination(ChatNetError):
    pass


class BackendError(ChatNetError):
    pass


class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class ReplayExhausted(BackendError):
    pass


class AmbiguousMax(ChatNetError):
    pass


class RangeTooNarrow(ChatNetError):
    pass


class DatasetNotFound(ChatNetError):
    pass


class DivergenceDetected(ChatNetError):
    """Raised when a replayed prompt differs from the recorded one."""

    def __init__(self, node: str, turn: int, offset: int, expected: str, actual: str):
        self.node = node
        self.turn = turn
        self.offset = offset
        self.expected = expected
        self.actual = actual
        lo = max(0, offset - 20)
        super().__init__(
            f"divergence at node {node}, turn {turn}, byte {offset}: "
            f"expected {expected[lo:offset + 20]!r}, got {actual[lo:offset + 20]!r}"
        )


class RefusedIncomplete(ChatNetError):
    pass
