"""Pluggable chat backends: live HTTP and deterministic scripted policies."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Literal, Optional, Protocol

from ..conversation import Transcript
from ..errors import BackendUnavailable, MalformedResponse
from ..topology import NodeRef
from .http import HttpBackend, HttpSettings
from .scripted import (
    POLICIES,
    ArgmaxClassifier,
    FirstSlotJudge,
    FixedDimClassifier,
    LexiconJudge,
    LexiconRewriter,
    MajorityAggregator,
    NoisyClassifier,
    ReplayList,
    ScriptedPolicy,
    make_policy,
    majority,
)


@dataclass
class ScriptedSettings:
    policy: ScriptedPolicy
    seed: int = 0


@dataclass
class BackendBinding:
    kind: Literal["http", "scripted"]
    http: Optional[HttpSettings] = None
    scripted: Optional[ScriptedSettings] = None

    def __post_init__(self):
        populated = {"http": self.http is not None, "scripted": self.scripted is not None}
        if self.kind not in populated:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if not populated[self.kind] or sum(populated.values()) != 1:
            raise ValueError(f"binding of kind {self.kind!r} must populate exactly its own settings")

    @classmethod
    def scripted_policy(cls, policy: ScriptedPolicy, seed: int = 0) -> "BackendBinding":
        return cls("scripted", scripted=ScriptedSettings(policy, seed))


class Backend(Protocol):
    def complete(self, transcript: Transcript) -> str: ...


class ScriptedBackend:
    def __init__(self, settings: ScriptedSettings):
        self.settings = settings

    def complete(self, transcript: Transcript) -> str:
        reply = self.settings.policy.reply(transcript, self.settings.seed)
        if not reply:
            raise MalformedResponse(f"{self.settings.policy.name} produced an empty reply")
        return reply


def connect(binding: BackendBinding) -> Backend:
    if binding.kind == "scripted":
        return ScriptedBackend(binding.scripted)
    return HttpBackend(binding.http)


def send(binding: BackendBinding, transcript: Transcript, backend: Optional[Backend] = None) -> str:
    """Ask the bound model for the next assistant turn; the transcript is not modified."""
    if transcript.last is None or transcript.last.role != "user":
        raise ValueError("transcript must end with a user message")
    return (backend or connect(binding)).complete(transcript)


@dataclass(frozen=True)
class HealthReport:
    healthy: bool
    latency: float
    detail: str = ""


def probe(binding: BackendBinding, backend: Optional[Backend] = None) -> HealthReport:
    if binding.kind == "scripted":
        return HealthReport(True, 0.0, binding.scripted.policy.name)
    t = Transcript(NodeRef(1, 1))
    t.append("user", "Reply with the single word OK.", kind="probe")
    start = time.perf_counter()
    reply = send(binding, t, backend)
    return HealthReport(True, time.perf_counter() - start, reply[:80])


__all__ = [
    "ArgmaxClassifier",
    "Backend",
    "BackendBinding",
    "BackendUnavailable",
    "FirstSlotJudge",
    "FixedDimClassifier",
    "HealthReport",
    "HttpBackend",
    "HttpSettings",
    "LexiconJudge",
    "LexiconRewriter",
    "MajorityAggregator",
    "NoisyClassifier",
    "POLICIES",
    "ReplayList",
    "ScriptedBackend",
    "ScriptedPolicy",
    "ScriptedSettings",
    "connect",
    "make_policy",
    "majority",
    "probe",
    "send",
]
