"""A node's live dialogue: identity, backend binding and persistent transcript."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .backend import Backend, BackendBinding, connect, send
from .conversation import Transcript
from .errors import BackendError
from .topology import NetworkTopology, NodeRef


@dataclass
class NodeSession:
    node: NodeRef
    binding: BackendBinding
    transcript: Transcript = None
    system: str = "network"
    backend: Backend = field(default=None, repr=False)

    def __post_init__(self):
        if self.transcript is None:
            self.transcript = Transcript(self.node)
        if self.backend is None:
            self.backend = connect(self.binding)

    @property
    def key(self) -> str:
        return f"{self.system}:{self.node.key()}"

    def instruct(self, text: str) -> None:
        self.transcript.append("system", text)

    def ask(self, text: str, kind: Optional[str] = None) -> str:
        """Append a user turn, fetch the reply and append it; rolls back the user turn on failure."""
        mark = len(self.transcript)
        self.transcript.append("user", text, kind=kind)
        try:
            reply = send(self.binding, self.transcript, self.backend)
        except BaseException:
            self.transcript.truncate(mark)
            raise
        self.transcript.append("assistant", reply, kind=kind)
        return reply


Sessions = dict[NodeRef, NodeSession]


def make_sessions(
    topology: NetworkTopology,
    bindings: dict[NodeRef, BackendBinding],
    system: str = "network",
    instruction: Optional[str] = None,
) -> Sessions:
    sessions = {}
    for node in topology:
        s = NodeSession(node, bindings[node], system=system)
        if instruction:
            s.instruct(instruction)
        sessions[node] = s
    return sessions


def snapshot(sessions: Sessions) -> dict[NodeRef, int]:
    return {node: len(s.transcript) for node, s in sessions.items()}


def restore(sessions: Sessions, marks: dict[NodeRef, int]) -> None:
    for node, length in marks.items():
        sessions[node].transcript.truncate(length)


__all__ = ["BackendError", "NodeSession", "Sessions", "make_sessions", "restore", "snapshot"]
