"""Run records: line-delimited JSON events, one per line, append-only."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Optional


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@dataclass
class RunRecord:
    events: list[dict] = field(default_factory=list)
    path: Optional[Path] = None
    _fh: Optional[IO[str]] = field(default=None, repr=False)

    def open(self, path: Path) -> "RunRecord":
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8")
        for ev in self.events:
            self._fh.write(dumps(ev) + "\n")
        self._fh.flush()
        return self

    def emit(self, event: str, **data) -> dict:
        ev = {"event": event, "seq": len(self.events), **data}
        self.events.append(ev)
        if self._fh is not None:
            self._fh.write(dumps(ev) + "\n")
            self._fh.flush()
        return ev

    def close(self, complete: bool, error: Optional[str] = None) -> None:
        data = {"complete": complete}
        if error:
            data["error"] = error
        self.emit("end", **data)
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    @property
    def closed(self) -> bool:
        return bool(self.events) and self.events[-1]["event"] == "end"

    @property
    def complete(self) -> bool:
        return bool(self.events) and self.events[-1]["event"] == "end" and self.events[-1]["complete"]

    @property
    def error(self) -> Optional[str]:
        if self.events and self.events[-1]["event"] == "end":
            return self.events[-1].get("error")
        return None

    def of(self, event: str, system: Optional[str] = None) -> Iterator[dict]:
        for ev in self.events:
            if ev["event"] == event and (system is None or ev.get("system") == system):
                yield ev

    def header(self) -> dict:
        return next(self.of("header"))

    def to_text(self) -> str:
        return "".join(dumps(ev) + "\n" for ev in self.events)

    @classmethod
    def read(cls, path: Path) -> "RunRecord":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([json.loads(s) for s in lines if s.strip()], Path(path))
