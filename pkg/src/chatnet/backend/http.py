"""Chat-completions HTTP adapter with retry and exponential backoff."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Optional

import httpx

from ..conversation import Transcript
from ..errors import BackendUnavailable, MalformedResponse

log = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


@dataclass
class HttpSettings:
    endpoint: str
    model: str
    temperature: float = 1.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    max_pairs: Optional[int] = None  # transcript trimming; None keeps everything

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class HttpBackend:
    def __init__(self, settings: HttpSettings, transport: Optional[httpx.BaseTransport] = None):
        self.settings = settings
        self._client = httpx.Client(timeout=settings.timeout, transport=transport)

    def _headers(self) -> dict:
        key = os.environ.get(self.settings.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def payload(self, transcript: Transcript) -> dict:
        return {
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "messages": [
                {"role": m.role, "content": m.text} for m in transcript.window(self.settings.max_pairs)
            ],
        }

    def complete(self, transcript: Transcript) -> str:
        body = self.payload(transcript)
        s = self.settings
        last_error = "no attempt made"
        for attempt in range(s.max_retries + 1):
            if attempt:
                delay = s.backoff * 2 ** (attempt - 1)
                log.warning("retrying %s in %.2fs (%s)", s.endpoint, delay, last_error)
                time.sleep(delay)
            try:
                resp = self._client.post(s.endpoint, json=body, headers=self._headers())
            except httpx.TransportError as exc:
                last_error = repr(exc)
                continue
            if resp.status_code in RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"{s.endpoint} answered HTTP {resp.status_code}: {resp.text[:200]}")
            return _extract(resp)
        raise BackendUnavailable(f"{s.endpoint} unreachable after {s.max_retries + 1} attempts: {last_error}")

    def close(self) -> None:
        self._client.close()


def _extract(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"unexpected response body: {resp.text[:200]!r}") from exc
    if not isinstance(content, str) or not content.strip():
        raise MalformedResponse("empty completion")
    return content
