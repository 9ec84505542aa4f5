"""Chat-completion transports: an OpenAI-compatible HTTP client and a
deterministic fixture-replay mock used by tests and offline runs."""

from __future__ import annotations

import base64
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import BackendError, MockFixtureExhausted

AUTH_TOKEN_ENV = "NAQUERY_API_KEY"


@dataclass(frozen=True)
class ChatResponse:
    content: str
    tokens_in: int
    tokens_out: int
    wall_ms: float


def text_message(role: str, text: str) -> dict:
    return {"role": role, "content": text}


def multimodal_message(role: str, text: str,
                       images: list[tuple[str, bytes]]) -> dict:
    """User message with text plus base64 png parts."""
    parts = [{"type": "text", "text": text}]
    for label, png in images:
        b64 = base64.b64encode(png).decode("ascii")
        parts.append({
            "type": "image_url",
            "image_url": {"url": f"data:image/png;base64,{b64}"},
            "naquery_group": label,
        })
    return {"role": role, "content": parts}


def _approx_tokens(messages) -> int:
    n = 0
    for msg in messages:
        content = msg["content"]
        if isinstance(content, str):
            n += len(content) // 4
        else:
            for part in content:
                if part.get("type") == "text":
                    n += len(part["text"]) // 4
                else:
                    n += 256  # flat per-image charge
    return n


class ChatBackend:
    """Abstract transport. Exactly one concrete configuration applies."""

    name = "abstract"

    def complete(self, messages: list[dict], stage: str) -> ChatResponse:
        raise NotImplementedError


@dataclass
class OpenAICompatibleBackend(ChatBackend):
    base_url: str
    model: str
    api_key: str | None = None
    temperature: float = 0.0
    timeout_s: float = 120.0
    max_retries: int = 2

    name = "openai-compatible"

    def complete(self, messages: list[dict], stage: str) -> ChatResponse:
        token = self.api_key or os.environ.get(AUTH_TOKEN_ENV, "")
        url = self.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.model,
            "messages": [
                {"role": m["role"],
                 "content": m["content"] if isinstance(m["content"], str)
                 else [{k: v for k, v in part.items()
                        if k != "naquery_group"} for part in m["content"]]}
                for m in messages
            ],
            "temperature": self.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last_err = None
        for attempt in range(self.max_retries + 1):
            start = time.monotonic()
            try:
                resp = requests.post(url, json=payload, headers=headers,
                                     timeout=self.timeout_s)
                resp.raise_for_status()
                body = resp.json()
                wall_ms = (time.monotonic() - start) * 1000.0
                usage = body.get("usage", {})
                return ChatResponse(
                    content=body["choices"][0]["message"]["content"] or "",
                    tokens_in=int(usage.get("prompt_tokens",
                                            _approx_tokens(messages))),
                    tokens_out=int(usage.get("completion_tokens", 0)),
                    wall_ms=wall_ms,
                )
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_err = exc
                if attempt < self.max_retries:
                    time.sleep(min(2.0 ** attempt, 8.0))
        raise BackendError(f"{stage}: chat endpoint failed after "
                           f"{self.max_retries + 1} attempts: {last_err}")


@dataclass
class MockBackend(ChatBackend):
    """Replays an ordered fixture of responses.

    Fixture format: JSON lines, each {"stage": ..., "content": ...}.
    Calls for a stage consume that stage's entries in file order; wall
    time is reported as 0 so replayed runs are byte-identical.
    """

    fixture_path: str | Path
    name = "mock"

    def __post_init__(self):
        self._queues: dict[str, list[str]] = {}
        with open(self.fixture_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                self._queues.setdefault(entry["stage"], []).append(
                    entry["content"])
        self.calls: list[str] = []

    def complete(self, messages: list[dict], stage: str) -> ChatResponse:
        queue = self._queues.get(stage, [])
        if not queue:
            raise MockFixtureExhausted(
                f"mock fixture has no remaining response for stage "
                f"{stage!r}")
        content = queue.pop(0)
        self.calls.append(stage)
        return ChatResponse(
            content=content,
            tokens_in=_approx_tokens(messages),
            tokens_out=len(content) // 4,
            wall_ms=0.0,
        )
