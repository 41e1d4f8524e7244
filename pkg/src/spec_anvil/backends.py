"""Pluggable model backends.

``ScriptedBackend`` replays fixture files and is fully deterministic.
``RemoteChatBackend`` speaks a chat-completion style HTTP API.

Scripted fixture layout::

    <fixtures_dir>/<defect_id>/<mode>/<role>/001.txt       # first response
    <fixtures_dir>/<defect_id>/<mode>/<role>/001.meta.json  # optional token/duration counts
    <fixtures_dir>/by-digest/<role>/<digest>.txt            # optional, keyed by context digest

``mode`` is ``blind`` or ``enlightened`` and ``role`` is ``architect``,
``engineer`` or ``fixer``. The response index is the number of turns the
role already has in the transcript, so replay needs no mutable state and a
backend can serve concurrent sessions.

Remote request body (POST to the configured endpoint)::

    {"model": <model>, "temperature": 0,
     "messages": [{"role": "system", "content": <role instructions>},
                  {"role": "user", "content": <rendered context blocks>}]}

The reply is read from ``choices[0].message.content`` and token counts from
``usage.prompt_tokens`` / ``usage.completion_tokens``. The API key comes only
from the ``SPEC_ANVIL_API_KEY`` environment variable and is sent as a bearer
token.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .agents import AgentRole, AgentTurn, ContextBlock, Transcript, render_context

log = logging.getLogger(__name__)

API_KEY_ENV = "SPEC_ANVIL_API_KEY"


class BackendError(Exception):
    pass


class ScriptExhausted(BackendError):
    pass


class Backend(Protocol):
    def respond(
        self, role: AgentRole, context: Sequence[ContextBlock], transcript: Transcript
    ) -> AgentTurn: ...


def estimate_tokens(text: str) -> int:
    """Rough count (four characters per token) used when a backend reports none."""
    return math.ceil(len(text) / 4)


def context_digest(context: Sequence[ContextBlock]) -> str:
    return hashlib.sha256(render_context(context).encode("utf-8")).hexdigest()[:16]


class ScriptedBackend:
    def __init__(
        self,
        fixtures_dir: str | os.PathLike[str] | None = None,
        responses: Mapping[tuple[str, str, str], Sequence[str]] | None = None,
    ):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir is not None else None
        self.responses = {k: list(v) for k, v in (responses or {}).items()}

    def _lookup(self, role: AgentRole, context: Sequence[ContextBlock], transcript: Transcript, index: int):
        key = (transcript.defect_id, transcript.mode, role.value.lower())
        if key in self.responses:
            seq = self.responses[key]
            if index < len(seq):
                return seq[index], {}
            raise ScriptExhausted(f"no scripted response #{index + 1} for {'/'.join(key)}")
        if self.fixtures_dir is None:
            raise ScriptExhausted(f"no scripted responses for {'/'.join(key)}")
        by_digest = self.fixtures_dir / "by-digest" / key[2] / f"{context_digest(context)}.txt"
        if by_digest.is_file():
            return by_digest.read_text(encoding="utf-8"), self._meta(by_digest)
        path = self.fixtures_dir.joinpath(*key, f"{index + 1:03d}.txt")
        if not path.is_file():
            raise ScriptExhausted(f"no scripted response {path}")
        return path.read_text(encoding="utf-8"), self._meta(path)

    @staticmethod
    def _meta(path: Path) -> dict:
        meta = path.with_suffix(".meta.json")
        return json.loads(meta.read_text(encoding="utf-8")) if meta.is_file() else {}

    def respond(self, role: AgentRole, context: Sequence[ContextBlock], transcript: Transcript) -> AgentTurn:
        if not context:
            raise ValueError("context must not be empty")
        index = sum(1 for t in transcript.turns if t.role is role)
        text, meta = self._lookup(role, context, transcript, index)
        prompt = render_context(context)
        return AgentTurn(
            role=role,
            request_excerpt=prompt[:200],
            response=text,
            prompt_tokens=int(meta.get("prompt_tokens", estimate_tokens(prompt))),
            completion_tokens=int(meta.get("completion_tokens", estimate_tokens(text))),
            duration=float(meta.get("duration_s", 0.0)),
            prompt=prompt,
        )


SYSTEM_PROMPTS = {
    AgentRole.ARCHITECT: "You reverse-engineer the intended behaviour behind a failing test as a Gherkin feature.",
    AgentRole.ENGINEER: "You write step bindings that make a Gherkin feature executable.",
    AgentRole.FIXER: "You repair a single source file.",
}


@dataclass
class RemoteChatBackend:
    endpoint: str
    model: str
    api_key: str | None = None
    timeout: float = 120.0
    retries: int = 2
    backoff: float = 1.0
    client: httpx.Client | None = None
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self) -> None:
        if self.api_key is None:
            self.api_key = os.environ.get(API_KEY_ENV)
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)

    def __repr__(self) -> str:
        return f"RemoteChatBackend(endpoint={self.endpoint!r}, model={self.model!r})"

    def _post(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = exc
                log.warning("chat request failed (%s), attempt %d", type(exc).__name__, attempt + 1)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendError("response is not JSON") from exc
        raise BackendError(f"chat request failed after {self.retries + 1} tries: {last}")

    def respond(self, role: AgentRole, context: Sequence[ContextBlock], transcript: Transcript) -> AgentTurn:
        if not context:
            raise ValueError("context must not be empty")
        prompt = render_context(context)
        body = {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPTS[role]},
                {"role": "user", "content": prompt},
            ],
        }
        start = time.monotonic()
        doc = self._post(body)
        duration = time.monotonic() - start
        try:
            text = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("response has no choices[0].message.content") from exc
        usage = doc.get("usage") or {}
        return AgentTurn(
            role=role,
            request_excerpt=prompt[:200],
            response=text,
            prompt_tokens=int(usage.get("prompt_tokens", estimate_tokens(prompt))),
            completion_tokens=int(usage.get("completion_tokens", estimate_tokens(text))),
            duration=duration,
            prompt=prompt,
        )
