"""Chat-completion backends: an OpenAI-compatible HTTP client and scripted mocks.

The HTTP client retries transient failures (timeouts, connection errors, 429,
5xx) with exponential backoff. Credentials come from the INTENTREE_API_KEY or
OPENAI_API_KEY environment variables and are never written to logs or audit
files.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import requests

from .errors import BackendError, ValidationError

ROLES = ("system", "user", "assistant")

DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRY_CAP = 5
DEFAULT_BACKOFF_BASE = 1.0


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.0
    max_tokens: int = 256
    model_id: str = "default"

    def __post_init__(self):
        if not self.messages:
            raise ValidationError("chat requests need at least one message")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValidationError(f"unknown message role {role!r}")
        if self.messages[-1][0] != "user":
            raise ValidationError("the last chat message must be a user message")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValidationError("max_tokens must be positive")

    def last_user_content(self) -> str:
        return self.messages[-1][1]


@dataclass
class ChatResponse:
    content: str
    usage: Optional[dict] = None
    latency: float = 0.0
    retries: int = 0
    backoff_schedule: list[float] = field(default_factory=list)


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


class AuditLog:
    """Append-only JSONL log of request/response pairs (no credentials)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, request: ChatRequest, response: ChatResponse) -> None:
        entry = {
            "ts": time.time(),
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "content": response.content,
            "latency": response.latency,
            "retries": response.retries,
            "backoff_schedule": response.backoff_schedule,
        }
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


class AuditedBackend:
    """Delegates to another backend and records every exchange."""

    def __init__(self, inner: "ChatBackend", audit: AuditLog):
        self.inner = inner
        self.audit = audit

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.audit.record(request, response)
        return response


def _wrap_audit(backend, audit: Optional[AuditLog]):
    if audit is None:
        return backend
    return AuditedBackend(backend, audit)


class HttpChatBackend:
    """OpenAI-style chat completions over HTTP.

    ``endpoint`` is the full URL of the chat-completions route, e.g.
    ``http://localhost:8000/v1/chat/completions``.
    """

    RETRYABLE_STATUSES = {429, 500, 502, 503, 504}

    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT,
        retry_cap: int = DEFAULT_RETRY_CAP,
        backoff_base: float = DEFAULT_BACKOFF_BASE,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key or os.environ.get("INTENTREE_API_KEY") or os.environ.get(
            "OPENAI_API_KEY"
        )
        self.timeout = timeout
        self.retry_cap = retry_cap
        self.backoff_base = backoff_base
        self.session = session or requests.Session()

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        backoff_schedule: list[float] = []
        started = time.monotonic()
        attempt = 0
        while True:
            retry_reason = None
            try:
                reply = self.session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                retry_reason = f"network error: {exc}"
            else:
                if reply.status_code == 200:
                    content = self._extract_content(reply)
                    usage = None
                    try:
                        usage = reply.json().get("usage")
                    except ValueError:
                        pass
                    return ChatResponse(
                        content=content,
                        usage=usage,
                        latency=time.monotonic() - started,
                        retries=attempt,
                        backoff_schedule=backoff_schedule,
                    )
                if reply.status_code in self.RETRYABLE_STATUSES:
                    retry_reason = f"HTTP {reply.status_code}"
                else:
                    raise BackendError(
                        f"non-retryable HTTP {reply.status_code} from {self.endpoint}"
                    )

            if attempt >= self.retry_cap:
                raise BackendError(
                    f"backend failed after {attempt} retries ({retry_reason})"
                )
            delay = self.backoff_base * (2**attempt)
            backoff_schedule.append(delay)
            time.sleep(delay)
            attempt += 1

    @staticmethod
    def _extract_content(reply: requests.Response) -> str:
        try:
            payload = reply.json()
        except ValueError as exc:
            raise BackendError(f"backend returned non-JSON body: {exc}") from exc
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"backend response schema violation: {exc}") from exc
        if content is None:
            content = ""
        if not isinstance(content, str):
            raise BackendError("backend message content is not a string")
        return content


class ScriptedMockBackend:
    """Deterministic in-memory backend for tests and offline pipelines.

    Three script forms, checked in this order:

    * ``queue``: ordered answers, served once each; exhausted -> error.
    * ``patterns``: substring -> answer map over the last user message; nested
      patterns (one a substring of another) are rejected at construction and
      a message matching several patterns is an error.
    * ``rules``: ordered list of {"match_all": [...], "answer": ...}; the
      first rule whose substrings all occur in the last user message wins.
    """

    def __init__(
        self,
        queue: Optional[Sequence[str]] = None,
        patterns: Optional[dict[str, str]] = None,
        rules: Optional[Sequence[dict]] = None,
    ):
        forms = sum(x is not None for x in (queue, patterns, rules))
        if forms != 1:
            raise ValidationError("scripted mock needs exactly one of queue/patterns/rules")
        if queue is not None and not queue:
            raise ValidationError("scripted queue must be nonempty")
        if patterns is not None:
            if not patterns:
                raise ValidationError("pattern map must be nonempty")
            keys = sorted(patterns)
            for i, a in enumerate(keys):
                for b in keys[i + 1 :]:
                    if a in b or b in a:
                        raise ValidationError(
                            f"ambiguous overlapping patterns: {a!r} and {b!r}"
                        )
        if rules is not None:
            for rule in rules:
                if "match_all" not in rule or "answer" not in rule:
                    raise ValidationError("rules need 'match_all' and 'answer'")
        self._queue = list(queue) if queue is not None else None
        self._patterns = dict(patterns) if patterns is not None else None
        self._rules = [dict(r) for r in rules] if rules is not None else None
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedMockBackend":
        import yaml

        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: mock script must be a mapping")
        return cls(
            queue=raw.get("queue"),
            patterns=raw.get("patterns"),
            rules=raw.get("rules"),
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        prompt = request.last_user_content()
        with self._lock:
            self.calls += 1
            if self._queue is not None:
                if not self._queue:
                    raise BackendError("scripted mock queue exhausted")
                return ChatResponse(content=self._queue.pop(0))
        if self._patterns is not None:
            hits = [p for p in self._patterns if p in prompt]
            if not hits:
                raise BackendError(f"no scripted pattern matches prompt: {prompt[:80]!r}")
            if len(hits) > 1:
                raise BackendError(f"prompt matches several patterns: {sorted(hits)}")
            return ChatResponse(content=self._patterns[hits[0]])
        assert self._rules is not None
        for rule in self._rules:
            if all(needle in prompt for needle in rule["match_all"]):
                return ChatResponse(content=str(rule["answer"]))
        raise BackendError(f"no scripted rule matches prompt: {prompt[:80]!r}")


def scripted_mock(script) -> ScriptedMockBackend:
    """Build a mock from an ordered answer list or a pattern -> answer map."""
    if isinstance(script, dict):
        return ScriptedMockBackend(patterns=script)
    return ScriptedMockBackend(queue=list(script))


def make_backend(
    kind: str,
    endpoint: Optional[str] = None,
    model: str = "default",
    timeout: float = DEFAULT_TIMEOUT,
    retry_cap: int = DEFAULT_RETRY_CAP,
    backoff_base: float = DEFAULT_BACKOFF_BASE,
    mock_script: Optional[str | Path] = None,
    audit: Optional[str | Path] = None,
) -> ChatBackend:
    """Backend factory used by the CLI; kind is 'http' or 'mock'."""
    audit_log = AuditLog(audit) if audit else None
    if kind == "http":
        if not endpoint:
            raise ValidationError("http backend needs --endpoint")
        return _wrap_audit(
            HttpChatBackend(
                endpoint, timeout=timeout, retry_cap=retry_cap, backoff_base=backoff_base
            ),
            audit_log,
        )
    if kind == "mock":
        if not mock_script:
            raise ValidationError("mock backend needs a script file")
        return _wrap_audit(ScriptedMockBackend.load(mock_script), audit_log)
    raise ValidationError(f"unknown backend kind {kind!r}")
