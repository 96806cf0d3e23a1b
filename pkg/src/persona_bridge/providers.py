"""Chat-completion and embedding backends.

Two chat backends share one recording front door (:meth:`ChatProvider.complete`):

* :class:`OpenAICompatibleProvider` talks to any ``/chat/completions`` REST
  endpoint with bounded exponential-backoff retries.
* :class:`ScriptedProvider` replays responses keyed by a content hash of the
  full message list, so whole runs can be reproduced offline.

:class:`RecordingProvider` wraps any backend and writes the fixture file a
:class:`ScriptedProvider` later replays.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from ._io import atomic_write, read_json, tokenize
from .errors import (
    ConfigError,
    MissingFixtureError,
    NetworkError,
    ProviderError,
    ProviderHTTPError,
    ProviderTimeoutError,
    ValidationError,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "PB_API_KEY"
ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"unknown chat role {self.role!r}")
        if not isinstance(self.content, str):
            raise ValidationError("message content must be text")
        if self.role != "system" and not self.content.strip():
            raise ValidationError(f"{self.role} message content is empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ChatRequestParams:
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = 1024
    seed: int | None = 0

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValidationError(f"temperature must lie in [0, 2], got {self.temperature}")
        if int(self.max_tokens) < 1:
            raise ValidationError("max_tokens must be positive")


@dataclass(frozen=True)
class ProviderTranscriptRecord:
    provider: str
    messages: list[dict]
    params: dict
    response: str
    latency_ms: float
    timestamp: str

    def to_dict(self) -> dict:
        return asdict(self)


class TranscriptRecorder:
    """Append-only call log, optionally mirrored line by line to a JSONL file."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[ProviderTranscriptRecord] = []
        self._lock = threading.Lock()

    def append(self, record: ProviderTranscriptRecord) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")

    def by_provider(self, name: str) -> list[ProviderTranscriptRecord]:
        with self._lock:
            return [r for r in self.records if r.provider == name]


def message_key(messages: Sequence[ChatMessage | dict]) -> str:
    """Content hash of a full message list; the fixture lookup key."""
    payload = [m.to_dict() if isinstance(m, ChatMessage) else {"role": m["role"], "content": m["content"]} for m in messages]
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _coerce_messages(messages) -> list[ChatMessage]:
    out = [m if isinstance(m, ChatMessage) else ChatMessage(m["role"], m["content"]) for m in messages]
    if not out:
        raise ValidationError("message list is empty")
    if out[-1].role == "assistant":
        raise ValidationError("message list must end with a user or system message")
    return out


class ChatProvider:
    """Base class; subclasses implement :meth:`_generate`."""

    def __init__(
        self,
        name: str = "provider",
        params: ChatRequestParams | None = None,
        recorder: TranscriptRecorder | None = None,
    ):
        self.name = name
        self.params = params or ChatRequestParams()
        self.recorder = recorder

    def _generate(self, messages: list[ChatMessage], params: ChatRequestParams) -> str:
        raise NotImplementedError

    def complete(self, messages, params: ChatRequestParams | None = None) -> str:
        messages = _coerce_messages(messages)
        params = params or self.params
        start = time.perf_counter()
        text = self._generate(messages, params)
        latency = (time.perf_counter() - start) * 1000.0
        if not isinstance(text, str) or not text.strip():
            raise ProviderError(f"{self.name}: empty response")
        if self.recorder is not None:
            self.recorder.append(
                ProviderTranscriptRecord(
                    provider=self.name,
                    messages=[m.to_dict() for m in messages],
                    params=asdict(params),
                    response=text,
                    latency_ms=round(latency, 3),
                    timestamp=datetime.now(timezone.utc).isoformat(),
                )
            )
        return text


class OpenAICompatibleProvider(ChatProvider):
    """Client for ``POST {base_url}/chat/completions``.

    Transport failures, timeouts, 429 and 5xx responses are retried up to
    ``max_attempts`` times in total with sleeps of ``backoff_base *
    backoff_factor**k`` seconds between attempts; everything else surfaces
    immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        params: ChatRequestParams | None = None,
        name: str = "openai",
        recorder: TranscriptRecorder | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        backoff_factor: float = 2.0,
        embedding_model: str | None = None,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if params is None:
            params = ChatRequestParams(model=model)
        super().__init__(name=name, params=params, recorder=recorder)
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.embedding_model = embedding_model
        self.session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, path: str, body: dict) -> dict:
        url = f"{self.base_url}/{path.lstrip('/')}"
        last: ProviderError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_base * self.backoff_factor ** (attempt - 1))
            try:
                resp = self.session.post(url, json=body, headers=self._headers(), timeout=self.timeout)
            except requests.Timeout as exc:
                last = ProviderTimeoutError(f"{url}: timed out after {self.timeout}s ({exc})")
            except requests.RequestException as exc:
                last = NetworkError(f"{url}: {exc}")
            else:
                if 200 <= resp.status_code < 300:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProviderError(f"{url}: response body is not JSON") from exc
                last = ProviderHTTPError(resp.status_code, resp.text)
            logger.warning("%s attempt %d/%d failed: %s", self.name, attempt + 1, self.max_attempts, last)
            if not last.retryable:
                break
        assert last is not None
        raise last

    def _generate(self, messages, params):
        body = {
            "model": params.model or self.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed
        data = self._post("chat/completions", body)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"{self.name}: unexpected response shape: {str(data)[:300]}") from exc
        if not isinstance(content, str) or not content.strip():
            raise ProviderError(f"{self.name}: empty completion")
        return content

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        data = self._post("embeddings", {"model": self.embedding_model or self.model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda d: d.get("index", 0))
            return [np.asarray(r["embedding"], dtype=float) for r in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"{self.name}: unexpected embeddings response") from exc


class ScriptedProvider(ChatProvider):
    """Strict replay: unknown message lists raise :class:`MissingFixtureError`."""

    def __init__(self, fixtures: dict[str, str], name: str = "scripted", params=None, recorder=None):
        super().__init__(name=name, params=params, recorder=recorder)
        self.fixtures = dict(fixtures)
        self.calls = 0

    @classmethod
    def from_file(cls, path, **kwargs) -> "ScriptedProvider":
        return cls(load_fixtures(path), **kwargs)

    def _generate(self, messages, params):
        key = message_key(messages)
        self.calls += 1
        try:
            return self.fixtures[key]
        except KeyError:
            raise MissingFixtureError(key) from None


class CallableProvider(ChatProvider):
    """Adapts a plain ``fn(messages) -> str`` into a provider."""

    def __init__(self, fn: Callable[[list[ChatMessage]], str], name: str = "callable", params=None, recorder=None):
        super().__init__(name=name, params=params, recorder=recorder)
        self.fn = fn

    def _generate(self, messages, params):
        return self.fn(messages)


class RecordingProvider(ChatProvider):
    """Forwards to ``inner`` and collects ``{key_hash: response}`` fixtures."""

    def __init__(self, inner: ChatProvider, path=None, name: str | None = None, recorder=None):
        super().__init__(name=name or inner.name, params=inner.params, recorder=recorder)
        self.inner = inner
        self.path = Path(path) if path is not None else None
        self.fixtures: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self.fixtures.update(load_fixtures(self.path))

    def _generate(self, messages, params):
        text = self.inner._generate(messages, params)
        with self._lock:
            self.fixtures[message_key(messages)] = text
            if self.path is not None:
                save_fixtures(self.path, self.fixtures)
        return text


def load_fixtures(path) -> dict[str, str]:
    try:
        entries = read_json(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"fixture file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"fixture file {path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ConfigError(f"fixture file {path} must hold a JSON array")
    out: dict[str, str] = {}
    for entry in entries:
        try:
            out[entry["key_hash"]] = entry["response"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad fixture entry in {path}: {entry!r}") from exc
    return out


def save_fixtures(path, fixtures: dict[str, str]) -> Path:
    entries = [{"key_hash": k, "response": fixtures[k]} for k in sorted(fixtures)]
    return atomic_write(path, json.dumps(entries, indent=2, ensure_ascii=False) + "\n")


def _check_texts(texts: Sequence[str]) -> None:
    if isinstance(texts, str) or not len(texts):
        raise ValidationError("embed() needs a non-empty list of texts")
    for t in texts:
        if not isinstance(t, str) or not t.strip():
            raise ValidationError("embed() received an empty text")


@dataclass(frozen=True)
class HashingEmbedder:
    """Offline bag-of-words embedder.

    Each lowercased word token lands in bucket ``md5(token)[:8] (little
    endian) mod dim``; the count vector is L2-normalized.
    """

    dim: int = 256

    def bucket(self, token: str) -> int:
        digest = hashlib.md5(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % self.dim

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        _check_texts(texts)
        out = []
        for text in texts:
            tokens = tokenize(text)
            if not tokens:
                raise ValidationError(f"text has no word tokens: {text!r}")
            vec = np.zeros(self.dim)
            for tok in tokens:
                vec[self.bucket(tok)] += 1.0
            out.append(vec / np.linalg.norm(vec))
        return out
