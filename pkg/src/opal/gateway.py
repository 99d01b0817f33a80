"""Pluggable chat-completion backend with per-token logprobs.

Two backends share one contract: ``complete(request) -> Completion``.

* ``LiveBackend`` speaks the de-facto chat-completions JSON shape over
  HTTP, retries transient transport failures with exponential backoff, and
  never retries authentication errors.  The credential comes from the
  ``OPAL_API_KEY`` environment variable and is never written to config
  files or logs.
* ``MockBackend`` serves completions from a fixture directory keyed by the
  SHA-256 of the prompt text, falling back to a configurable default
  fixture, so the whole pipeline runs deterministic and offline.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AuthError,
    ConfigError,
    MissingLogprobsError,
    RateLimitedError,
    TransportError,
    TruncatedOutputError,
)
from .jsonutil import read_json
from .prompt import PromptDocument

API_KEY_ENV = "OPAL_API_KEY"
MAX_TEMPERATURE = 0.15
DEFAULT_TEMPERATURE = 0.15
DEFAULT_MAX_OUTPUT_TOKENS = 4096
DEFAULT_MAX_RETRIES = 3
DEFAULT_TIMEOUT_SECONDS = 120.0
DEFAULT_FIXTURE = "default.json"


@dataclass
class BackendConfig:
    mode: str = "mock"  # "live" or "mock"
    url: str = ""
    model: str = "gpt-4o"
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    max_retries: int = DEFAULT_MAX_RETRIES
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS
    fixtures_dir: str = ""
    default_fixture: str = DEFAULT_FIXTURE

    @classmethod
    def from_dict(cls, data: dict) -> "BackendConfig":
        config = cls()
        unknown = set(data) - set(vars(config))
        if unknown:
            raise ConfigError(f"unknown backend config key(s): {', '.join(sorted(unknown))}")
        for key, value in data.items():
            setattr(config, key, value)
        if config.mode not in ("live", "mock"):
            raise ConfigError(f"backend.mode must be 'live' or 'mock', got {config.mode!r}")
        return config


@dataclass(frozen=True)
class GenerationRequest:
    prompt: PromptDocument
    model: str
    temperature: float = DEFAULT_TEMPERATURE
    logprobs: bool = True
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        if not 0.0 <= self.temperature <= MAX_TEMPERATURE:
            raise ConfigError(
                f"temperature must be within [0, {MAX_TEMPERATURE}] for reproducible decoding, "
                f"got {self.temperature}"
            )
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")


@dataclass
class Completion:
    text: str
    tokens: list[tuple[str, float]] = field(default_factory=list)
    model: str = ""
    finished: bool = True

    def __post_init__(self):
        if self.tokens:
            joined = "".join(t for t, _ in self.tokens)
            if joined != self.text:
                raise TransportError("token stream does not concatenate to the completion text")
            # float noise may nudge a certain token's logprob above zero
            self.tokens = [(t, min(lp, 0.0)) for t, lp in self.tokens]

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tokens": [[t, lp] for t, lp in self.tokens],
            "model": self.model,
            "finished": self.finished,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Completion":
        return cls(
            text=data["text"],
            tokens=[(t, float(lp)) for t, lp in data.get("tokens") or []],
            model=data.get("model", ""),
            finished=bool(data.get("finished", True)),
        )


def prompt_fingerprint(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


class MockBackend:
    """Deterministic fixture-backed completions for tests and offline runs."""

    def __init__(self, fixtures_dir: str | Path, default_fixture: str = DEFAULT_FIXTURE):
        self.fixtures_dir = Path(fixtures_dir)
        self.default_fixture = default_fixture
        if not self.fixtures_dir.is_dir():
            raise ConfigError(f"mock fixtures directory {self.fixtures_dir} does not exist")

    def complete(self, request: GenerationRequest) -> Completion:
        key = prompt_fingerprint(request.prompt.text)
        path = self.fixtures_dir / f"{key}.json"
        if not path.is_file():
            path = self.fixtures_dir / self.default_fixture
        if not path.is_file():
            raise ConfigError(
                f"no fixture for prompt {key[:12]}... and no default fixture "
                f"{self.default_fixture!r} in {self.fixtures_dir}"
            )
        data = read_json(path)
        completion = Completion.from_dict(data)
        return _finalize(completion, request)


class LiveBackend:
    """HTTP chat-completions backend (messages array + logprobs flag).

    Every transport call is bounded by ``timeout_seconds``, so cancelling a
    job never waits on the backend longer than one timeout window.
    """

    def __init__(
        self,
        url: str,
        model: str = "",
        max_retries: int = DEFAULT_MAX_RETRIES,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
        backoff_seconds: float = 0.5,
        api_key: str | None = None,
    ):
        if not url:
            raise ConfigError("live backend requires backend.url")
        self.url = url
        self.model = model
        self.max_retries = max_retries
        self.timeout_seconds = timeout_seconds
        self.backoff_seconds = backoff_seconds
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.api_key:
            raise AuthError(f"set {API_KEY_ENV} to use the live backend")

    def complete(self, request: GenerationRequest) -> Completion:
        import httpx

        payload = {
            "model": request.model or self.model,
            "messages": [{"role": "user", "content": request.prompt.text}],
            "temperature": request.temperature,
            "logprobs": request.logprobs,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}

        last_error: Exception | None = None
        rate_limited = False
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_seconds * 2 ** (attempt - 1))
            try:
                response = httpx.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout_seconds
                )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"backend rejected the credential (HTTP {response.status_code})")
            if response.status_code == 429:
                rate_limited = True
                last_error = TransportError("HTTP 429")
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"backend returned HTTP {response.status_code}")
            return _finalize(self._parse(response.json()), request)

        if rate_limited:
            raise RateLimitedError(f"rate limited after {self.max_retries} retries")
        raise TransportError(f"transport failed after {self.max_retries} retries: {last_error}")

    @staticmethod
    def _parse(data: dict) -> Completion:
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed backend response: {exc}") from exc
        tokens: list[tuple[str, float]] = []
        logprobs = choice.get("logprobs") or {}
        for entry in logprobs.get("content") or []:
            tokens.append((entry["token"], float(entry["logprob"])))
        return Completion(
            text=text,
            tokens=tokens,
            model=data.get("model", ""),
            finished=choice.get("finish_reason", "stop") == "stop",
        )


def _finalize(completion: Completion, request: GenerationRequest) -> Completion:
    if not completion.finished:
        raise TruncatedOutputError("backend returned a truncated completion")
    if request.logprobs and not completion.tokens:
        raise MissingLogprobsError(
            "backend omitted token logprobs; belief tracing unavailable",
            completion=completion,
        )
    return completion


def make_backend(config: BackendConfig):
    if config.mode == "mock":
        if not config.fixtures_dir:
            raise ConfigError("mock backend requires backend.fixtures_dir")
        return MockBackend(config.fixtures_dir, config.default_fixture)
    return LiveBackend(
        url=config.url,
        model=config.model,
        max_retries=config.max_retries,
        timeout_seconds=config.timeout_seconds,
    )


def generate(request: GenerationRequest, backend) -> Completion:
    """Send one prompt, return the full completion with per-token logprobs."""
    return backend.complete(request)
