from __future__ import annotations

import json

import httpx
import pytest

from opal.errors import (
    AuthError,
    ConfigError,
    MissingLogprobsError,
    RateLimitedError,
    TransportError,
    TruncatedOutputError,
)
from opal.gateway import (
    BackendConfig,
    Completion,
    GenerationRequest,
    LiveBackend,
    MockBackend,
    generate,
    prompt_fingerprint,
)
from fixture_tools import make_completion_fixture
from golden_builders import build_none_prompt


@pytest.fixture
def request_doc():
    return GenerationRequest(prompt=build_none_prompt(), model="mock-model")


def _write_fixture(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")


# ---------------------------------------------------------------------------
# request / completion invariants
# ---------------------------------------------------------------------------

def test_temperature_rejected_before_dispatch():
    with pytest.raises(ConfigError):
        GenerationRequest(prompt=build_none_prompt(), model="m", temperature=0.5)


def test_temperature_bounds_accepted():
    GenerationRequest(prompt=build_none_prompt(), model="m", temperature=0.0)
    GenerationRequest(prompt=build_none_prompt(), model="m", temperature=0.15)


def test_token_concat_must_reproduce_text():
    with pytest.raises(TransportError):
        Completion(text="hello", tokens=[("he", -0.1), ("llo!", -0.2)])


def test_positive_logprob_clamped():
    completion = Completion(text="hi", tokens=[("hi", 1e-9)])
    assert completion.tokens[0][1] == 0.0


# ---------------------------------------------------------------------------
# mock backend
# ---------------------------------------------------------------------------

def test_mock_prompt_hash_match_returns_fixture_verbatim(tmp_path, request_doc):
    key = prompt_fingerprint(request_doc.prompt.text)
    special = make_completion_fixture("```cpp\nint special;\n```\noptimizations = []\n")
    _write_fixture(tmp_path / f"{key}.json", special)
    _write_fixture(tmp_path / "default.json", make_completion_fixture("```cpp\nint x;\n```\n"))
    completion = generate(request_doc, MockBackend(tmp_path))
    assert completion.text == special["text"]
    assert completion.tokens == [tuple(t) for t in special["tokens"]]


def test_mock_falls_back_to_default(tmp_path, request_doc):
    default = make_completion_fixture("```cpp\nint x;\n```\n")
    _write_fixture(tmp_path / "default.json", default)
    completion = generate(request_doc, MockBackend(tmp_path))
    assert completion.text == default["text"]


def test_mock_without_any_fixture_errors(tmp_path, request_doc):
    with pytest.raises(ConfigError):
        generate(request_doc, MockBackend(tmp_path))


def test_mock_missing_dir_rejected(tmp_path):
    with pytest.raises(ConfigError):
        MockBackend(tmp_path / "nope")


def test_fixture_without_logprobs_raises_and_carries_completion(tmp_path, request_doc):
    fixture = {"text": "```cpp\nint x;\n```\n", "model": "m", "finished": True}
    _write_fixture(tmp_path / "default.json", fixture)
    with pytest.raises(MissingLogprobsError) as excinfo:
        generate(request_doc, MockBackend(tmp_path))
    assert excinfo.value.completion is not None
    assert excinfo.value.completion.text == fixture["text"]


def test_truncated_fixture_rejected(tmp_path, request_doc):
    fixture = make_completion_fixture("partial", finished=False)
    _write_fixture(tmp_path / "default.json", fixture)
    with pytest.raises(TruncatedOutputError):
        generate(request_doc, MockBackend(tmp_path))


def test_committed_default_fixture_concatenates(fixtures_dir):
    data = json.loads((fixtures_dir / "completions" / "default.json").read_text())
    completion = Completion.from_dict(data)
    assert "".join(t for t, _ in completion.tokens) == completion.text
    assert all(lp <= 0 for _, lp in completion.tokens)


# ---------------------------------------------------------------------------
# live backend
# ---------------------------------------------------------------------------

class FakeResponse:
    def __init__(self, status_code, payload=None):
        self.status_code = status_code
        self._payload = payload or {}

    def json(self):
        return self._payload


def _chat_payload(text="ok", with_logprobs=True, finish="stop"):
    choice = {"message": {"content": text}, "finish_reason": finish}
    if with_logprobs:
        choice["logprobs"] = {"content": [{"token": text, "logprob": -0.25}]}
    return {"choices": [choice], "model": "live-model"}


@pytest.fixture
def live(monkeypatch):
    monkeypatch.setenv("OPAL_API_KEY", "test-key")
    return LiveBackend(url="https://backend.test/v1/chat", backoff_seconds=0.0)


def test_live_requires_api_key(monkeypatch):
    monkeypatch.delenv("OPAL_API_KEY", raising=False)
    with pytest.raises(AuthError):
        LiveBackend(url="https://backend.test/v1/chat")


def test_auth_error_never_retried(monkeypatch, live, request_doc):
    calls = []

    def fake_post(url, **kwargs):
        calls.append(url)
        return FakeResponse(401)

    monkeypatch.setattr(httpx, "post", fake_post)
    with pytest.raises(AuthError):
        live.complete(request_doc)
    assert len(calls) == 1


def test_transient_failure_retried_then_succeeds(monkeypatch, live, request_doc):
    responses = [FakeResponse(500), FakeResponse(503), FakeResponse(200, _chat_payload())]

    def fake_post(url, **kwargs):
        return responses.pop(0)

    monkeypatch.setattr(httpx, "post", fake_post)
    completion = live.complete(request_doc)
    assert completion.text == "ok"
    assert completion.tokens == [("ok", -0.25)]


def test_rate_limit_exhausts_retries(monkeypatch, live, request_doc):
    calls = []

    def fake_post(url, **kwargs):
        calls.append(url)
        return FakeResponse(429)

    monkeypatch.setattr(httpx, "post", fake_post)
    with pytest.raises(RateLimitedError):
        live.complete(request_doc)
    assert len(calls) == live.max_retries + 1


def test_transport_error_exhausts_retries(monkeypatch, live, request_doc):
    def fake_post(url, **kwargs):
        raise httpx.ConnectError("refused")

    monkeypatch.setattr(httpx, "post", fake_post)
    with pytest.raises(TransportError):
        live.complete(request_doc)


def test_live_missing_logprobs(monkeypatch, live, request_doc):
    monkeypatch.setattr(
        httpx, "post", lambda url, **kw: FakeResponse(200, _chat_payload(with_logprobs=False))
    )
    with pytest.raises(MissingLogprobsError) as excinfo:
        live.complete(request_doc)
    assert excinfo.value.completion.text == "ok"


def test_live_truncated_output(monkeypatch, live, request_doc):
    monkeypatch.setattr(
        httpx, "post", lambda url, **kw: FakeResponse(200, _chat_payload(finish="length"))
    )
    with pytest.raises(TruncatedOutputError):
        live.complete(request_doc)


def test_backend_config_validation():
    with pytest.raises(ConfigError):
        BackendConfig.from_dict({"mode": "bogus"})
    with pytest.raises(ConfigError):
        BackendConfig.from_dict({"nope": 1})
    config = BackendConfig.from_dict({"mode": "mock", "fixtures_dir": "/tmp/fx"})
    assert config.fixtures_dir == "/tmp/fx"
