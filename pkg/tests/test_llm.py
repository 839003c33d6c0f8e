import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from intentree.errors import BackendError, ValidationError
from intentree.llm import (
    AuditLog,
    ChatRequest,
    ChatResponse,
    HttpChatBackend,
    ScriptedMockBackend,
    make_backend,
    scripted_mock,
)


def user_request(content, **kwargs):
    return ChatRequest(messages=(("user", content),), **kwargs)


# -- request validation -------------------------------------------------------


def test_request_needs_messages():
    with pytest.raises(ValidationError):
        ChatRequest(messages=())


def test_request_last_message_must_be_user():
    with pytest.raises(ValidationError):
        ChatRequest(messages=(("user", "hi"), ("assistant", "yo")))


def test_request_rejects_unknown_role():
    with pytest.raises(ValidationError):
        ChatRequest(messages=(("oracle", "hi"),))


def test_request_rejects_bad_numbers():
    with pytest.raises(ValidationError):
        user_request("hi", temperature=-1.0)
    with pytest.raises(ValidationError):
        user_request("hi", max_tokens=0)


# -- scripted mock ------------------------------------------------------------


def test_queue_mock_serves_in_order_then_errors():
    mock = scripted_mock(["Yes", "No"])
    assert mock.complete(user_request("a")).content == "Yes"
    assert mock.complete(user_request("b")).content == "No"
    with pytest.raises(BackendError, match="exhausted"):
        mock.complete(user_request("c"))


def test_pattern_mock_matches_last_user_message():
    mock = scripted_mock({"should you do next": "A", "walk me through": "B"})
    request = ChatRequest(
        messages=(("system", "sys"), ("user", "So what should you do next?"))
    )
    assert mock.complete(request).content == "A"


def test_pattern_mock_rejects_nested_patterns_at_construction():
    with pytest.raises(ValidationError, match="ambiguous"):
        scripted_mock({"a": "1", "ab": "2"})


def test_pattern_mock_errors_on_multiple_hits():
    mock = scripted_mock({"cat": "1", "dog": "2"})
    with pytest.raises(BackendError, match="several"):
        mock.complete(user_request("cat and dog"))


def test_pattern_mock_errors_on_no_hit():
    mock = scripted_mock({"cat": "1"})
    with pytest.raises(BackendError, match="no scripted pattern"):
        mock.complete(user_request("fish"))


def test_rules_mock_first_match_wins():
    mock = ScriptedMockBackend(
        rules=[
            {"match_all": ["alpha", "beta"], "answer": "both"},
            {"match_all": ["alpha"], "answer": "just alpha"},
        ]
    )
    assert mock.complete(user_request("alpha beta gamma")).content == "both"
    assert mock.complete(user_request("alpha gamma")).content == "just alpha"


def test_mock_requires_exactly_one_form():
    with pytest.raises(ValidationError):
        ScriptedMockBackend(queue=["a"], patterns={"x": "y"})
    with pytest.raises(ValidationError):
        ScriptedMockBackend()


# -- HTTP backend against a stub server ---------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    behaviors: list = []  # each entry: ("ok", content) | ("status", code) | ("garbage",)
    seen: list = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).seen.append(body)
        behavior = type(self).behaviors.pop(0) if type(self).behaviors else ("ok", "fallback")
        if behavior[0] == "status":
            self.send_response(behavior[1])
            self.end_headers()
            return
        if behavior[0] == "garbage":
            self.send_response(200)
            self.end_headers()
            self.wfile.write(b"not json")
            return
        payload = {
            "choices": [{"message": {"role": "assistant", "content": behavior[1]}}],
            "usage": {"prompt_tokens": 3, "completion_tokens": 1},
        }
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    _StubHandler.behaviors = []
    _StubHandler.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", _StubHandler
    server.shutdown()


def test_http_backend_round_trip(stub_server):
    url, handler = stub_server
    handler.behaviors = [("ok", "Seek Strategy")]
    backend = HttpChatBackend(url, api_key="sk-test", backoff_base=0.0)
    response = backend.complete(user_request("Which branch?", model_id="m1"))
    assert response.content == "Seek Strategy"
    assert response.usage["completion_tokens"] == 1
    assert response.retries == 0
    assert handler.seen[0]["model"] == "m1"
    assert handler.seen[0]["messages"][-1]["content"] == "Which branch?"


def test_http_backend_retries_transient_statuses(stub_server):
    url, handler = stub_server
    handler.behaviors = [("status", 429), ("status", 503), ("ok", "done")]
    backend = HttpChatBackend(url, backoff_base=0.0)
    response = backend.complete(user_request("x"))
    assert response.content == "done"
    assert response.retries == 2
    assert len(response.backoff_schedule) == 2


def test_http_backend_gives_up_after_retry_cap(stub_server):
    url, handler = stub_server
    handler.behaviors = [("status", 500)] * 10
    backend = HttpChatBackend(url, backoff_base=0.0, retry_cap=2)
    with pytest.raises(BackendError, match="after 2 retries"):
        backend.complete(user_request("x"))


def test_http_backend_non_retryable_status(stub_server):
    url, handler = stub_server
    handler.behaviors = [("status", 401)]
    backend = HttpChatBackend(url, backoff_base=0.0)
    with pytest.raises(BackendError, match="non-retryable"):
        backend.complete(user_request("x"))
    assert len(handler.seen) == 1  # no retry happened


def test_http_backend_schema_violation(stub_server):
    url, handler = stub_server
    handler.behaviors = [("garbage",)]
    backend = HttpChatBackend(url, backoff_base=0.0)
    with pytest.raises(BackendError, match="non-JSON"):
        backend.complete(user_request("x"))


def test_http_backend_unreachable():
    backend = HttpChatBackend(
        "http://127.0.0.1:1/v1/chat/completions", backoff_base=0.0, retry_cap=1
    )
    with pytest.raises(BackendError):
        backend.complete(user_request("x"))


# -- audit log ----------------------------------------------------------------


def test_audit_log_records_exchange_without_credentials(tmp_path):
    audit_path = tmp_path / "audit.jsonl"
    backend = make_backend("mock", mock_script=_write_script(tmp_path), audit=audit_path)
    backend.complete(user_request("hello there"))
    entry = json.loads(audit_path.read_text().splitlines()[0])
    assert entry["content"] == "hi"
    assert entry["messages"][-1]["content"] == "hello there"
    assert "api_key" not in json.dumps(entry).lower()
    assert "authorization" not in json.dumps(entry).lower()


def _write_script(tmp_path):
    script = tmp_path / "script.yaml"
    script.write_text('patterns:\n  "hello": "hi"\n')
    return script


def test_make_backend_unknown_kind():
    with pytest.raises(ValidationError):
        make_backend("carrier-pigeon")


def test_response_defaults():
    response = ChatResponse(content="")
    assert response.content == ""
    assert response.backoff_schedule == []
