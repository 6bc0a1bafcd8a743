import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from guessbench.agents import AgentConfig, simple_decide
from guessbench.backends import HttpChatBackend, RetryPolicy, ScriptedStub, TransportError, make_backend
from guessbench.game import GameSpec, describe_game

PROMPT = describe_game(GameSpec(low=100, high=200)).text


def _stub(rules, pools=None):
    return ScriptedStub(rules, pools)


def test_placeholders_and_low_shift():
    stub = _stub([{"responses": ["{low}-{high} {pick:p+low} {cycle:p} {cycle:p+low}"]}], {"p": [1, 2, 3]})
    text = stub.complete(PROMPT, model="m", settings={}, seed=1, episode=4).text
    low, high, picked, cycled, shifted = text.replace("-", " ").split()
    assert (low, high) == ("100", "200")
    assert int(picked) in (101, 102, 103)
    assert (cycled, shifted) == ("2", "102")


def test_stub_is_deterministic_and_independent_of_range():
    stub = _stub([{"responses": ["a {uniform:0:50+low}", "b {uniform:0:50+low}"]}])
    base = describe_game(GameSpec()).text
    draws = [stub.complete(base, model="m", settings={}, seed=s, episode=s).text for s in range(20)]
    again = [stub.complete(base, model="m", settings={}, seed=s, episode=s).text for s in range(20)]
    shifted = [stub.complete(PROMPT, model="m", settings={}, seed=s, episode=s).text for s in range(20)]
    assert draws == again
    for d, s in zip(draws, shifted):
        assert d.split()[0] == s.split()[0] and int(s.split()[1]) == int(d.split()[1]) + 100
    assert stub.calls == 60 and stub.network_calls == 0


def test_rule_selection_by_model_and_pattern():
    stub = _stub([{"model": "big", "match": "guessing", "responses": ["big"]},
                  {"match": "guessing", "responses": ["any"]}])
    assert stub.complete(PROMPT, model="big-1", settings={}, seed=0, episode=0).text == "big"
    assert stub.complete(PROMPT, model="small", settings={}, seed=0, episode=0).text == "any"
    with pytest.raises(ValueError):
        stub.complete("unrelated", model="small", settings={}, seed=0, episode=0)


def test_fail_rule_raises_transport_error():
    stub = _stub([{"fail": True}])
    with pytest.raises(TransportError):
        stub.complete(PROMPT, model="m", settings={}, seed=0, episode=0)


def test_pools_from_file(tmp_path):
    (tmp_path / "h.csv").write_text("cohort,guess\nstudent,10\nexpert,0\nstudent,20\n")
    (tmp_path / "s.yaml").write_text(
        "pools:\n  s: {csv: h.csv, cohort: student}\n  r: {range: [5, 7]}\n"
        "rules:\n  - responses: ['{cycle:s} {cycle:r}']\n")
    stub = make_backend({"kind": "stub", "script": "s.yaml"}, tmp_path)
    assert stub.pools == {"s": [10, 20], "r": [5, 6, 7]}
    assert stub.complete(PROMPT, model="m", settings={}, seed=0, episode=1).text == "20 6"


# -- HTTP ---------------------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    script: list = []
    seen: list = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.seen.append({"path": self.path, "auth": self.headers.get("Authorization"), "body": body})
        status, payload = self.script.pop(0)
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.script, _Handler.seen = [], []
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}/v1", _Handler
    srv.shutdown()


def _reply(text, usage=True):
    body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": 111, "completion_tokens": 7}
    return 200, body


def test_http_wire_format_and_usage(server, monkeypatch):
    url, handler = server
    monkeypatch.setenv("TEST_KEY", "sekrit")
    handler.script = [_reply("FINAL ANSWER: 21")]
    backend = HttpChatBackend(url, api_key_env="TEST_KEY", model_map={"haiku": "vendor-haiku"}, send_seed=True)
    trace = simple_decide(backend, AgentConfig("simple", "haiku", 0), describe_game(GameSpec()),
                          seed=5, settings={"temperature": 0.7, "max_tokens": None}, cell_id="S")
    req = handler.seen[0]
    assert req["path"] == "/v1/chat/completions" and req["auth"] == "Bearer sekrit"
    assert req["body"]["model"] == "vendor-haiku" and req["body"]["seed"] == 5
    assert req["body"]["temperature"] == 0.7 and "max_tokens" not in req["body"]
    assert req["body"]["messages"] == [{"role": "user", "content": trace.prompts[0]}]
    assert trace.guess == 21 and trace.tokens_in == 111 and trace.tokens_out == 7 and not trace.tokens_approx
    assert "sekrit" not in trace.to_json()
    assert backend.network_calls == 1


def test_http_retries_server_errors(server):
    url, handler = server
    handler.script = [(503, {"error": "busy"}), (429, {"error": "slow down"}), _reply("FINAL ANSWER: 9", False)]
    backend = HttpChatBackend(url)
    trace = simple_decide(backend, AgentConfig("simple", "haiku", 0), describe_game(GameSpec()),
                          retry=RetryPolicy(attempts=3, backoff=0), cell_id="S")
    assert trace.guess == 9 and trace.tokens_approx and backend.network_calls == 3


def test_http_client_error_becomes_failed_trace(server):
    url, handler = server
    handler.script = [(400, {"error": "bad request"})]
    trace = simple_decide(HttpChatBackend(url), AgentConfig("simple", "haiku", 0), describe_game(GameSpec()),
                          retry=RetryPolicy(attempts=1, backoff=0), cell_id="S")
    assert trace.status == "failed" and "400" in trace.error


def test_unknown_backend_kind():
    with pytest.raises(ValueError):
        make_backend({"kind": "carrier-pigeon"})
