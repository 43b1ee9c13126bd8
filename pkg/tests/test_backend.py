import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from chatnet.backend import (
    ArgmaxClassifier,
    BackendBinding,
    FirstSlotJudge,
    FixedDimClassifier,
    HttpBackend,
    HttpSettings,
    LexiconJudge,
    LexiconRewriter,
    MajorityAggregator,
    NoisyClassifier,
    ReplayList,
    make_policy,
    probe,
    send,
)
from chatnet.backend.scripted import split_references
from chatnet.conversation import Transcript, assemble_forward_input
from chatnet.errors import BackendUnavailable, DivergenceDetected, MalformedResponse, ReplayExhausted
from chatnet.tasks.dmc import parse_batch, parse_category
from chatnet.topology import NodeRef


def ask(policy, text, kind="forward", seed=0, transcript=None):
    t = Transcript(NodeRef(1, 1)) if transcript is None else transcript
    t.append("user", text, kind=kind)
    reply = send(BackendBinding.scripted_policy(policy, seed), t)
    t.append("assistant", reply, kind=kind)
    return reply


def test_argmax_and_fixed():
    assert parse_category(ask(ArgmaxClassifier(), "48, 68, 49")) == 2
    assert parse_category(ask(FixedDimClassifier(3), "48, 68, 49")) == 3


def test_batch_reply_parses():
    q = "Guess each.\n1: 1, 2, 4\n2: 9, 3, 1"
    assert parse_batch(ask(ArgmaxClassifier(), q, kind="eval"), 2) == [3, 1]


def test_majority_aggregator_votes_over_references():
    refs = [(1, "the second category"), (2, "the second category"), (3, "the first category")]
    prompt = assemble_forward_input("10, 20, 30", refs)
    assert parse_category(ask(MajorityAggregator(), prompt)) == 2
    # without references it falls back to the true label
    assert parse_category(ask(MajorityAggregator(), "10, 20, 30")) == 3


def test_split_references_verbatim():
    blocks = ["multi\nline one", "two"]
    prompt = assemble_forward_input("Q", list(enumerate(blocks, start=1)))
    head, got = split_references(prompt)
    assert got == blocks
    assert head.startswith("You need to guess (Q)")


def test_noisy_classifier_rate_and_determinism():
    policy = NoisyClassifier(0.3)
    wrong = 0
    n = 2000
    for k in range(n):
        t = Transcript(NodeRef(1, 1))
        got = parse_category(ask(policy, "10, 20, 30", seed=k, transcript=t))
        wrong += got != 3
    assert abs(wrong / n - 0.3) < 0.04
    assert ask(policy, "10, 20, 30", seed=5) == ask(policy, "10, 20, 30", seed=5)
    with pytest.raises(ValueError):
        NoisyClassifier(1.5)


def test_classifier_kinds():
    t = Transcript(NodeRef(1, 1))
    ask(FixedDimClassifier(1), "1, 2, 3", transcript=t)
    assert ask(FixedDimClassifier(1), "refine your answer", kind="refine", transcript=t).endswith("the first category.")
    assert "Noted" in ask(FixedDimClassifier(1), "1, 2, 3 belongs to the third category.", kind="example", transcript=t)
    fb = ask(FixedDimClassifier(1), "ans\nYou guessed wrong.", kind="feedback", transcript=t)
    assert fb.startswith("Thank you for the feedback")


def test_replay_list():
    p = ReplayList(["a", "b"], expected_prompts=["x", "y"], label="net:1,1")
    assert ask(p, "x") == "a"
    with pytest.raises(DivergenceDetected) as e:
        ask(p, "yz")
    assert (e.value.turn, e.value.offset) == (1, 1)
    assert ask(p, "y") == "b"
    with pytest.raises(ReplayExhausted):
        ask(p, "z")


def test_lexicon_rewriter_levels():
    q = 'Rewrite the following positive sentence by reversing its sentiment: "This movie is interesting."'
    t = Transcript(NodeRef(1, 1))
    first = ask(LexiconRewriter(level=2), q, transcript=t)
    assert first == "This movie is very dull."
    ask(LexiconRewriter(level=2), "do better", kind="feedback", transcript=t)
    # one level per feedback or refine turn, the pending one included: 2 + 2
    assert ask(LexiconRewriter(level=2), "Make it more intense.", kind="refine", transcript=t) == "This movie is incredibly dull."


def test_judges():
    prompt = "Which is more intense?\nSentence A: This is quite dull.\nSentence B: This is extremely dull."
    verdict = ask(LexiconJudge(), prompt, kind="judge")
    assert verdict.startswith("B is more intense")
    assert '"extremely" implies a stronger degree of feeling than "quite"' in verdict
    tie = ask(LexiconJudge(), "Sentence A: x\nSentence B: y", kind="judge")
    assert tie.startswith("Tie")
    assert ask(FirstSlotJudge(), prompt, kind="judge").startswith("A ")


def test_make_policy_registry():
    assert isinstance(make_policy("noisy", p=0.2), NoisyClassifier)
    with pytest.raises(ValueError):
        make_policy("oracle9000")


def test_binding_requires_matching_settings():
    with pytest.raises(ValueError):
        BackendBinding("http")
    with pytest.raises(ValueError):
        BackendBinding("scripted", http=HttpSettings("http://x", "m"))


def test_send_requires_pending_user_turn():
    with pytest.raises(ValueError):
        send(BackendBinding.scripted_policy(ArgmaxClassifier()), Transcript(NodeRef(1, 1)))


# --- HTTP adapter ---------------------------------------------------------

def _completion(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def _transcript():
    t = Transcript(NodeRef(1, 1))
    t.append("system", "sys")
    t.append("user", "hello", kind="forward")
    return t


def test_http_payload_and_auth(monkeypatch):
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return _completion("hi there")

    monkeypatch.setenv("TEST_KEY", "sk-test")
    b = HttpBackend(HttpSettings("http://llm/v1/chat/completions", "m1", temperature=0.5, api_key_env="TEST_KEY"),
                    transport=httpx.MockTransport(handler))
    assert b.complete(_transcript()) == "hi there"
    assert seen["body"] == {"model": "m1", "temperature": 0.5,
                            "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "hello"}]}
    assert seen["auth"] == "Bearer sk-test"


def test_http_retries_then_succeeds(monkeypatch):
    monkeypatch.setattr("chatnet.backend.http.time.sleep", lambda s: delays.append(s))
    delays = []
    answers = iter([httpx.Response(429), httpx.Response(503), _completion("ok")])
    b = HttpBackend(HttpSettings("http://llm", "m", max_retries=3, backoff=0.5),
                    transport=httpx.MockTransport(lambda r: next(answers)))
    assert b.complete(_transcript()) == "ok"
    assert delays == [0.5, 1.0]


def test_http_gives_up(monkeypatch):
    monkeypatch.setattr("chatnet.backend.http.time.sleep", lambda s: None)
    b = HttpBackend(HttpSettings("http://llm", "m", max_retries=2),
                    transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(BackendUnavailable):
        b.complete(_transcript())


def test_http_client_error_not_retried():
    calls = []

    def handler(r):
        calls.append(r)
        return httpx.Response(401, text="bad key")

    b = HttpBackend(HttpSettings("http://llm", "m"), transport=httpx.MockTransport(handler))
    with pytest.raises(BackendUnavailable):
        b.complete(_transcript())
    assert len(calls) == 1


@pytest.mark.parametrize("body", [{"choices": []}, {"choices": [{"message": {"content": "  "}}]}, "not json"])
def test_http_malformed(body):
    resp = httpx.Response(200, text=body) if isinstance(body, str) else httpx.Response(200, json=body)
    b = HttpBackend(HttpSettings("http://llm", "m"), transport=httpx.MockTransport(lambda r: resp))
    with pytest.raises(MalformedResponse):
        b.complete(_transcript())


def test_http_window_trims_history():
    seen = {}

    def handler(request):
        seen["n"] = len(json.loads(request.content)["messages"])
        return _completion("x")

    t = _transcript()
    for k in range(5):
        t.append("assistant", f"a{k}")
        t.append("user", f"u{k}")
    HttpBackend(HttpSettings("http://llm", "m", max_pairs=2), transport=httpx.MockTransport(handler)).complete(t)
    assert seen["n"] == 1 + 2 * 2 + 1


@pytest.fixture
def local_server():
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            last = body["messages"][-1]["content"]
            out = json.dumps({"choices": [{"message": {"content": f"echo: {last}"}}]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    server.shutdown()


def test_http_against_local_server(local_server):
    binding = BackendBinding("http", http=HttpSettings(local_server, "m", max_retries=0))
    t = Transcript(NodeRef(1, 1))
    t.append("user", "ping")
    assert send(binding, t) == "echo: ping"
    report = probe(binding)
    assert report.healthy and report.latency > 0
    assert report.detail.startswith("echo:")


def test_probe_unreachable():
    binding = BackendBinding("http", http=HttpSettings("http://127.0.0.1:9/none", "m", max_retries=0, timeout=2))
    with pytest.raises(BackendUnavailable):
        probe(binding)


def test_probe_scripted():
    r = probe(BackendBinding.scripted_policy(ArgmaxClassifier()))
    assert r.healthy and r.latency == 0.0 and r.detail == "argmax"
