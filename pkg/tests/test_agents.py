from __future__ import annotations

import json

import httpx
import pytest

from spec_anvil.agents import (
    AgentRole,
    AgentTurn,
    ContextBlock,
    CostRecord,
    MalformedOutput,
    MalformedPatch,
    Transcript,
    UnbindableSpec,
    account,
    architect_infer,
    engineer_build,
    fixer_context,
    fixer_repair,
    parse_architect_reply,
    parse_engineer_reply,
    parse_fixer_reply,
)
from spec_anvil.backends import (
    API_KEY_ENV,
    BackendError,
    RemoteChatBackend,
    ScriptedBackend,
    ScriptExhausted,
    context_digest,
    estimate_tokens,
)
from spec_anvil.gherkin import parse, render
from spec_anvil.harness import ScopeViolation, Variant, checkout, collect_failure_report, run_tests

from conftest import TOY_SPECS

GOOD_ARCHITECT = """\
The rounding helper truncates instead of rounding halves up.

```gherkin
Feature: Rounding
  Scenario: Tie
    When I call "round_half" from "calc.num" with [2.5]
    Then the result should be 3
```
"""

FIXER_REPLY = """\
Use floor(x + 0.5).

=== FILE: src/calc/num.py ===
import math
=== END ===
"""


def transcript(defect_id="calc-5", mode="enlightened"):
    return Transcript(f"{defect_id}/{mode}", defect_id, mode)


@pytest.fixture()
def calc5(toy_corpus):
    defect = toy_corpus.get("calc-5")
    ws = checkout(defect, Variant.BUGGY)
    report = collect_failure_report(run_tests(ws, defect.test_command))
    yield defect, ws, report
    ws.cleanup()


# ---------------------------------------------------------------------------
# reply parsers
# ---------------------------------------------------------------------------

def test_parse_architect_reply():
    out = parse_architect_reply(GOOD_ARCHITECT)
    assert out.root_cause_analysis.startswith("The rounding helper")
    assert out.spec.scenarios[0].steps[1].text == "the result should be 3"


@pytest.mark.parametrize("text,needle", [
    ("no fence at all", "exactly one"),
    ("analysis\n```gherkin\nFeature: A\n  Scenario: a\n    Then x\n```\n```gherkin\nFeature: B\n```\n", "exactly one"),
    ("```gherkin\nFeature: A\n  Scenario: a\n    Then x\n```\n", "root cause"),
    ("why\n```gherkin\nFeature: A\n  Scenario Outline: a\n```\n", "does not parse"),
    ("why\n```gherkin\nFeature: A\n  Scenario: a\n    Given x\n```\n", "no Then step"),
])
def test_parse_architect_reply_rejects(text, needle):
    with pytest.raises(ValueError, match=needle):
        parse_architect_reply(text)


def test_parse_engineer_reply_fenced_and_bare():
    spec = parse((TOY_SPECS / "calc-5" / "spec.feature").read_text())
    doc = (TOY_SPECS / "bindings.json").read_text()
    assert parse_engineer_reply(f"Here you go:\n```json\n{doc}```\n", spec).bindings
    assert parse_engineer_reply(doc, spec).bindings
    with pytest.raises(ValueError, match="without a binding"):
        parse_engineer_reply((TOY_SPECS / "broken-bindings.json").read_text(), spec)
    with pytest.raises(ValueError, match="JSON"):
        parse_engineer_reply("{", spec)


def test_parse_fixer_reply():
    patch = parse_fixer_reply(FIXER_REPLY)
    assert patch.paths == ["src/calc/num.py"]
    assert patch.edits[0].content == "import math\n"
    assert patch.rationale == "Use floor(x + 0.5)."
    two = parse_fixer_reply("=== FILE: a.py ===\nA\n=== FILE: b.py ===\nB\n")
    assert [(e.path, e.content) for e in two.edits] == [("a.py", "A\n"), ("b.py", "B\n")]
    with pytest.raises(ValueError):
        parse_fixer_reply("just prose")
    with pytest.raises(ValueError):
        parse_fixer_reply("=== FILE: a.py ===\nA\n=== FILE: a.py ===\nB\n")


# ---------------------------------------------------------------------------
# agent operations
# ---------------------------------------------------------------------------

def test_architect_reasks_after_bad_format(calc5):
    defect, ws, report = calc5
    backend = ScriptedBackend(responses={("calc-5", "enlightened", "architect"): ["nonsense", GOOD_ARCHITECT]})
    t = transcript()
    out = architect_infer(report, [], backend, t)
    assert out.spec.title == "Rounding"
    assert len(t.turns) == 2
    assert "### format_error" in t.turns[1].prompt and "### previous_response\nnonsense" in t.turns[1].prompt


def test_architect_gives_up_after_reasks(calc5):
    _, _, report = calc5
    backend = ScriptedBackend(responses={("calc-5", "enlightened", "architect"): ["x", "y", "z", GOOD_ARCHITECT]})
    t = transcript()
    with pytest.raises(MalformedOutput):
        architect_infer(report, [], backend, t)
    assert len(t.turns) == 3


def test_architect_feedback_block(calc5):
    _, _, report = calc5
    backend = ScriptedBackend(responses={("calc-5", "enlightened", "architect"): [GOOD_ARCHITECT]})
    t = transcript()
    architect_infer(report, [], backend, t, feedback="rejected: SpecTooWeak")
    assert "### verification_feedback\nrejected: SpecTooWeak" in t.turns[0].prompt
    assert "### failure_report" in t.turns[0].prompt


def test_engineer_unbindable(calc5):
    defect, ws, _ = calc5
    spec = parse((TOY_SPECS / "calc-5" / "spec.feature").read_text())
    broken = (TOY_SPECS / "broken-bindings.json").read_text()
    backend = ScriptedBackend(responses={("calc-5", "enlightened", "engineer"): [broken] * 3})
    with pytest.raises(UnbindableSpec):
        engineer_build(spec, defect, ws, backend, transcript())


def test_fixer_context_enlightened_adds_only_spec(calc5):
    defect, ws, report = calc5
    spec = parse((TOY_SPECS / "calc-5" / "spec.feature").read_text())
    blind = fixer_context(defect, ws, report)
    enlightened = fixer_context(defect, ws, report, spec)
    assert enlightened[:-1] == blind
    assert enlightened[-1] == ContextBlock("specification", render(spec))
    names = [b.name for b in blind]
    assert names[:2] == ["instructions", "failure_report"]
    assert f"production_source: {defect.scope}" in names


def test_fixer_scope_violation(calc5):
    defect, ws, report = calc5
    reply = f"=== FILE: {defect.scope} ===\nx = 1\n=== FILE: README.md ===\nhi\n"
    backend = ScriptedBackend(responses={("calc-5", "blind", "fixer"): [reply]})
    with pytest.raises(ScopeViolation):
        fixer_repair(defect, ws, report, backend, transcript(mode="blind"))


def test_fixer_malformed(calc5):
    defect, ws, report = calc5
    backend = ScriptedBackend(responses={("calc-5", "blind", "fixer"): ["no", "still no", "nope"]})
    with pytest.raises(MalformedPatch):
        fixer_repair(defect, ws, report, backend, transcript(mode="blind"))


def test_account_and_cost_record_round_trip():
    t = transcript()
    t.add(AgentTurn(AgentRole.FIXER, "", "a", 10, 5, 1.5))
    t.add(AgentTurn(AgentRole.FIXER, "", "b", 1, 1, 0.5))
    t.add(AgentTurn(AgentRole.ARCHITECT, "", "c", 100, 0, 3.0))
    fixer = account(t, AgentRole.FIXER)
    assert (fixer.turns, fixer.tokens, fixer.duration_s) == (2, 17, 2.0)
    assert account(t, AgentRole.ENGINEER) == CostRecord(AgentRole.ENGINEER, 0, 0, 0)
    assert CostRecord.from_json(fixer.to_json()) == fixer
    with pytest.raises(ValueError):
        AgentTurn(AgentRole.FIXER, "", "", -1, 0, 0)


# ---------------------------------------------------------------------------
# scripted backend
# ---------------------------------------------------------------------------

def test_scripted_backend_files_meta_and_digest(tmp_path):
    role_dir = tmp_path / "d1" / "blind" / "fixer"
    role_dir.mkdir(parents=True)
    (role_dir / "001.txt").write_text("first")
    (role_dir / "002.txt").write_text("second")
    (role_dir / "002.meta.json").write_text(json.dumps({"prompt_tokens": 7, "completion_tokens": 3, "duration_s": 2.5}))
    backend = ScriptedBackend(tmp_path)
    t = transcript("d1", "blind")
    ctx = [ContextBlock("instructions", "do it")]
    a = t.add(backend.respond(AgentRole.FIXER, ctx, t))
    b = t.add(backend.respond(AgentRole.FIXER, ctx, t))
    assert (a.response, b.response) == ("first", "second")
    assert a.completion_tokens == estimate_tokens("first") == 2
    assert (b.prompt_tokens, b.completion_tokens, b.duration) == (7, 3, 2.5)
    with pytest.raises(ScriptExhausted):
        backend.respond(AgentRole.FIXER, ctx, t)
    special = [ContextBlock("instructions", "special")]
    digest_dir = tmp_path / "by-digest" / "fixer"
    digest_dir.mkdir(parents=True)
    (digest_dir / f"{context_digest(special)}.txt").write_text("by digest")
    assert backend.respond(AgentRole.FIXER, special, t).response == "by digest"
    with pytest.raises(ValueError):
        backend.respond(AgentRole.FIXER, [], t)


# ---------------------------------------------------------------------------
# remote backend
# ---------------------------------------------------------------------------

def chat_body(text="hello", usage=True):
    body = {"choices": [{"message": {"role": "assistant", "content": text}}]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 4}
    return body


def remote(handler, **kw):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    sleeps = []
    backend = RemoteChatBackend("https://llm.invalid/v1/chat", "m1", client=client, sleep=sleeps.append, **kw)
    return backend, sleeps


CTX = [ContextBlock("instructions", "repair it")]


def test_remote_request_shape_and_key_from_env(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sekret")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=chat_body())

    backend, _ = remote(handler)
    turn = backend.respond(AgentRole.FIXER, CTX, transcript())
    assert turn.response == "hello" and (turn.prompt_tokens, turn.completion_tokens) == (11, 4)
    assert seen["auth"] == "Bearer sekret"
    body = seen["body"]
    assert body["model"] == "m1" and body["temperature"] == 0
    assert [m["role"] for m in body["messages"]] == ["system", "user"]
    assert body["messages"][1]["content"] == "### instructions\nrepair it\n"
    assert "sekret" not in repr(backend)


def test_remote_retries_with_backoff():
    statuses = iter([500, 429, 200])

    def handler(request):
        code = next(statuses)
        return httpx.Response(code, json=chat_body() if code == 200 else {})

    backend, sleeps = remote(handler, retries=2, backoff=0.5)
    assert backend.respond(AgentRole.ARCHITECT, CTX, transcript()).response == "hello"
    assert sleeps == [0.5, 1.0]


def test_remote_gives_up():
    def handler(request):
        raise httpx.ConnectError("down", request=request)

    backend, sleeps = remote(handler, retries=1)
    with pytest.raises(BackendError, match="2 tries"):
        backend.respond(AgentRole.FIXER, CTX, transcript())
    assert len(sleeps) == 1


def test_remote_client_error_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    backend, _ = remote(handler)
    with pytest.raises(BackendError, match="401"):
        backend.respond(AgentRole.FIXER, CTX, transcript())
    assert len(calls) == 1


def test_remote_malformed_body_and_estimated_usage():
    backend, _ = remote(lambda r: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(BackendError):
        backend.respond(AgentRole.FIXER, CTX, transcript())
    backend, _ = remote(lambda r: httpx.Response(200, json=chat_body("abcdefgh", usage=False)))
    turn = backend.respond(AgentRole.FIXER, CTX, transcript())
    assert turn.completion_tokens == 2
