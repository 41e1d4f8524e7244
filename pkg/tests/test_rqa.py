from __future__ import annotations

import itertools
from types import SimpleNamespace

import pytest

from spec_anvil.gherkin import parse
from spec_anvil.harness import ACCESS_LOG, Variant
from spec_anvil.rqa import (
    Exhausted,
    RQAResult,
    ValidatedSpec,
    VerdictKind,
    VerificationVerdict,
    classify,
    negative_only_verify,
    rqa_loop,
    sandwich_verify,
)
from spec_anvil.steps import (
    BindingError,
    FeatureRunReport,
    ScenarioResult,
    ScenarioStatus,
    SpecOutcome,
    read_bindings,
)

from conftest import TOY_SPECS

STATUS_FOR = {
    SpecOutcome.ALL_PASS: ScenarioStatus.PASS,
    SpecOutcome.ANY_ASSERTION_FAIL: ScenarioStatus.ASSERTION_FAIL,
    SpecOutcome.ERROR: ScenarioStatus.SETUP_ERROR,
}

# Independent statement of the verification rules, one row per outcome pair.
EXPECTED = {
    ("AllPass", "AllPass"): ("SpecTooWeak", None),
    ("AllPass", "AnyAssertionFail"): ("SpecTooWeak", None),
    ("AllPass", "Error"): ("SpecTooWeak", None),
    ("AnyAssertionFail", "AllPass"): ("Validated", None),
    ("AnyAssertionFail", "AnyAssertionFail"): ("SpecMisaligned", None),
    ("AnyAssertionFail", "Error"): ("HarnessError", "Fixed"),
    ("Error", "AllPass"): ("HarnessError", "Buggy"),
    ("Error", "AnyAssertionFail"): ("HarnessError", "Buggy"),
    ("Error", "Error"): ("HarnessError", "Buggy"),
}

SPEC = parse((TOY_SPECS / "calc-5" / "spec.feature").read_text())
BINDINGS = read_bindings(TOY_SPECS / "bindings.json")


class FakeRunner:
    """Returns canned outcomes per variant and records which variants ran."""

    def __init__(self, buggy: SpecOutcome, fixed: SpecOutcome):
        self.outcomes = {Variant.BUGGY: buggy, Variant.FIXED: fixed}
        self.ran: list[Variant] = []

    def __call__(self, bound, ws):
        self.ran.append(ws.variant)
        status = STATUS_FOR[self.outcomes[ws.variant]]
        return FeatureRunReport(bound.title, (ScenarioResult("s", status, None, ()),), 0.0)


def test_lattice_table_is_complete():
    assert set(EXPECTED) == {(a.value, b.value) for a, b in itertools.product(SpecOutcome, repeat=2)}


@pytest.mark.parametrize("buggy,fixed", list(itertools.product(SpecOutcome, repeat=2)))
def test_classify_lattice(buggy, fixed):
    kind, side = EXPECTED[(buggy.value, fixed.value)]
    verdict = classify(buggy, fixed)
    assert verdict.kind.value == kind
    assert (verdict.side.value if verdict.side else None) == side


@pytest.mark.parametrize("buggy,fixed", list(itertools.product(SpecOutcome, repeat=2)))
def test_sandwich_short_circuit(toy_corpus, buggy, fixed):
    runner = FakeRunner(buggy, fixed)
    result = sandwich_verify(SPEC, BINDINGS, toy_corpus.get("calc-5"), runner=runner)
    kind, _ = EXPECTED[(buggy.value, fixed.value)]
    assert result.verdict.kind.value == kind
    if buggy is SpecOutcome.ANY_ASSERTION_FAIL:
        assert runner.ran == [Variant.BUGGY, Variant.FIXED]
        assert result.fixed_report is not None
    else:
        assert runner.ran == [Variant.BUGGY]
        assert result.fixed_report is None


def test_harness_error_requires_side():
    with pytest.raises(ValueError):
        VerificationVerdict(VerdictKind.HARNESS_ERROR, "x")


def test_classify_needs_fixed_when_buggy_fails():
    with pytest.raises(ValueError):
        classify(SpecOutcome.ANY_ASSERTION_FAIL, None)


@pytest.mark.parametrize("feature,kind", [
    ("spec.feature", VerdictKind.VALIDATED),
    ("vacuous.feature", VerdictKind.SPEC_TOO_WEAK),
    ("misaligned.feature", VerdictKind.SPEC_MISALIGNED),
])
def test_real_sandwich_on_toy_specs(toy_corpus, feature, kind):
    spec = parse((TOY_SPECS / "calc-5" / feature).read_text())
    result = sandwich_verify(spec, BINDINGS, toy_corpus.get("calc-5"))
    assert result.verdict.kind is kind


def test_unbindable_spec_is_buggy_side_harness_error(toy_corpus):
    ACCESS_LOG.clear()
    result = sandwich_verify(SPEC, read_bindings(TOY_SPECS / "broken-bindings.json"), toy_corpus.get("calc-5"))
    assert result.verdict.kind is VerdictKind.HARNESS_ERROR and result.verdict.side is Variant.BUGGY
    assert ACCESS_LOG.events() == []


def test_negative_only_never_touches_fixed(toy_corpus):
    ACCESS_LOG.clear()
    result = negative_only_verify(SPEC, BINDINGS, toy_corpus.get("calc-5"))
    assert result.verdict.kind is VerdictKind.VALIDATED and result.verdict.detail == "negative-only"
    assert result.fixed_report is None
    assert {e.variant for e in ACCESS_LOG.events()} == {Variant.BUGGY}
    vacuous = parse((TOY_SPECS / "calc-5" / "vacuous.feature").read_text())
    assert negative_only_verify(vacuous, BINDINGS, toy_corpus.get("calc-5")).verdict.kind is VerdictKind.SPEC_TOO_WEAK


# ---------------------------------------------------------------------------
# regeneration loop
# ---------------------------------------------------------------------------

def scripted_loop(verdicts, max_attempts=3, engineer_errors=()):
    """Run rqa_loop with a verify stub that replays ``verdicts``."""
    queue = list(verdicts)
    calls = {"architect": [], "engineer": 0, "harness": 0}

    def architect(attempt, history):
        calls["architect"].append((attempt, len(history)))
        return SPEC

    def engineer(spec):
        calls["engineer"] += 1
        if calls["engineer"] in engineer_errors:
            raise BindingError("no binding for step 'x'", "x")
        return BINDINGS

    def verify(spec, bindings, defect, attempt):
        kind, side = queue.pop(0)
        empty = FeatureRunReport(spec.title, (), 0.0)
        return RQAResult(VerificationVerdict(kind, "", side), empty, None, attempt)

    def on_harness(result):
        calls["harness"] += 1

    result = rqa_loop(SimpleNamespace(id="stub"), architect, engineer, max_attempts, verify, on_harness)
    return result, calls, queue


V = (VerdictKind.VALIDATED, None)
WEAK = (VerdictKind.SPEC_TOO_WEAK, None)
MIS = (VerdictKind.SPEC_MISALIGNED, None)
HB = (VerdictKind.HARNESS_ERROR, Variant.BUGGY)
HF = (VerdictKind.HARNESS_ERROR, Variant.FIXED)


def test_loop_validates_first_try():
    result, calls, _ = scripted_loop([V])
    assert isinstance(result, ValidatedSpec) and len(result.history) == 1
    assert calls["architect"] == [(1, 0)]


def test_loop_regenerates_after_weak_spec():
    result, calls, _ = scripted_loop([WEAK, V])
    assert isinstance(result, ValidatedSpec)
    assert [a.result.attempt_index for a in result.history] == [1, 2]
    assert calls["engineer"] == 2


def test_loop_exhausts():
    result, _, queue = scripted_loop([MIS, MIS, MIS, V])
    assert isinstance(result, Exhausted) and not result.harness_failure
    assert len(result.history) == 3 and queue == [V]
    assert result.last_spec == SPEC


def test_harness_error_does_not_consume_attempt():
    result, calls, _ = scripted_loop([HB, V], max_attempts=1)
    assert isinstance(result, ValidatedSpec)
    assert calls["harness"] == 1
    assert [a.result.attempt_index for a in result.history] == [1, 1]


def test_second_harness_error_on_same_side_ends_loop():
    result, calls, queue = scripted_loop([HB, WEAK, HB, V])
    assert isinstance(result, Exhausted) and result.harness_failure
    assert queue == [V] and calls["harness"] == 1


def test_each_side_tolerated_once():
    result, calls, _ = scripted_loop([HB, HF, V], max_attempts=1)
    assert isinstance(result, ValidatedSpec) and calls["harness"] == 2


def test_engineer_binding_failure_is_harness_error():
    result, _, queue = scripted_loop([HB, V], engineer_errors=(1, 2))
    assert isinstance(result, Exhausted) and result.harness_failure
    assert [a.bindings for a in result.history] == [None, None]
    assert queue == [HB, V]


def test_loop_rejects_zero_attempts():
    with pytest.raises(ValueError):
        scripted_loop([], max_attempts=0)
