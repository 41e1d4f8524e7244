"""Requirement quality assurance: sandwich verification and spec regeneration.

A spec is accepted only if its assertions fail on the buggy tree and pass on
the fixed tree. The buggy side always runs first; when it already shows the
spec is too weak or the harness is broken, the fixed tree is never checked
out.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from . import harness
from .gherkin import FeatureSpec, render
from .harness import DefectRecord, Variant
from .steps import (
    BindingError,
    BoundFeature,
    FeatureRunReport,
    SpecOutcome,
    StepBindingSet,
    bind,
    execute,
    outcome,
)

log = logging.getLogger(__name__)


class VerdictKind(str, enum.Enum):
    VALIDATED = "Validated"
    SPEC_TOO_WEAK = "SpecTooWeak"
    SPEC_MISALIGNED = "SpecMisaligned"
    HARNESS_ERROR = "HarnessError"


@dataclass(frozen=True)
class VerificationVerdict:
    kind: VerdictKind
    detail: str = ""
    side: Variant | None = None

    def __post_init__(self) -> None:
        if self.kind is VerdictKind.HARNESS_ERROR and self.side is None:
            raise ValueError("HarnessError verdicts must name the failing side")

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "detail": self.detail,
            "side": self.side.value if self.side else None,
        }


@dataclass(frozen=True)
class RQAResult:
    verdict: VerificationVerdict
    buggy_report: FeatureRunReport
    fixed_report: FeatureRunReport | None
    attempt_index: int = 1

    def to_json(self) -> dict[str, Any]:
        return {
            "attempt_index": self.attempt_index,
            "verdict": self.verdict.to_json(),
            "buggy_report": self.buggy_report.to_json(),
            "fixed_report": self.fixed_report.to_json() if self.fixed_report else None,
        }


def classify(buggy: SpecOutcome, fixed: SpecOutcome | None) -> VerificationVerdict:
    """Map the two side outcomes to a verdict.

    ``fixed`` is ignored (and may be None) when the buggy side alone decides.
    """
    if buggy is SpecOutcome.ERROR:
        return VerificationVerdict(VerdictKind.HARNESS_ERROR, "buggy side errored", Variant.BUGGY)
    if buggy is SpecOutcome.ALL_PASS:
        return VerificationVerdict(VerdictKind.SPEC_TOO_WEAK, "spec passes on the buggy code")
    if fixed is None:
        raise ValueError("fixed outcome required when the buggy side fails an assertion")
    if fixed is SpecOutcome.ALL_PASS:
        return VerificationVerdict(VerdictKind.VALIDATED, "fails on buggy, passes on fixed")
    if fixed is SpecOutcome.ANY_ASSERTION_FAIL:
        return VerificationVerdict(VerdictKind.SPEC_MISALIGNED, "spec also fails on the fixed code")
    return VerificationVerdict(VerdictKind.HARNESS_ERROR, "fixed side errored", Variant.FIXED)


def needs_fixed_side(buggy: SpecOutcome) -> bool:
    return buggy is SpecOutcome.ANY_ASSERTION_FAIL


Runner = Callable[[BoundFeature, Any], FeatureRunReport]


def _run_side(defect: DefectRecord, variant: Variant, bound: BoundFeature, runner: Runner) -> FeatureRunReport:
    ws = harness.checkout(defect, variant)
    try:
        return runner(bound, ws)
    finally:
        ws.cleanup()


def _binding_failure(spec: FeatureSpec, exc: Exception, attempt: int) -> RQAResult:
    empty = FeatureRunReport(spec.title, (), 0.0)
    verdict = VerificationVerdict(VerdictKind.HARNESS_ERROR, f"binding failed: {exc}", Variant.BUGGY)
    return RQAResult(verdict, empty, None, attempt)


def sandwich_verify(
    spec: FeatureSpec,
    bindings: StepBindingSet,
    defect: DefectRecord,
    attempt_index: int = 1,
    runner: Runner = execute,
) -> RQAResult:
    try:
        bound = bind(spec, bindings)
    except BindingError as exc:
        return _binding_failure(spec, exc, attempt_index)
    buggy_report = _run_side(defect, Variant.BUGGY, bound, runner)
    buggy = outcome(buggy_report)
    if not needs_fixed_side(buggy):
        return RQAResult(classify(buggy, None), buggy_report, None, attempt_index)
    fixed_report = _run_side(defect, Variant.FIXED, bound, runner)
    return RQAResult(classify(buggy, outcome(fixed_report)), buggy_report, fixed_report, attempt_index)


def negative_only_verify(
    spec: FeatureSpec,
    bindings: StepBindingSet,
    defect: DefectRecord,
    runner: Runner = execute,
) -> RQAResult:
    """Buggy side only; a failing assertion counts as provisional validation."""
    try:
        bound = bind(spec, bindings)
    except BindingError as exc:
        return _binding_failure(spec, exc, 1)
    report = _run_side(defect, Variant.BUGGY, bound, runner)
    buggy = outcome(report)
    if needs_fixed_side(buggy):
        verdict = VerificationVerdict(VerdictKind.VALIDATED, "negative-only")
    else:
        verdict = classify(buggy, None)
    return RQAResult(verdict, report, None, 1)


# ---------------------------------------------------------------------------
# Regeneration loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Attempt:
    spec: FeatureSpec
    bindings: StepBindingSet | None
    result: RQAResult

    def to_json(self) -> dict[str, Any]:
        return {"spec": render(self.spec), **self.result.to_json()}


@dataclass(frozen=True)
class ValidatedSpec:
    spec: FeatureSpec
    bindings: StepBindingSet
    result: RQAResult
    history: tuple[Attempt, ...]


@dataclass(frozen=True)
class Exhausted:
    history: tuple[Attempt, ...]
    harness_failure: bool = False

    @property
    def last_spec(self) -> FeatureSpec | None:
        return self.history[-1].spec if self.history else None


ArchitectFn = Callable[[int, Sequence[Attempt]], FeatureSpec]
EngineerFn = Callable[[FeatureSpec], StepBindingSet]
VerifyFn = Callable[[FeatureSpec, StepBindingSet, DefectRecord, int], RQAResult]


def rqa_loop(
    defect: DefectRecord,
    architect_fn: ArchitectFn,
    engineer_fn: EngineerFn,
    max_attempts: int = 3,
    verify: VerifyFn = sandwich_verify,
    on_harness_error: Callable[[RQAResult], None] | None = None,
) -> ValidatedSpec | Exhausted:
    """Generate, bind and verify specs until one validates or attempts run out.

    Both the spec and its bindings are regenerated on every round. A harness
    error does not consume an attempt the first time it happens on a given
    side; the round is retried and ``on_harness_error`` is notified. A second
    harness error on the same side ends the loop with ``harness_failure`` set.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    history: list[Attempt] = []
    tolerated: set[Variant] = set()
    attempt = 1
    while attempt <= max_attempts:
        spec = architect_fn(attempt, tuple(history))
        bindings: StepBindingSet | None
        try:
            bindings = engineer_fn(spec)
        except BindingError as exc:
            bindings = None
            result = _binding_failure(spec, exc, attempt)
        else:
            result = verify(spec, bindings, defect, attempt)
        history.append(Attempt(spec, bindings, result))
        kind = result.verdict.kind
        log.info("%s attempt %d: %s", defect.id, attempt, kind.value)
        if kind is VerdictKind.VALIDATED:
            assert bindings is not None
            return ValidatedSpec(spec, bindings, result, tuple(history))
        if kind is VerdictKind.HARNESS_ERROR:
            side = result.verdict.side
            assert side is not None
            if side in tolerated:
                return Exhausted(tuple(history), harness_failure=True)
            tolerated.add(side)
            if on_harness_error is not None:
                on_harness_error(result)
            continue
        attempt += 1
    return Exhausted(tuple(history))
