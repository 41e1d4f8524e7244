"""Repair sessions, patch adjudication and the composite campaign.

A blind session checks out the buggy tree, runs its tests, turns the failure
into a report and asks the Fixer for a patch. An enlightened session first
runs the spec inference / verification loop and hands the resulting spec to
the Fixer. Adjudication always happens on a fresh buggy checkout.
"""

from __future__ import annotations

import datetime as _dt
import enum
import json
import logging
import shutil
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import harness
from .agents import (
    AgentRole,
    CostRecord,
    FixerMode,
    MalformedOutput,
    MalformedPatch,
    Transcript,
    account,
    architect_infer,
    engineer_build,
    fixer_repair,
    source_blocks,
)
from .backends import Backend
from .gherkin import FeatureSpec, render
from .harness import (
    Corpus,
    DefectRecord,
    Patch,
    PatchConflict,
    ScopeViolation,
    TestStatus,
    Variant,
    apply_patch,
    checkout,
    collect_failure_report,
    run_tests,
)
from .metrics import OutcomeRecord
from .rqa import Attempt, Exhausted, ValidatedSpec, rqa_loop
from .steps import SpecOutcome, StepBindingSet, bind, execute, materialize_files, outcome

log = logging.getLogger(__name__)

HARNESS_DIR = ".spec_anvil"


class Outcome(str, enum.Enum):
    CORRECT_FIX = "CorrectFix"
    PLAUSIBLE_ONLY = "PlausibleOnly"
    NO_FIX = "NoFix"
    ERROR = "Error"


class FallbackKind(str, enum.Enum):
    ENVIRONMENT_PRUNING = "EnvironmentPruning"
    STRATEGY_FALLBACK = "StrategyFallback"


class RQAStatus(str, enum.Enum):
    VALIDATED = "validated"
    HARNESS_FALLBACK = "harness_fallback"
    EXHAUSTED = "exhausted"
    ARCHITECT_FAILED = "architect_failed"


@dataclass(frozen=True)
class FallbackEvent:
    kind: FallbackKind
    detail: str


@dataclass(frozen=True)
class PipelineConfig:
    max_rqa_attempts: int = 3
    use_probes: bool = True
    artifacts_dir: Path | None = None
    workspace_dir: Path | None = None


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RepairSession:
    defect_id: str
    project: str
    mode: FixerMode
    outcome: Outcome = Outcome.ERROR
    rqa_status: RQAStatus | None = None
    rqa_history: list[Attempt] = field(default_factory=list)
    spec: FeatureSpec | None = None
    spec_in_fixer_prompt: bool = False
    patch: Patch | None = None
    fallback_events: list[FallbackEvent] = field(default_factory=list)
    costs: list[CostRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    adjudication: dict[str, Any] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=_now)
    finished_at: str = ""
    transcript: Transcript | None = field(default=None, repr=False)

    @property
    def degraded(self) -> bool:
        return self.mode is FixerMode.ENLIGHTENED and self.rqa_status is not RQAStatus.VALIDATED

    def check(self) -> None:
        if self.mode is FixerMode.BLIND and (self.spec is not None or self.rqa_history):
            raise AssertionError("blind sessions carry no spec or RQA history")
        if self.outcome is Outcome.CORRECT_FIX and self.patch is None:
            raise AssertionError("CorrectFix requires a patch")

    def to_record(self) -> dict[str, Any]:
        """Flattened, self-contained session log line."""
        return {
            "defect_id": self.defect_id,
            "project": self.project,
            "mode": self.mode.value,
            "outcome": self.outcome.value,
            "degraded": self.degraded,
            "rqa_status": self.rqa_status.value if self.rqa_status else None,
            "verdicts": [
                {"attempt": a.result.attempt_index, **a.result.verdict.to_json()}
                for a in self.rqa_history
            ],
            "spec_in_fixer_prompt": self.spec_in_fixer_prompt,
            "patch_paths": self.patch.paths if self.patch else [],
            "fallback_events": [{"kind": e.kind.value, "detail": e.detail} for e in self.fallback_events],
            "costs": [c.to_json() for c in self.costs],
            "notes": list(self.notes),
            "adjudication": self.adjudication,
            "artifacts": dict(self.artifacts),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }


# ---------------------------------------------------------------------------
# Adjudication
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Adjudication:
    outcome: Outcome
    detail: str
    tests: str | None = None
    spec: str | None = None
    comparison: str | None = None
    diverging_inputs: tuple[str, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome.value,
            "detail": self.detail,
            "tests": self.tests,
            "spec": self.spec,
            "comparison": self.comparison,
            "diverging_inputs": list(self.diverging_inputs),
        }


def adjudicate(
    patch: Patch,
    defect: DefectRecord,
    config: PipelineConfig = PipelineConfig(),
    validated: tuple[FeatureSpec, StepBindingSet] | None = None,
) -> Adjudication:
    """Apply to a fresh buggy tree, run tests (and the validated spec), then compare with the fix."""
    ws = checkout(defect, Variant.BUGGY, config.workspace_dir)
    try:
        try:
            apply_patch(ws, patch)
        except PatchConflict as exc:
            return Adjudication(Outcome.NO_FIX, f"patch does not apply: {exc}")
        tests = run_tests(ws, defect.test_command)
        if tests.status is TestStatus.ERROR:
            return Adjudication(Outcome.ERROR, f"test harness error: {tests.detail}", tests.status.value)
        if tests.status is TestStatus.FAIL:
            return Adjudication(
                Outcome.NO_FIX, f"tests still fail: {list(tests.failing_test_names)}", tests.status.value
            )
        spec_status = None
        if validated is not None:
            report = execute(bind(*validated), ws)
            spec_outcome = outcome(report)
            spec_status = spec_outcome.value
            if spec_outcome is SpecOutcome.ERROR:
                return Adjudication(Outcome.ERROR, "spec harness error on patched tree", tests.status.value, spec_status)
            if spec_outcome is not SpecOutcome.ALL_PASS:
                return Adjudication(Outcome.NO_FIX, "validated spec fails on patched tree",
                                    tests.status.value, spec_status)
        cmp = harness.compare_with_fixed(defect, ws, config.use_probes)
        if cmp.identical:
            return Adjudication(Outcome.CORRECT_FIX, f"matches the developer fix ({cmp.method})",
                                tests.status.value, spec_status, cmp.method)
        return Adjudication(
            Outcome.PLAUSIBLE_ONLY, f"passes tests but diverges from the developer fix ({cmp.method})",
            tests.status.value, spec_status, cmp.method, cmp.diverging_inputs,
        )
    finally:
        ws.cleanup()


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

def _prune_harness(ws: harness.Workspace, generated: Iterable[str]) -> list[str]:
    """Delete generated harness files (and the harness directory) from ``ws``."""
    removed = []
    for rel in sorted(set(generated)):
        path = ws.root / rel
        if path.is_file():
            path.unlink()
            removed.append(rel)
    target = ws.root / HARNESS_DIR
    if target.exists():
        removed.extend(sorted(p.relative_to(ws.root).as_posix() for p in target.rglob("*") if p.is_file()))
        shutil.rmtree(target)
    return removed


def _feedback(history: Sequence[Attempt]) -> str | None:
    if not history:
        return None
    v = history[-1].result.verdict
    return f"The previous specification was rejected: {v.kind.value} ({v.detail}). Write a new one."


class _Artifacts:
    def __init__(self, root: Path | None, session: RepairSession):
        self.root = root / session.defect_id / session.mode.value if root else None
        self.session = session
        if self.root is not None:
            shutil.rmtree(self.root, ignore_errors=True)
            self.root.mkdir(parents=True)

    def write(self, name: str, content: str) -> None:
        if self.root is None:
            return
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        self.session.artifacts[name] = path.as_posix()

    def write_json(self, name: str, doc: Any) -> None:
        self.write(name, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def run_session(
    defect: DefectRecord,
    mode: FixerMode,
    backends: Mapping[AgentRole, Backend],
    config: PipelineConfig = PipelineConfig(),
) -> RepairSession:
    """Run one repair attempt; infrastructure failures become ``Outcome.ERROR``."""
    session = RepairSession(defect.id, defect.project, mode)
    transcript = Transcript(f"{defect.id}/{mode.value}", defect.id, mode.value)
    session.transcript = transcript
    artifacts = _Artifacts(config.artifacts_dir, session)
    try:
        _run_session(defect, mode, backends, config, session, transcript, artifacts)
    except Exception as exc:  # session boundary: never propagate
        log.exception("session %s failed", transcript.session_id)
        session.outcome = Outcome.ERROR
        session.notes.append(f"error: {type(exc).__name__}: {exc}")
    roles = [AgentRole.FIXER] if mode is FixerMode.BLIND else list(AgentRole)
    session.costs = [account(transcript, r) for r in roles]
    session.finished_at = _now()
    if config.artifacts_dir is not None:
        try:
            artifacts.write("transcript.jsonl", "".join(
                json.dumps({"role": t.role.value, "prompt": t.prompt, "response": t.response,
                            "prompt_tokens": t.prompt_tokens, "completion_tokens": t.completion_tokens,
                            "duration_s": t.duration}, ensure_ascii=False) + "\n"
                for t in transcript.turns
            ))
        except OSError as exc:
            session.notes.append(f"artifact write failed: {exc}")
    session.check()
    return session


def _run_session(
    defect: DefectRecord,
    mode: FixerMode,
    backends: Mapping[AgentRole, Backend],
    config: PipelineConfig,
    session: RepairSession,
    transcript: Transcript,
    artifacts: _Artifacts,
) -> None:
    ws = checkout(defect, Variant.BUGGY, config.workspace_dir)
    validated: ValidatedSpec | None = None
    try:
        baseline = run_tests(ws, defect.test_command)
        if baseline.status is not TestStatus.FAIL:
            raise RuntimeError(f"buggy tree did not fail its tests ({baseline.status.value} {baseline.detail})")
        report = collect_failure_report(baseline)
        artifacts.write("failure_report.txt", report.render() + "\n")

        fixer_spec: FeatureSpec | None = None
        if mode is FixerMode.ENLIGHTENED:
            sources = source_blocks(defect, ws)
            generated: set[str] = set()

            def architect_fn(attempt: int, history: Sequence[Attempt]) -> FeatureSpec:
                out = architect_infer(report, sources, backends[AgentRole.ARCHITECT], transcript,
                                      _feedback(history))
                generated.update(materialize_files({f"{HARNESS_DIR}/spec.feature": render(out.spec)}, ws.root))
                return out.spec

            def engineer_fn(spec: FeatureSpec) -> StepBindingSet:
                bindings = engineer_build(spec, defect, ws, backends[AgentRole.ENGINEER], transcript)
                # generated harness artifacts live in the session workspace
                generated.update(materialize_files({
                    f"{HARNESS_DIR}/bindings.json": json.dumps(bindings.to_json(), indent=2),
                    **bindings.files,
                }, ws.root))
                return bindings

            def harness_failed(result) -> None:
                session.notes.append(f"harness error tolerated: {result.verdict.detail}")

            try:
                result = rqa_loop(defect, architect_fn, engineer_fn, config.max_rqa_attempts,
                                  on_harness_error=harness_failed)
            except MalformedOutput as exc:
                session.rqa_status = RQAStatus.ARCHITECT_FAILED
                session.notes.append(f"architect output malformed: {exc}")
            else:
                session.rqa_history = list(result.history)
                artifacts.write_json("rqa.json", [a.to_json() for a in result.history])
                if isinstance(result, ValidatedSpec):
                    validated = result
                    session.rqa_status = RQAStatus.VALIDATED
                    session.spec = fixer_spec = result.spec
                    artifacts.write("spec.feature", render(result.spec))
                    artifacts.write_json("bindings.json", result.bindings.to_json())
                elif result.harness_failure:
                    # harness unusable: drop its files, verify with baseline tests only,
                    # but keep the spec text for the fixer
                    session.rqa_status = RQAStatus.HARNESS_FALLBACK
                    removed = _prune_harness(ws, generated)
                    session.fallback_events.append(FallbackEvent(
                        FallbackKind.ENVIRONMENT_PRUNING, f"removed {', '.join(removed) or 'nothing'}"))
                    session.fallback_events.append(FallbackEvent(
                        FallbackKind.STRATEGY_FALLBACK, "adjudicating with the baseline test command only"))
                    session.spec = fixer_spec = result.last_spec
                    if fixer_spec is not None:
                        artifacts.write("spec.feature", render(fixer_spec))
                else:
                    session.rqa_status = RQAStatus.EXHAUSTED
                    session.spec = result.last_spec
                    session.notes.append("RQA exhausted; fixer runs without a spec")

        session.spec_in_fixer_prompt = fixer_spec is not None
        try:
            patch = fixer_repair(defect, ws, report, backends[AgentRole.FIXER], transcript, fixer_spec)
        except ScopeViolation as exc:
            session.outcome = Outcome.NO_FIX
            session.notes.append(f"ScopeViolation: {exc.paths}")
            return
        except MalformedPatch as exc:
            session.outcome = Outcome.NO_FIX
            session.notes.append(f"MalformedPatch: {exc}")
            return
    finally:
        ws.cleanup()

    session.patch = patch
    artifacts.write_json("patch.json", patch.to_json())
    verdict = adjudicate(
        patch, defect, config,
        (validated.spec, validated.bindings) if validated is not None else None,
    )
    session.adjudication = verdict.to_json()
    session.outcome = verdict.outcome
    artifacts.write_json("adjudication.json", verdict.to_json())


# ---------------------------------------------------------------------------
# Campaigns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionSummary:
    defect_id: str
    project: str
    mode: FixerMode
    outcome: Outcome
    degraded: bool
    costs: tuple[CostRecord, ...] = ()

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> SessionSummary:
        return cls(
            rec["defect_id"], rec["project"], FixerMode(rec["mode"]), Outcome(rec["outcome"]),
            bool(rec.get("degraded", False)),
            tuple(CostRecord.from_json(c) for c in rec.get("costs", [])),
        )


@dataclass(frozen=True)
class DefectPair:
    blind: SessionSummary
    enlightened: SessionSummary | None = None


@dataclass
class CampaignResult:
    pairs: dict[str, DefectPair] = field(default_factory=dict)

    @property
    def blind_correct(self) -> int:
        return sum(p.blind.outcome is Outcome.CORRECT_FIX for p in self.pairs.values())

    @property
    def blind_failed(self) -> int:
        return len(self.pairs) - self.blind_correct

    def rescued(self, include_degraded: bool = True) -> int:
        return sum(
            p.enlightened is not None
            and p.enlightened.outcome is Outcome.CORRECT_FIX
            and (include_degraded or not p.enlightened.degraded)
            for p in self.pairs.values()
        )

    @property
    def total_correct(self) -> int:
        return self.blind_correct + self.rescued()

    def per_project(self) -> dict[str, dict[str, int]]:
        rows: dict[str, dict[str, int]] = {}
        for p in self.pairs.values():
            row = rows.setdefault(p.blind.project, {"bugs": 0, "blind_success": 0, "rescued": 0})
            row["bugs"] += 1
            row["blind_success"] += p.blind.outcome is Outcome.CORRECT_FIX
            row["rescued"] += bool(p.enlightened and p.enlightened.outcome is Outcome.CORRECT_FIX)
        return dict(sorted(rows.items()))

    def check(self) -> None:
        for defect_id, p in self.pairs.items():
            if p.enlightened is not None and p.blind.outcome is Outcome.CORRECT_FIX:
                raise AssertionError(f"{defect_id}: enlightened session for a blind CorrectFix")
        enlightened_fixes = sum(
            1 for p in self.pairs.values()
            if p.blind.outcome is not Outcome.CORRECT_FIX
            and p.enlightened is not None and p.enlightened.outcome is Outcome.CORRECT_FIX
        )
        if self.total_correct != self.blind_correct + enlightened_fixes:
            raise AssertionError("composite identity violated")

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> CampaignResult:
        """Rebuild pairs from session-log records; later records win."""
        latest = {(r["defect_id"], r["mode"]): SessionSummary.from_record(r) for r in records}
        result = cls()
        for (defect_id, mode), summary in sorted(latest.items()):
            if mode != FixerMode.BLIND.value:
                continue
            enl = latest.get((defect_id, FixerMode.ENLIGHTENED.value))
            if summary.outcome is Outcome.CORRECT_FIX:
                enl = None
            result.pairs[defect_id] = DefectPair(summary, enl)
        result.check()
        return result

    def outcome_records(self) -> list[OutcomeRecord]:
        out = []
        for defect_id, p in sorted(self.pairs.items()):
            enl = p.enlightened
            out.append(OutcomeRecord(
                defect_id=defect_id,
                project=p.blind.project,
                blind_correct=p.blind.outcome is Outcome.CORRECT_FIX,
                enlightened_attempted=enl is not None,
                enlightened_correct=enl is not None and enl.outcome is Outcome.CORRECT_FIX,
                enlightened_degraded=enl is not None and enl.degraded,
            ))
        return out

    def sessions(self) -> Iterable[SessionSummary]:
        for p in self.pairs.values():
            yield p.blind
            if p.enlightened is not None:
                yield p.enlightened


SessionSink = Callable[[RepairSession], None]


def run_campaign(
    corpus: Corpus,
    backends: Mapping[AgentRole, Backend],
    config: PipelineConfig = PipelineConfig(),
    composite: bool = True,
    workers: int = 1,
    completed: Mapping[tuple[str, str], Mapping[str, Any]] | None = None,
    sink: SessionSink | None = None,
) -> CampaignResult:
    """Blind sessions for every defect, then enlightened ones for blind failures.

    ``completed`` maps (defect_id, mode) to already-logged session records;
    those sessions are not re-run. ``sink`` receives each new session on the
    calling thread, so a log writer needs no extra locking.
    """
    completed = dict(completed or {})
    summaries: dict[tuple[str, str], SessionSummary] = {
        key: SessionSummary.from_record(rec) for key, rec in completed.items()
    }

    def run_phase(mode: FixerMode, defects: list[DefectRecord]) -> None:
        todo = [d for d in defects if (d.id, mode.value) not in summaries]
        if not todo:
            return
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            futures = {pool.submit(run_session, d, mode, backends, config): d for d in todo}
            for fut in as_completed(futures):
                session = fut.result()
                summaries[(session.defect_id, mode.value)] = SessionSummary.from_record(session.to_record())
                if sink is not None:
                    sink(session)

    run_phase(FixerMode.BLIND, list(corpus.defects))
    if composite:
        failed = [
            d for d in corpus.defects
            if summaries[(d.id, FixerMode.BLIND.value)].outcome is not Outcome.CORRECT_FIX
        ]
        run_phase(FixerMode.ENLIGHTENED, failed)

    result = CampaignResult()
    for d in corpus.defects:
        blind = summaries[(d.id, FixerMode.BLIND.value)]
        enl = summaries.get((d.id, FixerMode.ENLIGHTENED.value)) if composite else None
        if blind.outcome is Outcome.CORRECT_FIX:
            enl = None
        result.pairs[d.id] = DefectPair(blind, enl)
    result.check()
    return result
