"""Executable semantics for Gherkin scenarios.

Step text is matched against an ordered list of regex bindings; each match
yields an argv built from the binding's command template. A step passes iff
its process exits 0. A failing Then-role step makes the scenario an
``AssertionFail``; any other failure (including timeouts and spawn errors on
any step) is a ``SetupError``.

``bindings.json`` layout::

    {
      "bindings": [
        {"pattern": "^the result should be \\"(.+)\\"$",
         "command": "{python} .spec_anvil/steps.py expect {1}",
         "timeout_s": 30, "role": "Assertion"}
      ],
      "env": {"NAME": "value"},
      "files": {".spec_anvil/steps.py": "..."}
    }

``timeout_s``, ``role``, ``env`` and ``files`` are optional. ``files`` are
support scripts written into the workspace before execution.
"""

from __future__ import annotations

import enum
import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Mapping

from .commands import TemplateError, capture_indices, expand_tokens, run_process, split_template
from .gherkin import FeatureSpec, Role

DEFAULT_STEP_TIMEOUT = 60.0


class BindingError(Exception):
    """A step has no binding, or the binding manifest itself is invalid."""

    def __init__(self, message: str, step_text: str | None = None):
        super().__init__(message)
        self.step_text = step_text


@dataclass(frozen=True)
class StepBinding:
    pattern: str
    command_template: str
    timeout: float = DEFAULT_STEP_TIMEOUT
    role_constraint: Role | None = None
    regex: re.Pattern[str] = field(init=False, repr=False, compare=False)
    tokens: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        try:
            regex = re.compile(self.pattern)
        except re.error as exc:
            raise BindingError(f"pattern {self.pattern!r} does not compile: {exc}") from exc
        try:
            tokens = tuple(split_template(self.command_template))
        except TemplateError as exc:
            raise BindingError(str(exc)) from exc
        too_high = [i for i in capture_indices(self.command_template) if i > regex.groups or i < 1]
        if too_high:
            raise BindingError(
                f"command {self.command_template!r} uses placeholder {{{too_high[0]}}} "
                f"but pattern has {regex.groups} capture group(s)"
            )
        if self.timeout <= 0:
            raise BindingError("timeout must be positive")
        object.__setattr__(self, "regex", regex)
        object.__setattr__(self, "tokens", tokens)

    def match(self, text: str) -> re.Match[str] | None:
        # Patterns are anchored: the whole step text must match.
        return self.regex.fullmatch(text)


@dataclass(frozen=True)
class StepBindingSet:
    bindings: tuple[StepBinding, ...]
    environment: Mapping[str, str] = field(default_factory=dict)
    files: Mapping[str, str] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"bindings": [], "env": dict(self.environment)}
        for b in self.bindings:
            entry: dict[str, Any] = {"pattern": b.pattern, "command": b.command_template}
            if b.timeout != DEFAULT_STEP_TIMEOUT:
                entry["timeout_s"] = b.timeout
            if b.role_constraint is not None:
                entry["role"] = b.role_constraint.value
            doc["bindings"].append(entry)
        if self.files:
            doc["files"] = dict(self.files)
        return doc


def _parse_role(value: Any) -> Role | None:
    if value is None:
        return None
    if isinstance(value, str):
        for role in Role:
            if role.value.lower() == value.lower():
                return role
        aliases = {"given": Role.CONTEXT, "when": Role.ACTION, "then": Role.ASSERTION}
        if value.lower() in aliases:
            return aliases[value.lower()]
    raise BindingError(f"unknown role constraint {value!r}")


def _safe_relpath(path: str) -> str:
    pure = PurePosixPath(path)
    if pure.is_absolute() or ".." in pure.parts or not pure.parts:
        raise BindingError(f"support file path {path!r} must stay inside the workspace")
    return pure.as_posix()


def load_bindings(doc: Any) -> StepBindingSet:
    """Build a binding set from a decoded ``bindings.json`` document."""
    if not isinstance(doc, dict):
        raise BindingError("bindings document must be a JSON object")
    raw = doc.get("bindings")
    if not isinstance(raw, list):
        raise BindingError("'bindings' must be a list")
    bindings = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise BindingError(f"binding {i} must be an object")
        pattern, command = entry.get("pattern"), entry.get("command")
        if not isinstance(pattern, str) or not isinstance(command, str):
            raise BindingError(f"binding {i} needs string 'pattern' and 'command'")
        timeout = entry.get("timeout_s", DEFAULT_STEP_TIMEOUT)
        if not isinstance(timeout, (int, float)) or isinstance(timeout, bool):
            raise BindingError(f"binding {i}: timeout_s must be a number")
        bindings.append(StepBinding(pattern, command, float(timeout), _parse_role(entry.get("role"))))
    env = doc.get("env", {})
    if not isinstance(env, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in env.items()
    ):
        raise BindingError("'env' must map strings to strings")
    files = doc.get("files", {})
    if not isinstance(files, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in files.items()
    ):
        raise BindingError("'files' must map paths to text")
    files = {_safe_relpath(k): v for k, v in files.items()}
    return StepBindingSet(tuple(bindings), env, files)


def loads_bindings(text: str) -> StepBindingSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BindingError(f"bindings are not valid JSON: {exc}") from exc
    return load_bindings(doc)


def read_bindings(path: str | os.PathLike[str]) -> StepBindingSet:
    return loads_bindings(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class BoundStep:
    text: str
    role: Role
    argv: tuple[str, ...]
    timeout: float


@dataclass(frozen=True)
class BoundScenario:
    title: str
    steps: tuple[BoundStep, ...]


@dataclass(frozen=True)
class BoundFeature:
    title: str
    scenarios: tuple[BoundScenario, ...]
    environment: Mapping[str, str]
    files: Mapping[str, str]


def bind(spec: FeatureSpec, bindings: StepBindingSet) -> BoundFeature:
    """Bind each step to the first matching binding (list order wins)."""
    scenarios = []
    for sc in spec.scenarios:
        steps = []
        for step in sc.steps:
            for b in bindings.bindings:
                if b.role_constraint is not None and b.role_constraint is not step.role:
                    continue
                m = b.match(step.text)
                if m is None:
                    continue
                captures = [g if g is not None else "" for g in m.groups()]
                argv = expand_tokens(b.tokens, captures)
                steps.append(BoundStep(step.text, step.role, tuple(argv), b.timeout))
                break
            else:
                raise BindingError(f"no binding for step {step.text!r}", step.text)
        scenarios.append(BoundScenario(sc.title, tuple(steps)))
    return BoundFeature(spec.title, tuple(scenarios), dict(bindings.environment), dict(bindings.files))


def unbound_steps(spec: FeatureSpec, bindings: StepBindingSet) -> list[str]:
    """All step texts that no binding accepts, in feature order."""
    missing = []
    for sc in spec.scenarios:
        for step in sc.steps:
            ok = any(
                (b.role_constraint is None or b.role_constraint is step.role) and b.match(step.text)
                for b in bindings.bindings
            )
            if not ok and step.text not in missing:
                missing.append(step.text)
    return missing


class ScenarioStatus(str, enum.Enum):
    PASS = "Pass"
    ASSERTION_FAIL = "AssertionFail"
    SETUP_ERROR = "SetupError"


@dataclass(frozen=True)
class StepLog:
    command: tuple[str, ...]
    exit_code: int | None
    output: str
    tag: str | None = None  # "timeout" or "spawn" when the process never finished


@dataclass(frozen=True)
class ScenarioResult:
    scenario_title: str
    status: ScenarioStatus
    failed_step_index: int | None
    step_logs: tuple[StepLog, ...]


@dataclass(frozen=True)
class FeatureRunReport:
    feature_title: str
    scenario_results: tuple[ScenarioResult, ...]
    wall_time: float

    def to_json(self) -> dict[str, Any]:
        return {
            "feature_title": self.feature_title,
            "wall_time": round(self.wall_time, 3),
            "scenarios": [
                {
                    "title": r.scenario_title,
                    "status": r.status.value,
                    "failed_step_index": r.failed_step_index,
                    "steps": [
                        {"command": list(s.command), "exit_code": s.exit_code,
                         "output": s.output, "tag": s.tag}
                        for s in r.step_logs
                    ],
                }
                for r in self.scenario_results
            ],
        }


class SpecOutcome(str, enum.Enum):
    ALL_PASS = "AllPass"
    ANY_ASSERTION_FAIL = "AnyAssertionFail"
    ERROR = "Error"


def materialize_files(files: Mapping[str, str], root: str | os.PathLike[str]) -> list[str]:
    written = []
    for rel, content in sorted(files.items()):
        target = Path(root, _safe_relpath(rel))
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
        written.append(rel)
    return written


def execute(bound: BoundFeature, workspace: Any) -> FeatureRunReport:
    """Run every scenario in order inside ``workspace``.

    ``workspace`` is a harness Workspace or anything path-like. Support files
    from the binding set are written first; a scenario stops at its first
    failing step.
    """
    root = Path(workspace if isinstance(workspace, (str, os.PathLike)) else workspace.root).resolve()
    if not root.is_dir():
        raise FileNotFoundError(f"workspace {root} does not exist")
    start = time.monotonic()
    materialize_files(bound.files, root)
    results = []
    for sc in bound.scenarios:
        logs: list[StepLog] = []
        status, failed = ScenarioStatus.PASS, None
        for idx, step in enumerate(sc.steps):
            argv = expand_tokens(step.argv, workspace=str(root))
            res = run_process(argv, root, step.timeout, bound.environment)
            tag = "timeout" if res.timed_out else ("spawn" if res.spawn_error else None)
            output = res.output if res.spawn_error is None else res.spawn_error
            logs.append(StepLog(tuple(argv), res.exit_code, output, tag))
            if res.ok:
                continue
            failed = idx
            if tag is None and step.role is Role.ASSERTION:
                status = ScenarioStatus.ASSERTION_FAIL
            else:
                status = ScenarioStatus.SETUP_ERROR
            break
        results.append(ScenarioResult(sc.title, status, failed, tuple(logs)))
    return FeatureRunReport(bound.title, tuple(results), time.monotonic() - start)


def outcome(report: FeatureRunReport) -> SpecOutcome:
    statuses = {r.status for r in report.scenario_results}
    if ScenarioStatus.SETUP_ERROR in statuses:
        return SpecOutcome.ERROR
    if ScenarioStatus.ASSERTION_FAIL in statuses:
        return SpecOutcome.ANY_ASSERTION_FAIL
    return SpecOutcome.ALL_PASS
