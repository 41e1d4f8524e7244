"""Agent roles, prompt assembly, response contracts and cost accounting.

Response contracts (each enforced by a parser; a malformed reply gets up to
two format-repair re-asks before the operation gives up):

Architect
    Free-text root cause analysis, then exactly one fenced ```gherkin block
    holding a feature that parses and has a Then step in every scenario.
Engineer
    A ``bindings.json`` document, bare or inside a ```json fence, that binds
    every step of the spec.
Fixer
    Optional rationale, then one or more file blocks::

        === FILE: src/pkg/module.py ===
        <full new file content>
        === END ===

    A block ends at the next ``=== FILE:`` header, ``=== END ===`` or end of
    text.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, NamedTuple, Sequence

from .gherkin import FeatureSpec, ParseError, Severity, lint, parse, render
from .harness import DefectRecord, FailureReport, FileEdit, Patch, Workspace, detect_layout, scope_check
from .steps import BindingError, StepBindingSet, load_bindings, unbound_steps

if TYPE_CHECKING:
    from .backends import Backend

MAX_REASKS = 2


class AgentRole(str, enum.Enum):
    ARCHITECT = "Architect"
    ENGINEER = "Engineer"
    FIXER = "Fixer"


class ContextBlock(NamedTuple):
    name: str
    text: str


def render_context(blocks: Sequence[ContextBlock]) -> str:
    return "\n\n".join(f"### {b.name}\n{b.text.rstrip()}" for b in blocks) + "\n"


@dataclass(frozen=True)
class AgentTurn:
    role: AgentRole
    request_excerpt: str
    response: str
    prompt_tokens: int
    completion_tokens: int
    duration: float
    prompt: str = field(default="", repr=False)

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0 or self.duration < 0:
            raise ValueError("token counts and duration must be non-negative")


@dataclass
class Transcript:
    session_id: str
    defect_id: str = ""
    mode: str = ""
    turns: list[AgentTurn] = field(default_factory=list)

    def add(self, turn: AgentTurn) -> AgentTurn:
        self.turns.append(turn)
        return turn


@dataclass(frozen=True)
class CostRecord:
    role: AgentRole
    duration_s: float
    turns: int
    tokens: int

    def to_json(self) -> dict[str, Any]:
        return {"role": self.role.value, "duration_s": round(self.duration_s, 6),
                "turns": self.turns, "tokens": self.tokens}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> CostRecord:
        return cls(AgentRole(doc["role"]), float(doc["duration_s"]), int(doc["turns"]), int(doc["tokens"]))


def account(transcript: Transcript | Sequence[AgentTurn], role: AgentRole) -> CostRecord:
    turns = transcript.turns if isinstance(transcript, Transcript) else transcript
    mine = [t for t in turns if t.role is role]
    return CostRecord(
        role=role,
        duration_s=sum(t.duration for t in mine),
        turns=len(mine),
        tokens=sum(t.prompt_tokens + t.completion_tokens for t in mine),
    )


class MalformedOutput(Exception):
    """The Architect never produced a well-formed analysis + Gherkin reply."""


class MalformedPatch(Exception):
    """The Fixer never produced a parseable file block."""


class UnbindableSpec(BindingError):
    """The Engineer's bindings never covered every step."""


def _ask(
    backend: Backend,
    role: AgentRole,
    context: list[ContextBlock],
    transcript: Transcript,
    parse_reply,
):
    """Call the backend, re-asking with the parse error up to MAX_REASKS times.

    Returns the parsed value or raises the last parse error.
    """
    blocks = list(context)
    last: Exception | None = None
    for _ in range(MAX_REASKS + 1):
        turn = transcript.add(backend.respond(role, blocks, transcript))
        try:
            return parse_reply(turn.response)
        except ValueError as exc:
            last = exc
            blocks = list(context) + [
                ContextBlock("previous_response", turn.response),
                ContextBlock("format_error", f"{exc}. Reply again following the required format."),
            ]
    assert last is not None
    raise last


# ---------------------------------------------------------------------------
# Shared source context
# ---------------------------------------------------------------------------

def source_blocks(defect: DefectRecord, workspace: Workspace) -> list[ContextBlock]:
    """Failing test sources and the scoped production file, read from ``workspace``."""
    blocks = []
    for rel in defect.test_files:
        if workspace.exists(rel):
            blocks.append(ContextBlock(f"failing_test_source: {rel}", workspace.read_text(rel)))
    blocks.append(ContextBlock(f"production_source: {defect.scope}", workspace.read_text(defect.scope)))
    return blocks


# ---------------------------------------------------------------------------
# Architect
# ---------------------------------------------------------------------------

ARCHITECT_INSTRUCTIONS = """\
Work in two stages.
1. Root cause analysis: explain the discrepancy between expected and actual behaviour shown by the failure.
2. Specification synthesis: only then write the intended behaviour as one Gherkin feature.
Reply with the analysis text followed by exactly one ```gherkin fenced block.
Use only Feature, an optional description, Scenario and Given/When/Then/And/But steps.
Every scenario needs a Then step that fails on the current code and passes once it is fixed."""


@dataclass(frozen=True)
class ArchitectOutput:
    root_cause_analysis: str
    spec: FeatureSpec


_FENCE_RE = re.compile(r"^```[ \t]*([\w-]*)[ \t]*\n(.*?)^```[ \t]*$", re.MULTILINE | re.DOTALL)
_GHERKIN_TAGS = {"gherkin", "feature", "cucumber"}


def parse_architect_reply(text: str) -> ArchitectOutput:
    fences = [m for m in _FENCE_RE.finditer(text) if m.group(1).lower() in _GHERKIN_TAGS]
    if len(fences) != 1:
        raise ValueError(f"expected exactly one ```gherkin block, found {len(fences)}")
    block = fences[0]
    analysis = text[: block.start()].strip()
    if not analysis:
        raise ValueError("root cause analysis must precede the Gherkin block")
    try:
        spec = parse(block.group(2))
    except ParseError as exc:
        raise ValueError(f"Gherkin block does not parse: {exc}") from exc
    errors = [f for f in lint(spec) if f.severity is Severity.ERROR]
    if errors:
        raise ValueError("; ".join(f.message for f in errors))
    return ArchitectOutput(analysis, spec)


def architect_context(
    report: FailureReport,
    sources: Sequence[ContextBlock],
    feedback: str | None = None,
) -> list[ContextBlock]:
    blocks = [ContextBlock("instructions", ARCHITECT_INSTRUCTIONS),
              ContextBlock("failure_report", report.render()), *sources]
    if feedback:
        blocks.append(ContextBlock("verification_feedback", feedback))
    return blocks


def architect_infer(
    report: FailureReport,
    sources: Sequence[ContextBlock],
    backend: Backend,
    transcript: Transcript,
    feedback: str | None = None,
) -> ArchitectOutput:
    try:
        return _ask(backend, AgentRole.ARCHITECT, architect_context(report, sources, feedback),
                    transcript, parse_architect_reply)
    except ValueError as exc:
        raise MalformedOutput(str(exc)) from exc


# ---------------------------------------------------------------------------
# Engineer
# ---------------------------------------------------------------------------

ENGINEER_INSTRUCTIONS = """\
Make every step of the feature executable. Reply with a JSON document:
{"bindings": [{"pattern": "^anchored regex with (captures)$", "command": "argv template",
               "timeout_s": 60, "role": "Context|Action|Assertion"}],
 "env": {"NAME": "value"},
 "files": {"relative/path.py": "support script content"}}
Commands run without a shell in the workspace root; {1}..{n} are captures, {workspace} is
the workspace root and {python} the interpreter. A step passes iff its command exits 0.
The first binding whose pattern matches (and whose role fits) wins."""

_JSON_FENCE_RE = re.compile(r"^```[ \t]*(?:json)?[ \t]*\n(.*?)^```[ \t]*$", re.MULTILINE | re.DOTALL)


def parse_engineer_reply(text: str, spec: FeatureSpec) -> StepBindingSet:
    m = _JSON_FENCE_RE.search(text)
    payload = m.group(1) if m else text
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bindings are not valid JSON: {exc}") from exc
    try:
        bindings = load_bindings(doc)
    except BindingError as exc:
        raise ValueError(str(exc)) from exc
    missing = unbound_steps(spec, bindings)
    if missing:
        raise ValueError(f"steps without a binding: {missing}")
    return bindings


def engineer_context(spec: FeatureSpec, defect: DefectRecord, workspace: Workspace) -> list[ContextBlock]:
    layout = detect_layout(workspace)
    return [
        ContextBlock("instructions", ENGINEER_INSTRUCTIONS),
        ContextBlock("feature", render(spec)),
        ContextBlock("layout", f"source roots: {list(layout.source_roots)}\ntest roots: {list(layout.test_roots)}"),
        *source_blocks(defect, workspace),
    ]


def engineer_build(
    spec: FeatureSpec,
    defect: DefectRecord,
    workspace: Workspace,
    backend: Backend,
    transcript: Transcript,
) -> StepBindingSet:
    try:
        return _ask(backend, AgentRole.ENGINEER, engineer_context(spec, defect, workspace),
                    transcript, lambda text: parse_engineer_reply(text, spec))
    except ValueError as exc:
        raise UnbindableSpec(str(exc)) from exc


# ---------------------------------------------------------------------------
# Fixer
# ---------------------------------------------------------------------------

class FixerMode(str, enum.Enum):
    BLIND = "blind"
    ENLIGHTENED = "enlightened"


FIXER_INSTRUCTIONS = """\
Repair the defect by rewriting only {scope}. Reply with a short rationale followed by
=== FILE: {scope} ===
<the complete new file content>
=== END ==="""

_FILE_HEADER_RE = re.compile(r"^=== FILE: (.+?) ===[ \t]*$", re.MULTILINE)
_END_RE = re.compile(r"^=== END ===[ \t]*$", re.MULTILINE)


def parse_fixer_reply(text: str) -> Patch:
    headers = list(_FILE_HEADER_RE.finditer(text))
    if not headers:
        raise ValueError("no '=== FILE: <path> ===' block found")
    edits = []
    for i, h in enumerate(headers):
        start = h.end() + 1
        stop = headers[i + 1].start() if i + 1 < len(headers) else len(text)
        end = _END_RE.search(text, start, stop)
        body = text[start : end.start() if end else stop]
        edits.append(FileEdit(h.group(1).strip(), body))
    paths = [e.path for e in edits]
    if len(set(paths)) != len(paths):
        raise ValueError("a file appears in more than one block")
    return Patch(tuple(edits), text[: headers[0].start()].strip())


def fixer_context(
    defect: DefectRecord,
    workspace: Workspace,
    report: FailureReport,
    spec: FeatureSpec | None = None,
) -> list[ContextBlock]:
    """Blind context; Enlightened appends exactly one specification block."""
    blocks = [
        ContextBlock("instructions", FIXER_INSTRUCTIONS.format(scope=defect.scope)),
        ContextBlock("failure_report", report.render()),
        *source_blocks(defect, workspace),
    ]
    if spec is not None:
        blocks.append(ContextBlock("specification", render(spec)))
    return blocks


def fixer_repair(
    defect: DefectRecord,
    workspace: Workspace,
    report: FailureReport,
    backend: Backend,
    transcript: Transcript,
    spec: FeatureSpec | None = None,
) -> Patch:
    """Ask for a repair of ``modified_files[0]``; enlightened when ``spec`` is given.

    Raises :class:`MalformedPatch` or :class:`~spec_anvil.harness.ScopeViolation`.
    """
    try:
        patch = _ask(backend, AgentRole.FIXER, fixer_context(defect, workspace, report, spec),
                     transcript, parse_fixer_reply)
    except ValueError as exc:
        raise MalformedPatch(str(exc)) from exc
    scope_check(patch, defect)
    return patch
