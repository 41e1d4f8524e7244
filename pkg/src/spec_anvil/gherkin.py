"""Gherkin subset: parse, validate, lint and canonical rendering.

Supported constructs are ``Feature:``, a free-text description block,
``Scenario:`` and the step keywords ``Given/When/Then/And/But``. Tags,
Background, Scenario Outline, Examples, data tables and doc strings are
rejected with a :class:`ParseError`.

A line in step position that is indented deeper than the step above it
continues that step; the pieces are joined with single spaces. This accepts
specs that were hard-wrapped for display.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field


class Keyword(str, enum.Enum):
    GIVEN = "Given"
    WHEN = "When"
    THEN = "Then"
    AND = "And"
    BUT = "But"


class Role(str, enum.Enum):
    CONTEXT = "Context"
    ACTION = "Action"
    ASSERTION = "Assertion"


PRIMARY_ROLES = {
    Keyword.GIVEN: Role.CONTEXT,
    Keyword.WHEN: Role.ACTION,
    Keyword.THEN: Role.ASSERTION,
}


@dataclass(frozen=True)
class Step:
    keyword: Keyword
    text: str
    role: Role


@dataclass(frozen=True)
class Scenario:
    title: str
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class SourceSpan:
    path: str | None
    first_line: int
    last_line: int


@dataclass(frozen=True)
class FeatureSpec:
    title: str
    description: str
    scenarios: tuple[Scenario, ...]
    source_span: SourceSpan | None = field(default=None, compare=False)

    def scenario(self, title: str) -> Scenario:
        for sc in self.scenarios:
            if sc.title == title:
                return sc
        raise KeyError(title)


class ParseError(ValueError):
    def __init__(self, line: int, column: int, reason: str):
        super().__init__(f"line {line}, column {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


def resolve_roles(keywords: list[Keyword]) -> list[Role]:
    """Fold keywords into roles; And/But inherit the previous role."""
    roles: list[Role] = []
    for i, kw in enumerate(keywords):
        if kw in PRIMARY_ROLES:
            roles.append(PRIMARY_ROLES[kw])
        elif i == 0:
            raise ValueError(f"{kw.value} cannot open a scenario")
        else:
            roles.append(roles[-1])
    return roles


_STEP_RE = re.compile(r"^(Given|When|Then|And|But)(?=\s|$)\s*(.*)$")
_UNSUPPORTED = (
    ("Background:", "Background is not supported"),
    ("Scenario Outline:", "Scenario Outline is not supported"),
    ("Scenario Template:", "Scenario Outline is not supported"),
    ("Examples:", "Examples are not supported"),
    ("Rule:", "Rule is not supported"),
    ("@", "tags are not supported"),
    ("|", "data tables are not supported"),
    ('"""', "doc strings are not supported"),
    ("```", "doc strings are not supported"),
)


def _unsupported(stripped: str) -> str | None:
    for prefix, reason in _UNSUPPORTED:
        if stripped.startswith(prefix):
            return reason
    return None


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip(" \t"))


class _ScenarioBuilder:
    def __init__(self, title: str, line: int):
        self.title = title
        self.line = line
        self.keywords: list[Keyword] = []
        self.texts: list[str] = []
        self.step_lines: list[int] = []
        self.step_indents: list[int] = []

    def build(self) -> Scenario:
        if not self.keywords:
            raise ParseError(self.line, 1, f"scenario {self.title!r} has no steps")
        for kw, text, ln in zip(self.keywords, self.texts, self.step_lines):
            if not text.strip():
                raise ParseError(ln, 1, f"{kw.value} step has empty text")
        if self.keywords[0] in (Keyword.AND, Keyword.BUT):
            raise ParseError(
                self.step_lines[0], self.step_indents[0] + 1,
                f"{self.keywords[0].value} cannot be the first step of a scenario",
            )
        roles = resolve_roles(self.keywords)
        steps = tuple(
            Step(kw, text.strip(), role)
            for kw, text, role in zip(self.keywords, self.texts, roles)
        )
        return Scenario(self.title, steps)


def parse(text: str, path: str | None = None) -> FeatureSpec:
    """Parse feature text into a :class:`FeatureSpec` or raise :class:`ParseError`."""
    if not isinstance(text, str):
        raise ParseError(1, 1, "input is not text")
    if text.startswith("﻿"):
        text = text[1:]
    lines = text.splitlines()

    title: str | None = None
    feature_line = 0
    description: list[str] = []
    scenarios: list[Scenario] = []
    seen_titles: dict[str, int] = {}
    current: _ScenarioBuilder | None = None
    last_line = 0

    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            if title is not None and current is None:
                description.append("")
            continue
        if stripped.startswith("#"):
            continue
        col = _indent(raw) + 1
        last_line = lineno

        if stripped.startswith("Feature:"):
            if title is not None:
                raise ParseError(lineno, col, "only one Feature per file is supported")
            title = stripped[len("Feature:"):].strip()
            if not title:
                raise ParseError(lineno, col, "Feature has no title")
            feature_line = lineno
            continue

        reason = _unsupported(stripped)
        if reason:
            raise ParseError(lineno, col, reason)

        if title is None:
            raise ParseError(lineno, col, "expected a Feature header")

        if stripped.startswith("Scenario:"):
            if current is not None:
                scenarios.append(current.build())
            sc_title = stripped[len("Scenario:"):].strip()
            if not sc_title:
                raise ParseError(lineno, col, "Scenario has no title")
            if sc_title in seen_titles:
                raise ParseError(
                    lineno, col,
                    f"duplicate scenario title {sc_title!r} (first on line {seen_titles[sc_title]})",
                )
            seen_titles[sc_title] = lineno
            current = _ScenarioBuilder(sc_title, lineno)
            continue

        if current is None:
            description.append(stripped)
            continue

        m = _STEP_RE.match(stripped)
        if m:
            current.keywords.append(Keyword(m.group(1)))
            current.texts.append(m.group(2))
            current.step_lines.append(lineno)
            current.step_indents.append(_indent(raw))
            continue

        if current.keywords and _indent(raw) > current.step_indents[-1]:
            current.texts[-1] = f"{current.texts[-1].rstrip()} {stripped}"
            continue

        word = stripped.split()[0]
        raise ParseError(lineno, col, f"unknown keyword {word!r} at step position")

    if title is None:
        raise ParseError(1, 1, "expected a Feature header")
    if current is None:
        raise ParseError(feature_line, 1, "feature has no scenarios")
    scenarios.append(current.build())

    while description and not description[0]:
        description.pop(0)
    while description and not description[-1]:
        description.pop()
    collapsed: list[str] = []
    for line in description:
        if line or (collapsed and collapsed[-1]):
            collapsed.append(line)

    return FeatureSpec(
        title=title,
        description="\n".join(collapsed),
        scenarios=tuple(scenarios),
        source_span=SourceSpan(path, feature_line, last_line),
    )


def render(spec: FeatureSpec) -> str:
    """Canonical text: 2-space scenario indent, 4-space steps, LF endings."""
    out = [f"Feature: {spec.title}"]
    if spec.description:
        for line in spec.description.split("\n"):
            out.append(f"  {line}" if line else "")
    for sc in spec.scenarios:
        out.append("")
        out.append(f"  Scenario: {sc.title}")
        for step in sc.steps:
            out.append(f"    {step.keyword.value} {step.text}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Lint
# ---------------------------------------------------------------------------

class Severity(str, enum.Enum):
    WARNING = "Warning"
    ERROR = "Error"


@dataclass(frozen=True)
class LintFinding:
    severity: Severity
    code: str
    scenario_index: int | None
    message: str


# Closed set of lint codes.
BROAD_SCENARIO = "BROAD_SCENARIO"
NO_ASSERTION = "NO_ASSERTION"
VACUOUS_ASSERTION = "VACUOUS_ASSERTION"
LINT_CODES = frozenset({BROAD_SCENARIO, NO_ASSERTION, VACUOUS_ASSERTION})

DEFAULT_BROAD_THRESHOLD = 8

# Assertion texts that hold for any implementation.
VACUOUS_PATTERNS = tuple(
    re.compile(p, re.IGNORECASE)
    for p in (
        r"^(it|everything|the (code|program|system|test|tests|result|build))\s+(should\s+)?(work|works|pass|passes|succeed|succeeds|run|runs)(\s+(fine|correctly|successfully|as expected))?\.?$",
        r"^(the\s+)?(test|tests|build)\s+should\s+(pass|be green)\.?$",
        r"^nothing\s+(bad\s+)?(should\s+)?happens?\.?$",
        r"^no\s+errors?\s+(should\s+)?(occur|occurs|happen|happens)\.?$",
        r"^true\s+(should\s+be|is)\s+true\.?$",
        r"^the\s+(result|output)\s+should\s+(exist|be returned)\.?$",
    )
)


def lint(spec: FeatureSpec, broad_threshold: int = DEFAULT_BROAD_THRESHOLD) -> list[LintFinding]:
    findings: list[LintFinding] = []
    for idx, sc in enumerate(spec.scenarios):
        if len(sc.steps) > broad_threshold:
            findings.append(LintFinding(
                Severity.WARNING, BROAD_SCENARIO, idx,
                f"scenario {sc.title!r} has {len(sc.steps)} steps (threshold {broad_threshold})",
            ))
        assertions = [s for s in sc.steps if s.role is Role.ASSERTION]
        if not assertions:
            findings.append(LintFinding(
                Severity.ERROR, NO_ASSERTION, idx,
                f"scenario {sc.title!r} has no Then step",
            ))
        for step in assertions:
            if any(p.match(step.text) for p in VACUOUS_PATTERNS):
                findings.append(LintFinding(
                    Severity.WARNING, VACUOUS_ASSERTION, idx,
                    f"assertion {step.text!r} holds for any implementation",
                ))
    return findings
