"""Defect corpora, workspaces, baseline test runs and the single-file repair scope.

Checkouts are plain copies of the corpus trees, so the buggy and fixed
variants of a defect never share state. This module and :mod:`spec_anvil.rqa`
are the only places allowed to materialize the fixed tree; every checkout and
workspace read is appended to :data:`ACCESS_LOG` together with the calling
module so tests can audit that boundary.

Corpus manifest (``corpus.json``)::

    {"defects": [{
        "id": "calc-1", "project": "calc",
        "buggy_dir": "calc-1/buggy", "fixed_dir": "calc-1/fixed",
        "failing_tests": ["tests.test_stats.StatsTest.test_median_unsorted"],
        "modified_files": ["src/calc/stats.py"],
        "test": {"setup": null, "cmd": "{python} -m unittest", "timeout_s": 60},
        "test_files": ["tests/test_stats.py"],
        "probes": {"cmd": "{python} {corpus}/probes/calc-1.py {input}",
                   "inputs": ["[3, 1, 2]"], "timeout_s": 30},
        "tags": {}
    }]}

``test_files``, ``probes`` and ``tags`` are optional. Directory paths are
relative to the manifest.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import re
import shutil
import sys
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Iterable

from .commands import TemplateError, expand_tokens, run_process, split_template


class CorpusError(Exception):
    """The corpus manifest is malformed or references missing data."""


class PatchConflict(Exception):
    pass


class ScopeViolation(Exception):
    def __init__(self, paths: list[str], allowed: str):
        super().__init__(f"patch touches {paths} outside the repair scope {allowed!r}")
        self.paths = paths
        self.allowed = allowed


class Variant(str, enum.Enum):
    BUGGY = "Buggy"
    FIXED = "Fixed"
    PATCHED = "Patched"


# ---------------------------------------------------------------------------
# Access audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccessEvent:
    seq: int
    defect_id: str
    variant: Variant
    operation: str
    caller: str
    path: str


class AccessLog:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._events: list[AccessEvent] = []

    def record(self, defect_id: str, variant: Variant, operation: str, path: str) -> None:
        caller = _external_caller()
        with self._lock:
            self._events.append(
                AccessEvent(len(self._events), defect_id, variant, operation, caller, path)
            )

    def events(self) -> list[AccessEvent]:
        with self._lock:
            return list(self._events)

    def clear(self) -> None:
        with self._lock:
            self._events.clear()


ACCESS_LOG = AccessLog()


def _external_caller() -> str:
    """Module that called the audited operation (checkout, read_text)."""
    # frames: _external_caller <- record <- audited op <- caller
    frame = sys._getframe(3)
    return frame.f_globals.get("__name__", "?") if frame is not None else "?"


# ---------------------------------------------------------------------------
# Corpus model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestCommand:
    test: str
    setup: str | None = None
    timeout: float = 60.0

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class ProbeSuite:
    command: str
    inputs: tuple[str, ...]
    timeout: float = 30.0


@dataclass(frozen=True)
class DefectRecord:
    id: str
    project: str
    buggy_source: Path
    fixed_source: Path
    failing_tests: tuple[str, ...]
    modified_files: tuple[str, ...]
    test_command: TestCommand
    tags: dict[str, Any] = field(default_factory=dict, compare=False)
    test_files: tuple[str, ...] = ()
    probes: ProbeSuite | None = None
    corpus_root: Path | None = None

    @property
    def scope(self) -> str:
        return self.modified_files[0]


@dataclass(frozen=True)
class Corpus:
    root: Path
    defects: tuple[DefectRecord, ...]

    def get(self, defect_id: str) -> DefectRecord:
        for d in self.defects:
            if d.id == defect_id:
                return d
        raise KeyError(f"unknown defect {defect_id!r}")

    def ids(self) -> list[str]:
        return [d.id for d in self.defects]


def _require(entry: dict, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if key not in entry:
        raise CorpusError(f"{where}: missing field {key!r}")
    value = entry[key]
    if not isinstance(value, kind):
        raise CorpusError(f"{where}: field {key!r} has wrong type")
    return value


def _relpath(value: str, where: str) -> str:
    pure = PurePosixPath(value)
    if not value or pure.is_absolute() or ".." in pure.parts:
        raise CorpusError(f"{where}: path {value!r} must be workspace-relative")
    return pure.as_posix()


def _check_template(template: str, where: str) -> str:
    try:
        split_template(template)
    except TemplateError as exc:
        raise CorpusError(f"{where}: {exc}") from exc
    return template


def parse_defect(entry: Any, root: Path, index: int = 0) -> DefectRecord:
    where = f"defects[{index}]"
    if not isinstance(entry, dict):
        raise CorpusError(f"{where}: must be an object")
    defect_id = _require(entry, "id", str, where)
    where = f"defect {defect_id!r}"
    project = _require(entry, "project", str, where)
    buggy_dir = _require(entry, "buggy_dir", str, where)
    fixed_dir = _require(entry, "fixed_dir", str, where)
    failing = _require(entry, "failing_tests", list, where)
    modified = _require(entry, "modified_files", list, where)
    test = _require(entry, "test", dict, where)
    if not modified:
        raise CorpusError(f"{where}: modified_files must not be empty")
    if not all(isinstance(x, str) for x in failing + modified):
        raise CorpusError(f"{where}: failing_tests and modified_files must hold strings")
    cmd = _require(test, "cmd", str, f"{where}.test")
    setup = test.get("setup")
    if setup is not None and not isinstance(setup, str):
        raise CorpusError(f"{where}.test: setup must be a string")
    timeout = test.get("timeout_s", 60)
    if not isinstance(timeout, (int, float)) or timeout <= 0:
        raise CorpusError(f"{where}.test: timeout_s must be a positive number")
    buggy, fixed = (root / buggy_dir).resolve(), (root / fixed_dir).resolve()
    if buggy == fixed:
        raise CorpusError(f"{where}: buggy_dir and fixed_dir must differ")
    probes = None
    if entry.get("probes") is not None:
        p = _require(entry, "probes", dict, where)
        inputs = _require(p, "inputs", list, f"{where}.probes")
        probes = ProbeSuite(
            _check_template(_require(p, "cmd", str, f"{where}.probes"), f"{where}.probes"),
            tuple(str(x) for x in inputs),
            float(p.get("timeout_s", 30)),
        )
    test_files = entry.get("test_files", [])
    if not isinstance(test_files, list):
        raise CorpusError(f"{where}: test_files must be a list")
    return DefectRecord(
        id=defect_id,
        project=project,
        buggy_source=buggy,
        fixed_source=fixed,
        failing_tests=tuple(failing),
        modified_files=tuple(_relpath(m, where) for m in modified),
        test_command=TestCommand(
            _check_template(cmd, where),
            _check_template(setup, where) if setup else None,
            float(timeout),
        ),
        tags=dict(entry.get("tags", {})),
        test_files=tuple(_relpath(t, where) for t in test_files),
        probes=probes,
        corpus_root=root.resolve(),
    )


def load_corpus(path: str | os.PathLike[str]) -> Corpus:
    """Load ``corpus.json`` (or a directory containing it)."""
    path = Path(path)
    if path.is_dir():
        path = path / "corpus.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CorpusError(f"manifest {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("defects"), list):
        raise CorpusError("manifest must be an object with a 'defects' list")
    root = path.parent
    defects = tuple(parse_defect(e, root, i) for i, e in enumerate(doc["defects"]))
    ids = [d.id for d in defects]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise CorpusError(f"duplicate defect ids: {dupes}")
    return Corpus(root.resolve(), defects)


# ---------------------------------------------------------------------------
# Workspaces
# ---------------------------------------------------------------------------

@dataclass
class Workspace:
    root: Path
    variant: Variant
    defect_id: str
    patch_id: str | None = None
    owned_dir: Path | None = field(default=None, repr=False)

    def path(self, rel: str) -> Path:
        return self.root / _relpath(rel, "workspace")

    def read_text(self, rel: str) -> str:
        ACCESS_LOG.record(self.defect_id, self.variant, "read", rel)
        return self.path(rel).read_text(encoding="utf-8")

    def exists(self, rel: str) -> bool:
        return self.path(rel).exists()

    def cleanup(self) -> None:
        shutil.rmtree(self.owned_dir or self.root, ignore_errors=True)

    def __enter__(self) -> Workspace:
        return self

    def __exit__(self, *exc: object) -> None:
        self.cleanup()


def _ignore_caches(_dir: str, names: list[str]) -> list[str]:
    return [n for n in names if n == "__pycache__" or n.endswith(".pyc")]


def checkout(
    defect: DefectRecord,
    variant: Variant,
    base_dir: str | os.PathLike[str] | None = None,
) -> Workspace:
    """Copy the requested tree into a fresh directory."""
    if variant is Variant.PATCHED:
        raise ValueError("patched workspaces are produced by apply_patch")
    source = defect.buggy_source if variant is Variant.BUGGY else defect.fixed_source
    if not source.is_dir():
        raise CorpusError(f"{defect.id}: {variant.value} tree {source} does not exist")
    ACCESS_LOG.record(defect.id, variant, "checkout", str(source))
    parent = tempfile.mkdtemp(prefix=f"anvil-{defect.id}-{variant.value.lower()}-", dir=base_dir)
    root = Path(parent) / "ws"
    try:
        shutil.copytree(source, root, ignore=_ignore_caches)
    except OSError as exc:
        shutil.rmtree(parent, ignore_errors=True)
        raise CorpusError(f"{defect.id}: copying {source} failed: {exc}") from exc
    return Workspace(root, variant, defect.id, owned_dir=Path(parent))


def tree_digest(root: str | os.PathLike[str]) -> str:
    """Content hash over relative paths and bytes, skipping bytecode caches."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = path.relative_to(root).as_posix()
        if "__pycache__" in rel.split("/") or rel.endswith(".pyc"):
            continue
        h.update(rel.encode())
        h.update(b"\0")
        h.update(hashlib.sha256(path.read_bytes()).digest())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Test execution and failure reports
# ---------------------------------------------------------------------------

class TestStatus(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    ERROR = "Error"

    __test__ = False


@dataclass(frozen=True)
class TestRunResult:
    status: TestStatus
    failing_test_names: tuple[str, ...]
    raw_log: str
    duration: float
    detail: str = ""

    __test__ = False


# Failure header formats, tried on every log line:
#   unittest  "FAIL: test_x (pkg.mod.Class)" / "(pkg.mod.Class.test_x)" -> pkg.mod.Class.test_x
#   JUnit 4   "1) testX(org.pkg.Class)"                                 -> org.pkg.Class::testX
#   Defects4J "  - org.pkg.Class::testX"                                -> as written
#   pytest    "FAILED tests/test_a.py::test_x - ..."                    -> tests/test_a.py::test_x
_UNITTEST_RE = re.compile(r"^(?:FAIL|ERROR): (\w+) \(([\w.]+)\)")
_JUNIT_RE = re.compile(r"^\d+\) (\w+)\(([\w.$]+)\)\s*$")
_D4J_RE = re.compile(r"^\s*-\s+([\w.$]+::[\w$]+)\s*$")
_PYTEST_RE = re.compile(r"^FAILED (\S+::\S+)")
_SEPARATOR_RE = re.compile(r"^\s*([-=])\1{9,}\s*$")

# Assertion diff formats:
#   "expected:<A> but was:<B>"        (JUnit)
#   "expected A ... actual B"         (optional ':' or '=' after each word)
_DIFF_JUNIT_RE = re.compile(r"expected:\s*<(.*?)>\s*but was:\s*<(.*?)>")
_DIFF_WORDS_RE = re.compile(r"\bexpected\s*[:=]?\s*(.+?)[,;]?\s+(?:but\s+)?actual\s*[:=]?\s*(.+?)\s*$", re.IGNORECASE)


def _failure_header(line: str) -> str | None:
    m = _UNITTEST_RE.match(line)
    if m:
        method, qual = m.groups()
        return qual if qual.endswith("." + method) else f"{qual}.{method}"
    m = _JUNIT_RE.match(line)
    if m:
        return f"{m.group(2)}::{m.group(1)}"
    m = _D4J_RE.match(line) or _PYTEST_RE.match(line)
    if m:
        return m.group(1)
    return None


def extract_failing_tests(log: str) -> list[str]:
    names: list[str] = []
    for line in log.splitlines():
        name = _failure_header(line)
        if name and name not in names:
            names.append(name)
    return names


def run_tests(workspace: Workspace, cmd: TestCommand) -> TestRunResult:
    """Run setup (if any) then the test command; nonzero test exit means Fail."""
    logs: list[str] = []
    total = 0.0
    steps = [("setup", cmd.setup)] if cmd.setup else []
    steps.append(("test", cmd.test))
    for label, template in steps:
        argv = expand_tokens(split_template(template), workspace=str(workspace.root))
        res = run_process(argv, workspace.root, cmd.timeout)
        total += res.duration
        logs.append(res.output)
        raw = "".join(logs)
        if res.spawn_error:
            return TestRunResult(TestStatus.ERROR, (), raw, total, f"{label}: {res.spawn_error}")
        if res.timed_out:
            return TestRunResult(TestStatus.ERROR, (), raw, total, f"{label}: timeout after {cmd.timeout}s")
        if label == "setup" and res.exit_code != 0:
            return TestRunResult(TestStatus.ERROR, (), raw, total, f"setup exited {res.exit_code}")
    raw = "".join(logs)
    if res.exit_code == 0:
        return TestRunResult(TestStatus.PASS, (), raw, total)
    return TestRunResult(TestStatus.FAIL, tuple(extract_failing_tests(raw)), raw, total)


@dataclass(frozen=True)
class FailureReport:
    raw_log: str
    failing_test_names: tuple[str, ...]
    stack_excerpt: str
    assertion_diffs: tuple[tuple[str, str], ...]

    def render(self) -> str:
        parts = ["Failing tests:"]
        parts += [f"  - {n}" for n in self.failing_test_names] or ["  (none identified)"]
        if self.assertion_diffs:
            parts.append("Assertion differences:")
            parts += [f"  expected {e!r} but got {a!r}" for e, a in self.assertion_diffs]
        parts.append("Stack excerpt:")
        parts.append(self.stack_excerpt or "(none)")
        return "\n".join(parts)


def _stack_blocks(log: str) -> list[str]:
    """First contiguous block after each failure header.

    A block starts on the line after the header (separator lines directly
    after the header are skipped) and ends before the next blank line,
    separator line or failure header.
    """
    lines = log.splitlines()
    blocks: list[str] = []
    seen: set[str] = set()
    i = 0
    while i < len(lines):
        name = _failure_header(lines[i])
        if name is None or name in seen:
            i += 1
            continue
        seen.add(name)
        j = i + 1
        while j < len(lines) and _SEPARATOR_RE.match(lines[j]):
            j += 1
        block = []
        while j < len(lines):
            line = lines[j]
            if not line.strip() or _SEPARATOR_RE.match(line) or _failure_header(line):
                break
            block.append(line)
            j += 1
        if block:
            blocks.append("\n".join([lines[i]] + block))
        i = j if j > i else i + 1
    return blocks


def extract_assertion_diffs(log: str) -> list[tuple[str, str]]:
    diffs: list[tuple[str, str]] = []
    for line in log.splitlines():
        found = _DIFF_JUNIT_RE.findall(line)
        if not found:
            m = _DIFF_WORDS_RE.search(line)
            found = [m.groups()] if m else []
        for pair in found:
            if pair not in diffs:
                diffs.append(pair)
    return diffs


def collect_failure_report(result: TestRunResult) -> FailureReport:
    if result.status is not TestStatus.FAIL:
        raise ValueError(f"failure report needs a failing run, got {result.status.value}")
    return FailureReport(
        raw_log=result.raw_log,
        failing_test_names=result.failing_test_names,
        stack_excerpt="\n\n".join(_stack_blocks(result.raw_log)),
        assertion_diffs=tuple(extract_assertion_diffs(result.raw_log)),
    )


# ---------------------------------------------------------------------------
# Layout detection
# ---------------------------------------------------------------------------

SOURCE_ROOT_CANDIDATES = ("src/main/java", "*/src/main/java", "src/java", "src")
TEST_ROOT_CANDIDATES = ("src/test/java", "*/src/test/java", "src/test", "test", "tests")


@dataclass(frozen=True)
class SourceLayout:
    source_roots: tuple[str, ...]
    test_roots: tuple[str, ...]


def _probe(root: Path, candidates: Iterable[str]) -> tuple[str, ...]:
    for pattern in candidates:
        hits = sorted(p.relative_to(root).as_posix() for p in root.glob(pattern) if p.is_dir())
        if hits:
            return tuple(hits)
    return ()


def detect_layout(workspace: Workspace | str | os.PathLike[str]) -> SourceLayout:
    """Return the first matching candidate for source and test roots."""
    root = workspace.root if isinstance(workspace, Workspace) else Path(workspace)
    return SourceLayout(_probe(root, SOURCE_ROOT_CANDIDATES), _probe(root, TEST_ROOT_CANDIDATES))


# ---------------------------------------------------------------------------
# Patches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FileEdit:
    path: str
    content: str
    create: bool = False


@dataclass(frozen=True)
class Patch:
    edits: tuple[FileEdit, ...]
    rationale: str = ""

    def __post_init__(self) -> None:
        paths = [e.path for e in self.edits]
        if len(paths) != len(set(paths)):
            raise ValueError("patch edits the same path twice")

    @property
    def paths(self) -> list[str]:
        return [e.path for e in self.edits]

    def digest(self) -> str:
        h = hashlib.sha256()
        for e in sorted(self.edits, key=lambda e: e.path):
            h.update(e.path.encode() + b"\0" + e.content.encode() + b"\0")
        return h.hexdigest()[:16]

    def to_json(self) -> dict[str, Any]:
        return {
            "rationale": self.rationale,
            "edits": [{"path": e.path, "content": e.content, "create": e.create} for e in self.edits],
        }


def scope_check(patch: Patch, defect: DefectRecord) -> None:
    """Raise :class:`ScopeViolation` unless every edit targets ``modified_files[0]``."""
    outside = [p for p in patch.paths if PurePosixPath(p).as_posix() != defect.scope]
    if outside:
        raise ScopeViolation(outside, defect.scope)


def apply_patch(workspace: Workspace, patch: Patch) -> Workspace:
    """Replace edited files in place; the workspace becomes the Patched variant."""
    if workspace.variant is not Variant.BUGGY:
        raise PatchConflict(f"patches apply to Buggy workspaces, not {workspace.variant.value}")
    targets = []
    for edit in patch.edits:
        pure = PurePosixPath(edit.path)
        if pure.is_absolute() or ".." in pure.parts or not pure.parts:
            raise PatchConflict(f"path {edit.path!r} escapes the workspace")
        target = workspace.root / pure
        if not target.is_file() and not edit.create:
            raise PatchConflict(f"{edit.path} does not exist in the workspace")
        targets.append((target, edit.content))
    for target, content in targets:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
    workspace.variant = Variant.PATCHED
    workspace.patch_id = patch.digest()
    return workspace


# ---------------------------------------------------------------------------
# Correctness oracle helpers (fixed tree access stays in this module)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeComparison:
    identical: bool
    method: str  # "probes" or "identity"
    diverging_inputs: tuple[str, ...] = ()
    detail: str = ""


def _probe_outputs(defect: DefectRecord, ws: Workspace) -> list[tuple[int | None, str]]:
    assert defect.probes is not None
    tokens = split_template(defect.probes.command)
    out = []
    for value in defect.probes.inputs:
        argv = expand_tokens(
            tokens, workspace=str(ws.root), corpus=str(defect.corpus_root or ""), input=value
        )
        res = run_process(argv, ws.root, defect.probes.timeout)
        out.append((res.exit_code, res.output if not res.spawn_error else f"spawn: {res.spawn_error}"))
    return out


def compare_with_fixed(defect: DefectRecord, patched: Workspace, use_probes: bool = True) -> ProbeComparison:
    """Compare a patched tree against the developer fix.

    With probes, every hidden probe input must give the same exit code and
    output on both trees. Without probes (or when the defect has none) the
    repaired file must equal the fixed file, ignoring trailing whitespace.
    """
    fixed = checkout(defect, Variant.FIXED)
    try:
        if use_probes and defect.probes is not None and defect.probes.inputs:
            mine = _probe_outputs(defect, patched)
            theirs = _probe_outputs(defect, fixed)
            diverging = tuple(
                inp for inp, a, b in zip(defect.probes.inputs, mine, theirs) if a != b
            )
            return ProbeComparison(not diverging, "probes", diverging)
        a = patched.path(defect.scope).read_text(encoding="utf-8")
        b = fixed.path(defect.scope).read_text(encoding="utf-8")
        norm = lambda s: "\n".join(line.rstrip() for line in s.strip().splitlines())
        return ProbeComparison(norm(a) == norm(b), "identity")
    finally:
        fixed.cleanup()


# ---------------------------------------------------------------------------
# Corpus validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DefectFinding:
    defect_id: str
    problem: str


def validate_defect(defect: DefectRecord) -> list[DefectFinding]:
    """Sanity checks: trees present, scope differs, buggy fails and fixed passes."""
    findings = []
    for label, src in (("buggy", defect.buggy_source), ("fixed", defect.fixed_source)):
        if not src.is_dir():
            findings.append(DefectFinding(defect.id, f"{label} tree {src} missing"))
    if findings:
        return findings
    for rel in defect.modified_files + defect.test_files:
        if not (defect.buggy_source / rel).is_file():
            findings.append(DefectFinding(defect.id, f"{rel} missing from buggy tree"))
    scope_b, scope_f = defect.buggy_source / defect.scope, defect.fixed_source / defect.scope
    if scope_b.is_file() and scope_f.is_file() and scope_b.read_bytes() == scope_f.read_bytes():
        findings.append(DefectFinding(defect.id, f"{defect.scope} is identical in buggy and fixed trees"))
    for variant, expected in ((Variant.BUGGY, TestStatus.FAIL), (Variant.FIXED, TestStatus.PASS)):
        ws = checkout(defect, variant)
        try:
            res = run_tests(ws, defect.test_command)
        finally:
            ws.cleanup()
        if res.status is not expected:
            findings.append(DefectFinding(
                defect.id,
                f"{variant.value} tree: expected {expected.value}, got {res.status.value} {res.detail}".rstrip(),
            ))
        elif variant is Variant.BUGGY:
            missing = [t for t in defect.failing_tests if t not in res.failing_test_names]
            if missing:
                findings.append(DefectFinding(defect.id, f"failing tests not observed: {missing}"))
    return findings


def validate_corpus(corpus: Corpus) -> list[DefectFinding]:
    findings: list[DefectFinding] = []
    for defect in corpus.defects:
        findings.extend(validate_defect(defect))
    return findings
