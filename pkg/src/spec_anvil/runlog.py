"""Line-delimited session log (``sessions.jsonl``).

Each line is one self-contained session record as produced by
``RepairSession.to_record``:

defect_id, project
    Defect identity.
mode
    ``blind`` or ``enlightened``.
outcome
    ``CorrectFix``, ``PlausibleOnly``, ``NoFix`` or ``Error``.
degraded
    True for an enlightened session that had no validated spec.
rqa_status
    ``validated``, ``harness_fallback``, ``exhausted``, ``architect_failed`` or null.
verdicts
    One ``{"attempt", "kind", "detail", "side"}`` object per verification round.
spec_in_fixer_prompt
    Whether the Fixer saw a specification block.
patch_paths
    Files touched by the proposed patch.
fallback_events
    ``{"kind", "detail"}`` objects, kind ``EnvironmentPruning`` or ``StrategyFallback``.
costs
    ``{"role", "duration_s", "turns", "tokens"}`` per agent role used.
notes, adjudication
    Free-form diagnostics.
artifacts
    Artifact name to file path.
started_at, finished_at
    ISO-8601 UTC timestamps.

A crash can leave a partial final line; readers skip it and the writer
truncates it before appending.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Mapping

from .metrics import SchemaError

REQUIRED_FIELDS = ("defect_id", "project", "mode", "outcome")


def _parse_lines(data: str, path: Path) -> tuple[list[dict[str, Any]], int]:
    """Records plus the byte offset just past the last complete line."""
    records = []
    lines = data.split("\n")
    good_end = 0
    offset = 0
    for lineno, line in enumerate(lines, 1):
        last = lineno == len(lines)
        end = offset + len(line.encode("utf-8")) + (0 if last else 1)
        if line.strip():
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                if last:  # unterminated tail left by an interrupted write
                    break
                raise SchemaError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(doc, dict) or any(k not in doc for k in REQUIRED_FIELDS):
                raise SchemaError(path, lineno, f"session record needs {', '.join(REQUIRED_FIELDS)}")
            records.append(doc)
        if not last:
            good_end = end
        elif line.strip():
            good_end = end
        offset = end
    return records, good_end


def load_sessions(path: str | os.PathLike[str]) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        return []
    return _parse_lines(path.read_text(encoding="utf-8"), path)[0]


def completed_sessions(path: str | os.PathLike[str]) -> dict[tuple[str, str], dict[str, Any]]:
    """Latest record per (defect_id, mode)."""
    return {(r["defect_id"], r["mode"]): r for r in load_sessions(path)}


class SessionLog:
    """Append-only writer; one lock serializes every line."""

    def __init__(self, path: str | os.PathLike[str]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._repair()

    def _repair(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_text(encoding="utf-8")
        _, good_end = _parse_lines(data, self.path)
        raw = data.encode("utf-8")
        if good_end < len(raw):
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        elif raw and not raw.endswith(b"\n"):
            with open(self.path, "ab") as fh:
                fh.write(b"\n")

    def append(self, record: Mapping[str, Any]) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
