"""Fix rate, rescue rate, project tables and per-role cost breakdowns.

All rates are kept as exact fractions; rounding happens only for display and
is half-up. An empty denominator yields an undefined rate rather than zero.

``outcomes.jsonl`` holds one record per line::

    {"defect_id": "Math-21", "project": "Math", "blind_correct": false,
     "enlightened_attempted": true, "enlightened_correct": true,
     "enlightened_degraded": false}

``enlightened_degraded`` is optional (default false). It marks an enlightened
session that ran without a validated spec.

``table3-costs.json`` holds per-session cost records::

    {"sessions": [{"session": "s001", "costs": [
        {"role": "Architect", "duration_s": 130.5, "turns": 24, "tokens": 371000}, ...]}]}
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from .agents import AgentRole, CostRecord

UNDEFINED = "Undefined"
NO_SESSIONS = "no sessions"


class SchemaError(ValueError):
    def __init__(self, path: str | Path, line: int | None, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


def round_half_up(value: Fraction, decimals: int) -> Fraction:
    scale = 10**decimals
    scaled = value * scale
    rounded = math.floor(abs(scaled) + Fraction(1, 2))
    return Fraction(rounded if scaled >= 0 else -rounded, scale)


def format_fixed(value: Fraction, decimals: int) -> str:
    r = round_half_up(value, decimals)
    sign = "-" if r < 0 else ""
    r = abs(r)
    whole = r.numerator // r.denominator
    if decimals == 0:
        return f"{sign}{whole}"
    frac = (r - whole) * 10**decimals
    return f"{sign}{whole}.{int(frac):0{decimals}d}"


@dataclass(frozen=True)
class Rate:
    """``numerator / denominator`` as a percentage; undefined when the denominator is 0."""

    numerator: int
    denominator: int

    def __post_init__(self) -> None:
        if self.numerator < 0 or self.denominator < 0:
            raise ValueError("counts must be non-negative")
        if self.denominator and self.numerator > self.denominator:
            raise ValueError("numerator exceeds denominator")

    @property
    def defined(self) -> bool:
        return self.denominator > 0

    @property
    def fraction(self) -> Fraction | None:
        return Fraction(self.numerator, self.denominator) if self.defined else None

    @property
    def percent(self) -> Fraction | None:
        return self.fraction * 100 if self.defined else None

    def display(self, decimals: int = 1, suffix: str = "%") -> str:
        if not self.defined:
            return UNDEFINED
        return format_fixed(self.percent, decimals) + suffix


def fix_rate(correct: int, total: int) -> Rate:
    return Rate(correct, total)


# ---------------------------------------------------------------------------
# Outcome records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutcomeRecord:
    defect_id: str
    project: str
    blind_correct: bool
    enlightened_attempted: bool = False
    enlightened_correct: bool = False
    enlightened_degraded: bool = False

    def __post_init__(self) -> None:
        if self.enlightened_correct and not self.enlightened_attempted:
            raise ValueError(f"{self.defect_id}: enlightened_correct without an enlightened attempt")
        if self.enlightened_attempted and self.blind_correct:
            raise ValueError(f"{self.defect_id}: enlightened attempt on a blind success")
        if self.enlightened_degraded and not self.enlightened_attempted:
            raise ValueError(f"{self.defect_id}: degraded flag without an enlightened attempt")

    def rescued(self, include_degraded: bool = False) -> bool:
        return (
            self.enlightened_correct
            and not self.blind_correct
            and (include_degraded or not self.enlightened_degraded)
        )

    @property
    def degraded_success(self) -> bool:
        return self.enlightened_correct and self.enlightened_degraded

    def to_json(self) -> dict[str, Any]:
        return {
            "defect_id": self.defect_id,
            "project": self.project,
            "blind_correct": self.blind_correct,
            "enlightened_attempted": self.enlightened_attempted,
            "enlightened_correct": self.enlightened_correct,
            "enlightened_degraded": self.enlightened_degraded,
        }


_BOOL_FIELDS = ("blind_correct", "enlightened_attempted", "enlightened_correct")


def parse_outcome(doc: Any) -> OutcomeRecord:
    if not isinstance(doc, dict):
        raise ValueError("record must be a JSON object")
    for key in ("defect_id", "project"):
        if not isinstance(doc.get(key), str) or not doc[key]:
            raise ValueError(f"'{key}' must be a non-empty string")
    flags = {}
    for key in _BOOL_FIELDS + ("enlightened_degraded",):
        value = doc.get(key, False if key != "blind_correct" else None)
        if not isinstance(value, bool):
            raise ValueError(f"'{key}' must be a boolean")
        flags[key] = value
    return OutcomeRecord(doc["defect_id"], doc["project"], **flags)


def load_outcomes(path: str | Path) -> list[OutcomeRecord]:
    """Read ``outcomes.jsonl``; blank lines are skipped, bad lines raise SchemaError."""
    records: list[OutcomeRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = parse_outcome(json.loads(line))
            except (json.JSONDecodeError, ValueError) as exc:
                raise SchemaError(path, lineno, str(exc)) from None
            if rec.defect_id in seen:
                raise SchemaError(path, lineno, f"duplicate defect_id {rec.defect_id!r}")
            seen.add(rec.defect_id)
            records.append(rec)
    return records


def dump_outcomes(records: Iterable[OutcomeRecord]) -> str:
    """One JSON line per record, sorted by defect id."""
    return "".join(
        json.dumps(r.to_json(), sort_keys=True) + "\n" for r in sorted(records, key=lambda r: r.defect_id)
    )


def rescue_rate(records: Iterable[OutcomeRecord], include_degraded: bool = False) -> Rate:
    records = list(records)
    failures = [r for r in records if not r.blind_correct]
    return Rate(sum(r.rescued(include_degraded) for r in failures), len(failures))


# ---------------------------------------------------------------------------
# Project table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectRow:
    project: str
    bugs: int
    blind_success: int
    blind_fail: int
    rescued: int
    total: int
    degraded_successes: int = 0

    def __post_init__(self) -> None:
        if self.bugs != self.blind_success + self.blind_fail:
            raise ValueError(f"{self.project}: bugs != blind_success + blind_fail")
        if self.total != self.blind_success + self.rescued:
            raise ValueError(f"{self.project}: total != blind_success + rescued")
        if self.rescued > self.blind_fail:
            raise ValueError(f"{self.project}: more rescues than blind failures")

    @property
    def rate(self) -> Rate:
        return fix_rate(self.total, self.bugs)


@dataclass(frozen=True)
class ProjectTable:
    rows: tuple[ProjectRow, ...]
    total: ProjectRow

    @property
    def empty(self) -> bool:
        return not self.rows


def _row(project: str, records: Sequence[OutcomeRecord], include_degraded: bool) -> ProjectRow:
    blind = sum(r.blind_correct for r in records)
    rescued = sum(r.rescued(include_degraded) for r in records)
    return ProjectRow(
        project=project,
        bugs=len(records),
        blind_success=blind,
        blind_fail=len(records) - blind,
        rescued=rescued,
        total=blind + rescued,
        degraded_successes=sum(r.degraded_success for r in records),
    )


def project_table(records: Iterable[OutcomeRecord], include_degraded: bool = False) -> ProjectTable:
    """Rows sorted by project name, plus a total row summing every column."""
    groups: dict[str, list[OutcomeRecord]] = defaultdict(list)
    records = list(records)
    for r in records:
        groups[r.project].append(r)
    rows = tuple(_row(p, groups[p], include_degraded) for p in sorted(groups))
    return ProjectTable(rows, _row("Total", records, include_degraded))


# ---------------------------------------------------------------------------
# Cost breakdown
# ---------------------------------------------------------------------------

ROLE_ORDER = tuple(AgentRole)


def _exact(x: float) -> Fraction:
    # shortest repr keeps 136.77 as 13677/100 rather than its binary neighbour
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class RoleCost:
    role: AgentRole | str
    sessions: int
    avg_duration: Fraction
    avg_turns: Fraction
    avg_tokens: Fraction
    ratio: Fraction

    @property
    def name(self) -> str:
        return self.role.value if isinstance(self.role, AgentRole) else self.role


@dataclass(frozen=True)
class CostBreakdown:
    roles: tuple[RoleCost, ...]
    total: RoleCost

    @property
    def total_duration(self) -> float:
        return float(self.total.avg_duration)

    @property
    def total_tokens(self) -> Fraction:
        return self.total.avg_tokens


def cost_breakdown(records: Iterable[CostRecord]) -> CostBreakdown | None:
    """Per-role averages over the records of that role; None (undefined) when empty.

    ``ratio`` is the role's token sum over the grand token sum. The total row
    sums the per-role averages, i.e. the cost of one full pipeline run.
    """
    by_role: dict[AgentRole, list[CostRecord]] = defaultdict(list)
    for rec in records:
        by_role[rec.role].append(rec)
    if not by_role:
        return None
    grand_tokens = sum(r.tokens for recs in by_role.values() for r in recs)
    roles = []
    for role in ROLE_ORDER:
        recs = by_role.get(role)
        if not recs:
            continue
        n = len(recs)
        tokens = sum(r.tokens for r in recs)
        roles.append(RoleCost(
            role=role,
            sessions=n,
            avg_duration=sum((_exact(r.duration_s) for r in recs), Fraction(0)) / n,
            avg_turns=Fraction(sum(r.turns for r in recs), n),
            avg_tokens=Fraction(tokens, n),
            ratio=Fraction(tokens, grand_tokens) if grand_tokens else Fraction(0),
        ))
    total = RoleCost(
        role="Total",
        sessions=max(r.sessions for r in roles),
        avg_duration=sum((r.avg_duration for r in roles), Fraction(0)),
        avg_turns=sum((r.avg_turns for r in roles), Fraction(0)),
        avg_tokens=sum((r.avg_tokens for r in roles), Fraction(0)),
        ratio=sum((r.ratio for r in roles), Fraction(0)),
    )
    return CostBreakdown(tuple(roles), total)


def load_costs(path: str | Path) -> list[CostRecord]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(path, exc.lineno, exc.msg) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("sessions"), list):
        raise SchemaError(path, None, "expected an object with a 'sessions' list")
    out = []
    for i, session in enumerate(doc["sessions"]):
        costs = session.get("costs") if isinstance(session, dict) else None
        if not isinstance(costs, list):
            raise SchemaError(path, None, f"sessions[{i}]: 'costs' must be a list")
        for j, c in enumerate(costs):
            try:
                rec = CostRecord.from_json(c)
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(path, None, f"sessions[{i}].costs[{j}]: {exc}") from None
            if rec.tokens < 0 or rec.turns < 0 or rec.duration_s < 0:
                raise SchemaError(path, None, f"sessions[{i}].costs[{j}]: negative value")
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

ROW_DECIMALS = 1
TOTAL_DECIMALS = 2


def _tokens(x: Fraction) -> str:
    return f"{int(round_half_up(x, 0)):,}"


def _project_cells(row: ProjectRow, total: bool) -> list[str]:
    rate = row.rate.display(TOTAL_DECIMALS if total else ROW_DECIMALS)
    return [row.project, str(row.bugs), str(row.blind_success), str(row.blind_fail),
            str(row.rescued), str(row.total), rate]


def _cost_cells(rc: RoleCost) -> list[str]:
    return [rc.name, str(rc.sessions), format_fixed(rc.avg_duration, 2), format_fixed(rc.avg_turns, 2),
            _tokens(rc.avg_tokens), format_fixed(rc.ratio * 100, 1) + "%"]


PROJECT_HEADER = ["Project", "Bugs", "Blind Succ.", "Blind Fail", "Enl. Rescue", "Total", "Rate"]
COST_HEADER = ["Role", "Sessions", "Avg Duration (s)", "Avg Turns", "Avg Tokens", "Cost Ratio"]


def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return lines


def render_report(
    records: Sequence[OutcomeRecord],
    costs: CostBreakdown | None = None,
    fmt: str = "markdown",
    include_degraded: bool = False,
) -> str:
    """Project table, rescue summary and (optional) cost table as markdown or csv."""
    if fmt not in ("markdown", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    table = project_table(records, include_degraded)
    rescue = rescue_rate(records, include_degraded)
    degraded = table.total.degraded_successes
    if fmt == "csv":
        return _render_csv(table, rescue, degraded, costs, include_degraded)

    lines = ["# Repair campaign report", ""]
    if table.empty:
        lines += [f"_{NO_SESSIONS}_", ""]
    else:
        lines += ["## Fix rate by project", ""]
        body = [_project_cells(r, False) for r in table.rows]
        total = [f"**{c}**" for c in _project_cells(table.total, True)]
        lines += _md_table(PROJECT_HEADER, body + [total]) + [""]
        lines += ["## Rescue rate", ""]
        lines.append(f"Rescued {rescue.numerator} of {rescue.denominator} blind failures: {rescue.display(1)}")
        mode = "included" if include_degraded else "excluded"
        lines += ["", f"Successes without a validated spec (degraded, {mode}): {degraded}", ""]
    if costs is not None:
        lines += ["## Cost breakdown", ""]
        cost_rows = [_cost_cells(rc) for rc in costs.roles]
        lines += _md_table(COST_HEADER, cost_rows + [[f"**{c}**" for c in _cost_cells(costs.total)]]) + [""]
    return "\n".join(lines)


CSV_HEADER = ["section", "name", "bugs", "blind_success", "blind_fail", "rescued", "total", "rate",
              "sessions", "avg_duration_s", "avg_turns", "avg_tokens", "cost_ratio"]


def _render_csv(table: ProjectTable, rescue: Rate, degraded: int, costs: CostBreakdown | None,
                include_degraded: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    blank = [""] * 5
    if table.empty:
        w.writerow(["status", NO_SESSIONS] + [""] * (len(CSV_HEADER) - 2))
    else:
        for row in table.rows + (table.total,):
            is_total = row is table.total
            cells = _project_cells(row, is_total)
            w.writerow(["total" if is_total else "project", *cells[:-1], cells[-1].rstrip("%")] + blank)
        w.writerow(["rescue", "rescue_rate", "", "", rescue.denominator, rescue.numerator, "",
                    rescue.display(1, suffix="")] + blank)
        name = "degraded_included" if include_degraded else "degraded_excluded"
        w.writerow(["rescue", name, "", "", "", degraded, "", ""] + blank)
    if costs is not None:
        for rc in costs.roles + (costs.total,):
            cells = _cost_cells(rc)
            w.writerow(["cost", cells[0]] + [""] * 6 + [cells[1], cells[2], cells[3],
                                                       cells[4].replace(",", ""), cells[5].rstrip("%")])
    return buf.getvalue()

