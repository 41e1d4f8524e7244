"""Generate the bundled replay fixtures.

fixtures/table1-replay/outcomes.jsonl
    680 outcome records whose per-project counts equal the target fix-rate
    table. Which defect id gets which outcome is synthetic (seeded shuffle).
fixtures/table3-costs.json
    100 synthetic sessions whose per-role averages equal the target cost
    table exactly.

Usage: python3 scripts/make_replay_fixtures.py [--out fixtures]
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

# project, bugs, blind correct, blind failed, rescued
TABLE1 = [
    ("Cli", 39, 39, 0, 0),
    ("JacksonCore", 26, 26, 0, 0),
    ("Chart", 26, 23, 3, 3),
    ("Mockito", 38, 32, 6, 6),
    ("Gson", 18, 12, 6, 6),
    ("JxPath", 22, 20, 2, 2),
    ("Time", 26, 20, 6, 5),
    ("Collections", 28, 22, 6, 5),
    ("JacksonDatabind", 110, 103, 7, 6),
    ("Lang", 61, 59, 2, 1),
    ("Codec", 18, 11, 7, 5),
    ("Csv", 16, 15, 1, 0),
    ("JacksonXml", 6, 2, 4, 2),
    ("Compress", 47, 29, 18, 14),
    ("Math", 106, 48, 58, 39),
    ("Jsoup", 93, 59, 34, 25),
]

# role, avg duration (s), avg turns, avg tokens
TABLE3 = [
    ("Architect", "136.77", "24.26", 372107),
    ("Engineer", "671.67", "70.23", 3365986),
    ("Fixer", "452.64", "44.91", 2044348),
]

SESSIONS = 100


def outcome_records(seed: int = 7) -> list[dict]:
    rng = random.Random(seed)
    out = []
    for project, bugs, blind, failed, rescued in TABLE1:
        assert bugs == blind + failed and rescued <= failed
        kinds = ["blind"] * blind + ["rescued"] * rescued + ["failed"] * (failed - rescued)
        rng.shuffle(kinds)
        for i, kind in enumerate(kinds, 1):
            # every blind failure had an enlightened attempt (Csv's single failure included)
            out.append({
                "defect_id": f"{project}-{i}",
                "project": project,
                "blind_correct": kind == "blind",
                "enlightened_attempted": kind != "blind",
                "enlightened_correct": kind == "rescued",
                "enlightened_degraded": False,
            })
    return out


def split_total(total: int, parts: int, rng: random.Random, spread: float = 0.35) -> list[int]:
    """``parts`` positive integers summing to ``total`` (largest-remainder rounding)."""
    weights = [1 + rng.uniform(-spread, spread) for _ in range(parts)]
    scale = total / sum(weights)
    raw = [w * scale for w in weights]
    ints = [int(x) for x in raw]
    order = sorted(range(parts), key=lambda i: raw[i] - ints[i], reverse=True)
    for i in order[: total - sum(ints)]:
        ints[i] += 1
    assert sum(ints) == total
    return ints


def cost_sessions(seed: int = 11) -> dict:
    rng = random.Random(seed)
    columns = {}
    for role, duration, turns, tokens in TABLE3:
        centis = round(float(duration) * 100) * SESSIONS
        columns[role] = (
            split_total(centis, SESSIONS, rng),
            split_total(round(float(turns) * SESSIONS), SESSIONS, rng),
            split_total(tokens * SESSIONS, SESSIONS, rng),
        )
    sessions = []
    for i in range(SESSIONS):
        costs = []
        for role, _, _, _ in TABLE3:
            d, t, k = columns[role]
            costs.append({"role": role, "duration_s": d[i] / 100, "turns": t[i], "tokens": k[i]})
        sessions.append({"session": f"s{i + 1:03d}", "costs": costs})
    return {
        "note": "synthetic per-session records; only the per-role averages are meaningful",
        "sessions": sessions,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures")
    args = ap.parse_args()
    replay = args.out / "table1-replay"
    replay.mkdir(parents=True, exist_ok=True)
    (replay / "outcomes.jsonl").write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in outcome_records()), encoding="utf-8"
    )
    (replay / "README.md").write_text(
        "# Table-1 replay records\n\n"
        "680 outcome records, one per defect. Per-project counts match the target fix-rate table.\n"
        "The mapping of outcomes to individual defect ids is synthetic (seeded shuffle) and\n"
        "carries no information. Every blind failure is recorded as an attempted enlightened run.\n"
        "Regenerate with `python3 scripts/make_replay_fixtures.py`.\n",
        encoding="utf-8",
    )
    (args.out / "table3-costs.json").write_text(json.dumps(cost_sessions(), indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
