"""Command-line entry point: ``spec-anvil <verb> ...``.

Exit codes
    0   success (run: CorrectFix; verify-spec: Validated)
    1   corpus validate found problems
    2   usage error (bad flags, unknown defect)
    3   configuration error
    4   corpus error
    5   input file schema error (report)
    10  run: PlausibleOnly
    11  run: NoFix
    12  run: Error
    20  verify-spec: SpecTooWeak
    21  verify-spec: SpecMisaligned
    22  verify-spec: HarnessError
    23  verify-spec: feature file does not parse
    24  verify-spec: bindings file invalid or does not bind the feature
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .agents import FixerMode
from .config import Config, ConfigError, load_config
from .gherkin import ParseError, parse
from .harness import Corpus, CorpusError, load_corpus, validate_corpus
from .metrics import (
    SchemaError,
    cost_breakdown,
    dump_outcomes,
    load_costs,
    load_outcomes,
    render_report,
)
from .pipeline import CampaignResult, Outcome, PipelineConfig, run_campaign, run_session
from .rqa import VerdictKind, negative_only_verify, sandwich_verify
from .runlog import SessionLog, completed_sessions, load_sessions
from .steps import BindingError, bind, read_bindings

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CORPUS = 4
EXIT_SCHEMA = 5

RUN_EXIT = {
    Outcome.CORRECT_FIX: 0,
    Outcome.PLAUSIBLE_ONLY: 10,
    Outcome.NO_FIX: 11,
    Outcome.ERROR: 12,
}

VERIFY_EXIT = {
    VerdictKind.VALIDATED: 0,
    VerdictKind.SPEC_TOO_WEAK: 20,
    VerdictKind.SPEC_MISALIGNED: 21,
    VerdictKind.HARNESS_ERROR: 22,
}
EXIT_SPEC_PARSE = 23
EXIT_BINDINGS = 24


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config(path: str, overrides: dict) -> Config:
    try:
        cfg = load_config(path)
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(cfg, **overrides) if overrides else cfg
    except ConfigError as exc:
        raise CliError(f"config error: {exc}", EXIT_CONFIG) from None


def _load_corpus(path: str | Path) -> Corpus:
    try:
        return load_corpus(path)
    except CorpusError as exc:
        raise CliError(f"corpus error: {exc}", EXIT_CORPUS) from None


def _pipeline_config(cfg: Config, run_root: Path) -> PipelineConfig:
    return PipelineConfig(
        max_rqa_attempts=cfg.max_rqa_attempts,
        use_probes=cfg.probes,
        artifacts_dir=run_root / "artifacts",
    )


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_corpus_validate(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args.corpus_path)
    findings = validate_corpus(corpus)
    for f in findings:
        print(f"{f.defect_id}: {f.problem}")
    bad = len({f.defect_id for f in findings})
    print(f"{len(corpus.defects) - bad}/{len(corpus.defects)} defects valid")
    return EXIT_FINDINGS if findings else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, {"max_rqa_attempts": args.max_rqa_attempts})
    corpus = _load_corpus(cfg.corpus_path)
    try:
        defect = corpus.get(args.defect_id)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EXIT_USAGE) from None
    mode = FixerMode(args.mode)
    run_root = cfg.run_dir / (args.run_id or f"{defect.id}-{mode.value}")
    session = run_session(defect, mode, cfg.build_backends(), _pipeline_config(cfg, run_root))
    SessionLog(run_root / "sessions.jsonl").append(session.to_record())
    print(f"{defect.id} [{mode.value}] outcome: {session.outcome.value}")
    if session.rqa_status is not None:
        print(f"rqa: {session.rqa_status.value}" + (" (degraded)" if session.degraded else ""))
    for event in session.fallback_events:
        print(f"fallback: {event.kind.value}: {event.detail}")
    for note in session.notes:
        print(f"note: {note}")
    print(f"artifacts: {run_root}")
    return RUN_EXIT[session.outcome]


def cmd_campaign(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, {"workers": args.workers, "max_rqa_attempts": args.max_rqa_attempts})
    corpus = _load_corpus(cfg.corpus_path)
    run_root = cfg.run_dir / args.campaign_id
    log_path = run_root / "sessions.jsonl"
    try:
        completed = completed_sessions(log_path)
    except SchemaError as exc:
        raise CliError(f"cannot resume: {exc}", EXIT_SCHEMA) from None
    known = set(corpus.ids())
    completed = {k: v for k, v in completed.items() if k[0] in known}
    if completed:
        print(f"resuming: {len(completed)} session(s) already logged")
    writer = SessionLog(log_path)
    result = run_campaign(
        corpus, cfg.build_backends(), _pipeline_config(cfg, run_root),
        composite=args.composite, workers=cfg.workers, completed=completed,
        sink=lambda s: writer.append(s.to_record()),
    )
    records = result.outcome_records()
    (run_root / "outcomes.jsonl").write_text(dump_outcomes(records), encoding="utf-8")
    report = render_report(records, None, "markdown")
    (run_root / "report.md").write_text(report, encoding="utf-8")
    print(report, end="")
    return EXIT_OK


def cmd_verify_spec(args: argparse.Namespace) -> int:
    if args.config:
        corpus = _load_corpus(_load_config(args.config, {}).corpus_path)
    elif args.corpus:
        corpus = _load_corpus(args.corpus)
    else:
        raise CliError("verify-spec needs --corpus or --config", EXIT_USAGE)
    try:
        defect = corpus.get(args.defect_id)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EXIT_USAGE) from None
    try:
        spec = parse(Path(args.feature_path).read_text(encoding="utf-8"), path=args.feature_path)
    except OSError as exc:
        raise CliError(f"cannot read {args.feature_path}: {exc.strerror}", EXIT_SPEC_PARSE) from None
    except ParseError as exc:
        raise CliError(f"parse error: {exc}", EXIT_SPEC_PARSE) from None
    try:
        bindings = read_bindings(args.bindings_path)
        bind(spec, bindings)
    except (OSError, BindingError) as exc:
        raise CliError(f"binding error: {exc}", EXIT_BINDINGS) from None
    if args.negative_only:
        result = negative_only_verify(spec, bindings, defect)
    else:
        result = sandwich_verify(spec, bindings, defect)
    verdict = result.verdict
    label = "Validated (provisional, negative-only)" if args.negative_only and \
        verdict.kind is VerdictKind.VALIDATED else verdict.kind.value
    print(f"verdict: {label}")
    if verdict.detail:
        print(f"detail: {verdict.detail}")
    for side, report in (("buggy", result.buggy_report), ("fixed", result.fixed_report)):
        if report is None:
            print(f"{side}: not run")
            continue
        statuses = ", ".join(f"{s.scenario_title}={s.status.value}" for s in report.scenario_results) or "no scenarios"
        print(f"{side}: {statuses}")
    if args.json:
        print(json.dumps(result.to_json(), indent=2))
    return VERIFY_EXIT[verdict.kind]


def cmd_report(args: argparse.Namespace) -> int:
    try:
        if args.replay:
            records = load_outcomes(args.replay)
            cost_records = []
        else:
            sessions = load_sessions(Path(args.run) / "sessions.jsonl")
            result = CampaignResult.from_records(sessions)
            records = result.outcome_records()
            # full three-role pipeline cost per defect comes from enlightened sessions
            cost_records = [c for p in result.pairs.values() if p.enlightened for c in p.enlightened.costs]
        if args.costs:
            cost_records = load_costs(args.costs)
    except OSError as exc:
        raise CliError(f"cannot read input: {exc}", EXIT_SCHEMA) from None
    except (SchemaError, KeyError, ValueError) as exc:
        raise CliError(f"schema error: {exc}", EXIT_SCHEMA) from None
    text = render_report(records, cost_breakdown(cost_records), args.format, args.include_degraded)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spec-anvil", description="Specification-first program repair runner.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True)

    corpus = sub.add_parser("corpus", help="corpus maintenance")
    corpus_sub = corpus.add_subparsers(dest="corpus_verb", required=True)
    validate = corpus_sub.add_parser("validate", help="check a corpus manifest and its trees")
    validate.add_argument("corpus_path")
    validate.set_defaults(func=cmd_corpus_validate)

    run = sub.add_parser("run", help="run one repair session")
    run.add_argument("defect_id")
    run.add_argument("--mode", choices=[m.value for m in FixerMode], default=FixerMode.BLIND.value)
    run.add_argument("--config", required=True)
    run.add_argument("--run-id", help="subdirectory of run_dir (default <defect>-<mode>)")
    run.add_argument("--max-rqa-attempts", type=int)
    run.set_defaults(func=cmd_run)

    campaign = sub.add_parser("campaign", help="run blind sessions (and enlightened ones with --composite)")
    campaign.add_argument("--config", required=True)
    campaign.add_argument("--composite", action="store_true",
                          help="follow blind failures with enlightened sessions")
    campaign.add_argument("--workers", type=int)
    campaign.add_argument("--campaign-id", default="default")
    campaign.add_argument("--max-rqa-attempts", type=int)
    campaign.set_defaults(func=cmd_campaign)

    verify = sub.add_parser("verify-spec", help="sandwich-verify a feature file against a defect")
    verify.add_argument("defect_id")
    verify.add_argument("feature_path")
    verify.add_argument("bindings_path")
    src = verify.add_mutually_exclusive_group()
    src.add_argument("--corpus")
    src.add_argument("--config")
    verify.add_argument("--negative-only", action="store_true", help="never touch the fixed tree")
    verify.add_argument("--json", action="store_true", help="also print the full result as JSON")
    verify.set_defaults(func=cmd_verify_spec)

    report = sub.add_parser("report", help="render fix-rate and cost tables")
    inp = report.add_mutually_exclusive_group(required=True)
    inp.add_argument("--replay", help="outcomes.jsonl")
    inp.add_argument("--run", help="a campaign directory holding sessions.jsonl")
    report.add_argument("--costs", help="table3-costs.json style cost records")
    report.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    report.add_argument("--output")
    report.add_argument("--include-degraded", action="store_true",
                        help="count successes without a validated spec as rescues")
    report.set_defaults(func=cmd_report)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for key in ("workers", "max_rqa_attempts"):
        value = getattr(args, key, None)
        if value is not None and value < 1:
            parser.error(f"--{key.replace('_', '-')} must be >= 1")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"spec-anvil: {exc}", file=sys.stderr)
        return exc.code

