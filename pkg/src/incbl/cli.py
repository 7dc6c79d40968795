"""Command-line front end.

    incbl index      --code DIR --data DIR [--reports FILE]
    incbl update     --code DIR --data DIR
    incbl localize   --code DIR --data DIR [REPORTS|-] [--json] [--read-only]
    incbl add-report --data DIR REPORTS
    incbl eval       --code DIR --data DIR CASES [--json]
    incbl bench      [--spec FILE] [--docs N ...] [--json]

Exit codes: 0 success, 1 usage error, 2 IO/state error, 3 empty/invalid input.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import statistics
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

from filelock import FileLock, Timeout

from . import evalbench
from .errors import (
    DuplicateReportError,
    EmptyCorpusError,
    EmptyDocumentError,
    IncBLError,
    InvalidReportError,
    SnapshotError,
    UnjudgeableError,
)
from .history import BugReport, parse_reports
from .ingest import index_repo, load_ignore_patterns, load_snapshot, save_snapshot, update_repo
from .ranker import RankParams

EXIT_OK, EXIT_USAGE, EXIT_STATE, EXIT_INPUT = 0, 1, 2, 3

SNAPSHOT_NAME = "model.snap"
LOCK_NAME = ".lock"

log = logging.getLogger("incbl")


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _alpha(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in [0, 1]")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--code", type=Path, help="source tree under analysis")
    common.add_argument(
        "--data",
        type=Path,
        default=os.environ.get("INCBL_DATA"),
        help="storage directory for the model snapshot (default: $INCBL_DATA)",
    )
    common.add_argument("--reports", type=Path, help="JSON-lines bug reports with fixed_files")
    common.add_argument("--alpha", type=_alpha, default=None, help="text vs history weight (default 0.25)")
    common.add_argument("--top-k", type=_positive, default=None, help="files to report (default 10)")
    common.add_argument("--json", action="store_true", help="emit JSON lines instead of text")
    common.add_argument("--ignore-file", type=Path, help="glob patterns to skip while scanning")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="incbl", description="Incremental bug localization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("index", parents=[common], help="full scan and rebuild")
    sub.add_parser("update", parents=[common], help="apply changes since the last run")
    p = sub.add_parser("localize", parents=[common], help="rank files for bug reports")
    p.add_argument("source", nargs="?", default="-", help="JSON-lines reports file, or - for stdin")
    p.add_argument("--read-only", action="store_true", help="rank against the stored snapshot as is")
    p = sub.add_parser("add-report", parents=[common], help="store fixed reports in the history")
    p.add_argument("source", help="JSON-lines reports file, or - for stdin")
    p = sub.add_parser("eval", parents=[common], help="MAP / Top-N over reports with known fixes")
    p.add_argument("source", help="JSON-lines evaluation cases")
    p.add_argument("--read-only", action="store_true")
    p = sub.add_parser("bench", parents=[common], help="incremental vs full timing on a synthetic corpus")
    p.add_argument("--spec", type=Path, help="JSON object with synthetic corpus parameters")
    p.add_argument("--docs", type=_positive)
    p.add_argument("--vocab", type=_positive)
    p.add_argument("--churn", type=float)
    p.add_argument("--transitions", type=_positive)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=0, help="also time N concurrent readers")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _data_dir(args) -> Path:
    if args.data is None:
        raise CommandError("--data (or INCBL_DATA) is required", EXIT_USAGE)
    return Path(args.data)


def _code_dir(args) -> Path:
    if args.code is None:
        raise CommandError("--code is required", EXIT_USAGE)
    if not Path(args.code).is_dir():
        raise CommandError(f"code path {args.code} is not a directory", EXIT_STATE)
    return Path(args.code)


def _ignore(args):
    return None if args.ignore_file is None else load_ignore_patterns(args.ignore_file)


@contextlib.contextmanager
def _locked(data: Path):
    data.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(data / LOCK_NAME))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise CommandError(f"another incbl process is using {data}", EXIT_STATE) from None
    try:
        yield
    finally:
        lock.release()


def _load(data: Path):
    path = data / SNAPSHOT_NAME
    if not path.exists():
        raise CommandError(f"no model in {data}; run 'incbl index' first", EXIT_STATE)
    return load_snapshot(path)


def _read_reports(source) -> list[BugReport]:
    if str(source) == "-":
        return list(parse_reports(sys.stdin))
    with open(source, encoding="utf-8") as fh:
        return list(parse_reports(fh))


def _params(args, base: RankParams) -> RankParams:
    return RankParams(
        alpha=base.alpha if args.alpha is None else args.alpha,
        top_k=base.top_k if args.top_k is None else args.top_k,
    )


def _sync(args, data: Path):
    loc = _load(data)
    changes, report = update_repo(loc, _code_dir(args), _ignore(args))
    save_snapshot(loc, data / SNAPSHOT_NAME)
    return loc, changes, report


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_index(args) -> int:
    data = _data_dir(args)
    code = _code_dir(args)
    reports = []
    if args.reports is not None:
        reports = [r for r in _read_reports(args.reports) if r.fixed_files]
    t0 = time.perf_counter()
    with _locked(data):
        loc = index_repo(code, reports, _params(args, RankParams()), _ignore(args))
        save_snapshot(loc, data / SNAPSHOT_NAME)
    elapsed = time.perf_counter() - t0
    print(f"indexed M={loc.M} |V|={len(loc.code.vocab)} reports={len(loc.history)} in {elapsed:.3f}s")
    return EXIT_OK


def cmd_update(args) -> int:
    data = _data_dir(args)
    t0 = time.perf_counter()
    with _locked(data):
        loc, changes, report = _sync(args, data)
    elapsed = time.perf_counter() - t0
    if not changes:
        print(f"0 changes (M={loc.M}) in {elapsed:.3f}s")
    else:
        print(
            f"{len(changes)} changes: +{len(changes.added)} -{len(changes.deleted)} "
            f"~{len(changes.modified)} delta_M={report.delta_M} "
            f"touched_docs={len(report.touched_docs)} touched_terms={len(report.touched_terms)} "
            f"M={loc.M} in {elapsed:.3f}s"
        )
    return EXIT_OK


def _emit_ranking(report: BugReport, ranked, as_json: bool, out=None) -> None:
    out = out or sys.stdout
    if as_json:
        for rec in ranked.records():
            out.write(json.dumps({"report": report.id, **rec}) + "\n")
        return
    out.write(f"# {report.id}\n")
    out.write(f"{'rank':>4}  {'relevance':>10}  {'vsm':>8}  {'simi':>8}  path\n")
    for rec in ranked.records():
        out.write(
            f"{rec['rank']:>4}  {rec['relevance']:>10.6f}  {rec['vsm_component']:>8.4f}  "
            f"{rec['simi_component']:>8.4f}  {rec['path']}\n"
        )


def cmd_localize(args) -> int:
    data = _data_dir(args)
    reports = _read_reports(args.source)
    if not reports:
        raise CommandError("no bug report given", EXIT_INPUT)
    if args.read_only:
        loc = _load(data)
    else:
        with _locked(data):
            loc, _, _ = _sync(args, data)
    params = _params(args, loc.params)
    for report in reports:
        ranked = loc.localize(report, params)
        if all(e.relevance == 0.0 for e in ranked):
            print(
                f"warning: report {report.id!r} matched nothing; order is lexicographic",
                file=sys.stderr,
            )
        _emit_ranking(report, ranked, args.json)
    return EXIT_OK


def cmd_add_report(args) -> int:
    data = _data_dir(args)
    reports = _read_reports(args.source)
    if not reports:
        raise CommandError("no bug report given", EXIT_INPUT)
    with _locked(data):
        loc = _load(data)
        loc.add_reports(reports)
        save_snapshot(loc, data / SNAPSHOT_NAME)
    print(f"stored {len(reports)} report(s); history M={loc.history.index.M}")
    return EXIT_OK


def cmd_eval(args) -> int:
    data = _data_dir(args)
    cases = _read_reports(args.source)
    if args.read_only:
        loc = _load(data)
    else:
        with _locked(data):
            loc, _, _ = _sync(args, data)
    if args.alpha is not None:
        loc.params = _params(args, loc.params)
    summary = evalbench.evaluate(evalbench.judge(loc, cases, str(args.source)))
    print(summary.to_json() if args.json else summary.to_table())
    return EXIT_OK


def cmd_bench(args) -> int:
    values = {}
    if args.spec is not None:
        with open(args.spec, encoding="utf-8") as fh:
            values.update(json.load(fh))
    for name, flag in (("n_docs", "docs"), ("vocab_size", "vocab"), ("churn", "churn"),
                       ("transitions", "transitions"), ("seed", "seed")):
        if getattr(args, flag) is not None:
            values[name] = getattr(args, flag)
    known = {f.name for f in fields(evalbench.SyntheticSpec)}
    unknown = set(values) - known
    if unknown:
        raise CommandError(f"unknown bench parameters: {sorted(unknown)}", EXIT_INPUT)
    spec = evalbench.SyntheticSpec(**values)
    corpus = evalbench.generate_corpus(spec)
    params = _params(args, RankParams())
    reports = evalbench.bench_compare(corpus.states, corpus.queries, corpus.history, params)
    extra = None
    if args.threads > 0:
        loc = evalbench.build_initial(corpus.states[-1], corpus.history, params)
        extra = evalbench.bench_concurrent_reads(loc, corpus.queries * 4, args.threads)
    if args.json:
        for r in reports:
            print(json.dumps(asdict(r)))
        print(json.dumps({"median_ratio": statistics.median(r.ratio for r in reports), "concurrent": extra}))
    else:
        print(evalbench.format_bench(reports))
        if extra:
            print(f"concurrent reads: {extra}")
    return EXIT_OK


COMMANDS = {
    "index": cmd_index,
    "update": cmd_update,
    "localize": cmd_localize,
    "add-report": cmd_add_report,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CommandError as exc:
        print(f"incbl: {exc}", file=sys.stderr)
        return exc.code
    except (EmptyDocumentError, InvalidReportError, DuplicateReportError, UnjudgeableError, EmptyCorpusError) as exc:
        print(f"incbl: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SnapshotError, OSError) as exc:
        print(f"incbl: {exc}", file=sys.stderr)
        return EXIT_STATE
    except IncBLError as exc:
        print(f"incbl: {exc}", file=sys.stderr)
        return EXIT_STATE


if __name__ == "__main__":
    sys.exit(main())
