"""Retrieval metrics and incremental-versus-full timing benchmarks."""

from __future__ import annotations

import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Collection, Mapping, Sequence

import numpy as np

from .errors import RankingMismatchError, UnjudgeableError
from .history import BugReport
from .ingest import FileFingerprint, detect_changes, fingerprints_of, snapshot_bytes, snapshot_from_bytes
from .localizer import Localizer
from .preprocess import build_code_document
from .ranker import RankParams
from .vsm_index import ChangeSet

# ---------------------------------------------------------------------------
# accuracy
# ---------------------------------------------------------------------------


def average_precision(ranked: Sequence[str], relevant: Collection[str]) -> float:
    """Mean of precision@rank over relevant items; unretrieved relevant items add 0."""
    relevant = set(relevant)
    if not relevant:
        raise UnjudgeableError("average precision needs at least one relevant item")
    hits = 0
    total = 0.0
    for i, item in enumerate(ranked, 1):
        if item in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


@dataclass(frozen=True)
class EvalCase:
    """A report with ground-truth fixed files and the full ranking produced for it."""

    report: BugReport
    ranking: tuple[str, ...] = ()
    corpus_label: str = ""

    @property
    def relevant(self) -> frozenset[str]:
        return frozenset(self.report.fixed_files or ())

    @property
    def judgeable(self) -> bool:
        rel = self.relevant
        return bool(rel) and any(p in rel for p in self.ranking)


def _judgeable(cases: Sequence[EvalCase]) -> list[EvalCase]:
    ok = [c for c in cases if c.judgeable]
    if not ok:
        raise UnjudgeableError("no judgeable evaluation cases")
    return ok


def mean_average_precision(cases: Sequence[EvalCase]) -> float:
    ok = _judgeable(cases)
    return sum(average_precision(c.ranking, c.relevant) for c in ok) / len(ok)


def top_n_accuracy(cases: Sequence[EvalCase], n: int) -> float:
    """Fraction of judgeable cases with a relevant file among the first ``n``."""
    if n < 1:
        raise ValueError("n must be positive")
    ok = _judgeable(cases)
    return sum(any(p in c.relevant for p in c.ranking[:n]) for c in ok) / len(ok)


def judge(loc: Localizer, reports: Sequence[BugReport], corpus_label: str = "") -> list[EvalCase]:
    """Rank each report over the whole corpus (no top-k cut)."""
    return [
        EvalCase(r, tuple(loc.localize(r, full=True).paths()), corpus_label) for r in reports
    ]


@dataclass(frozen=True)
class EvalSummary:
    map: float
    top_1: float
    top_3: float
    top_10: float
    n_judgeable: int
    n_excluded: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def to_table(self) -> str:
        rows = [
            ("MAP", f"{self.map:.4f}"),
            ("Top-1", f"{self.top_1:.4f}"),
            ("Top-3", f"{self.top_3:.4f}"),
            ("Top-10", f"{self.top_10:.4f}"),
            ("judgeable", str(self.n_judgeable)),
            ("excluded", str(self.n_excluded)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def evaluate(cases: Sequence[EvalCase]) -> EvalSummary:
    ok = _judgeable(cases)
    return EvalSummary(
        map=mean_average_precision(ok),
        top_1=top_n_accuracy(ok, 1),
        top_3=top_n_accuracy(ok, 3),
        top_10=top_n_accuracy(ok, 10),
        n_judgeable=len(ok),
        n_excluded=len(cases) - len(ok),
    )


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

_CONSONANTS = "bdfgklmnprtvz"
_VOWELS = "aiou"


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 2000
    vocab_size: int = 24000
    mean_length: int = 300
    zipf_exponent: float = 1.0
    churn: float = 0.01
    transitions: int = 5
    n_history: int = 40
    seed: int = 0


@dataclass
class SyntheticCorpus:
    states: list[dict[str, bytes]]
    history: list[BugReport]
    queries: list[BugReport]
    words: list[str] = field(repr=False, default_factory=list)


def synthetic_words(n: int, rng: np.random.Generator) -> list[str]:
    """``n`` distinct lowercase pseudo-words that survive stemming unchanged.

    Every word ends in 'x', which no Porter rule strips.
    """
    words: set[str] = set()
    out = []
    while len(out) < n:
        k = int(rng.integers(2, 5))
        w = "".join(_CONSONANTS[rng.integers(13)] + _VOWELS[rng.integers(4)] for _ in range(k)) + "x"
        if w not in words:
            words.add(w)
            out.append(w)
    return out


def generate_corpus(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticCorpus:
    """Zipf-distributed documents plus a churn sequence of repository states."""
    rng = np.random.default_rng(spec.seed)
    words = synthetic_words(spec.vocab_size, rng)
    ranks = np.arange(1, spec.vocab_size + 1, dtype=np.float64)
    p = ranks ** -spec.zipf_exponent
    p /= p.sum()
    lo, hi = max(5, spec.mean_length // 4), spec.mean_length * 7 // 4

    def draw(n: int) -> list[str]:
        return [words[i] for i in rng.choice(spec.vocab_size, size=n, p=p)]

    def text(tokens: list[str]) -> bytes:
        lines = [" ".join(tokens[i : i + 12]) for i in range(0, len(tokens), 12)]
        return ("\n".join(lines) + "\n").encode()

    serial = 0

    def new_path() -> str:
        nonlocal serial
        serial += 1
        return f"src/mod{serial % 37:02d}/Unit{serial:05d}.java"

    tokens: dict[str, list[str]] = {}
    for _ in range(spec.n_docs):
        tokens[new_path()] = draw(int(rng.integers(lo, hi)))
    states = [{path: text(t) for path, t in tokens.items()}]

    k = max(1, round(spec.churn * spec.n_docs))
    for _ in range(spec.transitions):
        paths = sorted(tokens)
        picked = rng.choice(len(paths), size=min(k, len(paths)), replace=False)
        for j, idx in enumerate(picked):
            path = paths[idx]
            kind = j % 6
            if kind == 4 and len(tokens) > 1:
                del tokens[path]
            elif kind == 5:
                tokens[new_path()] = draw(int(rng.integers(lo, hi)))
            else:
                t = list(tokens[path])
                n_edit = max(1, len(t) // 10)
                for pos in rng.choice(len(t), size=n_edit, replace=False):
                    t[pos] = words[rng.choice(spec.vocab_size, p=p)]
                tokens[path] = t
        states.append({path: text(t) for path, t in tokens.items()})

    def report_about(rid: str, path: str, doc: list[str], fixed: bool) -> BugReport:
        picked = [doc[i] for i in rng.choice(len(doc), size=min(15, len(doc)), replace=False)]
        noise = draw(5)
        return BugReport(
            rid,
            title=" ".join(picked[:4]),
            description=" ".join(picked[4:] + noise),
            fixed_files=(path,) if fixed else None,
        )

    first = sorted(states[0])
    history = []
    for i in range(spec.n_history):
        path = first[int(rng.integers(len(first)))]
        doc = states[0][path].decode().split()
        history.append(report_about(f"H{i}", path, doc, True))
    queries = []
    for i, state in enumerate(states[1:] or states):
        paths = sorted(state)
        path = paths[int(rng.integers(len(paths)))]
        queries.append(report_about(f"Q{i}", path, state[path].decode().split(), True))
    return SyntheticCorpus(states, history, queries, words)


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    t_inc: float
    t_full: float
    ratio: float
    touched_docs: int
    corpus_M: int


def _clone(loc: Localizer) -> Localizer:
    return snapshot_from_bytes(snapshot_bytes(loc, saved_at=0.0))


def _incremental(loc: Localizer, state: Mapping[str, bytes], query: BugReport):
    new = {p: FileFingerprint.of(p, data) for p, data in state.items()}
    changes = detect_changes(fingerprints_of(loc.code), new)
    cs = ChangeSet(deleted=list(changes.deleted))
    for p in changes.added:
        cs.added.append((p, build_code_document(p, state[p])))
        cs.fingerprints[p] = new[p]
    for p in changes.modified:
        cs.modified.append((p, build_code_document(p, state[p])))
        cs.fingerprints[p] = new[p]
    loc.apply(cs)
    return loc.localize(query, full=True).paths(), len(changes)


def _full(state: Mapping[str, bytes], history, query: BugReport, params: RankParams):
    docs = {p: build_code_document(p, data) for p, data in state.items()}
    loc = Localizer.from_documents(docs, history, params=params)
    return loc.localize(query, full=True).paths()


def build_initial(state: Mapping[str, bytes], history=(), params: RankParams | None = None) -> Localizer:
    docs = {p: build_code_document(p, data) for p, data in state.items()}
    fps = {p: FileFingerprint.of(p, data) for p, data in state.items()}
    return Localizer.from_documents(docs, history, params=params, fingerprints=fps)


def bench_compare(
    states: Sequence[Mapping[str, bytes]],
    queries: Sequence[BugReport],
    history: Sequence[BugReport] = (),
    params: RankParams | None = None,
    repeats: int = 3,
) -> list[BenchReport]:
    """Time incremental update + localize against full rebuild + localize.

    Each transition ``states[i-1] -> states[i]`` localizes ``queries[i-1]``
    (cycled).  Both paths run once untimed, then ``repeats`` times; the
    median is reported.  Diverging rankings raise RankingMismatchError.
    """
    if len(states) < 2:
        raise ValueError("need at least two repository states")
    if not queries:
        raise ValueError("need at least one query report")
    params = params or RankParams()
    clock = time.perf_counter
    current = build_initial(states[0], history, params)
    out = []
    for i in range(1, len(states)):
        state, query = states[i], queries[(i - 1) % len(queries)]
        frozen = snapshot_bytes(current, saved_at=0.0)

        inc_times = []
        for rep in range(repeats + 1):
            model = snapshot_from_bytes(frozen)
            t0 = clock()
            inc_paths, touched = _incremental(model, state, query)
            if rep:
                inc_times.append(clock() - t0)

        full_times = []
        for rep in range(repeats + 1):
            t0 = clock()
            full_paths = _full(state, history, query, params)
            if rep:
                full_times.append(clock() - t0)

        if inc_paths != full_paths:
            raise RankingMismatchError(f"transition {i}: incremental and full rankings differ")
        t_inc = statistics.median(inc_times)
        t_full = statistics.median(full_times)
        out.append(BenchReport(t_inc, t_full, t_inc / t_full, touched, model.M))
        current = model
    return out


def bench_concurrent_reads(loc: Localizer, queries: Sequence[BugReport], threads: int = 4) -> dict:
    """Throughput of localize() with ``threads`` readers sharing one published model."""
    loc.localize(queries[0])  # publish views before timing
    t0 = time.perf_counter()
    for q in queries:
        loc.localize(q)
    serial = time.perf_counter() - t0
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(loc.localize, queries))
    parallel = time.perf_counter() - t0
    expected = [loc.localize(q).paths() for q in queries]
    if [r.paths() for r in results] != expected:
        raise RankingMismatchError("concurrent readers saw different rankings")
    return {"threads": threads, "queries": len(queries), "serial_s": serial, "parallel_s": parallel}


def format_bench(reports: Sequence[BenchReport]) -> str:
    head = f"{'#':>3}  {'M':>6}  {'touched':>7}  {'t_inc[s]':>9}  {'t_full[s]':>9}  {'ratio':>6}"
    lines = [head]
    for i, r in enumerate(reports, 1):
        lines.append(
            f"{i:>3}  {r.corpus_M:>6}  {r.touched_docs:>7}  {r.t_inc:>9.4f}  {r.t_full:>9.4f}  {r.ratio:>6.3f}"
        )
    if reports:
        lines.append(f"median ratio {statistics.median(r.ratio for r in reports):.3f}")
    return "\n".join(lines)
