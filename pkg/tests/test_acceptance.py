"""Acceptance suite: one test per criterion, summarized at the end of the run."""

from __future__ import annotations

import itertools
import json
import math
import statistics
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import (
    apply_to_dict,
    apply_transition,
    assert_matches_rebuild,
    atomic_kinds,
    oracle_state,
    pool,
    random_change_set,
    random_corpus,
    random_report,
)
from incbl import cli, evalbench
from incbl.evalbench import EvalCase, SyntheticSpec, average_precision, mean_average_precision
from incbl.history import BugReport, read_reports
from incbl.ingest import snapshot_bytes, snapshot_from_bytes
from incbl.localizer import Localizer
from incbl.preprocess import TermCounts
from incbl.ranker import RankParams, rank
from incbl.vsm_index import TermDocIndex, compute_idf, idf_shift

TERMS = pool(200)


def _queries(rng, n=3):
    return [random_report(rng, f"q{i}", TERMS) for i in range(n)]


# ---------------------------------------------------------------------------
# 1
# ---------------------------------------------------------------------------


@pytest.mark.criterion(1, "incremental model equals full rebuild over 1000 random sequences")
def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(1)
    kinds: Counter = Counter()
    nonzero_delta = 0
    t0 = time.perf_counter()
    for _ in range(1000):
        docs = random_corpus(rng, TERMS, max_docs=50)
        inc = TermDocIndex.rebuild(docs)
        for _ in range(3):
            cs = random_change_set(rng, docs, TERMS, max_docs=50)
            before = docs
            report = inc.apply(cs)
            docs = apply_to_dict(docs, cs)
            kinds.update(atomic_kinds(before, cs, report))
            nonzero_delta += report.delta_M != 0

            ref = assert_matches_rebuild(inc, docs, tol=1e-9)
            M, df, idf, weights = oracle_state(docs)
            assert inc.M == M and inc.df_by_term() == df
            for t, v in idf.items():
                assert abs(inc.idf_by_term()[t] - v) <= 1e-9
            got = inc.weights_by_path()
            for p, w in weights.items():
                for t, v in w.items():
                    assert abs(got[p].get(t, 0.0) - v) <= 1e-9

            if docs:
                for q in _queries(rng, 2):
                    a = rank(inc, None, q, full=True)
                    b = rank(ref, None, q, full=True)
                    assert a.paths() == b.paths()
    elapsed = time.perf_counter() - t0
    print(f"change kinds observed: {dict(kinds)}; steps with delta_M != 0: {nonzero_delta}; {elapsed:.1f}s")
    assert set(kinds) == {"doc_add", "doc_delete", "doc_modify", "term_add", "term_delete", "tf_change"}
    assert nonzero_delta > 0
    assert elapsed < 120


# ---------------------------------------------------------------------------
# 2
# ---------------------------------------------------------------------------


def _check_untouched_idf(inc: TermDocIndex, report) -> int:
    matrix, vocab = inc.matrix, inc.vocab
    touched = set(report.touched_terms)
    checked = 0
    for tid in vocab.live_ids():
        if tid in touched:
            continue
        expected = compute_idf(matrix.M, matrix.df[tid])
        assert abs(matrix.idf_of(tid) - expected) <= 1e-12
        checked += 1
    return checked


@pytest.mark.criterion(2, "shifted idf equals recomputed idf within 1e-12; shifts compose")
def test_criterion_2_idf_shift_exactness():
    rng = np.random.default_rng(2)
    checked = shifted = 0
    for _ in range(60):
        docs = random_corpus(rng, TERMS, max_docs=50, min_docs=5)
        inc = TermDocIndex.rebuild(docs)
        # long runs so untouched terms accumulate many shifts
        for _ in range(40):
            cs = random_change_set(rng, docs, TERMS, max_docs=50)
            report = inc.apply(cs)
            docs = apply_to_dict(docs, cs)
            if report.delta_M != 0 and inc.M > 0:
                shifted += 1
                checked += _check_untouched_idf(inc, report)
    assert shifted > 500 and checked > 1000
    _shift_composition()


@settings(max_examples=2000, deadline=None)
@given(
    M=st.integers(1, 10**6),
    deltas=st.lists(st.integers(-50, 50), min_size=1, max_size=12),
)
def _shift_composition(M, deltas):
    total, m = 0.0, M
    for d in deltas:
        if m + d < 1:
            continue
        total += idf_shift(m, d)
        m += d
    assert abs(total - idf_shift(M, m - M)) <= 1e-12
    assert abs(math.log(M) + total - math.log(m)) <= 1e-12


# ---------------------------------------------------------------------------
# 3
# ---------------------------------------------------------------------------


def _recount(inc: TermDocIndex) -> dict[str, int]:
    out: Counter = Counter()
    for counts in inc.documents().values():
        out.update(counts.counts.keys())
    return dict(out)


_term = st.sampled_from(TERMS[:60])
_counts = st.dictionaries(_term, st.integers(1, 9), max_size=10).map(TermCounts)
_step = st.tuples(
    st.lists(st.integers(0, 10**6), max_size=3),  # delete picks
    st.lists(st.tuples(st.integers(0, 10**6), _counts), max_size=3),  # modify picks
    st.lists(st.tuples(st.integers(0, 999), _counts), max_size=3),  # additions
)


@pytest.mark.criterion(3, "stored df equals a full recount after every step")
@settings(max_examples=300, deadline=None)
@given(initial=st.dictionaries(st.integers(0, 999).map(lambda i: f"f{i:03d}.c"), _counts, max_size=20),
       steps=st.lists(_step, min_size=1, max_size=15))
def test_criterion_3_df_recount(initial, steps):
    from incbl.vsm_index import ChangeSet

    docs = dict(initial)
    inc = TermDocIndex.rebuild(docs)
    assert inc.df_by_term() == _recount(inc)
    for dels, mods, adds in steps:
        paths = sorted(docs)
        deleted = sorted({paths[i % len(paths)] for i in dels}) if paths else []
        rest = [p for p in paths if p not in deleted]
        modified = dict((rest[i % len(rest)], c) for i, c in mods) if rest else {}
        added = {f"g{i:03d}.c": c for i, c in adds if f"g{i:03d}.c" not in docs}
        cs = ChangeSet(added=list(added.items()), deleted=deleted, modified=list(modified.items()))
        inc.apply(cs)
        docs = apply_to_dict(docs, cs)
        stored = inc.df_by_term()
        assert stored == _recount(inc)
        assert stored == Counter(t for c in docs.values() for t in c.counts)
        inc.check()


# ---------------------------------------------------------------------------
# 4
# ---------------------------------------------------------------------------


def _run(capsys, *argv) -> str:
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    assert code == 0, out.err
    return out.out


def _ranking(text: str):
    return [(r["report"], r["path"], r["relevance"]) for r in map(json.loads, text.splitlines())]


@pytest.mark.criterion(4, "CLI localize after each transition matches a fresh index")
def test_criterion_4_accuracy_preservation(evolving, tmp_path, capsys):
    repo, transitions, reports, queries = evolving
    assert sum(1 for p in repo.rglob("*") if p.suffix in {".java", ".py", ".c"}) >= 20
    assert sum(1 for r in read_reports(reports) if r.fixed_files) >= 10
    assert len(transitions) >= 5

    t0 = time.perf_counter()
    live = tmp_path / "live"
    _run(capsys, "index", "--code", repo, "--data", live, "--reports", reports)
    for i, transition in enumerate(transitions, 1):
        apply_transition(repo, transition)
        inc = _ranking(_run(capsys, "localize", "--code", repo, "--data", live, "--json", queries))

        fresh = tmp_path / f"fresh{i}"
        _run(capsys, "index", "--code", repo, "--data", fresh, "--reports", reports)
        ref = _ranking(_run(capsys, "localize", "--code", repo, "--data", fresh, "--json", queries))

        assert [(q, p) for q, p, _ in inc] == [(q, p) for q, p, _ in ref], f"transition {i}"
        for (_, _, a), (_, _, b) in zip(inc, ref):
            assert abs(a - b) <= 1e-9
    assert time.perf_counter() - t0 < 30


# ---------------------------------------------------------------------------
# 5
# ---------------------------------------------------------------------------


@pytest.mark.criterion(5, "incremental update is at most half the cost of a full rebuild")
def test_criterion_5_performance():
    t0 = time.perf_counter()
    spec = SyntheticSpec(transitions=3)
    corpus = evalbench.generate_corpus(spec)
    first = corpus.states[0]
    vocab = {w for data in first.values() for w in data.split()}
    assert len(first) >= 2000
    assert len(vocab) >= 20000
    reports = evalbench.bench_compare(corpus.states, corpus.queries, corpus.history, RankParams())
    ratio = statistics.median(r.ratio for r in reports)
    print(evalbench.format_bench(reports))
    print(f"documents {len(first)}, realized vocabulary {len(vocab)}, median ratio {ratio:.4f}")
    assert ratio <= 0.5
    assert time.perf_counter() - t0 < 120


# ---------------------------------------------------------------------------
# 6
# ---------------------------------------------------------------------------


def _brute_ap(ranked, relevant):
    """Precision at each relevant position, written out the long way."""
    rel = set(relevant)
    precisions = []
    for k in range(1, len(ranked) + 1):
        if ranked[k - 1] in rel:
            top = ranked[:k]
            precisions.append(sum(1 for x in top if x in rel) / k)
    return sum(precisions) / len(rel)


@pytest.mark.criterion(6, "average precision and MAP match a brute-force scorer")
def test_criterion_6_metrics():
    assert average_precision(["a", "b", "c"], {"a"}) == 1.0
    assert average_precision(["a", "b", "c"], {"a", "c"}) == pytest.approx(0.8333333333, abs=1e-9)
    assert average_precision(["a", "b", "c"], {"a", "c"}) == pytest.approx(5 / 6, abs=1e-12)

    rng = np.random.default_rng(6)
    cases, oracle = [], []
    for i in range(50):
        n = int(rng.integers(1, 40))
        ranked = [f"f{j}" for j in rng.permutation(n)]
        k = int(rng.integers(1, n + 1))
        relevant = [f"f{j}" for j in rng.choice(n, size=k, replace=False)]
        if rng.random() < 0.2:
            relevant.append("missing.java")
        got = average_precision(ranked, relevant)
        want = _brute_ap(ranked, relevant)
        assert abs(got - want) <= 1e-9
        cases.append(EvalCase(BugReport(f"r{i}", "t", fixed_files=tuple(relevant)), tuple(ranked)))
        oracle.append(want)
    assert abs(mean_average_precision(cases) - sum(oracle) / len(oracle)) <= 1e-9


# ---------------------------------------------------------------------------
# 7
# ---------------------------------------------------------------------------


def _integers(loc: Localizer):
    m, v = loc.code.matrix, loc.code.vocab
    return (
        list(m.df), m.next_doc_id, dict(m.path_to_doc), dict(m.doc_table), {k: dict(r) for k, r in m.rows.items()},
        list(v.id_to_term), sorted(v.free_ids), loc.history.links.file_to_reports,
        sorted(loc.history.reports), list(loc.history.index.matrix.df),
    )


@pytest.mark.criterion(7, "save/load/apply/rank equals the never-serialized path")
def test_criterion_7_snapshot_round_trip():
    rng = np.random.default_rng(7)
    for i in range(100):
        docs = random_corpus(rng, TERMS, max_docs=40, min_docs=1)
        paths = sorted(docs)
        history = [random_report(rng, f"h{j}", TERMS, paths) for j in range(int(rng.integers(0, 6)))]
        loc = Localizer.from_documents(docs, history, RankParams(alpha=float(rng.uniform(0, 1))))
        # churn first so tombstones and sparse doc ids end up in the snapshot
        for _ in range(int(rng.integers(0, 3))):
            cs = random_change_set(rng, docs, TERMS, max_docs=40)
            loc.apply(cs)
            docs = apply_to_dict(docs, cs)

        loaded = snapshot_from_bytes(snapshot_bytes(loc, saved_at=float(i)))
        assert _integers(loaded) == _integers(loc)
        assert loaded.params == loc.params

        cs = random_change_set(rng, docs, TERMS, max_docs=40)
        assert loc.apply(cs) == loaded.apply(cs)
        assert _integers(loaded) == _integers(loc)
        if loc.M == 0:
            continue
        for q in _queries(rng):
            a, b = loc.localize(q, full=True), loaded.localize(q, full=True)
            assert a.paths() == b.paths()
            assert list(a) == list(b)


# ---------------------------------------------------------------------------
# 8
# ---------------------------------------------------------------------------

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


def _golden_expected(alpha):
    idf1 = math.log(3 / 2)
    tf2 = math.log(2) + 1
    q = math.sqrt(2) * idf1
    vsm_a = idf1 * tf2 * idf1 / (q * tf2 * idf1)
    vsm_b = idf1 * tf2 * idf1 / (q * math.hypot(tf2 * idf1, idf1))
    g = {"A.java": 1 / (1 + math.exp(-0.5)), "B.java": 1 / (1 + math.exp(-1.0)), "C.java": 0.5}
    simi_c = 1 / math.sqrt(3)
    return {
        "A.java": alpha * g["A.java"] * vsm_a,
        "B.java": alpha * g["B.java"] * vsm_b,
        "C.java": (1 - alpha) * simi_c,
    }


HAND = {
    0.2: {"C.java": 0.461880, "B.java": 0.089020, "A.java": 0.088029},
    0.3: {"C.java": 0.404145, "B.java": 0.133530, "A.java": 0.132044},
}


@pytest.mark.criterion(8, "golden three-file fixture reproduced at alpha 0.2 and 0.3")
def test_criterion_8_golden(tmp_path, capsys):
    data = tmp_path / "data"
    _run(capsys, "index", "--code", GOLDEN / "code", "--data", data, "--reports", GOLDEN / "history.jsonl")
    for alpha in (0.2, 0.3):
        out = _run(capsys, "localize", "--code", GOLDEN / "code", "--data", data, "--json",
                   "--alpha", alpha, GOLDEN / "queries.jsonl")
        rows = [json.loads(line) for line in out.splitlines()]
        main = [r for r in rows if r["report"] == "Q"]
        tie = [r for r in rows if r["report"] == "QTIE"]

        assert [r["path"] for r in main] == ["C.java", "B.java", "A.java"]
        exact = _golden_expected(alpha)
        for r in main:
            assert abs(r["relevance"] - exact[r["path"]]) <= 1e-12
            assert round(r["relevance"], 6) == HAND[alpha][r["path"]]

        assert [r["path"] for r in tie] == ["A.java", "B.java", "C.java"]
        assert all(r["relevance"] == 0.0 for r in tie)
