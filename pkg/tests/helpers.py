"""Random corpora, change sequences and a from-scratch oracle for index tests."""

from __future__ import annotations

import math
from pathlib import Path
from collections import Counter

import numpy as np

from incbl.history import BugReport
from incbl.preprocess import TermCounts
from incbl.vsm_index import ChangeSet, TermDocIndex

# words that pass preprocessing unchanged, so report text and TermCounts share terms
WORDS = [
    "parser", "token", "stream", "buffer", "render", "socket", "thread", "widget",
    "cursor", "layout", "font", "pixel", "vertex", "shader", "kernel", "matrix",
    "vector", "queue", "heap", "graph", "node", "edg", "branch", "commit", "merg",
    "patch", "diff", "blob", "tree", "schema", "column", "row", "cell", "sheet",
    "chart", "axi", "legend", "tooltip", "dialog", "menu",
]


def pool(n_terms: int) -> list[str]:
    """``n_terms`` distinct terms; the first ones are real words."""
    letters = "abcdefghijklmnopqrstuvwxyz"
    extra = [
        "zq" + letters[i // 26 % 26] + letters[i % 26] + "x"
        for i in range(max(0, n_terms - len(WORDS)))
    ]
    return (WORDS + extra)[:n_terms]


def random_counts(rng: np.random.Generator, terms: list[str], max_len: int = 12) -> TermCounts:
    k = int(rng.integers(0, max_len + 1))
    chosen = rng.choice(len(terms), size=min(k, len(terms)), replace=False)
    return TermCounts({terms[i]: int(rng.integers(1, 6)) for i in chosen})


def random_corpus(rng, terms, max_docs=50, min_docs=0) -> dict[str, TermCounts]:
    n = int(rng.integers(min_docs, max_docs + 1))
    return {f"d{rng.integers(10**6):06d}.java": random_counts(rng, terms) for _ in range(n)}


def mutate(rng, counts: TermCounts, terms) -> TermCounts:
    """Change counts, drop terms and introduce new ones."""
    new = dict(counts.counts)
    for t in list(new):
        r = rng.random()
        if r < 0.25:
            del new[t]
        elif r < 0.5:
            new[t] = int(rng.integers(1, 8))
    for _ in range(int(rng.integers(0, 4))):
        t = terms[int(rng.integers(len(terms)))]
        new.setdefault(t, int(rng.integers(1, 6)))
    out = TermCounts(new)
    if out == counts:
        out = TermCounts({**new, terms[int(rng.integers(len(terms)))]: 9})
    return out


def random_change_set(rng, current: dict[str, TermCounts], terms, max_docs=50) -> ChangeSet:
    paths = sorted(current)
    n_del = int(rng.integers(0, min(3, len(paths)) + 1))
    dels = [paths[i] for i in rng.choice(len(paths), size=n_del, replace=False)] if n_del else []
    rest = [p for p in paths if p not in dels]
    n_mod = int(rng.integers(0, min(4, len(rest)) + 1))
    mods = [rest[i] for i in rng.choice(len(rest), size=n_mod, replace=False)] if n_mod else []
    room = max_docs - (len(paths) - n_del)
    n_add = int(rng.integers(0, max(0, min(3, room)) + 1))
    adds = []
    for _ in range(n_add):
        p = f"n{rng.integers(10**7):07d}.py"
        if p not in current:
            adds.append((p, random_counts(rng, terms)))
    adds = list(dict(adds).items())
    return ChangeSet(
        added=adds,
        deleted=dels,
        modified=[(p, mutate(rng, current[p], terms)) for p in mods],
    )


def apply_to_dict(current: dict[str, TermCounts], cs: ChangeSet) -> dict[str, TermCounts]:
    out = dict(current)
    for p in cs.deleted:
        del out[p]
    for p, c in cs.modified:
        out[p] = c
    for p, c in cs.added:
        out[p] = c
    return out


def atomic_kinds(before: dict[str, TermCounts], cs: ChangeSet, report) -> set[str]:
    """Which of the six document/term-level atomic changes ``cs`` exercised."""
    kinds = set()
    if cs.added:
        kinds.add("doc_add")
    if cs.deleted:
        kinds.add("doc_delete")
    if cs.modified:
        kinds.add("doc_modify")
    if report.new_terms:
        kinds.add("term_add")
    if report.removed_terms:
        kinds.add("term_delete")
    for p, c in cs.modified:
        old = before[p]
        if any(t in old.counts and old[t] != n for t, n in c.items()):
            kinds.add("tf_change")
    return kinds


def oracle_state(documents: dict[str, TermCounts]):
    """df, idf and tf-idf weights straight from the definitions, no index code."""
    M = len(documents)
    df = Counter()
    for c in documents.values():
        df.update(c.counts.keys())
    idf = {t: math.log(M / (d + 1)) for t, d in df.items()}
    weights = {
        p: {t: (math.log(n) + 1.0) * idf[t] for t, n in c.items() if (math.log(n) + 1.0) * idf[t] != 0.0}
        for p, c in documents.items()
    }
    return M, dict(df), idf, weights


def assert_matches_rebuild(inc: TermDocIndex, documents: dict[str, TermCounts], tol=1e-9):
    """Incremental index vs a from-scratch rebuild over the same documents."""
    ref = TermDocIndex.rebuild(documents)
    inc.check()
    assert inc.M == ref.M == len(documents)
    assert {p: dict(c.counts) for p, c in inc.documents().items()} == {
        p: dict(c.counts) for p, c in ref.documents().items()
    }
    assert inc.df_by_term() == ref.df_by_term()
    inc_idf, ref_idf = inc.idf_by_term(), ref.idf_by_term()
    assert inc_idf.keys() == ref_idf.keys()
    for t in ref_idf:
        assert abs(inc_idf[t] - ref_idf[t]) <= tol, t
    iw, rw = inc.weights_by_path(), ref.weights_by_path()
    assert iw.keys() == rw.keys()
    for p in rw:
        keys = iw[p].keys() | rw[p].keys()
        for t in keys:
            assert abs(iw[p].get(t, 0.0) - rw[p].get(t, 0.0)) <= tol, (p, t)
    return ref


def random_report(rng, rid: str, terms, fixed_from=None) -> BugReport:
    words = [terms[int(i)] for i in rng.integers(0, len(terms), size=int(rng.integers(1, 8)))]
    fixed = None
    if fixed_from:
        k = int(rng.integers(1, min(3, len(fixed_from)) + 1))
        fixed = tuple(fixed_from[int(i)] for i in rng.choice(len(fixed_from), size=k, replace=False))
    return BugReport(rid, title=" ".join(words[:2]), description=" ".join(words[2:]), fixed_files=fixed)


def apply_transition(repo: Path, transition: dict) -> None:
    """Apply one fixture transition ({"write": {path: text}, "delete": [path]})."""
    for rel in transition.get("delete", []):
        (repo / rel).unlink()
    for rel, text in transition.get("write", {}).items():
        path = repo / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
