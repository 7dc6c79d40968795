"""Incrementally maintained tf-idf vector space model.

State kept per corpus:

* a :class:`Vocabulary` mapping terms to integer ids, with tombstoned ids
  recycled for new terms;
* a :class:`SparseTermDocMatrix` holding the raw counts ``A`` (one sparse
  row per document), the document frequencies ``df``, the live document
  count ``M`` and a cached ``idf`` array.

Document change sets are applied in place.  Document frequencies move by the
sign difference of the old and new counts, and when the corpus size changes
every idf value whose document frequency did not move is corrected by the
same additive shift ``ln((M + dM) / M)``; only touched terms are recomputed.
The result always equals :func:`rebuild_full` over the surviving documents.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from sortedcontainers import SortedList

from .errors import (
    InvalidChangeSetError,
    InvalidCorpusError,
    ModelCorruptError,
    NotFoundError,
)
from .preprocess import TermCounts

DocVector = dict  # term id -> tf-idf weight, no explicit zeros

ZERO_HASH = bytes(32)

# below any nonzero idf for corpora under ~1e9 documents
_SNAP = 1e-9


# ---------------------------------------------------------------------------
# scalar weighting
# ---------------------------------------------------------------------------


def compute_tf(count: int) -> float:
    """Log-scaled term frequency; an absent term (count 0) weighs 0."""
    if count < 0:
        raise ValueError(f"negative term count {count}")
    if count == 0:
        return 0.0
    return math.log(count) + 1.0


def compute_idf(M: int, df: int) -> float:
    """ln(M / (df + 1)).  Negative values are kept (no clamping)."""
    if M < 1 or df < 0 or df > M:
        raise ValueError(f"idf undefined for M={M}, df={df}")
    return math.log(M / (df + 1))


def update_df_for_doc(df_old: int, a_old: int, a_new: int) -> int:
    """Document frequency after one document's count for a term moves a_old -> a_new."""
    if a_old < 0 or a_new < 0 or df_old < 0:
        raise ValueError("counts and document frequencies are non-negative")
    df_new = df_old + ((a_new > 0) - (a_old > 0))
    if df_new < 0:
        raise ModelCorruptError(
            f"document frequency would go negative (df={df_old}, {a_old} -> {a_new})"
        )
    return df_new


def idf_shift(M: int, delta_M: int) -> float:
    """Additive idf correction for terms whose df is unchanged when M moves by delta_M."""
    if M < 1 or M + delta_M < 1:
        raise InvalidCorpusError(f"corpus size must stay >= 1 (M={M}, delta={delta_M})")
    return math.log((M + delta_M) / M)


_tf_table = np.array([compute_tf(c) for c in range(256)])


def _tf_array(counts: np.ndarray) -> np.ndarray:
    global _tf_table
    if counts.size and counts.max() >= _tf_table.size:
        size = int(counts.max()) + 1
        _tf_table = np.array([compute_tf(c) for c in range(max(size, 2 * _tf_table.size))])
    return _tf_table[counts]


def cosine(u: Mapping[int, float], v: Mapping[int, float]) -> float:
    """Cosine similarity of two sparse vectors; 0 when either has zero norm."""
    if len(u) > len(v):
        u, v = v, u
    dot = math.fsum(w * v[k] for k, w in u.items() if k in v)
    nu = math.sqrt(math.fsum(w * w for w in u.values()))
    nv = math.sqrt(math.fsum(w * w for w in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (nu * nv)))


# ---------------------------------------------------------------------------
# data structures
# ---------------------------------------------------------------------------


class Vocabulary:
    """Bidirectional term <-> id map.  Deleted terms leave tombstoned ids
    that are handed out again (smallest first) before the id space grows."""

    def __init__(self):
        self.term_to_id: dict[str, int] = {}
        self.id_to_term: list[str | None] = []
        self._free: list[int] = []

    def __len__(self) -> int:
        return len(self.term_to_id)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_id

    @property
    def capacity(self) -> int:
        return len(self.id_to_term)

    @property
    def free_ids(self) -> frozenset[int]:
        return frozenset(self._free)

    def get(self, term: str) -> int | None:
        return self.term_to_id.get(term)

    def term(self, term_id: int) -> str:
        t = self.id_to_term[term_id] if 0 <= term_id < len(self.id_to_term) else None
        if t is None:
            raise NotFoundError(f"term id {term_id} is not live")
        return t

    def add(self, term: str) -> int:
        if term in self.term_to_id:
            return self.term_to_id[term]
        if self._free:
            tid = heapq.heappop(self._free)
            self.id_to_term[tid] = term
        else:
            tid = len(self.id_to_term)
            self.id_to_term.append(term)
        self.term_to_id[term] = tid
        return tid

    def remove(self, term_id: int) -> None:
        term = self.term(term_id)
        del self.term_to_id[term]
        self.id_to_term[term_id] = None
        heapq.heappush(self._free, term_id)

    def live_ids(self) -> list[int]:
        return [i for i, t in enumerate(self.id_to_term) if t is not None]

    @classmethod
    def from_table(cls, id_to_term: Sequence[str | None]) -> "Vocabulary":
        vocab = cls()
        vocab.id_to_term = list(id_to_term)
        for i, t in enumerate(vocab.id_to_term):
            if t is None:
                vocab._free.append(i)
            else:
                if t in vocab.term_to_id:
                    raise ModelCorruptError(f"term {t!r} bound to two ids")
                vocab.term_to_id[t] = i
        heapq.heapify(vocab._free)
        return vocab

    def check(self) -> None:
        for term, tid in self.term_to_id.items():
            if self.id_to_term[tid] != term:
                raise ModelCorruptError(f"vocabulary maps {term!r} -> {tid} but not back")
        live = sum(t is not None for t in self.id_to_term)
        if live != len(self.term_to_id):
            raise ModelCorruptError("vocabulary reverse table has unmapped live ids")
        if any(self.id_to_term[i] is not None for i in self._free):
            raise ModelCorruptError("a live id is on the free list")
        if len(set(self._free)) != len(self._free):
            raise ModelCorruptError("duplicate free ids")


@dataclass(frozen=True)
class DocEntry:
    path: str
    total_terms: int
    content_hash: bytes = ZERO_HASH
    size: int = 0


class SparseTermDocMatrix:
    """Raw term counts A, document frequencies df, corpus size M and cached idf."""

    def __init__(self):
        self.rows: dict[int, dict[int, int]] = {}
        self.df: list[int] = []
        self.idf = np.zeros(0, dtype=np.float64)
        self.doc_table: dict[int, DocEntry] = {}
        self.path_to_doc: dict[str, int] = {}
        self.next_doc_id = 0
        self.lengths = SortedList()
        self._arrays: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def M(self) -> int:
        return len(self.rows)

    def doc_id(self, path: str) -> int:
        try:
            return self.path_to_doc[path]
        except KeyError:
            raise NotFoundError(f"no document {path!r}") from None

    def _ensure_capacity(self, n_ids: int) -> None:
        if len(self.df) < n_ids:
            self.df.extend([0] * (n_ids - len(self.df)))
        if self.idf.size < n_ids:
            grown = np.zeros(max(n_ids, 2 * self.idf.size, 64), dtype=np.float64)
            grown[: self.idf.size] = self.idf
            self.idf = grown

    def _put_row(self, doc_id: int, entry: DocEntry, row: dict[int, int]) -> None:
        old = self.doc_table.get(doc_id)
        if old is not None:
            self.lengths.remove(old.total_terms)
        self.rows[doc_id] = row
        self.doc_table[doc_id] = entry
        self.path_to_doc[entry.path] = doc_id
        self.lengths.add(entry.total_terms)
        ids = np.fromiter(row.keys(), dtype=np.int64, count=len(row))
        counts = np.fromiter(row.values(), dtype=np.int64, count=len(row))
        # ascending term ids: a row restored from a snapshot scores bit-identically
        order = np.argsort(ids, kind="stable")
        self._arrays[doc_id] = (ids[order], _tf_array(counts[order]))

    def _drop_row(self, doc_id: int) -> dict[int, int]:
        entry = self.doc_table.pop(doc_id)
        del self.path_to_doc[entry.path]
        self.lengths.remove(entry.total_terms)
        del self._arrays[doc_id]
        return self.rows.pop(doc_id)

    def length_range(self) -> tuple[int, int]:
        if not self.lengths:
            raise ModelCorruptError("length range of an empty corpus")
        return self.lengths[0], self.lengths[-1]

    def idf_of(self, term_id: int) -> float:
        return float(self.idf[term_id])


@dataclass
class ChangeSet:
    """Document-level changes between two corpus states.

    ``fingerprints`` optionally carries content hashes (objects with
    ``content_hash`` and ``size``) for added/modified paths.
    """

    added: list = field(default_factory=list)
    deleted: list = field(default_factory=list)
    modified: list = field(default_factory=list)
    fingerprints: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.added or self.deleted or self.modified)

    @property
    def touched_paths(self) -> list[str]:
        return [p for p, _ in self.added] + list(self.deleted) + [p for p, _ in self.modified]


@dataclass(frozen=True)
class UpdateReport:
    touched_terms: tuple[int, ...] = ()
    touched_docs: tuple[int, ...] = ()
    delta_M: int = 0
    new_terms: tuple[int, ...] = ()
    removed_terms: tuple[int, ...] = ()
    n_added: int = 0
    n_deleted: int = 0
    n_modified: int = 0


def _entry(path: str, counts: TermCounts, fingerprint) -> DocEntry:
    if fingerprint is None:
        return DocEntry(path, counts.total_terms)
    return DocEntry(path, counts.total_terms, fingerprint.content_hash, fingerprint.size)


def _validate(matrix: SparseTermDocMatrix, changes: ChangeSet) -> None:
    problems: dict[str, str] = {}
    seen: dict[str, str] = {}
    for kind, paths in (
        ("added", [p for p, _ in changes.added]),
        ("deleted", list(changes.deleted)),
        ("modified", [p for p, _ in changes.modified]),
    ):
        for p in paths:
            if p in seen:
                problems[p] = f"listed as both {seen[p]} and {kind}"
                continue
            seen[p] = kind
            exists = p in matrix.path_to_doc
            if kind == "added" and exists:
                problems[p] = "added but already indexed"
            elif kind != "added" and not exists:
                problems[p] = f"{kind} but not indexed"
    for p, counts in list(changes.added) + list(changes.modified):
        if not isinstance(counts, TermCounts):
            problems.setdefault(p, "documents must be TermCounts")
            continue
        for term, n in counts.items():
            if not isinstance(n, (int, np.integer)) or n < 1:
                problems.setdefault(p, f"non-positive count for {term!r}")
                break
    if problems:
        raise InvalidChangeSetError(problems)


def apply_change_set(
    matrix: SparseTermDocMatrix, vocab: Vocabulary, changes: ChangeSet
) -> UpdateReport:
    """Apply ``changes`` in place and return what moved.

    The change set is validated as a whole first; on any violation
    InvalidChangeSetError is raised and nothing is modified.
    """
    _validate(matrix, changes)
    if not changes:
        return UpdateReport()

    M_old = matrix.M
    df = matrix.df
    touched_terms: set[int] = set()
    touched_docs: list[int] = []
    new_terms: list[int] = []

    def move(old_row: dict[int, int], new_row: dict[int, int]) -> None:
        for tid, a_old in old_row.items():
            a_new = new_row.get(tid, 0)
            if a_old != a_new:
                df[tid] = update_df_for_doc(df[tid], a_old, a_new)
                touched_terms.add(tid)
        for tid, a_new in new_row.items():
            if tid not in old_row:
                df[tid] = update_df_for_doc(df[tid], 0, a_new)
                touched_terms.add(tid)

    def encode(counts: TermCounts) -> dict[int, int]:
        row = {}
        for term, n in counts.items():
            tid = vocab.get(term)
            if tid is None:
                tid = vocab.add(term)
                matrix._ensure_capacity(vocab.capacity)
                new_terms.append(tid)
            row[tid] = int(n)
        return row

    for path in sorted(changes.deleted):
        doc_id = matrix.path_to_doc[path]
        move(matrix._drop_row(doc_id), {})
        touched_docs.append(doc_id)

    for path, counts in sorted(changes.modified, key=lambda pc: pc[0]):
        doc_id = matrix.path_to_doc[path]
        row = encode(counts)
        move(matrix.rows[doc_id], row)
        fp = changes.fingerprints.get(path)
        if fp is None:
            old = matrix.doc_table[doc_id]
            entry = DocEntry(path, counts.total_terms, old.content_hash, old.size)
        else:
            entry = _entry(path, counts, fp)
        matrix._put_row(doc_id, entry, row)
        touched_docs.append(doc_id)

    for path, counts in sorted(changes.added, key=lambda pc: pc[0]):
        doc_id = matrix.next_doc_id
        matrix.next_doc_id += 1
        row = encode(counts)
        move({}, row)
        matrix._put_row(doc_id, _entry(path, counts, changes.fingerprints.get(path)), row)
        touched_docs.append(doc_id)

    M_new = matrix.M
    delta = M_new - M_old
    removed: list[int] = []
    if M_old >= 1 and M_new >= 1 and delta != 0:
        shift = idf_shift(M_old, delta)
        live = np.zeros(matrix.idf.size, dtype=bool)
        live[vocab.live_ids()] = True
        matrix.idf[live] += shift
        # a true idf is either 0 (df + 1 == M) or at least ~1/M away from it;
        # recompute near-zero shifted values so rounding cannot leave a
        # spurious 1e-16 weight that cosine normalization would blow up
        for tid in np.flatnonzero(live & (np.abs(matrix.idf) < _SNAP)).tolist():
            matrix.idf[tid] = compute_idf(M_new, df[tid])
    memo: dict[int, float] = {}
    for tid in sorted(touched_terms):
        d = df[tid]
        if d == 0:
            vocab.remove(tid)
            matrix.idf[tid] = 0.0
            removed.append(tid)
            continue
        if d not in memo:
            memo[d] = compute_idf(M_new, d)
        matrix.idf[tid] = memo[d]

    return UpdateReport(
        touched_terms=tuple(sorted(touched_terms)),
        touched_docs=tuple(sorted(touched_docs)),
        delta_M=delta,
        new_terms=tuple(new_terms),
        removed_terms=tuple(removed),
        n_added=len(changes.added),
        n_deleted=len(changes.deleted),
        n_modified=len(changes.modified),
    )


def rebuild_full(
    documents: Mapping[str, TermCounts], fingerprints: Mapping | None = None
) -> tuple[SparseTermDocMatrix, Vocabulary]:
    """Build the model from scratch.

    Documents get ids in lexicographic path order and terms in order of first
    appearance over that sequence.
    """
    fingerprints = fingerprints or {}
    matrix, vocab = SparseTermDocMatrix(), Vocabulary()
    term_to_id = vocab.term_to_id
    id_to_term = vocab.id_to_term
    rows = []
    for doc_id, path in enumerate(sorted(documents)):
        counts = documents[path]
        row = {}
        for term, n in counts.items():
            tid = term_to_id.get(term)
            if tid is None:
                tid = term_to_id[term] = len(id_to_term)
                id_to_term.append(term)
            row[tid] = int(n)
        rows.append((doc_id, path, counts, row))

    matrix._ensure_capacity(vocab.capacity)
    df = [0] * vocab.capacity
    for doc_id, path, counts, row in rows:
        for tid in row:
            df[tid] += 1
        matrix._put_row(doc_id, _entry(path, counts, fingerprints.get(path)), row)
    matrix.df = df
    matrix.next_doc_id = len(rows)
    memo: dict[int, float] = {}
    M = matrix.M
    for tid, d in enumerate(df):
        if d not in memo:
            memo[d] = compute_idf(M, d)
        matrix.idf[tid] = memo[d]
    return matrix, vocab


# ---------------------------------------------------------------------------
# vectors
# ---------------------------------------------------------------------------


def doc_vector(matrix: SparseTermDocMatrix, doc_id: int) -> DocVector:
    row = matrix.rows.get(doc_id)
    if row is None:
        raise NotFoundError(f"document id {doc_id} is not live")
    out = {}
    for tid, n in row.items():
        w = compute_tf(n) * matrix.idf_of(tid)
        if w != 0.0:
            out[tid] = w
    return out


def vectorize_query(matrix: SparseTermDocMatrix, vocab: Vocabulary, query: TermCounts) -> DocVector:
    """Weight a query with corpus idf; terms outside the vocabulary are dropped."""
    out = {}
    for term, n in query.items():
        tid = vocab.get(term)
        if tid is None:
            continue
        w = compute_tf(n) * matrix.idf_of(tid)
        if w != 0.0:
            out[tid] = w
    return out


def check_consistency(matrix: SparseTermDocMatrix, vocab: Vocabulary) -> None:
    """Full-scan audit of every structural invariant; raises ModelCorruptError."""
    vocab.check()
    recount = [0] * vocab.capacity
    for doc_id, row in matrix.rows.items():
        entry = matrix.doc_table.get(doc_id)
        if entry is None or matrix.path_to_doc.get(entry.path) != doc_id:
            raise ModelCorruptError(f"doc table out of sync for doc {doc_id}")
        if entry.total_terms != len(row):
            raise ModelCorruptError(f"total_terms mismatch for {entry.path!r}")
        for tid, n in row.items():
            if n < 1:
                raise ModelCorruptError(f"explicit zero stored for {entry.path!r}")
            if vocab.id_to_term[tid] is None:
                raise ModelCorruptError(f"{entry.path!r} references dead term id {tid}")
            recount[tid] += 1
    if len(matrix.doc_table) != matrix.M or len(matrix.path_to_doc) != matrix.M:
        raise ModelCorruptError("M disagrees with doc table")
    if list(matrix.df[: vocab.capacity]) != recount:
        raise ModelCorruptError("stored df disagrees with a full recount")
    for tid in vocab.live_ids():
        if recount[tid] == 0:
            raise ModelCorruptError(f"live term id {tid} has df 0")
    if sorted(e.total_terms for e in matrix.doc_table.values()) != list(matrix.lengths):
        raise ModelCorruptError("length multiset out of sync")


# ---------------------------------------------------------------------------
# published read view and the index facade
# ---------------------------------------------------------------------------


class IndexView:
    """Immutable scoring snapshot of an index, safe to share between threads."""

    def __init__(self, matrix: SparseTermDocMatrix, vocab: Vocabulary):
        order = sorted(matrix.doc_table, key=lambda d: matrix.doc_table[d].path)
        self.doc_ids = tuple(order)
        self.paths = tuple(matrix.doc_table[d].path for d in order)
        self.total_terms = np.array(
            [matrix.doc_table[d].total_terms for d in order], dtype=np.int64
        )
        self.term_to_id = dict(vocab.term_to_id)
        self.idf = matrix.idf[: vocab.capacity].copy()
        n = len(order)
        if n:
            arrays = [matrix._arrays[d] for d in order]
            sizes = np.array([a[0].size for a in arrays], dtype=np.int64)
            self._term_ids = np.concatenate([a[0] for a in arrays])
            tf = np.concatenate([a[1] for a in arrays])
        else:
            sizes = np.zeros(0, dtype=np.int64)
            self._term_ids = np.zeros(0, dtype=np.int64)
            tf = np.zeros(0)
        self._rows = np.repeat(np.arange(n), sizes)
        self._weights = tf * self.idf[self._term_ids]
        self.norms = np.sqrt(np.bincount(self._rows, weights=self._weights**2, minlength=n))
        self.x_min = int(matrix.lengths[0]) if n else 0
        self.x_max = int(matrix.lengths[-1]) if n else 0
        for arr in (self.total_terms, self.idf, self._term_ids, self._rows, self._weights, self.norms):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.paths)

    def vectorize(self, query: TermCounts) -> DocVector:
        out = {}
        for term, n in query.items():
            tid = self.term_to_id.get(term)
            if tid is None:
                continue
            w = compute_tf(n) * float(self.idf[tid])
            if w != 0.0:
                out[tid] = w
        return out

    def cosines(self, qvec: Mapping[int, float]) -> np.ndarray:
        """Cosine of ``qvec`` against every document, in path order."""
        n = len(self.paths)
        qnorm = math.sqrt(math.fsum(w * w for w in qvec.values()))
        if n == 0 or qnorm == 0.0:
            return np.zeros(n)
        dense = np.zeros(self.idf.size)
        ids = np.fromiter(qvec.keys(), dtype=np.int64, count=len(qvec))
        dense[ids] = np.fromiter(qvec.values(), dtype=np.float64, count=len(qvec))
        dots = np.bincount(self._rows, weights=self._weights * dense[self._term_ids], minlength=n)
        out = np.zeros(n)
        nz = self.norms > 0
        out[nz] = dots[nz] / (self.norms[nz] * qnorm)
        return np.clip(out, -1.0, 1.0)


class TermDocIndex:
    """A vocabulary plus term-document matrix with a single-writer lock.

    Writers serialize on an internal lock.  Readers call :meth:`view`, which
    returns the latest published :class:`IndexView`; a view is never mutated
    after publication.
    """

    def __init__(self, matrix: SparseTermDocMatrix | None = None, vocab: Vocabulary | None = None):
        self.matrix = matrix if matrix is not None else SparseTermDocMatrix()
        self.vocab = vocab if vocab is not None else Vocabulary()
        self._lock = threading.RLock()
        self._view: IndexView | None = None

    @classmethod
    def rebuild(cls, documents: Mapping[str, TermCounts], fingerprints: Mapping | None = None):
        return cls(*rebuild_full(documents, fingerprints))

    @property
    def M(self) -> int:
        return self.matrix.M

    def __len__(self) -> int:
        return self.matrix.M

    def __contains__(self, path: str) -> bool:
        return path in self.matrix.path_to_doc

    def paths(self) -> list[str]:
        return sorted(self.matrix.path_to_doc)

    def apply(self, changes: ChangeSet) -> UpdateReport:
        with self._lock:
            report = apply_change_set(self.matrix, self.vocab, changes)
            if changes:
                self._view = None
            return report

    def view(self) -> IndexView:
        v = self._view
        if v is None:
            with self._lock:
                v = self._view
                if v is None:
                    v = self._view = IndexView(self.matrix, self.vocab)
        return v

    def doc_vector(self, path: str) -> DocVector:
        return doc_vector(self.matrix, self.matrix.doc_id(path))

    def vectorize(self, query: TermCounts) -> DocVector:
        return vectorize_query(self.matrix, self.vocab, query)

    def check(self) -> None:
        with self._lock:
            check_consistency(self.matrix, self.vocab)

    # keyed by strings rather than ids, for comparing independently built models

    def term_counts(self, path: str) -> TermCounts:
        row = self.matrix.rows[self.matrix.doc_id(path)]
        return TermCounts({self.vocab.id_to_term[t]: n for t, n in row.items()})

    def documents(self) -> dict[str, TermCounts]:
        return {p: self.term_counts(p) for p in self.paths()}

    def df_by_term(self) -> dict[str, int]:
        return {t: self.matrix.df[i] for t, i in self.vocab.term_to_id.items()}

    def idf_by_term(self) -> dict[str, float]:
        return {t: float(self.matrix.idf[i]) for t, i in self.vocab.term_to_id.items()}

    def weights_by_path(self) -> dict[str, dict[str, float]]:
        out = {}
        for p in self.paths():
            vec = self.doc_vector(p)
            out[p] = {self.vocab.id_to_term[t]: w for t, w in vec.items()}
        return out

    def entry(self, path: str) -> DocEntry:
        return self.matrix.doc_table[self.matrix.doc_id(path)]


def change_set_between(
    old: Mapping[str, TermCounts], new: Mapping[str, TermCounts]
) -> ChangeSet:
    """Diff two path -> TermCounts corpora (used by tests and the benchmark)."""
    added = [(p, new[p]) for p in sorted(new.keys() - old.keys())]
    deleted = sorted(old.keys() - new.keys())
    modified = [(p, new[p]) for p in sorted(new.keys() & old.keys()) if new[p] != old[p]]
    return ChangeSet(added=added, deleted=deleted, modified=modified)


def iter_entries(matrix: SparseTermDocMatrix) -> Iterable[tuple[int, int, int]]:
    """(doc id, term id, count) triples in ascending order."""
    for doc_id in sorted(matrix.rows):
        row = matrix.rows[doc_id]
        for tid in sorted(row):
            yield doc_id, tid, row[tid]
