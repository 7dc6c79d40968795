"""Repository scanning, change detection and model snapshots.

Snapshot layout (all integers little-endian, reals IEEE-754 binary64)::

    magic      8 bytes  b"INCBLSNP"
    version    u32
    saved_at   f64      wall-clock seconds; NOT covered by the checksum
    sections   repeated: tag (4 ASCII bytes) | u64 length | payload
    checksum   32 bytes SHA-256 over magic, version and sections

Sections: DIGS (stoplist digests), PARM (alpha, top_k), CODE (code index),
RIDX (report index), REPS (stored reports), LINK (path -> report ids).
An index section holds next_doc_id, the vocabulary table (tombstones kept),
the df and idf arrays, the doc table and the (doc, term, count) triples in
ascending order.
"""

from __future__ import annotations

import fnmatch
import hashlib
import io
import logging
import os
import struct
import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    ChecksumError,
    IncompatibleSnapshotError,
    SnapshotError,
    SnapshotVersionError,
)
from .history import BugReport, History, LinkTable, format_timestamp, parse_timestamp
from .localizer import Localizer
from .preprocess import (
    build_code_document,
    is_source_file,
    parse_term_list,
    stoplist_digests,
)
from .ranker import RankParams
from .vsm_index import (
    ChangeSet,
    DocEntry,
    SparseTermDocMatrix,
    TermDocIndex,
    UpdateReport,
    Vocabulary,
    iter_entries,
)

log = logging.getLogger(__name__)

MAGIC = b"INCBLSNP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sId")

DEFAULT_IGNORE_PATTERNS = tuple(
    parse_term_list(resources.files("incbl.data").joinpath("ignore.txt").read_text("utf-8"))
)


# ---------------------------------------------------------------------------
# scanning and change detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FileFingerprint:
    path: str
    content_hash: bytes
    size: int

    @classmethod
    def of(cls, path: str, data: bytes) -> "FileFingerprint":
        return cls(path, hashlib.sha256(data).digest(), len(data))

    @property
    def hexdigest(self) -> str:
        return self.content_hash.hex()


def load_ignore_patterns(path) -> tuple[str, ...]:
    """One glob per line; ``#`` starts a comment."""
    with open(path, encoding="utf-8") as fh:
        return tuple(line.split("#", 1)[0].strip() for line in fh if line.split("#", 1)[0].strip())


def _ignored(rel: str, name: str, patterns: Iterable[str]) -> bool:
    return any(fnmatch.fnmatchcase(name, p) or fnmatch.fnmatchcase(rel, p) for p in patterns)


def iter_source_files(root, ignore_patterns: Iterable[str] | None = None) -> Iterator[str]:
    """Relative POSIX paths of recognized source files under ``root``, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"not a readable directory: {root}")
    patterns = tuple(DEFAULT_IGNORE_PATTERNS if ignore_patterns is None else ignore_patterns)
    found = []

    def onerror(exc):
        if Path(exc.filename) == root:
            raise exc
        log.warning("skipping unreadable directory %s: %s", exc.filename, exc.strerror)

    for dirpath, dirnames, filenames in os.walk(root, onerror=onerror):
        rel_dir = Path(dirpath).relative_to(root)
        keep = []
        for d in sorted(dirnames):
            rel = (rel_dir / d).as_posix()
            if not _ignored(rel, d, patterns):
                keep.append(d)
        dirnames[:] = keep
        for f in filenames:
            rel = (rel_dir / f).as_posix()
            if is_source_file(f) and not _ignored(rel, f, patterns):
                found.append(rel)
    return iter(sorted(found))


def _read(root: Path, rel: str, reader: Callable[[Path], bytes]) -> bytes | None:
    try:
        return reader(root / rel)
    except OSError as exc:
        log.warning("skipping unreadable file %s: %s", rel, exc)
        return None


def _read_bytes(path: Path) -> bytes:
    return path.read_bytes()


def scan_repo(
    root, ignore_patterns: Iterable[str] | None = None, reader: Callable[[Path], bytes] = _read_bytes
) -> dict[str, FileFingerprint]:
    root = Path(root)
    out = {}
    for rel in iter_source_files(root, ignore_patterns):
        data = _read(root, rel, reader)
        if data is not None:
            out[rel] = FileFingerprint.of(rel, data)
    return out


@dataclass(frozen=True)
class PathChanges:
    """Paths only; see :func:`read_changes` to turn them into a ChangeSet."""

    added: tuple[str, ...] = ()
    deleted: tuple[str, ...] = ()
    modified: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.added or self.deleted or self.modified)

    def __len__(self) -> int:
        return len(self.added) + len(self.deleted) + len(self.modified)


def detect_changes(
    old: Mapping[str, FileFingerprint], new: Mapping[str, FileFingerprint]
) -> PathChanges:
    return PathChanges(
        added=tuple(sorted(new.keys() - old.keys())),
        deleted=tuple(sorted(old.keys() - new.keys())),
        modified=tuple(
            sorted(p for p in new.keys() & old.keys() if new[p].content_hash != old[p].content_hash)
        ),
    )


def read_changes(
    root, changes: PathChanges, reader: Callable[[Path], bytes] = _read_bytes
) -> ChangeSet:
    """Read and preprocess only the added and modified files.

    A file that became unreadable since the scan is treated as deleted when
    it was indexed before, and ignored otherwise.
    """
    root = Path(root)
    cs = ChangeSet(deleted=list(changes.deleted))
    for kind, paths in (("added", changes.added), ("modified", changes.modified)):
        for rel in paths:
            data = _read(root, rel, reader)
            if data is None:
                if kind == "modified":
                    cs.deleted.append(rel)
                continue
            getattr(cs, kind).append((rel, build_code_document(rel, data)))
            cs.fingerprints[rel] = FileFingerprint.of(rel, data)
    return cs


def fingerprints_of(index: TermDocIndex) -> dict[str, FileFingerprint]:
    return {
        e.path: FileFingerprint(e.path, e.content_hash, e.size)
        for e in index.matrix.doc_table.values()
    }


def read_tree(root, ignore_patterns=None, reader=_read_bytes):
    """(documents, fingerprints) for every recognized source file under ``root``."""
    root = Path(root)
    docs, fps = {}, {}
    for rel in iter_source_files(root, ignore_patterns):
        data = _read(root, rel, reader)
        if data is None:
            continue
        docs[rel] = build_code_document(rel, data)
        fps[rel] = FileFingerprint.of(rel, data)
    return docs, fps


def index_repo(
    root, reports: Iterable[BugReport] = (), params: RankParams | None = None, ignore_patterns=None
) -> Localizer:
    """Full computation: preprocess every file and build the model from scratch."""
    docs, fps = read_tree(root, ignore_patterns)
    return Localizer.from_documents(docs, reports, params=params, fingerprints=fps)


def update_repo(
    loc: Localizer, root, ignore_patterns=None, reader: Callable[[Path], bytes] = _read_bytes
) -> tuple[PathChanges, UpdateReport]:
    """Rescan ``root`` and apply only what changed since the last index/update."""
    new = scan_repo(root, ignore_patterns)
    changes = detect_changes(fingerprints_of(loc.code), new)
    if not changes:
        return changes, UpdateReport()
    return changes, loc.apply(read_changes(root, changes, reader))


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def u8(self, v):
        self.buf.write(struct.pack("<B", v))

    def u32(self, v):
        self.buf.write(struct.pack("<I", v))

    def u64(self, v):
        self.buf.write(struct.pack("<Q", v))

    def f64(self, v):
        self.buf.write(struct.pack("<d", v))

    def raw(self, b: bytes):
        self.buf.write(b)

    def str(self, s: str):
        b = s.encode("utf-8")
        self.u32(len(b))
        self.buf.write(b)

    def strs(self, items):
        items = list(items)
        self.u32(len(items))
        for s in items:
            self.str(s)

    def getvalue(self) -> bytes:
        return self.buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ChecksumError("snapshot truncated")
        out = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return out

    def _unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]

    def u8(self):
        return self._unpack("<B")

    def u32(self):
        return self._unpack("<I")

    def u64(self):
        return self._unpack("<Q")

    def f64(self):
        return self._unpack("<d")

    def str(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def strs(self) -> list[str]:
        return [self.str() for _ in range(self.u32())]

    def done(self) -> bool:
        return self.pos == len(self.data)


def _encode_index(index: TermDocIndex) -> bytes:
    m, vocab = index.matrix, index.vocab
    w = _Writer()
    w.u64(m.next_doc_id)
    n = vocab.capacity
    w.u32(n)
    for term in vocab.id_to_term:
        if term is None:
            w.u8(0)
        else:
            w.u8(1)
            w.str(term)
    w.raw(np.asarray(m.df[:n], dtype="<i8").tobytes())
    w.raw(np.asarray(m.idf[:n], dtype="<f8").tobytes())
    w.u64(len(m.doc_table))
    for doc_id in sorted(m.doc_table):
        e = m.doc_table[doc_id]
        w.u64(doc_id)
        w.str(e.path)
        w.u64(e.total_terms)
        w.raw(e.content_hash)
        w.u64(e.size)
    triples = np.array(list(iter_entries(m)), dtype="<u8").reshape(-1, 3)
    w.u64(len(triples))
    w.raw(triples.tobytes())
    return w.getvalue()


def _decode_index(payload: bytes) -> TermDocIndex:
    r = _Reader(payload)
    m = SparseTermDocMatrix()
    next_doc_id = r.u64()
    n = r.u32()
    table = [r.str() if r.u8() else None for _ in range(n)]
    vocab = Vocabulary.from_table(table)
    df = np.frombuffer(r.take(8 * n), dtype="<i8").astype(np.int64)
    idf = np.frombuffer(r.take(8 * n), dtype="<f8").astype(np.float64)
    m._ensure_capacity(n)
    m.df = [int(x) for x in df]
    m.idf[:n] = idf
    entries = {}
    for _ in range(r.u64()):
        doc_id = r.u64()
        path = r.str()
        total = r.u64()
        digest = r.take(32)
        entries[doc_id] = DocEntry(path, total, digest, r.u64())
    nnz = r.u64()
    triples = np.frombuffer(r.take(24 * nnz), dtype="<u8").reshape(-1, 3)
    if not r.done():
        raise SnapshotError("trailing bytes in index section")
    docs = triples[:, 0].astype(np.int64)
    if nnz and (np.any(np.diff(docs) < 0) or not set(np.unique(docs).tolist()) <= entries.keys()):
        raise SnapshotError("triples unsorted or referencing unknown documents")
    terms = triples[:, 1].astype(np.int64).tolist()
    counts = triples[:, 2].astype(np.int64).tolist()
    ordered = sorted(entries)
    bounds = np.searchsorted(docs, np.array(ordered + [np.iinfo(np.int64).max], dtype=np.int64))
    for k, doc_id in enumerate(ordered):
        lo, hi = int(bounds[k]), int(bounds[k + 1])
        m._put_row(doc_id, entries[doc_id], dict(zip(terms[lo:hi], counts[lo:hi])))
    m.next_doc_id = next_doc_id
    index = TermDocIndex(m, vocab)
    index.check()
    return index


def _encode_reports(reports: Iterable[BugReport]) -> bytes:
    w = _Writer()
    reports = sorted(reports, key=lambda r: r.id)
    w.u32(len(reports))
    for r in reports:
        w.str(r.id)
        w.str(r.title)
        w.str(r.description)
        w.strs(r.fixed_files or ())
        w.str(format_timestamp(r.created_at))
    return w.getvalue()


def _decode_reports(payload: bytes) -> list[BugReport]:
    r = _Reader(payload)
    out = []
    for _ in range(r.u32()):
        rid, title, desc = r.str(), r.str(), r.str()
        fixed = r.strs()
        out.append(BugReport(rid, title, desc, tuple(fixed) or None, parse_timestamp(r.str())))
    return out


def _encode_links(links: LinkTable) -> bytes:
    w = _Writer()
    table = links.file_to_reports
    w.u32(len(table))
    for path in sorted(table):
        w.str(path)
        w.strs(sorted(table[path]))
    return w.getvalue()


def _decode_links(payload: bytes) -> LinkTable:
    r = _Reader(payload)
    table = {}
    for _ in range(r.u32()):
        path = r.str()
        table[path] = r.strs()
    return LinkTable(table)


def _encode_digests(digests: Mapping[str, bytes]) -> bytes:
    w = _Writer()
    w.u32(len(digests))
    for name in sorted(digests):
        w.str(name)
        w.raw(digests[name])
    return w.getvalue()


def _decode_digests(payload: bytes) -> dict[str, bytes]:
    r = _Reader(payload)
    return {r.str(): r.take(32) for _ in range(r.u32())}


def snapshot_bytes(loc: Localizer, saved_at: float | None = None) -> bytes:
    params = _Writer()
    params.f64(loc.params.alpha)
    params.u32(loc.params.top_k)
    with loc._write_lock:
        sections = [
            (b"DIGS", _encode_digests(stoplist_digests())),
            (b"PARM", params.getvalue()),
            (b"CODE", _encode_index(loc.code)),
            (b"RIDX", _encode_index(loc.history.index)),
            (b"REPS", _encode_reports(loc.history.reports.values())),
            (b"LINK", _encode_links(loc.history.links)),
        ]
    body = b"".join(tag + struct.pack("<Q", len(p)) + p for tag, p in sections)
    prefix = MAGIC + struct.pack("<I", FORMAT_VERSION)
    digest = hashlib.sha256(prefix + body).digest()
    ts = struct.pack("<d", time.time() if saved_at is None else saved_at)
    return prefix + ts + body + digest


def save_snapshot(loc: Localizer, path, saved_at: float | None = None) -> None:
    """Write atomically: a failed save never leaves a partial snapshot behind."""
    path = Path(path)
    data = snapshot_bytes(loc, saved_at)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def snapshot_from_bytes(data: bytes) -> Localizer:
    if len(data) < _HEADER.size + 32:
        raise ChecksumError("snapshot truncated")
    magic, version, _saved_at = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError("not an incbl snapshot")
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(
            f"snapshot format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    body = data[_HEADER.size : -32]
    if hashlib.sha256(data[:12] + body).digest() != data[-32:]:
        raise ChecksumError("snapshot checksum mismatch (corrupt or partial file)")

    r = _Reader(body)
    sections = {}
    while not r.done():
        tag = r.take(4)
        sections[tag] = r.take(r.u64())
    missing = {b"DIGS", b"PARM", b"CODE", b"RIDX", b"REPS", b"LINK"} - sections.keys()
    if missing:
        raise SnapshotError(f"snapshot lacks sections {sorted(missing)}")

    if _decode_digests(sections[b"DIGS"]) != stoplist_digests():
        raise IncompatibleSnapshotError(
            "snapshot was built with different stopword/keyword lists; re-index required"
        )
    pr = _Reader(sections[b"PARM"])
    params = RankParams(alpha=pr.f64(), top_k=pr.u32())

    history = History()
    history.index = _decode_index(sections[b"RIDX"])
    history.reports = {r.id: r for r in _decode_reports(sections[b"REPS"])}
    history.links = _decode_links(sections[b"LINK"])
    if history.links != LinkTable.from_reports(history.reports.values()):
        raise SnapshotError("link table does not match stored reports")
    if set(history.index.paths()) != set(history.reports):
        raise SnapshotError("report index does not match stored reports")
    return Localizer(_decode_index(sections[b"CODE"]), history, params)


def load_snapshot(path) -> Localizer:
    with open(path, "rb") as fh:
        return snapshot_from_bytes(fh.read())
