"""Past fixed bug reports, their links to source files, and the history score.

A file's history score for a new report is the mean cosine similarity
between the report and every past report whose fix touched that file, or 0
for files no past fix touched.  Past reports live in their own incrementally
maintained term-document index.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DuplicateReportError, InvalidReportError, NotFoundError
from .preprocess import TermCounts, build_report_document
from .vsm_index import ChangeSet, TermDocIndex


def parse_timestamp(value: str | None) -> datetime | None:
    if value is None or value == "":
        return None
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvalidReportError(f"bad RFC 3339 timestamp {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime | None) -> str:
    if ts is None:
        return ""
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class BugReport:
    id: str
    title: str = ""
    description: str = ""
    fixed_files: tuple[str, ...] | None = None
    created_at: datetime | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise InvalidReportError("bug report id must be a nonempty string")
        if self.fixed_files is not None:
            files = tuple(dict.fromkeys(self.fixed_files))
            if not files:
                raise InvalidReportError(f"report {self.id!r}: fixed_files present but empty")
            object.__setattr__(self, "fixed_files", files)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "BugReport":
        if not isinstance(obj, Mapping):
            raise InvalidReportError("a bug report must be a JSON object")
        if "id" not in obj:
            raise InvalidReportError("bug report without an id")
        fixed = obj.get("fixed_files")
        if fixed is not None:
            if isinstance(fixed, str) or not isinstance(fixed, Sequence):
                raise InvalidReportError(f"report {obj['id']!r}: fixed_files must be an array")
            fixed = tuple(str(p) for p in fixed)
        created = obj.get("created_at")
        return cls(
            id=str(obj["id"]),
            title=str(obj.get("title") or ""),
            description=str(obj.get("description") or ""),
            fixed_files=fixed,
            created_at=parse_timestamp(created) if isinstance(created, str) else None,
        )

    def to_dict(self) -> dict:
        out = {"id": self.id, "title": self.title, "description": self.description}
        if self.fixed_files is not None:
            out["fixed_files"] = list(self.fixed_files)
        if self.created_at is not None:
            out["created_at"] = format_timestamp(self.created_at)
        return out


def parse_reports(lines: Iterable[str]) -> Iterator[BugReport]:
    """Parse JSON-lines bug reports; blank lines are skipped, unknown keys ignored."""
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidReportError(f"line {lineno}: {exc}") from exc
        yield BugReport.from_dict(obj)


def read_reports(path) -> list[BugReport]:
    with open(path, encoding="utf-8") as fh:
        return list(parse_reports(fh))


class LinkTable:
    """path -> ids of reports whose fix touched the path.

    The mapping is replaced wholesale on every write so that readers holding
    the old mapping are never disturbed.
    """

    def __init__(self, file_to_reports: Mapping[str, Iterable[str]] | None = None):
        self.file_to_reports: dict[str, frozenset[str]] = {
            p: frozenset(ids) for p, ids in (file_to_reports or {}).items() if ids
        }

    @classmethod
    def from_reports(cls, reports: Iterable[BugReport]) -> "LinkTable":
        inverse: dict[str, set[str]] = {}
        for r in reports:
            for p in r.fixed_files or ():
                inverse.setdefault(p, set()).add(r.id)
        return cls(inverse)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinkTable) and self.file_to_reports == other.file_to_reports

    def __len__(self) -> int:
        return len(self.file_to_reports)

    def reports_for(self, path: str) -> frozenset[str]:
        return self.file_to_reports.get(path, frozenset())

    def _with(self, report_id: str, add: Iterable[str] = (), remove: Iterable[str] = ()) -> None:
        table = dict(self.file_to_reports)
        for p in remove:
            ids = table.get(p, frozenset()) - {report_id}
            if ids:
                table[p] = ids
            else:
                table.pop(p, None)
        for p in add:
            table[p] = table.get(p, frozenset()) | {report_id}
        self.file_to_reports = table


class History:
    """Store of past fixed reports with an incremental report-corpus index."""

    def __init__(self):
        self.index = TermDocIndex()
        self.reports: dict[str, BugReport] = {}
        self.links = LinkTable()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self.reports)

    def add_fixed_report(self, report: BugReport) -> None:
        if not report.fixed_files:
            raise InvalidReportError(f"report {report.id!r} has no fixed_files")
        with self._lock:
            if report.id in self.reports:
                raise DuplicateReportError(f"report {report.id!r} already stored")
            counts = build_report_document(report)
            self.index.apply(ChangeSet(added=[(report.id, counts)]))
            self.reports[report.id] = report
            self.links._with(report.id, add=report.fixed_files)

    def add_many(self, reports: Iterable[BugReport]) -> None:
        """Add several reports in one index update; all or nothing."""
        reports = list(reports)
        with self._lock:
            ids = set()
            for r in reports:
                if not r.fixed_files:
                    raise InvalidReportError(f"report {r.id!r} has no fixed_files")
                if r.id in self.reports or r.id in ids:
                    raise DuplicateReportError(f"report {r.id!r} already stored")
                ids.add(r.id)
            docs = [(r.id, build_report_document(r)) for r in reports]
            self.index.apply(ChangeSet(added=docs))
            for r in reports:
                self.reports[r.id] = r
                self.links._with(r.id, add=r.fixed_files)

    def remove_report(self, report_id: str) -> None:
        with self._lock:
            report = self._get(report_id)
            self.index.apply(ChangeSet(deleted=[report_id]))
            del self.reports[report_id]
            self.links._with(report_id, remove=report.fixed_files)

    def relink_report(self, report_id: str, new_fixed_files: Sequence[str]) -> None:
        with self._lock:
            old = self._get(report_id)
            new = BugReport(old.id, old.title, old.description, tuple(new_fixed_files), old.created_at)
            if new.fixed_files == old.fixed_files:
                return
            self.reports[report_id] = new
            self.links._with(report_id, add=new.fixed_files, remove=old.fixed_files)

    def _get(self, report_id: str) -> BugReport:
        try:
            return self.reports[report_id]
        except KeyError:
            raise NotFoundError(f"no stored report {report_id!r}") from None

    def similarities(self, query: BugReport | TermCounts) -> dict[str, float]:
        """Cosine between ``query`` and every stored report, keyed by report id.

        The query is not added to the corpus; its out-of-vocabulary terms are
        dropped.
        """
        return self._similarities(self.snapshot()[0], query)

    def snapshot(self):
        """A consistent (report index view, link mapping) pair for readers."""
        with self._lock:
            return self.index.view(), self.links.file_to_reports

    @staticmethod
    def _similarities(view, query) -> dict[str, float]:
        if len(view) == 0:
            return {}
        counts = query if isinstance(query, TermCounts) else build_report_document(query)
        sims = view.cosines(view.vectorize(counts))
        return dict(zip(view.paths, sims.tolist()))

    def simi_score(self, query: BugReport | TermCounts, path: str) -> float:
        return float(self.simi_scores(query, [path])[0])

    def simi_scores(self, query: BugReport | TermCounts, paths: Sequence[str]) -> np.ndarray:
        view, links = self.snapshot()
        out = np.zeros(len(paths))
        if not links:
            return out
        sims = self._similarities(view, query)
        for i, p in enumerate(paths):
            ids = links.get(p)
            if ids:
                out[i] = math.fsum(sims[r] for r in ids) / len(ids)
        return out
