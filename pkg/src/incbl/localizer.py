"""The complete bug localization model: code index, report history, parameters."""

from __future__ import annotations

import threading
from typing import Iterable, Mapping

from .history import BugReport, History
from .preprocess import TermCounts
from .ranker import RankedList, RankParams, rank
from .vsm_index import ChangeSet, TermDocIndex, UpdateReport


class Localizer:
    """Code-file index plus fixed-report history.

    All writes go through one lock; :meth:`localize` only reads published
    views and can run from any number of threads.
    """

    def __init__(
        self,
        code: TermDocIndex | None = None,
        history: History | None = None,
        params: RankParams | None = None,
    ):
        self.code = code if code is not None else TermDocIndex()
        self.history = history if history is not None else History()
        self.params = params or RankParams()
        self._write_lock = threading.RLock()

    @classmethod
    def from_documents(
        cls,
        documents: Mapping[str, TermCounts],
        reports: Iterable[BugReport] = (),
        params: RankParams | None = None,
        fingerprints: Mapping | None = None,
    ) -> "Localizer":
        loc = cls(TermDocIndex.rebuild(documents, fingerprints), params=params)
        loc.history.add_many(reports)
        return loc

    @property
    def M(self) -> int:
        return self.code.M

    def apply(self, changes: ChangeSet) -> UpdateReport:
        with self._write_lock:
            return self.code.apply(changes)

    def add_report(self, report: BugReport) -> None:
        with self._write_lock:
            self.history.add_fixed_report(report)

    def add_reports(self, reports: Iterable[BugReport]) -> None:
        with self._write_lock:
            self.history.add_many(reports)

    def remove_report(self, report_id: str) -> None:
        with self._write_lock:
            self.history.remove_report(report_id)

    def relink_report(self, report_id: str, fixed_files) -> None:
        with self._write_lock:
            self.history.relink_report(report_id, fixed_files)

    def localize(
        self, report: BugReport | TermCounts, params: RankParams | None = None, *, full: bool = False
    ) -> RankedList:
        return rank(self.code, self.history, report, params or self.params, full=full)
