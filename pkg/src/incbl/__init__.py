"""Incremental information-retrieval bug localization.

Source files and past fixed bug reports are kept in tf-idf vector space
models that are updated in place as the repository and report history
change; new bug reports are ranked against them without recomputation.
"""

from .errors import IncBLError
from .history import BugReport, History
from .ingest import index_repo, load_snapshot, save_snapshot, scan_repo, update_repo
from .localizer import Localizer
from .preprocess import TermCounts, build_code_document, build_report_document
from .ranker import RankedList, RankParams, rank
from .vsm_index import ChangeSet, TermDocIndex, UpdateReport

__all__ = [
    "BugReport",
    "ChangeSet",
    "History",
    "IncBLError",
    "Localizer",
    "RankParams",
    "RankedList",
    "TermCounts",
    "TermDocIndex",
    "UpdateReport",
    "build_code_document",
    "build_report_document",
    "index_repo",
    "load_snapshot",
    "rank",
    "save_snapshot",
    "scan_repo",
    "update_repo",
]

__version__ = "0.1.0"
