"""Combine text similarity, file length and fix history into one relevance score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import EmptyCorpusError, ModelCorruptError
from .history import BugReport, History
from .preprocess import TermCounts, build_report_document
from .vsm_index import TermDocIndex

# Scores closer than 1e-10 count as ties and fall back to path order, so
# last-bit differences between an incrementally maintained model and a
# rebuilt one can never reorder the output.
TIE_DECIMALS = 10


@dataclass(frozen=True)
class RankParams:
    alpha: float = 0.25
    top_k: int = 10

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0) or math.isnan(self.alpha):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ValueError(f"top_k must be a positive integer, got {self.top_k}")


class RankedEntry(NamedTuple):
    path: str
    relevance: float
    vsm_component: float
    simi_component: float


class RankedList(tuple):
    """Ranked files, best first; ties are broken by ascending path."""

    def paths(self) -> list[str]:
        return [e.path for e in self]

    def records(self) -> Iterator[dict]:
        for i, e in enumerate(self, 1):
            yield {
                "rank": i,
                "path": e.path,
                "relevance": e.relevance,
                "vsm_component": e.vsm_component,
                "simi_component": e.simi_component,
            }


def length_weight(total_terms: int, x_min: int, x_max: int) -> float:
    """Logistic of the min-max normalized document length.

    A corpus where every document has the same length normalizes to 0.5.
    """
    if not x_min <= total_terms <= x_max:
        raise ModelCorruptError(f"length {total_terms} outside corpus range [{x_min}, {x_max}]")
    if x_max == x_min:
        n = 0.5
    else:
        n = (total_terms - x_min) / (x_max - x_min)
    return 1.0 / (1.0 + math.exp(-n))


def relevance(vsm_score: float, simi_score: float, g: float, alpha: float) -> float:
    return alpha * g * vsm_score + (1 - alpha) * simi_score


def _length_weights(total_terms: np.ndarray, x_min: int, x_max: int) -> np.ndarray:
    memo = {int(t): length_weight(int(t), x_min, x_max) for t in np.unique(total_terms)}
    return np.array([memo[int(t)] for t in total_terms])


def rank(
    code: TermDocIndex,
    history: History | None,
    report: BugReport | TermCounts,
    params: RankParams = RankParams(),
    *,
    full: bool = False,
) -> RankedList:
    """Rank every live code file against ``report``.

    Returns the best ``params.top_k`` files, or all of them when ``full``.
    """
    view = code.view()
    if len(view) == 0:
        raise EmptyCorpusError("the code model has no documents")
    query = report if isinstance(report, TermCounts) else build_report_document(report)

    vsm = view.cosines(view.vectorize(query))
    g = _length_weights(view.total_terms, view.x_min, view.x_max)
    if history is not None:
        simi = history.simi_scores(query, view.paths)
    else:
        simi = np.zeros(len(view))
    alpha = params.alpha
    scores = alpha * g * vsm + (1 - alpha) * simi

    # view.paths is sorted, so a stable sort on the score keeps path order in ties
    order = np.argsort(-np.round(scores, TIE_DECIMALS), kind="stable")
    if not full:
        order = order[: params.top_k]
    return RankedList(
        RankedEntry(view.paths[i], float(scores[i]), float(vsm[i]), float(simi[i])) for i in order
    )
