"""Exception hierarchy shared across the package."""


class IncBLError(Exception):
    """Base class for all errors raised by incbl."""


class UnsupportedFileError(IncBLError):
    """A file has no recognized source extension and is excluded from the corpus."""


class EmptyDocumentError(IncBLError, ValueError):
    """A bug report has neither a title nor a description."""


class ModelCorruptError(IncBLError):
    """An internal consistency check failed (e.g. a document frequency went negative)."""


class InvalidCorpusError(IncBLError, ValueError):
    """A corpus-size change would leave fewer than one document."""


class InvalidChangeSetError(IncBLError, ValueError):
    """A change set violated its preconditions; nothing was applied.

    ``problems`` maps each offending path to a short reason.
    """

    def __init__(self, problems):
        self.problems = dict(problems)
        detail = "; ".join(f"{p}: {why}" for p, why in sorted(self.problems.items()))
        super().__init__(f"change set rejected ({detail})")


class NotFoundError(IncBLError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class DuplicateReportError(IncBLError, ValueError):
    pass


class InvalidReportError(IncBLError, ValueError):
    pass


class EmptyCorpusError(IncBLError):
    """Ranking was requested against a code model with no documents."""


class UnjudgeableError(IncBLError, ValueError):
    """An evaluation case (or the whole suite) has no usable ground truth."""


class RankingMismatchError(IncBLError):
    """The incremental and full-recompute paths disagreed during a benchmark."""


class SnapshotError(IncBLError):
    pass


class ChecksumError(SnapshotError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class IncompatibleSnapshotError(SnapshotError):
    """The snapshot was built with different stopword/keyword lists; rebuild required."""
