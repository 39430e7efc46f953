"""Exception hierarchy shared across the package."""


class LabHarmonyError(Exception):
    """Base class for all package-specific errors."""


class ParseError(LabHarmonyError):
    """A structured input file could not be parsed."""


class OverlapError(LabHarmonyError):
    """A term appears in more than one synonym group of the same category."""


class DuplicateIdError(LabHarmonyError):
    """Two reference records share the same id."""


class UnknownField(LabHarmonyError):
    """Field id is not one of test/sample/unit."""


class UnknownRecord(LabHarmonyError):
    """Record id is not present in the index."""


class DimensionMismatch(LabHarmonyError):
    """Embedding vectors of different dimensions were combined."""


class IndexMismatch(LabHarmonyError):
    """Lexical index and vector store cover different record sets."""


class EmptyCandidateList(LabHarmonyError):
    """An operation requiring at least one candidate got none."""


class UnfittedSurrogate(LabHarmonyError):
    """The GP surrogate has no observations yet."""


class ObjectiveFailure(LabHarmonyError):
    """The tuning objective raised; carries the offending parameter vector."""

    def __init__(self, theta, cause):
        super().__init__(f"objective failed at theta={theta}: {cause}")
        self.theta = theta
        self.cause = cause


class InsufficientPool(LabHarmonyError):
    """The reference pool is too small or uniform to corrupt a triad."""


class LengthMismatch(LabHarmonyError):
    """Prediction and label sequences differ in length."""


class EmptyDataset(LabHarmonyError):
    """Training was attempted on an empty pair stream."""


class DivergenceError(LabHarmonyError):
    """Training loss became non-finite."""


class MissingGold(LabHarmonyError):
    """A query in a run has no gold label."""


class FileError(LabHarmonyError):
    """A referenced data file is missing or unreadable."""


class ValidationError(LabHarmonyError):
    """A domain object violates one of its invariants."""
