"""Exception hierarchy shared across the package.

Every error raised on a documented contract derives from BioaceError so that
the service layer and CLI can map failures to exit codes uniformly: gateway
failures (``GatewayError``) map to exit code 3, everything else to 2.
"""


class BioaceError(Exception):
    """Base class for all package errors."""


# -- corpus / data ----------------------------------------------------------


class MalformedRecord(BioaceError):
    """A JSONL record violates its schema (bad field, bad label, bad JSON)."""

    def __init__(self, message, path=None, line=None, field=None):
        detail = message
        if path is not None:
            loc = f"{path}:{line}" if line is not None else str(path)
            detail = f"{loc}: {message}"
        if field is not None:
            detail = f"{detail} (field: {field})"
        super().__init__(detail)
        self.path = path
        self.line = line
        self.field = field


class DanglingReference(BioaceError):
    """A record references an id that does not exist in the corpus."""


class DuplicateId(BioaceError):
    """Two records claim the same unique identifier."""


class EmptyAnswer(BioaceError):
    """An operation that needs at least one answer sentence received none."""


class MissingGold(BioaceError):
    """Required expert annotations are absent from the corpus."""


# -- configuration ----------------------------------------------------------


class ConfigError(BioaceError):
    """The endpoint configuration is missing or inconsistent."""


# -- model gateway ----------------------------------------------------------


class GatewayError(BioaceError):
    """Base class for failures while talking to a model endpoint."""


class EndpointUnavailable(GatewayError):
    """The endpoint could not be reached after the configured retries."""


class MalformedResponse(GatewayError):
    """The endpoint answered but the payload was not usable."""


class DimensionMismatch(GatewayError):
    """An embedding endpoint returned vectors of inconsistent dimension."""


class UnparsableLabel(GatewayError):
    """Constrained generation produced no allowed label, even after retry."""

    def __init__(self, raw_output, allowed, context=None):
        message = f"could not parse {raw_output!r} as one of {sorted(allowed)}"
        if context:
            message = f"{context}: {message}"
        super().__init__(message)
        self.raw_output = raw_output
        self.allowed = tuple(allowed)
        self.context = context


class EmptyInput(BioaceError):
    """An operation received an empty input where content is required."""


# -- retrieval --------------------------------------------------------------


class EmptyCorpus(BioaceError):
    """Attempted to build an index over zero documents."""


# -- nugget evaluation ------------------------------------------------------


class EmptyNuggetList(BioaceError):
    """No nuggets were available (or parseable) where at least one is needed."""


class ZeroVector(BioaceError):
    """Cosine similarity is undefined against an all-zero embedding."""


class TooFewSamples(BioaceError):
    """Not enough similarity values to fit the mixture model."""


class DegenerateModel(BioaceError):
    """The fitted mixture collapsed to one component; use fallback alignment."""


class EmptyTrainSet(BioaceError):
    """Threshold tuning requires at least one training instance."""


# -- correctness ------------------------------------------------------------


class InsufficientQuestions(BioaceError):
    """Negative sampling needs at least two annotated questions."""


class NoNegativeAvailable(BioaceError):
    """Every candidate fragment overlaps an annotated span."""


# -- citations --------------------------------------------------------------


class EmptyDocument(BioaceError):
    """The document has no sentences to select from."""


class DegenerateLabels(BioaceError):
    """Threshold fitting needs at least one positive and one negative label."""


# -- statistics -------------------------------------------------------------


class EmptyMatrix(BioaceError):
    """The confusion matrix holds no observations."""


class DegenerateInput(BioaceError):
    """A correlation is undefined for this input (constant or too short)."""


class KeyMismatch(BioaceError):
    """Two keyed collections were expected to share exactly the same keys."""


class TooFewSystems(BioaceError):
    """Ranking requires at least two systems."""


class IoError(BioaceError):
    """A report file could not be written."""
