"""Exception taxonomy shared across the package."""


class OccamError(Exception):
    """Base class for all package-specific errors."""


class RejectedConceptError(OccamError, ValueError):
    """A proposed concept normalizes to the empty string."""


class GroundingFailure(OccamError):
    """The grounding operator could not produce a valid mask for a concept.

    This is control flow, not a fault: the engine discards the concept.
    """


class TransportError(OccamError):
    """A backend call failed at the transport level (timeout, dead process,
    connection refused). Retriable."""


class ProtocolError(OccamError):
    """A backend replied with something that violates the wire contract
    (malformed body, score vector not summing to 1, missing fixture).
    Never retried."""


class ClassificationError(OccamError):
    """The rule-based synthetic classifier was fed pixels it cannot be
    exact about (unknown color, mangled shape)."""


class GenerationError(OccamError):
    """Scene generation could not place the requested objects."""


class UndefinedAggregateError(OccamError, ValueError):
    """An aggregate was requested over an empty record list."""


class UndefinedScoreError(OccamError, ValueError):
    """A score is undefined for the given input (e.g. degenerate
    baselines, empty ground-truth mask)."""


class IngestionError(OccamError, ValueError):
    """Graph construction rejected its input (duplicate evidence id)."""


class TurtleParseError(OccamError, ValueError):
    """The Turtle document is syntactically malformed."""


class TurtleImportError(OccamError, ValueError):
    """The Turtle document parsed but uses unknown vocabulary or cannot be
    mapped back onto a graph. Carries the offending triples."""

    def __init__(self, message, triples=()):
        super().__init__(message)
        self.triples = list(triples)
