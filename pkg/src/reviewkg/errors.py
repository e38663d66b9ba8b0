"""Exception types shared across the package.

Everything user-facing derives from ReviewKgError so the CLI can map the
whole family to a single "bad input" exit code.
"""


class ReviewKgError(Exception):
    """Base class for all errors raised by reviewkg."""


class ParseError(ReviewKgError):
    """A file or record could not be parsed; carries the 1-based line number."""

    def __init__(self, line: int, cause: str):
        super().__init__(f"line {line}: {cause}")
        self.line = line
        self.cause = cause


class DuplicateId(ReviewKgError):
    pass


class EmptyCorpus(ReviewKgError):
    pass


class UnknownConcernName(ReviewKgError):
    """A label is not part of the active concern vocabulary."""


class EmptyTrainingSet(ReviewKgError):
    pass


class MissingPos(ReviewKgError):
    pass


class MissingChunk(ReviewKgError):
    pass


class OverlapError(ReviewKgError):
    pass


class OutOfBounds(ReviewKgError):
    pass


class InvalidTag(ReviewKgError):
    def __init__(self, line: int, tag: str):
        super().__init__(f"line {line}: invalid tag {tag!r}")
        self.line = line
        self.tag = tag


class LengthMismatch(ReviewKgError):
    pass


class InvalidGoldTags(ReviewKgError):
    pass


class MissingAnnotation(ReviewKgError):
    pass


class UnknownRelation(ReviewKgError):
    pass


class DanglingEndpoint(ReviewKgError):
    pass


class EmptyAfterNormalization(ReviewKgError):
    pass


class SchemaViolation(ReviewKgError):
    pass


class SchemaMismatch(ReviewKgError):
    pass


class IntegrityError(ReviewKgError):
    pass


class UnknownApp(ReviewKgError):
    pass


class UnknownConcern(ReviewKgError):
    pass
