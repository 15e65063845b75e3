"""Exception and warning types raised across the toolkit."""


class VerigaugeError(Exception):
    """Base class for all toolkit errors."""


class IoError(VerigaugeError, OSError):
    """An input or output file could not be read or written."""


class SchemaError(VerigaugeError, ValueError):
    pass


class FormatError(VerigaugeError, ValueError):
    pass


class DuplicateImage(VerigaugeError, ValueError):
    pass


class DimensionError(VerigaugeError, ValueError):
    pass


class NonFiniteValue(VerigaugeError, ValueError):
    pass


class ConflictingScore(VerigaugeError, ValueError):
    pass


class SelfPair(VerigaugeError, ValueError):
    pass


class UnknownAttribute(VerigaugeError, KeyError):
    pass


class ZeroNorm(VerigaugeError, ValueError):
    pass


class MissingEmbedding(VerigaugeError, KeyError):
    def __init__(self, image_id):
        super().__init__(image_id)
        self.image_id = image_id


class MissingScore(VerigaugeError, KeyError):
    def __init__(self, pair):
        super().__init__(pair)
        self.pair = pair


class EmptyDistribution(VerigaugeError, ValueError):
    pass


class UnresolvableFar(VerigaugeError, ValueError):
    """A FAR target cannot be met by any finite threshold on this sample."""


class TooFewPairs(VerigaugeError, ValueError):
    pass


class DomainError(VerigaugeError, ValueError):
    pass


class ValidationFailed(VerigaugeError):
    """Raised when a dataset carries validation errors; the report is attached."""

    def __init__(self, report, stage="validate"):
        codes = ", ".join(sorted({f.code for f in report.errors}))
        super().__init__(f"{stage}: dataset failed validation ({codes})")
        self.report = report
        self.stage = stage


class PipelineError(VerigaugeError):
    """Wraps a module error with the audit stage it came from."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class UnresolvableFarWarning(UserWarning):
    pass
