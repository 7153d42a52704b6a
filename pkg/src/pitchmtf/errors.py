"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it so that
scripts can branch on the failure kind without parsing messages.
"""


class BenchError(Exception):
    category = "error"


class ParameterError(BenchError, ValueError):
    category = "parameter"


class GenerationError(BenchError):
    """A unit signal failed the compactness check.

    ``energy_ratio`` is the achieved in-interval energy fraction; callers may
    retry with another seed.
    """

    category = "generation-failure"

    def __init__(self, message, energy_ratio):
        super().__init__(message)
        self.energy_ratio = energy_ratio


class MeasurementFailed(BenchError):
    category = "measurement-failed"

    def __init__(self, message, missing_fraction=None):
        super().__init__(message)
        self.missing_fraction = missing_fraction


class ConfigurationError(BenchError):
    category = "configuration"


class IndexUndefined(BenchError):
    category = "index-undefined"


class ExternalFailure(BenchError):
    category = "external-failure"

    def __init__(self, message, diagnostics=""):
        super().__init__(message)
        self.diagnostics = diagnostics


class ExternalTimeout(ExternalFailure):
    category = "timeout"


class FormatError(BenchError):
    category = "format"

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class NothingToReport(BenchError):
    category = "nothing-to-report"


class QuotaExceeded(BenchError):
    """More sweep targets failed than the configured quota allows."""

    category = "quota-exceeded"
