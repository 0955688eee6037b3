"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, StepError -> 2.
Partial inference failures are reported through the run summary rather
than an exception so that successful rows are preserved on disk.
"""


class RagkitError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RagkitError):
    """Invalid configuration, unparseable input, or failed validation."""


class StepError(RagkitError):
    """A pipeline step failed at runtime."""

    def __init__(self, message: str, *, step_index: int | None = None, target: str | None = None):
        super().__init__(message)
        self.step_index = step_index
        self.target = target


class UnknownDatasetError(StepError):
    """A step referenced a dataset name that is not in the registry."""


class EndpointError(RagkitError):
    """A remote endpoint kept failing after retries, or returned garbage."""
