"""Failure taxonomy for script execution."""


class RunnerError(Exception):
    """Base class for every error raised by this package."""


class RuntimeFailure(RunnerError):
    """The training script exited with a nonzero status or produced no
    usable metric; the message carries the captured stderr."""


class TimeoutExceeded(RunnerError):
    """The training script ran past the wall-clock budget and was killed."""
