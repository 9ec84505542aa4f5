"""Execution harness for emitted training scripts: run them on a real ML
runtime, quantize the trained model, and measure metric and artifact
size."""

from .errors import RunnerError, RuntimeFailure, TimeoutExceeded
from .runner import RunResult, compare_profile, execute_script

__version__ = "0.1.0"

__all__ = [
    "RunResult",
    "RunnerError",
    "RuntimeFailure",
    "TimeoutExceeded",
    "compare_profile",
    "execute_script",
    "__version__",
]
