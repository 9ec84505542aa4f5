"""naquery: query-driven design of tiny time-series models.

A natural-language task description plus a time-series dataset go in; a
hardware-feasible architecture, its complexity profile, and a ready-to-run
training script come out.
"""

__version__ = "0.1.0"

from .archir import ArchitectureIR, LayerSpec, SearchSpace
from .dataset import (RepresentativeSeries, TimeSeriesDataset, load_dataset,
                      representative_series)
from .profiler import (ConstraintVerdict, DeviceSpec, ProfileReport,
                       check_constraints, lookup_device, profile)

__all__ = [
    "__version__",
    "ArchitectureIR", "LayerSpec", "SearchSpace",
    "RepresentativeSeries", "TimeSeriesDataset", "load_dataset",
    "representative_series",
    "ConstraintVerdict", "DeviceSpec", "ProfileReport", "check_constraints",
    "lookup_device", "profile",
]
