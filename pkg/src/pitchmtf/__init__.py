"""Modulation transfer measurement of pitch extractors with CAPRICEP test signals."""

from . import capricep, kernels, metrics, respan, signalgen
from .capricep import CapricepSet, build_capricep_set, generate_unit_capricep
from .config import BenchConfig
from .errors import (BenchError, ConfigurationError, ExternalFailure, ExternalTimeout,
                     FormatError, GenerationError, IndexUndefined, MeasurementFailed,
                     NothingToReport, ParameterError, QuotaExceeded)
from .metrics import PerformanceIndices
from .respan import FoTrajectory, TransferAnalysis, analyze, compute_responses
from .signalgen import TestSignal, make_modulation, make_spec, synthesize, target_grid

__version__ = "0.1.0"
