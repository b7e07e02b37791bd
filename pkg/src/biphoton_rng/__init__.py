"""Simulate time-tagged biphoton coincidence runs and evaluate the
randomness of the series built from them."""

__version__ = "0.1.0"

from .quantum import (
    CalibrationResult,
    SettingsSet,
    StateModel,
    calibrate,
    chsh_from_counts,
    chsh_from_model,
    concurrence,
    correlation,
    correlation_from_counts,
    purity,
)
from .series import (
    BinarySeries,
    RealSeries,
    binarize,
    build_deltat,
    build_dt,
    intercalate_outcomes,
)
from .simulator import SimConfig, pulse_train, simulate_campaign, simulate_run
from .timetag import (
    CoincidenceEvent,
    Coincidences,
    RunMeta,
    TimeTagRecord,
    TimeTagStream,
    assign_pulses,
    find_coincidences,
    read_stream,
    run_statistics,
    stroboscope,
    write_stream,
)

__all__ = [
    "__version__",
    "CalibrationResult",
    "SettingsSet",
    "StateModel",
    "calibrate",
    "chsh_from_counts",
    "chsh_from_model",
    "concurrence",
    "correlation",
    "correlation_from_counts",
    "purity",
    "BinarySeries",
    "RealSeries",
    "binarize",
    "build_deltat",
    "build_dt",
    "intercalate_outcomes",
    "SimConfig",
    "pulse_train",
    "simulate_campaign",
    "simulate_run",
    "CoincidenceEvent",
    "Coincidences",
    "RunMeta",
    "TimeTagRecord",
    "TimeTagStream",
    "assign_pulses",
    "find_coincidences",
    "read_stream",
    "run_statistics",
    "stroboscope",
    "write_stream",
]
