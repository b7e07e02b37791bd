"""Set-level verdict rules.

A series is rejected by the battery if at least one *applicable* test fails.
A set of statistic values is called random when the ideal value (1 for
complexity, 1/2 for the Hurst exponent) lies within one sample standard
deviation of the set mean; this is the literal rule, and callers are expected
to flag mean-threshold complexity sets where it conflicts with the
median-threshold verdict (see pipeline.aggregate_tables).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DataError
from .nist import TestOutcome


def series_rejected_by_nist(outcomes: Sequence[TestOutcome]) -> bool:
    """True iff at least one applicable test failed."""
    return any(o.applicable and o.passed is False for o in outcomes)


@dataclass(frozen=True)
class SetVerdict:
    mean: float
    dispersion: float
    ideal: float
    random: bool
    n: int


def set_verdict(statistics: Sequence[float], ideal: float) -> SetVerdict:
    """Mean +/- sample standard deviation; random iff |mean - ideal| <= dispersion."""
    values = np.asarray([s for s in statistics if s is not None], dtype=np.float64)
    if values.size == 0:
        raise DataError("no statistics to aggregate")
    mean = float(values.mean())
    dispersion = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return SetVerdict(mean, dispersion, ideal,
                      bool(abs(mean - ideal) <= dispersion), int(values.size))
