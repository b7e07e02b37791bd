"""Statistical randomness indicators: complexity, Hurst, NIST subset, verdicts."""

from .complexity import (
    ComplexityResult,
    complexity_of,
    lz76_phrase_count,
    normalized_complexity,
)
from .hurst import HurstResult, expected_rescaled_range, hurst_exponent
from .nist import (
    DEFAULT_ALPHA,
    MIN_LENGTH,
    RESERVED_TESTS,
    TestOutcome,
    nist_battery,
)
from .verdict import SetVerdict, series_rejected_by_nist, set_verdict

__all__ = [
    "ComplexityResult",
    "complexity_of",
    "lz76_phrase_count",
    "normalized_complexity",
    "HurstResult",
    "expected_rescaled_range",
    "hurst_exponent",
    "DEFAULT_ALPHA",
    "MIN_LENGTH",
    "RESERVED_TESTS",
    "TestOutcome",
    "nist_battery",
    "SetVerdict",
    "series_rejected_by_nist",
    "set_verdict",
]
