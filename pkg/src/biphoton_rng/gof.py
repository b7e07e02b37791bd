"""Goodness-of-fit checks for the two reference histogram shapes.

The dt histogram of a pulsed Poissonian source is geometric at pulse
granularity; binned with period-wide bins centered on integer multiples of
the period it coincides with a discretized exponential, which is what the
chi-square test below checks. The deltat histogram is compared against the
uniform law on the pulse window with a Kolmogorov-Smirnov test.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaincc

from .errors import DataError


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    dof: int
    n_bins: int
    test: str


def exponential_gof(values: np.ndarray, period_ps: float,
                    min_expected: float = 5.0) -> GofResult:
    """Chi-square test of dt values against Exp(1/mean) on period-wide bins.

    Bin k covers ((k - 1/2) T, (k + 1/2) T]; bins are merged from the tail
    until every expected count is at least ``min_expected``. One parameter
    (the rate) is estimated, so dof = bins - 2.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 100:
        raise DataError("need at least 100 intervals for the exponential check")
    lam = 1.0 / x.mean()
    t = float(period_ps)
    k_max = int(np.ceil(x.max() / t + 0.5)) + 1
    edges = (np.arange(k_max + 1) - 0.5) * t
    edges[0] = 0.0
    counts, _ = np.histogram(x, bins=edges)
    cdf = 1.0 - np.exp(-lam * edges)
    probs = np.diff(cdf)
    probs[-1] = 1.0 - cdf[-2]  # fold the open tail into the last bin

    n = x.size
    expected = n * probs
    # merge tail bins until the expectation is large enough
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, ex in zip(counts[::-1], expected[::-1]):
        acc_o += o
        acc_e += ex
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if exp:
            obs[-1] += acc_o
            exp[-1] += acc_e
        else:
            obs.append(acc_o)
            exp.append(acc_e)
    obs = np.array(obs[::-1])
    exp = np.array(exp[::-1])
    if obs.size < 3:
        raise DataError("too few populated bins for a chi-square test")
    chi2 = float((((obs - exp) ** 2) / exp).sum())
    dof = obs.size - 2
    return GofResult(chi2, float(gammaincc(dof / 2.0, chi2 / 2.0)), dof, obs.size, "chi2-exponential")


def uniform_gof(values: np.ndarray, low: float, high: float) -> GofResult:
    """Kolmogorov-Smirnov test against Uniform(low, high)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 100:
        raise DataError("need at least 100 values for the uniformity check")
    stat, p = stats.kstest(x, "uniform", args=(low, high - low))
    return GofResult(float(stat), float(p), 0, 0, "ks-uniform")
