"""Augmented Dickey-Fuller and KPSS tests with 0/1 indicator reporting.

Conventions (both at the 5% level, constant-only deterministics by default):

* ADF: indicator 1 means the unit-root null is rejected (statistic below the
  5% critical value), 0 means a unit root cannot be discarded.
* KPSS: indicator 1 means stationarity is rejected (statistic above the 5%
  critical value), 0 means stationarity cannot be rejected.

ADF critical values come from the MacKinnon (2010) response surfaces for the
constant and constant+trend cases; KPSS critical values are the asymptotic
table of Kwiatkowski, Phillips, Schmidt and Shin (1992), Table 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError

MIN_LENGTH = 50

# MacKinnon (2010) response-surface coefficients: cv = b0 + b1/T + b2/T^2 + b3/T^3
_ADF_SURFACE = {
    # constant only
    False: {
        1: (-3.43035, -6.5393, -16.786, -79.433),
        5: (-2.86154, -2.8903, -4.234, -40.040),
        10: (-2.56677, -1.5384, -2.809, 0.0),
    },
    # constant and linear trend
    True: {
        1: (-3.95877, -9.0531, -28.428, -134.155),
        5: (-3.41049, -4.3904, -9.036, -45.374),
        10: (-3.12705, -2.5856, -3.925, -22.380),
    },
}

# KPSS asymptotic critical values, level ("c") and trend ("ct") cases
_KPSS_CRIT = {
    False: {10: 0.347, 5: 0.463, 2.5: 0.574, 1: 0.739},
    True: {10: 0.119, 5: 0.146, 2.5: 0.176, 1: 0.216},
}


@dataclass(frozen=True)
class StationarityOutcome:
    test: str                      # "ADF" or "KPSS"
    statistic: float
    lag_or_bandwidth: int
    indicator: int                 # per-test 0/1 convention above
    critical_values: dict[float, float]
    trend: bool
    n_obs: int


def adf_critical_values(n_obs: int, trend: bool = False) -> dict[float, float]:
    out = {}
    for level, (b0, b1, b2, b3) in _ADF_SURFACE[trend].items():
        out[float(level)] = b0 + b1 / n_obs + b2 / n_obs ** 2 + b3 / n_obs ** 3
    return out


def default_adf_max_lag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def _ols(design: np.ndarray, y: np.ndarray):
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise NumericError("singular ADF regression (constant or collinear series?)")
    resid = y - design @ coef
    return coef, resid


def adf_test(values, max_lag: int | None = None, trend: bool = False) -> StationarityOutcome:
    """ADF regression dy_t = a (+ b t) + g y_{t-1} + sum phi_i dy_{t-i} + e.

    The lag order is chosen by AIC over 0..max_lag on a common sample, then
    the final regression is refit on the sample the chosen lag allows. The
    statistic is the t-ratio of g; indicator = 1 iff it is below the 5%
    critical value.
    """
    y = np.ascontiguousarray(values, dtype=np.float64)
    n = y.size
    if n < MIN_LENGTH:
        raise DataError(f"ADF needs at least {MIN_LENGTH} observations, got {n}")
    spread = y.std()
    if spread == 0:
        raise NumericError("ADF undefined for a constant series")
    y = (y - y.mean()) / spread  # t-ratios are affine-invariant; scale for conditioning

    if max_lag is None:
        max_lag = default_adf_max_lag(n)
    ntrend = 2 if trend else 1
    max_lag = min(max_lag, (n - 1) // 2 - ntrend - 1)
    if max_lag < 0:
        raise DataError("series too short for the requested deterministics")

    dy = np.diff(y)

    def build(p: int):
        """Design [const(, t), y_{t-1}, dy_{t-1..p}] on the p-trimmed sample."""
        rows = dy.size - p
        cols = [np.ones(rows)]
        if trend:
            cols.append(np.arange(rows, dtype=np.float64))
        cols.append(y[p:-1])
        for i in range(1, p + 1):
            cols.append(dy[p - i: dy.size - i])
        return np.column_stack(cols), dy[p:]

    # AIC lag choice on the max_lag-trimmed common sample; nested submodels
    # share one Gram matrix, so each candidate costs a small triangular solve
    design_full, target = build(max_lag)
    rows = target.size
    base = ntrend + 1  # deterministics + level term
    gram = design_full.T @ design_full
    moment = design_full.T @ target
    yty = float(target @ target)
    best_lag, best_aic = 0, np.inf
    for p in range(0, max_lag + 1):
        k = base + p
        try:
            coef = np.linalg.solve(gram[:k, :k], moment[:k])
        except np.linalg.LinAlgError:
            raise NumericError("singular ADF regression (constant or collinear series?)") from None
        ssr = yty - float(moment[:k] @ coef)
        if ssr <= 0:
            raise NumericError("degenerate ADF regression (zero residual variance)")
        aic = rows * math.log(ssr / rows) + 2.0 * k
        if aic < best_aic:
            best_aic, best_lag = aic, p

    design, target = build(best_lag)
    coef, resid = _ols(design, target)
    dof = target.size - design.shape[1]
    if dof <= 0:
        raise NumericError("no degrees of freedom left in ADF regression")
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(design.T @ design)
    level_col = ntrend  # position of y_{t-1}
    se = math.sqrt(sigma2 * xtx_inv[level_col, level_col])
    if se == 0:
        raise NumericError("zero standard error in ADF regression")
    stat = float(coef[level_col] / se)

    crit = adf_critical_values(target.size, trend)
    return StationarityOutcome(
        test="ADF",
        statistic=stat,
        lag_or_bandwidth=best_lag,
        indicator=int(stat < crit[5.0]),
        critical_values=crit,
        trend=trend,
        n_obs=int(target.size),
    )


def default_kpss_bandwidth(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_test(values, bandwidth: int | None = None, trend: bool = False) -> StationarityOutcome:
    """KPSS statistic from the partial-sum process of demeaned (or detrended)
    residuals, with Bartlett-kernel long-run variance; indicator = 1 iff the
    statistic exceeds the 5% critical value."""
    y = np.ascontiguousarray(values, dtype=np.float64)
    n = y.size
    if n < MIN_LENGTH:
        raise DataError(f"KPSS needs at least {MIN_LENGTH} observations, got {n}")
    if bandwidth is None:
        bandwidth = default_kpss_bandwidth(n)
    if bandwidth < 0 or bandwidth >= n:
        raise DataError("bandwidth must lie in [0, n)")

    if trend:
        t = np.arange(n, dtype=np.float64)
        design = np.column_stack([np.ones(n), t])
        coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < 2:
            raise NumericError("singular KPSS trend regression")
        resid = y - design @ coef
    else:
        resid = y - y.mean()

    lrv = float(resid @ resid) / n
    for h in range(1, bandwidth + 1):
        gamma = float(resid[h:] @ resid[:-h]) / n
        lrv += 2.0 * (1.0 - h / (bandwidth + 1.0)) * gamma
    if lrv <= 0:
        raise NumericError("non-positive long-run variance in KPSS")

    s = np.cumsum(resid)
    stat = float((s @ s) / (n * n * lrv))
    crit = {float(k): v for k, v in _KPSS_CRIT[trend].items()}
    return StationarityOutcome(
        test="KPSS",
        statistic=stat,
        lag_or_bandwidth=int(bandwidth),
        indicator=int(stat > crit[5.0]),
        critical_values=crit,
        trend=trend,
        n_obs=n,
    )
