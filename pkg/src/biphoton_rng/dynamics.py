"""Nonlinear time-series analysis: delay choice, Takens embedding,
false-nearest-neighbors dimension and the largest Lyapunov exponent.

Neighbor searches use exact k-d trees (scipy.spatial.cKDTree); when a series
is longer than ``max_points`` the *reference* points are an even subsample
but candidate neighbors still come from the full embedding, so the search
stays exact. Temporal neighbors within the Theiler window (delay * dimension
by default) are excluded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, NumericError

FNN_RATIO_TOL = 15.0
FNN_ABS_TOL = 2.0
FNN_THRESHOLD = 0.01
DEFAULT_D_MAX = 12


@dataclass(frozen=True)
class DelayResult:
    delay: int
    method: str  # "1/e", "local_min" or "fallback"
    autocorrelation: np.ndarray

    def __int__(self) -> int:
        return self.delay


def autocorrelation(values: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased-normalization autocorrelation for lags 0..max_lag (FFT-based)."""
    x = np.asarray(values, dtype=np.float64)
    x = x - x.mean()
    n = x.size
    size = int(2 ** np.ceil(np.log2(2 * n - 1)))
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    if acov[0] <= 0:
        raise DataError("autocorrelation undefined for a constant series")
    return acov / acov[0]


def choose_delay(values, max_lag: int | None = None) -> DelayResult:
    """Smallest lag with autocorrelation below 1/e; falls back to the first
    local minimum, then to 1."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 1000:
        raise DataError(f"need at least 1000 samples to pick a delay, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("delay undefined for non-finite values")
    if np.ptp(x) == 0:
        raise DataError("delay undefined for a constant series")
    if max_lag is None:
        max_lag = min(x.size // 10, 2000)
    acf = autocorrelation(x, max_lag)
    below = np.flatnonzero(acf[1:] < 1.0 / np.e)
    if below.size:
        return DelayResult(int(below[0]) + 1, "1/e", acf)
    interior = np.flatnonzero((acf[1:-1] < acf[:-2]) & (acf[1:-1] < acf[2:]))
    if interior.size:
        return DelayResult(int(interior[0]) + 1, "local_min", acf)
    return DelayResult(1, "fallback", acf)


def embed(values: np.ndarray, dim: int, delay: int) -> np.ndarray:
    """Delay embedding: row i = (x_i, x_{i+tau}, ..., x_{i+(dim-1) tau})."""
    x = np.asarray(values, dtype=np.float64)
    m = x.size - (dim - 1) * delay
    if m < 2:
        raise DataError("series too short for this embedding")
    return np.lib.stride_tricks.sliding_window_view(x, (dim - 1) * delay + 1)[:m, ::delay]


@dataclass(frozen=True)
class EmbeddingResult:
    delay: int
    fnn_fraction: dict[int, float]
    d_e: int | None
    compact_object_found: bool
    n_reference_points: int
    threshold: float = FNN_THRESHOLD


#: above this embedding dimension k-d tree queries degrade towards brute
#: force, so the search switches to an exact chunked-BLAS scan
_TREE_MAX_DIM = 6


def _tree_neighbors(points: np.ndarray, refs: np.ndarray,
                    theiler: int) -> tuple[np.ndarray, np.ndarray]:
    n = points.shape[0]
    tree = cKDTree(points)
    nn_idx = np.full(refs.size, -1, dtype=np.int64)
    nn_dist = np.full(refs.size, np.inf)
    unresolved = np.arange(refs.size)
    k = min(theiler * 2 + 4, n)
    while unresolved.size:
        dist, idx = tree.query(points[refs[unresolved]], k=k, workers=-1)
        if k == 1:
            dist, idx = dist[:, None], idx[:, None]
        time_sep = np.abs(idx - refs[unresolved][:, None])
        ok = (time_sep > theiler) & np.isfinite(dist)
        found = ok.any(axis=1)
        first = np.argmax(ok, axis=1)
        rows = unresolved[found]
        nn_idx[rows] = idx[found, first[found]]
        nn_dist[rows] = dist[found, first[found]]
        unresolved = unresolved[~found]
        if k >= n:
            break
        k = min(k * 4, n)
    return nn_idx, nn_dist


def _brute_neighbors(points: np.ndarray, refs: np.ndarray,
                     theiler: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest-neighbor scan via ||a-b||^2 = |a|^2 + |b|^2 - 2 a.b."""
    m = points.shape[0]
    pts_t = np.ascontiguousarray(points.T)
    norms = (points ** 2).sum(axis=1)
    nn_idx = np.full(refs.size, -1, dtype=np.int64)
    nn_dist = np.full(refs.size, np.inf)
    chunk = min(refs.size, max(16, int(1.2e7 // max(m, 1))))
    buf = np.empty((chunk, m))
    for start in range(0, refs.size, chunk):
        r = refs[start: start + chunk]
        d2 = buf[: r.size]
        np.dot(points[r], pts_t, out=d2)
        d2 *= -2.0
        d2 += norms[None, :]
        d2 += norms[r][:, None]
        for row, ri in enumerate(r):
            lo = max(0, int(ri) - theiler)
            hi = min(m, int(ri) + theiler + 1)
            d2[row, lo:hi] = np.inf
        best = np.argmin(d2, axis=1)
        dist2 = d2[np.arange(r.size), best]
        good = np.isfinite(dist2)
        nn_idx[start: start + chunk][good] = best[good]
        nn_dist[start: start + chunk][good] = np.sqrt(np.maximum(dist2[good], 0.0))
    return nn_idx, nn_dist


def _valid_neighbors(points: np.ndarray, refs: np.ndarray,
                     theiler: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest neighbor of each reference point outside the Theiler window."""
    if points.shape[1] <= _TREE_MAX_DIM:
        return _tree_neighbors(points, refs, theiler)
    return _brute_neighbors(points, refs, theiler)


def fnn_dimension(values, delay: int, d_max: int = DEFAULT_D_MAX, *,
                  ratio_tol: float = FNN_RATIO_TOL, abs_tol: float = FNN_ABS_TOL,
                  threshold: float = FNN_THRESHOLD, theiler: int | None = None,
                  max_points: int = 20_000) -> EmbeddingResult:
    """Classic false-nearest-neighbors scan over dimensions 1..d_max.

    A neighbor pair (i, j) at dimension d is false when its separation in the
    (d+1)-th coordinate exceeds ratio_tol times its d-dimensional distance,
    or when the inflated distance exceeds abs_tol times the series spread.
    d_e is the smallest dimension whose false fraction drops below
    ``threshold``; a compact object is claimed only when the fraction stays
    below threshold for all larger scanned dimensions as well.
    """
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("FNN undefined for non-finite values")
    if np.ptp(x) == 0:
        raise DataError("FNN undefined for a constant series")
    # robust attractor scale: a handful of far outliers (e.g. wrap-around
    # offsets) must not inflate sigma and silently disable the absolute test
    mad = float(np.median(np.abs(x - np.median(x))))
    sigma = 1.4826 * mad if mad > 0 else float(x.std())
    fractions: dict[int, float] = {}
    n_refs = 0
    for d in range(1, d_max + 1):
        m = x.size - d * delay  # need x[i + d*delay] for the next coordinate
        if m < 50:
            raise DataError(f"series too short for FNN at dimension {d}")
        pts = embed(x[: x.size], d, delay)[:m]
        win = delay * d if theiler is None else theiler
        refs = np.arange(m) if m <= max_points else \
            np.linspace(0, m - 1, max_points).astype(np.int64)
        nn_idx, nn_dist = _valid_neighbors(pts, refs, win)
        have = nn_idx >= 0
        refs, nn_idx, nn_dist = refs[have], nn_idx[have], nn_dist[have]
        extra = np.abs(x[refs + d * delay] - x[nn_idx + d * delay])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(nn_dist > 0, extra / nn_dist, np.inf)
        ratio[(nn_dist == 0) & (extra == 0)] = 0.0
        inflated = np.sqrt(nn_dist ** 2 + extra ** 2)
        false = (ratio > ratio_tol) | (inflated / sigma > abs_tol)
        fractions[d] = float(false.mean()) if false.size else 1.0
        n_refs = int(refs.size)

    d_e = next((d for d in sorted(fractions) if fractions[d] < threshold), None)
    compact = d_e is not None and all(fractions[d] < threshold
                                      for d in fractions if d >= d_e)
    return EmbeddingResult(delay, fractions, d_e, compact, n_refs, threshold)


@dataclass(frozen=True)
class LyapunovResult:
    lambda_max: float          # nats per sample; nan when indeterminate
    fit_range: tuple[int, int]
    divergence_curve: np.ndarray
    r_squared: float
    indeterminate: bool
    diagnostics: dict = field(default_factory=dict)


def largest_lyapunov(values, d_e: int, delay: int, *,
                     max_steps: int = 50, theiler: int | None = None,
                     fit_min_points: int = 10,
                     max_points: int = 20_000) -> LyapunovResult:
    """Rosenstein estimate: mean log divergence of nearest-neighbor pairs.

    The exponent is the slope of the steepest linear-looking window (at least
    ``fit_min_points`` long) of the divergence curve. When the curve
    saturates immediately - the stochastic signature - the result is flagged
    indeterminate instead of reporting a slope.
    """
    x = np.asarray(values, dtype=np.float64)
    pts = embed(x, d_e, delay)
    m = pts.shape[0]
    if m < 100:
        raise DataError("series too short for a divergence curve")
    win = delay * d_e if theiler is None else theiler
    refs = np.arange(m - max_steps)
    if refs.size > max_points:
        refs = np.linspace(0, m - max_steps - 1, max_points).astype(np.int64)
    nn_idx, nn_dist = _valid_neighbors(pts, refs, win)
    ok = (nn_idx >= 0) & (nn_idx < m - max_steps) & (nn_dist > 0)
    refs, nn_idx = refs[ok], nn_idx[ok]
    if refs.size < 10:
        raise NumericError("no usable neighbor pairs for divergence tracking")

    curve = np.empty(max_steps + 1)
    for k in range(max_steps + 1):
        d = np.linalg.norm(pts[refs + k] - pts[nn_idx + k], axis=1)
        good = d > 0
        if not np.any(good):
            curve[k] = -np.inf
        else:
            curve[k] = float(np.log(d[good]).mean())

    steps = np.arange(max_steps + 1)
    rise = float(curve.max() - curve[0])
    jump = float(curve[1] - curve[0]) if max_steps >= 1 else 0.0

    best = None  # (r2, slope, a, b)
    for a in range(0, max_steps + 1 - fit_min_points):
        for b in range(a + fit_min_points - 1, max_steps + 1):
            ys = curve[a: b + 1]
            xs = steps[a: b + 1]
            slope, intercept = np.polyfit(xs, ys, 1)
            pred = slope * xs + intercept
            ss_res = float(((ys - pred) ** 2).sum())
            ss_tot = float(((ys - ys.mean()) ** 2).sum())
            r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
            if slope > 0 and (best is None or r2 > best[0]):
                best = (r2, float(slope), a, b)

    diagnostics = {"rise_nats": rise, "first_step_jump": jump, "n_pairs": int(refs.size)}
    indeterminate = (
        best is None
        or rise < 0.5                       # nothing diverged
        or (rise > 0 and jump / rise > 0.7) # saturated in one step
        or best[0] < 0.9                    # no linear region
    )
    if indeterminate:
        fit = (0, 0) if best is None else (best[2], best[3])
        r2 = 0.0 if best is None else best[0]
        return LyapunovResult(float("nan"), fit, curve, r2, True, diagnostics)
    r2, slope, a, b = best
    return LyapunovResult(slope, (a, b), curve, r2, False, diagnostics)
