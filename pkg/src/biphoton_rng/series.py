"""Build the three series types from coincidence lists and binarize them.

Type #1 (dt): real time between successive coincidences.
Type #2 (deltat): offset of each coincidence from the start of its pump pulse.
Type #3 (outcomes): bits from intercalating a rotated and an unrotated run.

Thresholding is strictly ">": ties go to 0. Medians use the lower median so
integer picosecond data never needs interpolation.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DataError, DegenerateSeriesError, ParseError, TooShortError, UsageError
from .timetag import Coincidences

SERIES_KINDS = ("dt", "deltat", "outcomes")


@dataclass(frozen=True)
class RealSeries:
    """Ordered real-valued series (picoseconds) with provenance metadata."""

    values: np.ndarray
    kind: str
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "meta", dict(self.meta))
        if vals.ndim != 1:
            raise UsageError("series values must be one-dimensional")
        if vals.size and not np.all(np.isfinite(vals)):
            raise DataError("series values must be finite")
        if vals.size and vals.min() < 0:
            raise DataError("series values must be non-negative")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class BinarySeries:
    """Bit series plus the thresholding provenance that produced it."""

    bits: np.ndarray
    threshold_kind: str = "none"
    threshold_value: float | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "meta", dict(self.meta))
        if bits.ndim != 1 or bits.size < 1:
            raise UsageError("bit series must be one-dimensional and non-empty")
        if bits.size and bits.max() > 1:
            raise DataError("bits must be 0 or 1")
        if self.threshold_kind not in ("mean", "median", "none"):
            raise UsageError(f"unknown threshold kind {self.threshold_kind!r}")

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def ones_fraction(self) -> float:
        return float(self.bits.mean())


def build_dt(coincidences: Coincidences, meta: Mapping[str, str] | None = None) -> RealSeries:
    """Inter-coincidence intervals; length n-1."""
    if len(coincidences) < 2:
        raise TooShortError("need at least 2 coincidences for a dt series")
    vals = np.diff(coincidences.t_abs).astype(np.float64)
    return RealSeries(vals, "dt", dict(meta or {}))


def build_deltat(coincidences: Coincidences, meta: Mapping[str, str] | None = None) -> RealSeries:
    """Offsets from the pulse start, in coincidence order."""
    if not coincidences.assigned:
        raise UsageError("coincidences carry no pulse assignment; run assign_pulses first")
    if len(coincidences) < 1:
        raise TooShortError("empty coincidence list")
    return RealSeries(coincidences.offset.astype(np.float64), "deltat", dict(meta or {}))


def intercalate_outcomes(coinc_rotated: Coincidences, coinc_unrotated: Coincidences,
                         meta: Mapping[str, str] | None = None) -> BinarySeries:
    """Merge two runs by run-local time; rotated events emit 1, unrotated 0.

    Ties order the unrotated event first. The two source runs are treated as
    if concurrent, so the series length is the sum of both counts.
    """
    if len(coinc_rotated) == 0 or len(coinc_unrotated) == 0:
        raise DegenerateSeriesError("intercalation needs events in both runs")
    t = np.concatenate([coinc_unrotated.t_abs, coinc_rotated.t_abs])
    flag = np.concatenate([
        np.zeros(len(coinc_unrotated), dtype=np.uint8),
        np.ones(len(coinc_rotated), dtype=np.uint8),
    ])
    order = np.lexsort((flag, t))
    return BinarySeries(flag[order], "none", None, dict(meta or {}))


def lower_median(values: np.ndarray) -> float:
    """Median without interpolation: element (n-1)//2 of the sorted values."""
    v = np.asarray(values)
    return float(np.partition(v, (v.size - 1) // 2)[(v.size - 1) // 2])


def binarize(series: RealSeries, threshold_kind: str) -> BinarySeries:
    """Threshold at the mean or lower median; bit = 1 iff value > threshold."""
    if threshold_kind not in ("mean", "median"):
        raise UsageError(f"threshold kind must be 'mean' or 'median', got {threshold_kind!r}")
    if len(series) < 2:
        raise TooShortError("need at least 2 values to binarize")
    values = series.values
    thr = float(values.mean()) if threshold_kind == "mean" else lower_median(values)
    bits = (values > thr).astype(np.uint8)
    if bits.all() or not bits.any():
        raise DegenerateSeriesError(
            f"degenerate threshold: {threshold_kind}={thr} produces a constant bit series")
    meta = dict(series.meta)
    meta["source_kind"] = series.kind
    return BinarySeries(bits, threshold_kind, thr, meta)


# ---------------------------------------------------------------------------
# series files: '#' meta header, one value (or bit) per line


def series_filename(kind: str, a_deg: float, b_deg: float) -> str:
    def ang(x):
        return str(int(x)) if float(x) == int(x) else str(float(x))
    return f"{kind}_{ang(a_deg)}_{ang(b_deg)}.txt"


def write_series(series: RealSeries | BinarySeries) -> str:
    out = io.StringIO()
    meta = dict(series.meta)
    if isinstance(series, RealSeries):
        meta["kind"] = series.kind
    else:
        meta["kind"] = meta.get("kind", "outcomes")
        meta["threshold_kind"] = series.threshold_kind
        if series.threshold_value is not None:
            meta["threshold_value"] = repr(series.threshold_value)
    for key in sorted(meta):
        out.write(f"# {key}={meta[key]}\n")
    if isinstance(series, RealSeries):
        for v in series.values:
            v = float(v)
            out.write(f"{int(v)}\n" if v.is_integer() else f"{v!r}\n")
    else:
        for b in series.bits:
            out.write(f"{int(b)}\n")
    return out.getvalue()


def read_series(text: str) -> RealSeries | BinarySeries:
    meta: dict[str, str] = {}
    raw: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        raw.append(line)
    if not raw:
        raise ParseError("series file has no values")
    kind = meta.pop("kind", "dt")
    if kind == "outcomes":
        threshold_kind = meta.pop("threshold_kind", "none")
        meta.pop("threshold_value", None)
        try:
            bits = np.array([int(x) for x in raw], dtype=np.uint8)
        except ValueError:
            raise ParseError("non-integer bit value in outcomes file") from None
        return BinarySeries(bits, threshold_kind, None, meta)
    try:
        values = np.array([float(x) for x in raw], dtype=np.float64)
    except ValueError:
        raise ParseError("non-numeric value in series file") from None
    return RealSeries(values, kind, meta)


def load_series(path) -> RealSeries | BinarySeries:
    with open(path, "r", encoding="utf-8") as fh:
        return read_series(fh.read())


def save_series(series: RealSeries | BinarySeries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_series(series))
