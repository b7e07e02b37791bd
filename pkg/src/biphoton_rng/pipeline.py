"""Per-series indicator battery, set aggregation and the rejection ledger.

A series is "not random" when at least one criterion flags it: the NIST
battery rejects it, KPSS rejects stationarity, ADF cannot discard a unit
root, or Takens reconstruction finds a compact object. Type #3 series are
always reported in their own bucket and excluded from the headline rate.

The battery verdict of a real-valued series is taken on its median-threshold
image: the mean threshold of a skewed (type #1) series produces a
deterministically biased bit stream whose frequency test always fails, which
says nothing about the source. Both images are still analyzed and reported.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import EmbeddingResult, LyapunovResult, choose_delay, fnn_dimension, largest_lyapunov
from .errors import BiphotonError, DataError, UsageError
from .randomness.complexity import normalized_complexity
from .randomness.hurst import hurst_exponent
from .randomness.nist import TestOutcome, nist_battery
from .randomness.verdict import series_rejected_by_nist, set_verdict
from .series import BinarySeries, RealSeries, binarize
from .stationarity import StationarityOutcome, adf_test, kpss_test

QKD_THRESHOLDS = (0.14, 0.25)


@dataclass(frozen=True)
class AnalysisConfig:
    alpha: float = 0.01
    fnn_d_max: int = 12
    # the Takens scan embeds at most dynamics_max_length samples and queries
    # fnn_max_points reference points; neighbor searches stay exact over the
    # full embedding, the caps only bound the statistical sample (the false
    # fraction is resolved to ~1.5e-3 with 4000 references)
    fnn_max_points: int = 4_000
    dynamics_max_length: int = 20_000
    adf_trend: bool = False
    kpss_trend: bool = False
    workers: int = 1


@dataclass
class SeriesRecord:
    """Everything the battery produced for one series."""

    series_id: str
    series_type: int
    n: int
    theta_deg: float | None = None
    setting: tuple[float, float] | None = None
    label: str | None = None
    kc: float | None = None
    km: float | None = None
    hurst: float | None = None
    hurst_stderr: float | None = None
    nist: dict[str, list[TestOutcome]] = field(default_factory=dict)
    nist_rejected: bool | None = None
    adf: StationarityOutcome | None = None
    kpss: StationarityOutcome | None = None
    embedding: EmbeddingResult | None = None
    lyapunov: LyapunovResult | None = None
    takens_applicable: bool = True
    notes: list[str] = field(default_factory=list)

    # ledger flags -----------------------------------------------------
    @property
    def kpss_rejected(self) -> bool:
        return self.kpss is not None and self.kpss.indicator == 1

    @property
    def adf_unit_root(self) -> bool:
        """True when a unit root could not be discarded."""
        return self.adf is not None and self.adf.indicator == 0

    @property
    def compact_object_found(self) -> bool:
        return self.embedding is not None and self.embedding.compact_object_found

    @property
    def criteria_failed(self) -> list[str]:
        failed = []
        if self.nist_rejected:
            failed.append("nist")
        if self.kpss_rejected:
            failed.append("kpss")
        if self.adf_unit_root:
            failed.append("adf")
        if self.compact_object_found:
            failed.append("takens")
        return failed

    @property
    def not_random(self) -> bool:
        return bool(self.criteria_failed)


def _series_identity(series) -> tuple[float | None, tuple[float, float] | None, str | None]:
    meta = series.meta
    theta = float(meta["theta_deg"]) if "theta_deg" in meta else None
    setting = None
    if "a_deg" in meta and "b_deg" in meta:
        setting = (float(meta["a_deg"]), float(meta["b_deg"]))
    return theta, setting, meta.get("label")


def analyze_series(series: RealSeries | BinarySeries,
                   config: AnalysisConfig = AnalysisConfig(),
                   series_id: str | None = None) -> SeriesRecord:
    """Run every applicable indicator on one series.

    Indicators that error on this particular series are recorded as
    inapplicable (with the reason in notes), not as failures.
    """
    if isinstance(series, BinarySeries):
        return _analyze_binary(series, config, series_id)
    if isinstance(series, RealSeries):
        return _analyze_real(series, config, series_id)
    raise UsageError(f"cannot analyze {type(series).__name__}")


def _note(record: SeriesRecord, indicator: str, exc: Exception) -> None:
    record.notes.append(f"{indicator}: inapplicable ({exc})")


def _analyze_real(series: RealSeries, config: AnalysisConfig,
                  series_id: str | None) -> SeriesRecord:
    theta, setting, label = _series_identity(series)
    rec = SeriesRecord(
        series_id=series_id or series.meta.get("series_id", series.kind),
        series_type=1 if series.kind == "dt" else 2,
        n=len(series),
        theta_deg=theta,
        setting=setting,
        label=label,
    )
    images: dict[str, BinarySeries] = {}
    for kind, attr in (("mean", "kc"), ("median", "km")):
        try:
            image = binarize(series, kind)
            images[kind] = image
            setattr(rec, attr, float(normalized_complexity(image.bits)))
        except BiphotonError as exc:
            _note(rec, f"{attr} ({kind} threshold)", exc)
    try:
        h = hurst_exponent(series.values)
        rec.hurst, rec.hurst_stderr = h.h, h.stderr
    except BiphotonError as exc:
        _note(rec, "hurst", exc)
    for kind, image in images.items():
        try:
            rec.nist[kind] = nist_battery(image.bits, config.alpha)
        except BiphotonError as exc:
            _note(rec, f"nist ({kind} image)", exc)
    if "median" in rec.nist:
        rec.nist_rejected = series_rejected_by_nist(rec.nist["median"])
    try:
        rec.adf = adf_test(series.values, trend=config.adf_trend)
    except BiphotonError as exc:
        _note(rec, "adf", exc)
    try:
        rec.kpss = kpss_test(series.values, trend=config.kpss_trend)
    except BiphotonError as exc:
        _note(rec, "kpss", exc)
    _takens(rec, series.values, config)
    return rec


def _analyze_binary(series: BinarySeries, config: AnalysisConfig,
                    series_id: str | None) -> SeriesRecord:
    theta, setting, label = _series_identity(series)
    rec = SeriesRecord(
        series_id=series_id or series.meta.get("series_id", "outcomes"),
        series_type=3,
        n=len(series),
        theta_deg=theta,
        setting=setting,
        label=label,
        takens_applicable=False,  # phase-space reconstruction needs real-valued data
    )
    rec.notes.append("takens: not applied to type #3 outcome series")
    try:
        rec.kc = float(normalized_complexity(series.bits))
    except BiphotonError as exc:
        _note(rec, "kc", exc)
    rec.km = None  # median threshold of a bit series is meaningless
    values = series.bits.astype(np.float64)
    try:
        h = hurst_exponent(values)
        rec.hurst, rec.hurst_stderr = h.h, h.stderr
    except BiphotonError as exc:
        _note(rec, "hurst", exc)
    try:
        rec.nist["bits"] = nist_battery(series.bits, config.alpha)
        rec.nist_rejected = series_rejected_by_nist(rec.nist["bits"])
    except BiphotonError as exc:
        _note(rec, "nist", exc)
    try:
        rec.adf = adf_test(values, trend=config.adf_trend)
    except BiphotonError as exc:
        _note(rec, "adf", exc)
    try:
        rec.kpss = kpss_test(values, trend=config.kpss_trend)
    except BiphotonError as exc:
        _note(rec, "kpss", exc)
    return rec


def _takens(rec: SeriesRecord, values: np.ndarray, config: AnalysisConfig) -> None:
    x = values[: config.dynamics_max_length]
    try:
        delay = choose_delay(x)
        rec.embedding = fnn_dimension(x, delay.delay, config.fnn_d_max,
                                      max_points=config.fnn_max_points)
    except BiphotonError as exc:
        _note(rec, "takens", exc)
        rec.takens_applicable = False
        return
    if rec.embedding.d_e is not None:
        try:
            rec.lyapunov = largest_lyapunov(x, rec.embedding.d_e, rec.embedding.delay,
                                            max_points=config.fnn_max_points)
        except BiphotonError as exc:
            _note(rec, "lyapunov", exc)


def _analyze_one(args):
    series, config, series_id = args
    return analyze_series(series, config, series_id)


def analyze_set(series_list: Sequence[tuple[str, RealSeries | BinarySeries]],
                config: AnalysisConfig = AnalysisConfig()) -> list[SeriesRecord]:
    """Analyze many series; parallel across series, output in input order."""
    jobs = [(series, config, sid) for sid, series in series_list]
    if config.workers <= 1 or len(jobs) < 2:
        return [_analyze_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(_analyze_one, jobs))


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class TableRow:
    series_type: int
    theta_deg: float | None
    n_series: int
    kc_mean: float | None
    kc_dispersion: float | None
    kc_random: bool | None
    km_mean: float | None        # None renders as "not applicable" (type #3)
    km_dispersion: float | None
    km_random: bool | None
    h_mean: float | None
    h_dispersion: float | None
    h_random: bool | None
    note: str = ""


def aggregate_tables(records: Sequence[SeriesRecord]) -> list[TableRow]:
    """Mean and dispersion of Kc/Km/H per (type, theta) group.

    The "random" verdicts apply the literal ideal-within-dispersion rule (1
    for complexities, 1/2 for H). A mean-threshold Kc set that fails the
    literal rule while its median companion passes is flagged in the note
    rather than silently overruled.
    """
    groups: dict[tuple[int, float | None], list[SeriesRecord]] = {}
    for rec in records:
        groups.setdefault((rec.series_type, rec.theta_deg), []).append(rec)

    rows = []
    for (stype, theta) in sorted(groups, key=lambda k: (k[0], k[1] if k[1] is not None else -1)):
        members = groups[(stype, theta)]
        fields: dict[str, tuple[float | None, float | None, bool | None]] = {}
        for name, ideal in (("kc", 1.0), ("km", 1.0), ("hurst", 0.5)):
            vals = [getattr(r, name) for r in members if getattr(r, name) is not None]
            if vals:
                v = set_verdict(vals, ideal)
                fields[name] = (v.mean, v.dispersion, v.random)
            else:
                fields[name] = (None, None, None)
        note = ""
        kc_rand, km_rand, h_rand = fields["kc"][2], fields["km"][2], fields["hurst"][2]
        if kc_rand is False and (km_rand or (km_rand is None and h_rand)):
            note = ("Kc fails the literal ideal-within-dispersion rule "
                    "(mean-threshold bias); median/H verdicts pass")
        rows.append(TableRow(
            series_type=stype, theta_deg=theta, n_series=len(members),
            kc_mean=fields["kc"][0], kc_dispersion=fields["kc"][1], kc_random=kc_rand,
            km_mean=fields["km"][0], km_dispersion=fields["km"][1], km_random=km_rand,
            h_mean=fields["hurst"][0], h_dispersion=fields["hurst"][1], h_random=h_rand,
            note=note,
        ))
    return rows


@dataclass(frozen=True)
class RejectionSummary:
    total_excluding_type3: int
    not_random_excluding_type3: int
    type3_count: int
    type3_nist_rejected: int
    by_criterion: dict[str, int]         # non-type-3 counts per criterion
    overlap: tuple[str, ...]             # series failing more than one criterion
    not_random_ids: tuple[str, ...]

    @property
    def rate(self) -> float | None:
        if self.total_excluding_type3 == 0:
            return None
        return self.not_random_excluding_type3 / self.total_excluding_type3


def rejection_summary(records: Sequence[SeriesRecord]) -> RejectionSummary:
    """Counts per criterion; each series counts once in the headline number."""
    regular = [r for r in records if r.series_type != 3]
    type3 = [r for r in records if r.series_type == 3]
    by_criterion = {"nist": 0, "kpss": 0, "adf": 0, "takens": 0}
    overlap = []
    not_random_ids = []
    for rec in regular:
        failed = rec.criteria_failed
        for crit in failed:
            by_criterion[crit] += 1
        if len(failed) > 1:
            overlap.append(rec.series_id)
        if failed:
            not_random_ids.append(rec.series_id)
    return RejectionSummary(
        total_excluding_type3=len(regular),
        not_random_excluding_type3=len(not_random_ids),
        type3_count=len(type3),
        type3_nist_rejected=sum(1 for r in type3 if r.nist_rejected),
        by_criterion=by_criterion,
        overlap=tuple(overlap),
        not_random_ids=tuple(not_random_ids),
    )


@dataclass(frozen=True)
class QkdVerdict:
    not_random: int
    total: int
    rate: float
    threshold: float
    acceptable: bool
    comparisons: dict[float, bool]


def qkd_threshold_check(not_random: int, total: int, threshold: float = 0.14) -> QkdVerdict:
    """Compare the not-random rate against the classical-model threshold.

    Acceptable iff rate < threshold; both standard thresholds (0.14 and
    0.25) are always reported alongside.
    """
    if total <= 0:
        raise DataError("QKD threshold check undefined for an empty series set")
    if not_random < 0 or not_random > total:
        raise UsageError("need 0 <= not_random <= total")
    rate = not_random / total
    return QkdVerdict(
        not_random=not_random,
        total=total,
        rate=rate,
        threshold=threshold,
        acceptable=rate < threshold,
        comparisons={t: rate < t for t in QKD_THRESHOLDS},
    )


@dataclass(frozen=True)
class VerdictLedger:
    records: tuple[SeriesRecord, ...]
    tables: tuple[TableRow, ...]
    summary: RejectionSummary

    @property
    def per_series(self) -> dict[str, dict]:
        out = {}
        for rec in self.records:
            out[rec.series_id] = {
                "type": rec.series_type,
                "theta": rec.theta_deg,
                "setting": rec.setting,
                "nist_rejected": rec.nist_rejected,
                "kpss_rejected": rec.kpss_rejected,
                "adf_unit_root": rec.adf_unit_root,
                "compact_object_found": rec.compact_object_found,
            }
        return out


def build_ledger(records: Sequence[SeriesRecord]) -> VerdictLedger:
    return VerdictLedger(tuple(records), tuple(aggregate_tables(records)),
                         rejection_summary(records))


# ---------------------------------------------------------------------------
# long-format CSV: series_id,test,applicable,p_or_stat,pass

CSV_HEADER = ("series_id", "test", "applicable", "p_or_stat", "pass")


def _row(sid, test, applicable, value, passed):
    return (
        sid,
        test,
        "" if applicable is None else str(bool(applicable)).lower(),
        "" if value is None else repr(float(value)),
        "" if passed is None else str(bool(passed)).lower(),
    )


def records_to_csv(records: Sequence[SeriesRecord]) -> str:
    """One line per test per series, plus meta.* rows carrying grouping keys."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        sid = rec.series_id
        writer.writerow(_row(sid, "meta.series_type", None, rec.series_type, None))
        writer.writerow(_row(sid, "meta.n", None, rec.n, None))
        if rec.theta_deg is not None:
            writer.writerow(_row(sid, "meta.theta_deg", None, rec.theta_deg, None))
        if rec.setting is not None:
            writer.writerow(_row(sid, "meta.a_deg", None, rec.setting[0], None))
            writer.writerow(_row(sid, "meta.b_deg", None, rec.setting[1], None))
        writer.writerow(_row(sid, "kc", rec.kc is not None, rec.kc, None))
        writer.writerow(_row(sid, "km", rec.km is not None, rec.km, None))
        writer.writerow(_row(sid, "hurst", rec.hurst is not None, rec.hurst, None))
        for image, outcomes in rec.nist.items():
            for o in outcomes:
                writer.writerow(_row(sid, f"nist_{image}.{o.name}", o.applicable,
                                     o.p_value, o.passed))
        writer.writerow(_row(sid, "nist_rejected", rec.nist_rejected is not None, None,
                             None if rec.nist_rejected is None else not rec.nist_rejected))
        if rec.adf is not None:
            writer.writerow(_row(sid, "adf", True, rec.adf.statistic,
                                 rec.adf.indicator == 1))
        else:
            writer.writerow(_row(sid, "adf", False, None, None))
        if rec.kpss is not None:
            writer.writerow(_row(sid, "kpss", True, rec.kpss.statistic,
                                 rec.kpss.indicator == 0))
        else:
            writer.writerow(_row(sid, "kpss", False, None, None))
        if rec.embedding is not None:
            writer.writerow(_row(sid, "takens_d_e", True, rec.embedding.d_e,
                                 not rec.embedding.compact_object_found))
        else:
            writer.writerow(_row(sid, "takens_d_e", rec.takens_applicable, None,
                                 None if not rec.takens_applicable else True))
        if rec.lyapunov is not None and not rec.lyapunov.indeterminate:
            writer.writerow(_row(sid, "lyapunov", True, rec.lyapunov.lambda_max, None))
    return out.getvalue()


@dataclass
class RecordSummary:
    """What the report stage needs back from a results CSV."""

    series_id: str
    series_type: int = 0
    theta_deg: float | None = None
    n: int = 0
    kc: float | None = None
    km: float | None = None
    hurst: float | None = None
    nist_rejected: bool | None = None
    kpss_rejected: bool = False
    adf_unit_root: bool = False
    compact_object_found: bool = False

    # mirror the SeriesRecord flag API so aggregation code can reuse it
    @property
    def criteria_failed(self) -> list[str]:
        failed = []
        if self.nist_rejected:
            failed.append("nist")
        if self.kpss_rejected:
            failed.append("kpss")
        if self.adf_unit_root:
            failed.append("adf")
        if self.compact_object_found:
            failed.append("takens")
        return failed

    @property
    def not_random(self) -> bool:
        return bool(self.criteria_failed)


def records_from_csv(text: str) -> list[RecordSummary]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise DataError(f"results CSV must start with header {','.join(CSV_HEADER)}")
    by_id: dict[str, RecordSummary] = {}
    for line_no, parts in enumerate(reader, start=2):
        if not parts or (len(parts) == 1 and not parts[0]):
            continue
        if len(parts) != 5:
            raise DataError(f"results CSV line {line_no}: expected 5 fields")
        sid, test, applicable, value, passed = parts
        rec = by_id.setdefault(sid, RecordSummary(sid))
        val = float(value) if value else None
        is_pass = None if passed == "" else passed == "true"
        if test == "meta.series_type":
            rec.series_type = int(val)
        elif test == "meta.theta_deg":
            rec.theta_deg = val
        elif test == "meta.n":
            rec.n = int(val)
        elif test == "kc":
            rec.kc = val
        elif test == "km":
            rec.km = val
        elif test == "hurst":
            rec.hurst = val
        elif test == "nist_rejected":
            rec.nist_rejected = None if is_pass is None else not is_pass
        elif test == "kpss":
            rec.kpss_rejected = is_pass is False
        elif test == "adf":
            rec.adf_unit_root = is_pass is False
        elif test == "takens_d_e":
            rec.compact_object_found = is_pass is False
    return list(by_id.values())
