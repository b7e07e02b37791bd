"""Render aggregate tables, the rejection ledger and the QKD comparison."""
from __future__ import annotations

import csv
import io
import platform
from dataclasses import dataclass
from typing import Mapping, Sequence

from . import __version__
from .pipeline import QkdVerdict, RejectionSummary, TableRow, qkd_threshold_check


def _fmt(x, digits=3):
    if x is None:
        return ""
    return f"{x:.{digits}f}"


def _pm(mean, disp, digits=3):
    if mean is None:
        return "not applicable"
    return f"{_fmt(mean, digits)} ± {_fmt(disp, digits)}"


def run_manifest(extra: Mapping[str, str] | None = None) -> dict[str, str]:
    """Provenance block embedded in every report.

    Deliberately carries no wall-clock timestamp so a rerun of the same
    inputs and seeds is byte-identical.
    """
    manifest = {
        "generator": f"biphoton-rng {__version__}",
        "python": platform.python_version(),
    }
    if extra:
        manifest.update({str(k): str(v) for k, v in extra.items()})
    return manifest


def tables_markdown(rows: Sequence[TableRow]) -> str:
    out = io.StringIO()
    out.write("| type | theta | files | Kc | Km | H | random | note |\n")
    out.write("|---|---|---|---|---|---|---|---|\n")
    for r in rows:
        theta = "" if r.theta_deg is None else f"{r.theta_deg:g}°"
        verdicts = [v for v in (r.kc_random, r.km_random, r.h_random) if v is not None]
        random_word = "yes" if verdicts and all(verdicts) else "no"
        out.write(
            f"| #{r.series_type} | {theta} | {r.n_series} "
            f"| {_pm(r.kc_mean, r.kc_dispersion)} "
            f"| {_pm(r.km_mean, r.km_dispersion)} "
            f"| {_pm(r.h_mean, r.h_dispersion)} "
            f"| {random_word} | {r.note} |\n")
    return out.getvalue()


def tables_csv(rows: Sequence[TableRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["series_type", "theta_deg", "n_series",
                     "kc_mean", "kc_dispersion", "kc_random",
                     "km_mean", "km_dispersion", "km_random",
                     "h_mean", "h_dispersion", "h_random", "note"])
    for r in rows:
        writer.writerow([
            r.series_type,
            "" if r.theta_deg is None else r.theta_deg,
            r.n_series,
            _fmt(r.kc_mean, 6), _fmt(r.kc_dispersion, 6),
            "" if r.kc_random is None else str(r.kc_random).lower(),
            _fmt(r.km_mean, 6), _fmt(r.km_dispersion, 6),
            "" if r.km_random is None else str(r.km_random).lower(),
            _fmt(r.h_mean, 6), _fmt(r.h_dispersion, 6),
            "" if r.h_random is None else str(r.h_random).lower(),
            r.note,
        ])
    return out.getvalue()


def summary_markdown(summary: RejectionSummary, qkd: QkdVerdict | None) -> str:
    out = io.StringIO()
    out.write("## Rejection ledger\n\n")
    out.write(f"- series analyzed (excluding type #3): {summary.total_excluding_type3}\n")
    out.write(f"- not random: {summary.not_random_excluding_type3} out of "
              f"{summary.total_excluding_type3}\n")
    for crit, count in summary.by_criterion.items():
        out.write(f"    - rejected by {crit}: {count}\n")
    out.write(f"- type #3 series (reported separately): {summary.type3_count}")
    out.write(f", NIST-rejected: {summary.type3_nist_rejected}\n")
    if summary.overlap:
        out.write(f"- rejected by more than one criterion: {', '.join(summary.overlap)}\n")
    else:
        out.write("- no series rejected by more than one criterion\n")
    if summary.not_random_ids:
        out.write(f"- not-random series: {', '.join(summary.not_random_ids)}\n")
    if qkd is not None:
        out.write("\n## QKD threshold\n\n")
        verdict = "acceptable" if qkd.acceptable else "not acceptable"
        out.write(f"- {qkd.not_random}/{qkd.total} = {qkd.rate:.4g} vs threshold "
                  f"{qkd.threshold:g}: {verdict}\n")
        for thr, ok in sorted(qkd.comparisons.items()):
            out.write(f"    - against {thr:g}: {'acceptable' if ok else 'not acceptable'}\n")
    return out.getvalue()


def full_report_markdown(rows: Sequence[TableRow], summary: RejectionSummary,
                         qkd: QkdVerdict | None,
                         manifest: Mapping[str, str] | None = None) -> str:
    out = io.StringIO()
    out.write("# Randomness evaluation report\n\n")
    out.write("## Set averages\n\n")
    out.write(tables_markdown(rows))
    out.write("\n")
    out.write(summary_markdown(summary, qkd))
    out.write("\n## Run manifest\n\n")
    for key, value in run_manifest(manifest).items():
        out.write(f"- {key}: {value}\n")
    return out.getvalue()


def qkd_from_summary(summary: RejectionSummary, threshold: float = 0.14) -> QkdVerdict | None:
    if summary.total_excluding_type3 == 0:
        return None
    return qkd_threshold_check(summary.not_random_excluding_type3,
                               summary.total_excluding_type3, threshold)
