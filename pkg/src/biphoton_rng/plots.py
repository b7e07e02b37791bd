"""Matplotlib figure rendering for the report path.

Figures are written next to the delimited output: set averages against their
ideal values, the rejection ledger, and (when series files are available)
the reference histogram shapes of the dt and deltat series.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import RejectionSummary, TableRow
from .series import BinarySeries, RealSeries


def save_table_figure(rows: Sequence[TableRow], path) -> Path:
    """Errorbar chart of the per-group Kc/Km/H averages with ideal lines."""
    fig, (ax_k, ax_h) = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    labels = []
    kc, kc_err, km, km_err, hh, hh_err = [], [], [], [], [], []
    for r in rows:
        theta = "" if r.theta_deg is None else f" {r.theta_deg:g}°"
        labels.append(f"#{r.series_type}{theta}")
        kc.append(np.nan if r.kc_mean is None else r.kc_mean)
        kc_err.append(0 if r.kc_dispersion is None else r.kc_dispersion)
        km.append(np.nan if r.km_mean is None else r.km_mean)
        km_err.append(0 if r.km_dispersion is None else r.km_dispersion)
        hh.append(np.nan if r.h_mean is None else r.h_mean)
        hh_err.append(0 if r.h_dispersion is None else r.h_dispersion)
    x = np.arange(len(labels))
    ax_k.errorbar(x - 0.1, kc, yerr=kc_err, fmt="o", label="Kc (mean threshold)")
    ax_k.errorbar(x + 0.1, km, yerr=km_err, fmt="s", label="Km (median threshold)")
    ax_k.axhline(1.0, color="grey", lw=0.8, ls="--")
    ax_k.set_ylabel("normalized complexity")
    ax_k.legend(fontsize=8)
    ax_h.errorbar(x, hh, yerr=hh_err, fmt="o", color="tab:green")
    ax_h.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax_h.set_ylabel("Hurst exponent")
    for ax in (ax_k, ax_h):
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, ha="right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_rejection_figure(summary: RejectionSummary, path) -> Path:
    """Bar chart of per-criterion rejection counts."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    names = list(summary.by_criterion) + ["type #3 (NIST)"]
    counts = list(summary.by_criterion.values()) + [summary.type3_nist_rejected]
    ax.bar(names, counts, color=["tab:blue"] * (len(names) - 1) + ["tab:orange"])
    total = summary.total_excluding_type3
    ax.set_title(f"not random: {summary.not_random_excluding_type3}/{total}"
                 if total else "no regular series")
    ax.set_ylabel("series rejected")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_series_histograms(series_list: Sequence[RealSeries | BinarySeries], path,
                           width_ps: float | None = None) -> Path | None:
    """Reference shapes: dt histogram (log counts) and deltat histogram."""
    dts = [s for s in series_list if isinstance(s, RealSeries) and s.kind == "dt"]
    deltats = [s for s in series_list if isinstance(s, RealSeries) and s.kind == "deltat"]
    if not dts and not deltats:
        return None
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    if dts:
        values = dts[0].values / 1e6  # to microseconds
        axes[0].hist(values, bins=80, color="tab:blue")
        axes[0].set_yscale("log")
        axes[0].set_xlabel("dt (µs)")
        axes[0].set_ylabel("coincidences per slot")
        axes[0].set_title(f"type #1: {dts[0].meta.get('series_id', 'dt')}")
    if deltats:
        values = deltats[0].values / 1e3  # to nanoseconds
        axes[1].hist(values, bins=80, color="tab:orange",
                     range=(0, width_ps / 1e3) if width_ps else None)
        axes[1].set_xlabel("deltat (ns)")
        axes[1].set_ylabel("coincidences per slot")
        axes[1].set_title(f"type #2: {deltats[0].meta.get('series_id', 'deltat')}")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
