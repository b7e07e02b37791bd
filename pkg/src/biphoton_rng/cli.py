"""Command line interface: simulate, build-series, analyze, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal numeric
failure.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import BiphotonError, DataError, UsageError
from .pipeline import (
    AnalysisConfig,
    aggregate_tables,
    analyze_set,
    records_from_csv,
    records_to_csv,
    rejection_summary,
)
from .quantum import SettingsSet, StateModel, calibrate
from .report import full_report_markdown, qkd_from_summary, tables_csv
from .series import (
    build_deltat,
    build_dt,
    intercalate_outcomes,
    load_series,
    save_series,
    series_filename,
)
from .simulator import SimConfig, campaign_runs, run_seed, simulate_run
from .timetag import DEFAULT_WINDOW_PS, assign_pulses, find_coincidences, load_stream, save_stream

MANIFEST_NAME = "campaign.json"


@click.group()
def cli():
    """Simulate biphoton coincidence runs and evaluate their randomness."""


def _parse_settings(text: str | None) -> SettingsSet:
    if text is None:
        return SettingsSet()
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise click.UsageError("--settings needs four comma-separated angles: a,a',b,b'")
    try:
        return SettingsSet(*(float(p) for p in parts))
    except ValueError:
        raise click.UsageError("--settings angles must be numeric")


def _parse_model(text: str) -> StateModel:
    params = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        if key.strip() not in ("c", "v") or not value:
            raise click.UsageError("--model must look like c=<c>,v=<v>")
        params[key.strip()] = float(value)
    return StateModel(params.get("c", 1.0), params.get("v", 1.0))


@cli.command()
@click.option("--s", "target_s", type=float, default=None, help="Target CHSH S.")
@click.option("--c", "target_c", type=float, default=None, help="Target concurrence.")
@click.option("--p", "target_p", type=float, default=None, help="Target purity.")
@click.option("--model", "model_text", default=None, help="Explicit state, c=<c>,v=<v>.")
@click.option("--theta", type=float, default=22.5, show_default=True,
              help="Settings-family label recorded in run metadata.")
@click.option("--settings", "settings_text", default=None,
              help="CHSH angles a,a',b,b' in degrees (default 0,45,22.5,67.5).")
@click.option("--duration", type=float, default=300.0, show_default=True,
              help="Run duration in seconds.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--label", default=None, help="Free-form state label for reports.")
@click.option("--format", "fmt", type=click.Choice(["csv", "binary"]), default="csv",
              show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def simulate(target_s, target_c, target_p, model_text, theta, settings_text,
             duration, seed, label, fmt, out_dir):
    """Simulate the sixteen-run set of one CHSH campaign."""
    if model_text is not None:
        state = _parse_model(model_text)
        calibration = None
    elif None not in (target_s, target_c, target_p):
        calibration = calibrate(target_s, target_c, target_p)
        state = calibration.state
    else:
        raise click.UsageError("give either --model c=..,v=.. or all of --s/--c/--p")
    settings = _parse_settings(settings_text)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = SimConfig(duration_s=duration, seed=seed)
    ext = "csv" if fmt == "csv" else "qtt"
    manifest = {
        "state": {"c": state.c, "v": state.v},
        "label": label or (f"S={target_s:g}" if target_s else f"c={state.c:g},v={state.v:g}"),
        "theta_deg": theta,
        "settings": [settings.a, settings.a_prime, settings.b, settings.b_prime],
        "duration_s": duration,
        "seed": seed,
        "format": fmt,
        "runs": [],
    }
    if calibration is not None:
        manifest["calibration"] = {
            "targets": calibration.targets,
            "achieved": calibration.achieved,
            "max_relative_residual": calibration.max_relative_residual,
        }
        if calibration.max_relative_residual > 0.05:
            click.echo(f"note: calibration residual "
                       f"{calibration.max_relative_residual:.1%} exceeds 5% "
                       f"(targets not exactly representable)", err=True)
    for spec in campaign_runs(settings):
        stream = simulate_run(config, state, spec["a_deg"], spec["b_deg"],
                              seed=run_seed(seed, spec["run_index"]))
        fname = f"run_{spec['run_index']:02d}_a{spec['a_deg']:g}_b{spec['b_deg']:g}.{ext}"
        save_stream(stream, out / fname, fmt)
        manifest["runs"].append({**spec, "file": fname})
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
    click.echo(f"wrote {len(manifest['runs'])} runs to {out}")


@cli.command("build-series")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--types", default="dt,deltat,outcomes", show_default=True,
              help="Comma-separated subset of dt,deltat,outcomes.")
@click.option("--window", type=int, default=DEFAULT_WINDOW_PS, show_default=True,
              help="Coincidence window in picoseconds.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def build_series(in_dir, types, window, out_dir):
    """Build dt/deltat/outcomes series from a simulated campaign."""
    wanted = {t.strip() for t in types.split(",") if t.strip()}
    unknown = wanted - {"dt", "deltat", "outcomes"}
    if unknown:
        raise click.UsageError(f"unknown series types: {', '.join(sorted(unknown))}")
    in_path = Path(in_dir)
    manifest_path = in_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"no {MANIFEST_NAME} in {in_dir}")
    manifest = json.loads(manifest_path.read_text())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    coinc_by_key = {}
    meta_common = {
        "theta_deg": str(manifest.get("theta_deg", "")),
        "label": str(manifest.get("label", "")),
    }
    written = 0
    for run in manifest["runs"]:
        stream = load_stream(in_path / run["file"])
        coinc = find_coincidences(stream, window)
        coinc = assign_pulses(coinc, stream.trigger_times, stream.meta.period_ps)
        coinc_by_key[(run["x"], run["y"], run["rot_a"], run["rot_b"])] = (run, coinc)
        base_meta = dict(meta_common)
        base_meta.update({"a_deg": str(run["a_deg"]), "b_deg": str(run["b_deg"])})
        if "dt" in wanted:
            name = series_filename("dt", run["a_deg"], run["b_deg"])
            series = build_dt(coinc, {**base_meta, "series_id": name[:-4]})
            save_series(series, out / name)
            written += 1
        if "deltat" in wanted:
            name = series_filename("deltat", run["a_deg"], run["b_deg"])
            series = build_deltat(coinc, {**base_meta, "series_id": name[:-4]})
            save_series(series, out / name)
            written += 1
    if "outcomes" in wanted:
        for x in (0, 1):
            for y in (0, 1):
                for unrot_key, rot_key in ((((x, y, 0, 0)), (x, y, 1, 1)),
                                           (((x, y, 0, 1)), (x, y, 1, 0))):
                    if unrot_key not in coinc_by_key or rot_key not in coinc_by_key:
                        continue
                    run_u, coinc_u = coinc_by_key[unrot_key]
                    _, coinc_r = coinc_by_key[rot_key]
                    name = series_filename("outcomes", run_u["a_deg"], run_u["b_deg"])
                    meta = dict(meta_common)
                    meta.update({"a_deg": str(run_u["a_deg"]), "b_deg": str(run_u["b_deg"]),
                                 "series_id": name[:-4], "kind": "outcomes"})
                    series = intercalate_outcomes(coinc_r, coinc_u, meta)
                    save_series(series, out / name)
                    written += 1
    click.echo(f"wrote {written} series files to {out}")


@cli.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--alpha", type=float, default=0.01, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              help="Parallel series analyses.")
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
def analyze(in_dir, alpha, workers, out_file):
    """Run the full indicator battery on every series file in a directory."""
    paths = sorted(Path(in_dir).glob("*.txt"))
    if not paths:
        raise DataError(f"no series files (*.txt) in {in_dir}")
    series_list = []
    for path in paths:
        series = load_series(path)
        sid = series.meta.get("series_id", path.stem)
        series_list.append((sid, series))
    config = AnalysisConfig(alpha=alpha, workers=workers)
    records = analyze_set(series_list, config)
    Path(out_file).write_text(records_to_csv(records))
    click.echo(f"analyzed {len(records)} series -> {out_file}")


@cli.command()
@click.option("--in", "in_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["md", "csv"]), default="md",
              show_default=True)
@click.option("--qkd-threshold", type=float, default=0.14, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Output directory (default: directory of the input file).")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures alongside the report.")
def report(in_file, fmt, qkd_threshold, out_dir, figures):
    """Aggregate a results CSV into the table/ledger report."""
    from . import plots

    in_path = Path(in_file)
    records = records_from_csv(in_path.read_text())
    if not records:
        raise DataError("results file contains no series records")
    rows = aggregate_tables(records)
    summary = rejection_summary(records)
    qkd = qkd_from_summary(summary, qkd_threshold)
    out = Path(out_dir) if out_dir else in_path.parent
    out.mkdir(parents=True, exist_ok=True)

    if fmt == "md":
        target = out / "report.md"
        target.write_text(full_report_markdown(rows, summary, qkd,
                                               {"source": str(in_path)}))
        click.echo(f"wrote {target}")
    else:
        target = out / "report_tables.csv"
        target.write_text(tables_csv(rows))
        summary_target = out / "report_summary.csv"
        lines = ["key,value"]
        lines.append(f"total_excluding_type3,{summary.total_excluding_type3}")
        lines.append(f"not_random_excluding_type3,{summary.not_random_excluding_type3}")
        for crit, count in summary.by_criterion.items():
            lines.append(f"rejected_by_{crit},{count}")
        lines.append(f"type3_count,{summary.type3_count}")
        lines.append(f"type3_nist_rejected,{summary.type3_nist_rejected}")
        if qkd is not None:
            lines.append(f"rate,{qkd.rate}")
            lines.append(f"qkd_threshold,{qkd.threshold}")
            lines.append(f"qkd_acceptable,{str(qkd.acceptable).lower()}")
        summary_target.write_text("\n".join(lines) + "\n")
        click.echo(f"wrote {target} and {summary_target}")

    if figures:
        fig1 = plots.save_table_figure(rows, out / "report_tables.png")
        fig2 = plots.save_rejection_figure(summary, out / "report_rejections.png")
        click.echo(f"wrote {fig1} and {fig2}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except BiphotonError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
