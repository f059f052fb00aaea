"""Command-line interface: ``psfmarket {simulate,calibrate,report,validate}``.

Exit codes: 0 success, 2 configuration, 3 simulation, 4 data, 5 validation.
"""

from __future__ import annotations

import functools
import math
import sys
import time
import warnings
from pathlib import Path

import click

from . import analytic
from .calibration import (
    CalibrationWindow,
    ColumnMap,
    calibrate_all,
    parse_bds,
    read_calibration,
    write_calibration,
)
from .config import CONFIG_ENV, preset_names, resolve
from .errors import ConfigError, DataFormatError, EstimationError, RegimeError, SimulationError
from .params import EntryFlowSeries
from .report import (
    NAICS_TITLES,
    SERIES_COLUMNS,
    SLOPE_COLUMNS,
    decade_slopes,
    export_matrix,
    opportunity_matrix,
    psf_count_series,
    rank_sectors,
    render_heatmap,
)
from .simulation import (
    expected_growth_rate,
    expected_tail_exponent,
    fit_growth_rate,
    fit_price_slope,
    fit_tail_exponent,
    poisson_entry_counts,
    simulate_coupled_market,
    simulate_customer_population,
    simulate_psf_population,
)
from .tables import export_table

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION, EXIT_DATA, EXIT_VALIDATION = 0, 2, 3, 4, 5

FIT_COLUMNS = ("quantity", "fitted", "stderr", "points", "expected")
RANK_COLUMNS = ("rank", "sector_code", "title", "net_growth", "exit_rate", "entry_rate", "is_psf")


class DataError(Exception):
    """Input data is missing, unreadable or malformed (exit 4)."""


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    """Map library exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                result = fn(*args, **kwargs)
            for w in caught:
                click.echo(f"notice: {w.message}", err=True)
            return result
        except ConfigError as err:
            _fail(EXIT_CONFIG, str(err))
        except (DataError, DataFormatError) as err:
            _fail(EXIT_DATA, str(err))
        except SimulationError as err:
            _fail(EXIT_SIMULATION, f"simulation failed: {err}")

    return wrapper


def shared_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     help=f"Config file of section.key = value lines (default: ${CONFIG_ENV} if set)."),
        click.option("--preset", help="Bundled preset applied before the config file."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False),
                     help="Output directory (output.dir)."),
        click.option("--seed", type=int, help="Random seed (scenario.seed)."),
        click.option("--data", type=click.Path(dir_okay=False),
                     help="BDS sector-year table (calibration.data)."),
        click.option("--window", help="Calibration years START:END (calibration.window)."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                     help="Table format (output.format)."),
        click.option("--top-k", "top_k", type=int, help="Ranked sectors to report (report.top_k)."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _overrides(out_dir=None, seed=None, data=None, window=None, fmt=None, top_k=None, extra=None):
    flags: dict[str, dict[str, str]] = {}

    def put(section, key, value):
        if value is not None:
            flags.setdefault(section, {})[key] = str(value)

    put("output", "dir", out_dir)
    put("scenario", "seed", seed)
    put("calibration", "data", data)
    put("calibration", "window", window)
    put("output", "format", fmt)
    put("report", "top_k", top_k)
    for (section, key), value in (extra or {}).items():
        put(section, key, value)
    return flags


def _load(preset, config_path, extra=None, **flags):
    cfg = resolve(preset=preset, config_path=config_path, overrides=_overrides(extra=extra, **flags))
    fmt = cfg.get("output", "format")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format must be csv or json, got {fmt!r}")
    out = Path(cfg.get("output", "dir"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigError(f"cannot create output directory {out}: {err}") from None
    return cfg, out, fmt


def _window(cfg) -> CalibrationWindow:
    try:
        return CalibrationWindow.parse(cfg.get("calibration", "window"))
    except ValueError as err:
        raise ConfigError(f"calibration.window: {err}") from None


def _column_map(cfg) -> ColumnMap:
    c = cfg.section("calibration")
    return ColumnMap(year=c["col_year"], sector_code=c["col_sector"], num_firms=c["col_firms"],
                     num_entrants=c["col_entrants"], num_exits=c["col_exits"],
                     employment=c["col_employment"])


def _read_records(cfg):
    path = cfg.get("calibration", "data")
    if not path:
        raise ConfigError("no data file: pass --data or set calibration.data")
    if not Path(path).is_file():
        raise DataError(f"data file not found: {path}")
    suppression = tuple(s.strip() for s in cfg.get("calibration", "suppression").split(","))
    try:
        return parse_bds(path, _column_map(cfg), delimiter=cfg.get("calibration", "delimiter"),
                         suppression=suppression)
    except (OSError, UnicodeDecodeError) as err:
        raise DataError(f"cannot read {path}: {err}") from None


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def main():
    """Market model of professional-services firms and their client sectors.

    Settings resolve as defaults, then --preset, then --config (or the file
    named by $PSFMARKET_CONFIG), then individual flags.
    """


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def _fit_row(quantity, fn, expected=None):
    try:
        fit = fn()
        return {"quantity": quantity, "fitted": fit.value, "stderr": fit.stderr,
                "points": fit.n, "expected": expected}
    except EstimationError as err:
        click.echo(f"notice: {quantity} not fitted: {err}", err=True)
        return {"quantity": quantity, "fitted": None, "stderr": None, "points": 0,
                "expected": expected}


def _run_simulation(cfg):
    s = cfg.section("scenario")
    kind, burn_in = s["kind"], s["burn_in"]
    if kind == "customer":
        cust = cfg.customer()
        try:
            traj, pop = simulate_customer_population(
                cust, s["horizon"], s["dt"], seed=s["seed"], n0=s["n0"],
                entry_mode=s["entry_mode"], r_max_factor=s["r_max_factor"])
        except ValueError as err:
            raise ConfigError(str(err)) from None
        fits = [
            _fit_row("tail_exponent", lambda: fit_tail_exponent(pop),
                     expected_tail_exponent(cust, s["entry_mode"])),
            _fit_row("growth_rate", lambda: fit_growth_rate(traj, burn_in),
                     expected_growth_rate(cust, s["entry_mode"])),
        ]
        return traj, fits
    if kind == "psf":
        exp_ = cfg.expertise()
        try:
            flow = EntryFlowSeries.constant(s["entry_flow"], s["horizon"], s["dt"])
            counts = poisson_entry_counts(exp_, flow, seed=s["seed"])
            traj, pop = simulate_psf_population(exp_, counts, s["horizon"], s["dt"], seed=s["seed"],
                                                initial=s["initial_practices"])
        except ValueError as err:
            raise ConfigError(str(err)) from None
        fits = [_fit_row("growth_rate", lambda: fit_growth_rate(traj, burn_in))]
        return traj, fits
    if kind == "coupled":
        sc = cfg.scenario()
        traj = simulate_coupled_market(sc)
        regime = analytic.classify_regime(sc.customer, sc.expertise)
        expected_growth = None
        if regime.is_growth:
            expected_price, expected_growth = 0.0, sc.customer.net_growth()
        else:
            try:
                expected_price = analytic.consolidation_rates(sc.customer, sc.expertise)[0]
            except RegimeError as err:
                click.echo(f"notice: no closed-form price path: {err}", err=True)
                expected_price = None
        fits = [
            _fit_row("growth_rate", lambda: fit_growth_rate(traj, burn_in), expected_growth),
            _fit_row("price_slope", lambda: fit_price_slope(traj, burn_in), expected_price),
        ]
        return traj, fits
    raise ConfigError(f"scenario.kind must be one of customer, psf, coupled; got {kind!r}")


def _fmt_num(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    return f"{v:.6g}"


@main.command()
@shared_options
@guarded
def simulate(config_path, preset, out_dir, seed, data, window, fmt, top_k):
    """Run a seeded population or coupled-market simulation."""
    cfg, out, fmt = _load(preset, config_path, out_dir=out_dir, seed=seed, data=data,
                          window=window, fmt=fmt, top_k=top_k)
    if not cfg.has_section("scenario"):
        raise ConfigError("missing required key scenario.kind (no scenario settings)")
    traj, fits = _run_simulation(cfg)
    traj_path = out / f"trajectory.{fmt}"
    if fmt == "csv":
        traj.write_table(traj_path)
    else:
        export_table(traj.rows(), traj_path, format="json", columns=traj.columns())
    fit_path = export_table(fits, out / f"fits.{fmt}", format=fmt, columns=FIT_COLUMNS)

    kind = cfg.get("scenario", "kind")
    click.echo(f"scenario: {kind}  seed {cfg.get('scenario', 'seed')}  "
               f"({', '.join(cfg.sources) or 'defaults'})")
    click.echo(f"steps: {len(traj) - 1}  final count: {int(traj.count[-1])}  "
               f"final total size: {traj.total_size[-1]:.6g}")
    if traj.extinct_at is not None:
        click.echo(f"population extinct at t = {traj.extinct_at:g}")
    if traj.price is not None:
        click.echo(f"final price: {_fmt_num(float(traj.price[-1]))}  regime: {traj.regime[-1]}")
    for row in fits:
        click.echo(f"{row['quantity']}: fitted {_fmt_num(row['fitted'])} "
                   f"(se {_fmt_num(row['stderr'])}) vs analytic {_fmt_num(row['expected'])}")
    click.echo(f"wrote {traj_path} and {fit_path}")


# --------------------------------------------------------------------------
# calibrate
# --------------------------------------------------------------------------


@main.command()
@shared_options
@guarded
def calibrate(config_path, preset, out_dir, seed, data, window, fmt, top_k):
    """Estimate sector rates from a BDS sector-year table.

    Writes calibration.csv, calibration.json and warnings.txt.
    """
    cfg, out, _ = _load(preset, config_path, out_dir=out_dir, seed=seed, data=data,
                        window=window, fmt=fmt, top_k=top_k)
    win = _window(cfg)
    records, summary = _read_records(cfg)
    rows = calibrate_all(records, win, cfg.get("calibration", "psf_codes"))
    write_calibration(rows, out / "calibration.csv", "csv")
    write_calibration(rows, out / "calibration.json", "json")
    lines = summary.lines() + [f"unusable: {r.sector_code}: {r.note}" for r in rows if not r.usable]
    (out / "warnings.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    usable = sum(r.usable for r in rows)
    click.echo(f"window {win.start_year}-{win.end_year}: {len(rows)} sectors, {usable} usable, "
               f"{summary.dropped} rows dropped")
    for line in lines[2:]:
        click.echo(line, err=True)
    click.echo(f"wrote {out / 'calibration.csv'}, {out / 'calibration.json'}, {out / 'warnings.txt'}")


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


def _read_calibration_table(path: str):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"calibration table not found: {path}")
    fmt = "json" if p.suffix.lower() == ".json" else "csv"
    try:
        return read_calibration(p, format=fmt)
    except (OSError, ValueError, KeyError) as err:
        if isinstance(err, DataFormatError):
            raise
        raise DataError(f"cannot read calibration table {path}: {err}") from None


@main.command()
@shared_options
@click.option("--calibration", "calibration_path", type=click.Path(dir_okay=False),
              help="Calibration table to report on (report.calibration).")
@guarded
def report(config_path, preset, out_dir, seed, data, window, fmt, top_k, calibration_path):
    """Rank sectors, build the opportunity matrix, heatmap and PSF count series.

    Rates come from a calibration table when one is given, otherwise from
    calibrating --data on the fly; the count series needs --data.
    """
    cfg, out, fmt = _load(preset, config_path, out_dir=out_dir, seed=seed, data=data,
                          window=window, fmt=fmt, top_k=top_k,
                          extra={("report", "calibration"): calibration_path})
    rep = cfg.section("report")
    records = None
    if cfg.get("calibration", "data"):
        records, _ = _read_records(cfg)
    if rep["calibration"]:
        rows = _read_calibration_table(rep["calibration"])
    elif records is not None:
        rows = calibrate_all(records, _window(cfg), cfg.get("calibration", "psf_codes"))
    else:
        raise ConfigError("no calibration table or data: pass --calibration or --data")
    if rep["top_k"] < 1:
        raise ConfigError("report.top_k must be >= 1")

    ranked = rank_sectors(rows, rep["top_k"], exclude=rep["exclude"])
    rank_rows = [{"rank": i + 1, "sector_code": r.sector_code,
                  "title": NAICS_TITLES.get(r.sector_code, ""), "net_growth": r.net_growth,
                  "exit_rate": r.exit_rate, "entry_rate": r.entry_rate, "is_psf": r.is_psf}
                 for i, r in enumerate(ranked)]
    written = [export_table(rank_rows, out / f"ranked_sectors.{fmt}", fmt, RANK_COLUMNS)]

    customers = [r for r in rows if not (rep["exclude_psf_rows"] and r.is_psf)]
    customers = [r for r in customers if r.sector_code not in set(rep["exclude"])]
    expertises = [r for r in rows if r.is_psf]
    try:
        matrix = opportunity_matrix(customers, expertises)
    except ValueError as err:
        raise DataError(f"cannot build opportunity matrix: {err}") from None
    written.append(export_matrix(matrix, out / f"opportunity_matrix.{fmt}", fmt))
    if 0 in matrix.shape:
        click.echo("notice: no expertise columns; heatmap not rendered", err=True)
    else:
        written.append(render_heatmap(matrix, out / "heatmap.svg"))

    series = psf_count_series(records, cfg.get("calibration", "psf_codes")) if records else []
    written.append(export_table(series, out / f"psf_series.{fmt}", fmt, SERIES_COLUMNS))
    if series:
        try:
            slopes = decade_slopes(series)
        except ValueError as err:
            click.echo(f"notice: series trend not fitted: {err}", err=True)
            slopes = []
        if slopes:
            written.append(export_table(slopes, out / f"psf_series_trend.{fmt}", fmt, SLOPE_COLUMNS))
            for sl in slopes:
                click.echo(f"PSF firm count trend {sl.start_year}-{sl.end_year}: "
                           f"{sl.slope:+.4%} per year")

    n_growth = sum(c["verdict"] == "Growth" for c in matrix.cells())
    click.echo(f"ranked {len(ranked)} sectors; matrix {matrix.shape[0]}x{matrix.shape[1]}, "
               f"{n_growth} Growth cells")
    click.echo("wrote " + ", ".join(str(p) for p in written))


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------


@main.command()
@shared_options
@click.option("--quick", is_flag=True, help="Reduced populations and seeds (about 10 s).")
@guarded
def validate(config_path, preset, out_dir, seed, data, window, fmt, top_k, quick):
    """Cross-check simulations against the closed-form results.

    Coupled-market parameters come from the growth-demo and
    consolidation-demo presets.  Exit status 5 if any check fails.
    """
    from .validation import run_checks

    names = preset_names()
    pairs = {}
    for name in names:
        cfg = resolve(preset=name, env={})
        if cfg.has_section("expertise"):
            pairs[name] = (cfg.customer(), cfg.expertise())
        elif cfg.has_section("customer"):
            cfg.customer()
    for needed in ("growth-demo", "consolidation-demo"):
        if needed not in pairs:
            raise ConfigError(f"preset {needed!r} missing or lacks customer or expertise settings")

    start = time.perf_counter()
    results = run_checks(quick=quick, report=lambda r: click.echo(r.line()),
                         growth=pairs["growth-demo"], consolidation=pairs["consolidation-demo"])
    failed = [r for r in results if not r.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} checks passed "
               f"({'quick' if quick else 'full'} scale, {time.perf_counter() - start:.1f}s)")
    if failed:
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":  # pragma: no cover
    main()
