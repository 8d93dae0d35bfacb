"""Command-line front end.

Subcommands: simulate, solve, compare, gelation, diagnose, rules-list.

Configuration precedence (documented contract): command-line flags override
values from the ``--config`` file, which override built-in defaults.  The
config file is a plain text format, one ``key = value`` per line, ``#``
comments allowed; keys use underscores and must match the command's option
names (unknown keys are rejected with a line-precise message).  Values are
parsed as JSON where possible (numbers, lists, true/false), otherwise taken
as strings.

Exit codes: 0 success, 1 validation error (bad flags, bad config file,
missing inputs, refusing to overwrite without --force), 2 runtime failure.

Seed sweeps fan out over a worker pool; ``--workers`` defaults to the
``ACHLIO_WORKERS`` environment variable (or 1).  Output writing stays in the
parent process, in seed order.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, analysis, io as aio
from .kinetics import KineticsConfig, integrate
from .process import ProcessConfig, run, split_seed
from .rules import bohman_frieze_table, builtin, builtin_names

__all__ = ["main", "cli"]


def _resolve_rule(name: str, B=None):
    """Catalogue lookup; bounded_size uses the join-two-singletons table."""
    if name not in builtin_names():
        raise click.ClickException(
            f"unknown rule {name!r}; known: {', '.join(builtin_names())}"
        )
    if name == "bounded_size":
        B = 1 if B is None else int(B)
        return builtin(name, B=B, table=bohman_frieze_table(B))
    if B is not None:
        raise click.ClickException(f"--B only applies to the bounded_size rule, not {name!r}")
    return builtin(name)


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise click.ClickException(f"cannot read config file {path}: {e}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise click.ClickException(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in values:
            raise click.ClickException(f"{path}:{lineno}: duplicate key {key!r}")
        val = val.strip()
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val
        values[key] = (parsed, lineno)
    return values


def _merge_config(ctx: click.Context, kw: dict) -> dict:
    """Apply --config values for options not set on the command line."""
    path = kw.pop("config", None)
    if not path:
        return kw
    values = _load_config_file(path)
    valid = {p.name for p in ctx.command.params if p.name != "config"}
    from click.core import ParameterSource

    for key, (val, lineno) in values.items():
        if key not in valid:
            raise click.ClickException(
                f"{path}:{lineno}: unknown key {key!r} for command "
                f"{ctx.command.name!r} (valid: {', '.join(sorted(valid))})"
            )
        if ctx.get_parameter_source(key) != ParameterSource.COMMANDLINE:
            kw[key] = val
    return kw


def _require(kw: dict, *names):
    for name in names:
        if kw.get(name) is None:
            raise click.ClickException(f"missing required value: --{name.replace('_', '-')}")


def _float_list(value, what: str):
    """Accept a JSON list, a comma-separated string, or a single number."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        parts = [p for p in value.replace(",", " ").split() if p]
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise click.ClickException(f"cannot parse {what}: {value!r}")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise click.ClickException(f"cannot parse {what}: {value!r}")


def _workers(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("ACHLIO_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise click.ClickException(f"ACHLIO_WORKERS must be an integer, got {env!r}")


_config_option = click.option(
    "--config", type=click.Path(), default=None,
    help="key = value file; command-line flags take precedence.",
)
_force_option = click.option(
    "--force", is_flag=True, help="Overwrite existing output files.",
)


@click.group()
@click.version_option(version=__version__, prog_name="achlio")
def cli():
    """Seeded simulation, kinetics, and diagnostics for l-vertex processes."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _simulate_worker(spec: dict):
    rule = _resolve_rule(spec["rule"], spec.get("B"))
    cfg = ProcessConfig(
        n=spec["n"], rule=rule, t_max=spec["t_max"],
        snapshot_times=spec["snapshot_times"], seed=spec["seed"],
        K_report=spec["k_report"], drift_k_set=spec.get("drift_k_set", ()),
        eta=spec["eta"], distinct_vertices=spec["distinct_vertices"],
    )
    return run(cfg)


def _run_sweep(specs, workers: int):
    if workers <= 1 or len(specs) <= 1:
        return [_simulate_worker(s) for s in specs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_worker, specs))


def _default_snapshots(t_max: float):
    return [round(i * t_max / 10.0, 12) for i in range(1, 11)]


@cli.command()
@_config_option
@click.option("--rule", default=None, help="Catalogued rule name (see rules-list).")
@click.option("--b", "b", type=int, default=None, help="Size cap for bounded_size.")
@click.option("--n", type=int, default=None, help="Number of vertices.")
@click.option("--t-max", type=float, default=None, help="Run until step floor(t_max * n).")
@click.option("--snapshot-times", default=None,
              help="Comma-separated times; default: 10 evenly spaced up to t-max.")
@click.option("--seeds", type=int, default=1, show_default=True,
              help="Number of runs; seeds derived from --seed by splitting.")
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed.")
@click.option("--k-report", type=int, default=100, show_default=True)
@click.option("--eta", type=float, default=0.01, show_default=True,
              help="Large-component threshold (fraction of n).")
@click.option("--distinct-vertices", is_flag=True,
              help="Resample tuples until all vertices are distinct.")
@click.option("--workers", type=int, default=None,
              help="Worker processes for seed sweeps [env ACHLIO_WORKERS or 1].")
@click.option("--out", type=click.Path(), default=None,
              help="Artifact stem (1 seed) or directory (several).")
@_force_option
@click.pass_context
def simulate(ctx, **kw):
    """Run seeded simulations and write Trace artifacts."""
    kw = _merge_config(ctx, kw)
    _require(kw, "rule", "n", "t_max", "out")
    n, t_max = int(kw["n"]), float(kw["t_max"])
    times = _float_list(kw.get("snapshot_times"), "snapshot times")
    if times is None:
        times = _default_snapshots(t_max)
    seeds = int(kw["seeds"])
    if seeds < 1:
        raise click.ClickException("--seeds must be >= 1")
    base = int(kw["seed"])
    seed_list = [base] if seeds == 1 else [split_seed(base, i) for i in range(seeds)]
    specs = [
        {
            "rule": kw["rule"], "B": kw.get("b"), "n": n, "t_max": t_max,
            "snapshot_times": times, "seed": s, "k_report": int(kw["k_report"]),
            "eta": float(kw["eta"]), "distinct_vertices": bool(kw["distinct_vertices"]),
        }
        for s in seed_list
    ]
    _resolve_rule(kw["rule"], kw.get("b"))  # validate before any computation
    try:
        traces = _run_sweep(specs, _workers(kw.get("workers")))
    except ValueError as e:
        raise click.ClickException(str(e))
    out = Path(kw["out"])
    if seeds == 1:
        stems = [aio.write_trace(traces[0], out, force=kw["force"])]
    else:
        stems = [
            aio.write_trace(tr, out / f"trace_{i:04d}", force=kw["force"])
            for i, tr in enumerate(traces)
        ]
    for stem in stems:
        click.echo(f"wrote {stem}.json + {stem}.csv")


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

_GEL_ALIASES = {"with": "with_gel", "with_gel": "with_gel", "no": "no_gel", "no_gel": "no_gel"}


@cli.command()
@_config_option
@click.option("--rule", default=None, help="Catalogued rule name.")
@click.option("--b", "b", type=int, default=None, help="Size cap for bounded_size.")
@click.option("--k", "k", type=int, default=None, help="Truncation order K.")
@click.option("--gel", default="with", show_default=True,
              help="Gel mode: 'with' (sol-gel interaction) or 'no'.")
@click.option("--t-end", type=float, default=None)
@click.option("--grid-points", type=int, default=101, show_default=True)
@click.option("--t-grid", default=None, help="Explicit comma-separated output times.")
@click.option("--integrator", default="rk45_adaptive", show_default=True,
              type=click.Choice(["rk45_adaptive", "rk4_fixed"]))
@click.option("--h", type=float, default=1e-3, show_default=True,
              help="Fixed step / initial adaptive step.")
@click.option("--rtol", type=float, default=1e-7, show_default=True)
@click.option("--atol", type=float, default=1e-9, show_default=True)
@click.option("--impl", default="auto", show_default=True,
              type=click.Choice(["auto", "fast", "generic"]))
@click.option("--out", type=click.Path(), default=None, help="Artifact stem.")
@_force_option
@click.pass_context
def solve(ctx, **kw):
    """Integrate the truncated kinetics and write an OdeSeries artifact."""
    kw = _merge_config(ctx, kw)
    _require(kw, "rule", "k", "t_end", "out")
    gel = _GEL_ALIASES.get(str(kw["gel"]).lower())
    if gel is None:
        raise click.ClickException(f"--gel must be 'with' or 'no', got {kw['gel']!r}")
    t_end = float(kw["t_end"])
    grid = _float_list(kw.get("t_grid"), "t grid")
    if grid is None:
        grid = np.linspace(0.0, t_end, int(kw["grid_points"]))
    rule = _resolve_rule(kw["rule"], kw.get("b"))
    try:
        cfg = KineticsConfig(
            rule=rule, K=int(kw["k"]), t_end=t_end, gel_mode=gel,
            integrator=kw["integrator"], h=float(kw["h"]), rtol=float(kw["rtol"]),
            atol=float(kw["atol"]), grid=np.asarray(grid, dtype=float),
            rhs_impl=kw["impl"],
        )
        series = integrate(cfg)
    except ValueError as e:
        raise click.ClickException(str(e))
    stem = aio.write_series(series, kw["out"], force=kw["force"])
    click.echo(f"wrote {stem}.json + {stem}.csv")


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _collect_trace_stems(paths):
    stems = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            found = sorted(q.with_suffix("") for q in p.glob("*.json"))
            if not found:
                raise click.ClickException(f"no trace artifacts in directory {p}")
            stems.extend(found)
        else:
            stems.append(aio.stem_of(p))
    return stems


@cli.command()
@_config_option
@click.option("--trace", "trace", multiple=True,
              help="Trace stem, file, or directory of traces (repeatable).")
@click.option("--series", default=None, help="OdeSeries artifact stem or file.")
@click.option("--k-max", type=int, default=None)
@click.option("--t-grid", default=None,
              help="Comma-separated times; default: the first trace's snapshots.")
@click.option("--out", type=click.Path(), default=None,
              help="Optional report stem (.json/.txt/.csv).")
@_force_option
@click.pass_context
def compare(ctx, **kw):
    """Compare simulation traces against an integrated series."""
    kw = _merge_config(ctx, kw)
    trace_opt = kw.get("trace") or ()
    if isinstance(trace_opt, str):
        trace_opt = [trace_opt]
    if not trace_opt:
        raise click.ClickException("missing required value: --trace")
    _require(kw, "series", "k_max")
    try:
        traces = [aio.read_trace(s) for s in _collect_trace_stems(trace_opt)]
        series = aio.read_series(kw["series"])
    except FileNotFoundError as e:
        raise click.ClickException(str(e))
    t_grid = _float_list(kw.get("t_grid"), "t grid")
    if t_grid is None:
        t_grid = [float(t) for t in traces[0].t]
    try:
        report = analysis.compare(traces, series, k_max=int(kw["k_max"]), t_grid=t_grid)
    except ValueError as e:
        raise click.ClickException(str(e))
    click.echo(report.to_text())
    if kw.get("out"):
        stem = aio.write_report(report, kw["out"], force=kw["force"])
        click.echo(f"wrote {stem}.json + {stem}.txt + {stem}.csv")


# ---------------------------------------------------------------------------
# gelation
# ---------------------------------------------------------------------------


@cli.command()
@_config_option
@click.option("--rule", default=None, help="Catalogued rule name.")
@click.option("--b", "b", type=int, default=None, help="Size cap for bounded_size.")
@click.option("--k", "k", type=int, default=None, help="Truncation order K.")
@click.option("--delta-mass", type=float, default=1e-2, show_default=True)
@click.option("--delta-gel", type=float, default=1e-2, show_default=True)
@click.option("--t-probe", type=float, default=1.0, show_default=True)
@click.option("--grid-step", type=float, default=0.01, show_default=True)
@click.option("--no-sensitivity", is_flag=True, help="Skip the K/2 rerun.")
@click.option("--rtol", type=float, default=1e-7, show_default=True)
@click.option("--atol", type=float, default=1e-9, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Optional report stem.")
@_force_option
@click.pass_context
def gelation(ctx, **kw):
    """Bracket the gelation window by integrating both gel modes."""
    kw = _merge_config(ctx, kw)
    _require(kw, "rule", "k")
    rule = _resolve_rule(kw["rule"], kw.get("b"))
    try:
        window = analysis.gelation_window(
            rule, K=int(kw["k"]), delta_mass=float(kw["delta_mass"]),
            delta_gel=float(kw["delta_gel"]), t_probe=float(kw["t_probe"]),
            grid_step=float(kw["grid_step"]), sensitivity=not kw["no_sensitivity"],
            rtol=float(kw["rtol"]), atol=float(kw["atol"]),
        )
    except ValueError as e:
        raise click.ClickException(str(e))
    click.echo(window.to_text())
    if kw.get("out"):
        stem = aio.write_report(window, kw["out"], force=kw["force"])
        click.echo(f"wrote {stem}.json + {stem}.txt")


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


@cli.command()
@_config_option
@click.option("--rule", default="erdos_renyi", show_default=True,
              help="Rule (drift recording requires erdos_renyi).")
@click.option("--n", type=int, default=None)
@click.option("--seeds", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed.")
@click.option("--t-max", type=float, default=1.0, show_default=True)
@click.option("--k-set", default="1", show_default=True,
              help="Comma-separated component sizes to track.")
@click.option("--lam", type=float, default=0.125, show_default=True)
@click.option("--eta", type=float, default=0.01, show_default=True,
              help="Large-component threshold for the one-giant event.")
@click.option("--workers", type=int, default=None,
              help="Worker processes [env ACHLIO_WORKERS or 1].")
@click.option("--out", type=click.Path(), default=None, help="Optional report stem.")
@_force_option
@click.pass_context
def diagnose(ctx, **kw):
    """Concentration diagnostic plus the at-most-one-giant event report."""
    kw = _merge_config(ctx, kw)
    _require(kw, "n")
    ks = [int(v) for v in _float_list(kw["k_set"], "k set")]
    t_max = float(kw["t_max"])
    seeds = int(kw["seeds"])
    if seeds < 1:
        raise click.ClickException("--seeds must be >= 1")
    base = int(kw["seed"])
    specs = [
        {
            "rule": kw["rule"], "B": None, "n": int(kw["n"]), "t_max": t_max,
            "snapshot_times": _default_snapshots(t_max),
            "seed": split_seed(base, i), "k_report": 100, "eta": float(kw["eta"]),
            "distinct_vertices": False, "drift_k_set": ks,
        }
        for i in range(seeds)
    ]
    try:
        traces = _run_sweep(specs, _workers(kw.get("workers")))
        diag = analysis.martingale_diagnostic(traces, k_set=ks, lam=float(kw["lam"]))
    except ValueError as e:
        raise click.ClickException(str(e))
    one_giant_runs = sum(1 for tr in traces if int(tr.big_components.max()) <= 1)
    diag.meta["one_giant"] = {
        "eta": float(kw["eta"]),
        "runs_with_at_most_one": one_giant_runs,
        "runs": seeds,
        "fraction": one_giant_runs / seeds,
    }
    click.echo(diag.to_text())
    click.echo(
        f"at most one component >= {kw['eta']} * n at every snapshot: "
        f"{one_giant_runs}/{seeds} runs"
    )
    if kw.get("out"):
        stem = aio.write_report(diag, kw["out"], force=kw["force"])
        click.echo(f"wrote {stem}.json + {stem}.txt")


# ---------------------------------------------------------------------------
# rules-list
# ---------------------------------------------------------------------------


@cli.command("rules-list")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable dump.")
def rules_list(as_json):
    """Dump the rule catalogue."""
    entries = []
    for name in builtin_names():
        rule = _resolve_rule(name, 1 if name == "bounded_size" else None)
        entries.append(
            {
                "name": name,
                "ell": rule.ell,
                "achlioptas": rule.is_achlioptas,
                "merging": rule.is_merging,
                "bounded_size_B": rule.bounded_size_B,
                "params": ["B"] if name == "bounded_size" else [],
            }
        )
    if as_json:
        click.echo(json.dumps(entries, indent=2))
        return
    click.echo(f"{'name':<14} {'ell':>4} {'achlioptas':>11} {'merging':>8} {'B':>4} params")
    for e in entries:
        b = "-" if e["bounded_size_B"] is None else str(e["bounded_size_B"])
        params = ",".join(e["params"]) or "-"
        click.echo(
            f"{e['name']:<14} {e['ell']:>4} {str(e['achlioptas']):>11} "
            f"{str(e['merging']):>8} {b:>4} {params}"
        )


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return 0 if e.exit_code == 0 else 1
    except click.ClickException as e:
        e.show()
        return 1
    except (click.Abort, KeyboardInterrupt):
        click.echo("aborted", err=True)
        return 1
    except (ValueError, FileNotFoundError, FileExistsError) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except Exception as e:  # resource exhaustion and other runtime failures
        click.echo(f"runtime failure: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
