"""Batch command-line front end.

    fracch --config run.json [--override key.path=value ...]
           [--out DIR] [--quiet]

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O
error.  Every failure prints a single line starting with a machine
parsable prefix (CONFIG_ERROR / SOLVER_ERROR / IO_ERROR).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, FracchError, SolverError
from .convergence import caputo_power_error
from .observables import TimeSeries
from .output import emit_field, emit_timeseries, write_manifest
from .sensitivity import PARAM_NAMES, tumor_sensitivity
from .solver import run


def _log(quiet: bool, msg: str):
    if not quiet:
        print(msg)


def run_simulate(cfg, out_dir: Path, quiet: bool) -> list[Path]:
    _log(quiet, f"simulate: {cfg.spec.grid.cells} cells, "
                f"{cfg.spec.n_steps} steps, alpha={cfg.spec.alpha}")
    out = run(cfg.spec, cfg.observables)
    paths = []
    if out.series:
        paths.append(emit_timeseries(list(out.series.values()),
                                     out_dir / "timeseries.csv"))
    diag = [TimeSeries(np.arange(1, cfg.spec.n_steps + 1) * cfg.spec.dt,
                       np.asarray(out.newton_iters, dtype=float),
                       "newton_iterations"),
            TimeSeries(np.arange(1, cfg.spec.n_steps + 1) * cfg.spec.dt,
                       np.asarray(out.residual_norms), "residual_norm")]
    if cfg.spec.n_steps > 0:
        paths.append(emit_timeseries(diag, out_dir / "diagnostics.csv"))
    for step, fields in sorted(out.snapshots.items()):
        for name, f in fields.items():
            paths.append(emit_field(f, out_dir / f"{name}_{step:06d}.vtk",
                                    label=name))
    if cfg.figures:
        from . import reporting
        paths.extend(reporting.plot_timeseries(out.series, out_dir))
        for step, fields in sorted(out.snapshots.items()):
            for name, f in fields.items():
                p = reporting.plot_field(f, out_dir, f"{name}_{step:06d}")
                if p is not None:
                    paths.append(p)
    for w in out.warnings:
        _log(quiet, f"warning: {w}")
    _log(quiet, f"done in {out.wall_time:.2f} s")
    return paths


def run_sensitivity(cfg, out_dir: Path, quiet: bool) -> list[Path]:
    s = cfg.sensitivity
    _log(quiet, f"sensitivity: N={s['n_samples']}, "
                f"workers={s['workers']}")
    times = None if s["times"] is None else np.asarray(s["times"])
    result = tumor_sensitivity(cfg.spec, priors=s["priors"],
                               n_samples=s["n_samples"], seed=cfg.seed,
                               times=times, workers=s["workers"])
    paths = []
    csv = out_dir / "sobol_indices.csv"
    lines = ["parameter,index"]
    lines += [f"{name},{val:.16e}" for name, val in
              zip(PARAM_NAMES, result.indices)]
    csv.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    paths.append(csv)
    per_time = out_dir / "sobol_indices_per_time.csv"
    header = "parameter," + ",".join(
        f"t{i}" for i in range(result.per_time_indices.shape[1]))
    lines = [header]
    for name, row in zip(PARAM_NAMES, result.per_time_indices):
        lines.append(name + "," + ",".join(f"{v:.16e}" for v in row))
    per_time.write_text("\n".join(lines) + "\n", encoding="utf-8",
                        newline="\n")
    paths.append(per_time)
    if cfg.figures:
        from . import reporting
        paths.append(reporting.plot_sensitivity(result, out_dir))
    for name, val in result.ranked():
        _log(quiet, f"  S[{name}] = {val:+.4f}")
    return paths


def run_convergence(cfg, out_dir: Path, quiet: bool) -> list[Path]:
    c = cfg.convergence
    _log(quiet, f"convergence: alphas={c['alphas']}, "
                f"powers={c['powers']}")
    dts = sorted(c["dt_values"], reverse=True)
    errors: dict[str, list[float]] = {}
    rows = []
    for alpha in c["alphas"]:
        for p in c["powers"]:
            errs = [caputo_power_error(alpha, p, dt) for dt in dts]
            label = f"alpha={alpha:g}, t^{p}"
            errors[label] = errs
            orders = [np.log(errs[i - 1] / errs[i])
                      / np.log(dts[i - 1] / dts[i])
                      for i in range(1, len(errs))]
            for i, dt in enumerate(dts):
                rows.append((alpha, p, dt, errs[i],
                             orders[i - 1] if i > 0 else float("nan")))
    csv = out_dir / "convergence.csv"
    lines = ["alpha,power,dt,error,observed_order"]
    lines += [f"{a:.16e},{p},{dt:.16e},{e:.16e},{o:.16e}"
              for a, p, dt, e, o in rows]
    csv.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    paths = [csv]
    if cfg.figures:
        from . import reporting
        paths.append(reporting.plot_convergence(dts, errors, out_dir))
    return paths


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracch",
        description="Batch solver for time-fractional Cahn-Hilliard models")
    parser.add_argument("--config", required=True,
                        help="path to a JSON run configuration")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY.PATH=VALUE",
                        help="override a config entry (repeatable)")
    parser.add_argument("--out", default=None,
                        help="output directory (default: from config)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    args = parser.parse_args(argv)

    try:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") \
                from err
        raw = cfgmod.apply_overrides(raw, args.override)
        cfg = cfgmod.load_config(raw)
        if args.out is not None:
            cfg.output_dir = args.out

        out_dir = Path(cfg.output_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise IOError(f"cannot create output directory: {err}") from err

        if cfg.mode == "simulate":
            paths = run_simulate(cfg, out_dir, args.quiet)
        elif cfg.mode == "sensitivity":
            paths = run_sensitivity(cfg, out_dir, args.quiet)
        else:
            paths = run_convergence(cfg, out_dir, args.quiet)
        write_manifest(paths, out_dir)
        return 0
    except ConfigError as err:
        print(f"CONFIG_ERROR: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        print(f"SOLVER_ERROR: {err}", file=sys.stderr)
        return 3
    except FracchError as err:
        print(f"CONFIG_ERROR: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"IO_ERROR: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
