"""Command-line front end: experiment configs in, CSV tables and figures out.

Subcommands ``table1`` .. ``table5`` reproduce the simulation tables,
``figure1`` .. ``figure3`` the figure data (with a rendered PNG beside
each CSV), ``fit`` runs the profile estimator on a user CSV, and
``custom`` runs a configuration file.  Every CSV is paired with a JSON
manifest recording the configuration, the seed, the failure counts and
every numeric design switch, and is byte-identical across reruns and
worker counts for fixed inputs.

Exit codes: 0 success, 1 usage or configuration error, 2 total
estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EstimationError
from .kernels import KernelSpec
from .model import Dataset
from .optimize import SearchConfig
from .profile_likelihood import ProfileObjective, fit
from .rank import median_curve
from .plots import png_path_for, render_curve
from .simulate import (DEFAULT_SEED, ExperimentConfig, exp1_config, exp2_config,
                       exp3_config, f_curve_median, run_experiment)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ESTIMATION = 2

TABLE_HEADER = ["experiment", "n", "mu", "sigma2", "mechanism", "c", "component",
                "estimator", "mean", "median", "mse", "bias", "sd",
                "replications_used", "failures"]
FIGURE_HEADER = ["x", "median_value"]

_MECHANISM_BY_TABLE = {"table4": "decomposable_indicator",
                       "table5": "nondecomposable_line"}


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits with code 1 on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _decision_switches(config: ExperimentConfig | None = None,
                       profile_box=None, rank_box=None) -> dict:
    profile_box = profile_box or (config.profile_box if config else (-10.0, 10.0))
    rank_box = rank_box or (config.rank_box if config else (-250.0, 250.0))
    return {
        "b_evaluation_path": config.b_path if config else "quadrature",
        "f_star": ("standardized" if config and config.use_standardized
                   else "unstandardized"),
        "loo_weight_renormalization": (config.renormalize_loo
                                       if config else True),
        "profile_search_box": list(profile_box),
        "rank_search_box": list(rank_box),
        "kernel_family": config.kernel_family if config else "gaussian",
        "index_bandwidth": (config.index_bandwidth if config
                            and config.index_bandwidth is not None
                            else "rule-of-thumb per candidate beta"),
        "y_bandwidth": (config.y_bandwidth if config
                        and config.y_bandwidth is not None
                        else "rule-of-thumb on responses"),
        "bandwidth_rules": {
            "index": "0.85 * sd(index) * n^(-1/5), per candidate",
            "response": "geometric mean of 1.06*sd*n^(-1/5) on the marginal "
                        "responses and on least-squares pilot residuals",
        },
        "dispersion_handling": "likelihood estimators maximize over the "
                               "canonical coefficients (box scaled by the "
                               "known noise variance) and report on the "
                               "regression scale; rank baseline reported raw",
        "quadrature_points": 2001,
        "cum_integral_points": {"standalone_op": 201, "evaluator_base_grid": 401},
        "golden_section_tol": 1e-4,
        "simplex_ftol": 1e-6,
        "simplex_max_iter": 500,
        "multistart": "max(3, 2d) Latin hypercube points",
        "sd_convention": "sample standard deviation (n-1 divisor)",
        "failure_policy": "failed replications excluded from summaries, counted",
    }


def _write_manifest(out_path, command: str, seed: int, threads: int,
                    wall_time: float, configs: list, failures: dict,
                    outputs: list, switches: dict) -> None:
    payload = {
        "tool": "spefit",
        "version": __version__,
        "command": command,
        "master_seed": seed,
        "threads": threads,
        "wall_time_seconds": round(wall_time, 3),
        "outputs": [str(p) for p in outputs],
        "failures": failures,
        "decision_switches": switches,
        "configs": configs,
    }
    manifest_path = Path(str(out_path) + ".manifest.json")
    with open(manifest_path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# -- table subcommands ----------------------------------------------------


def _table_configs(command: str, seed: int, reps: int, n_filter: int | None,
                   c_filter: float | None):
    """(labels, config) pairs for one table subcommand."""
    rows = []

    def add(labels: dict, config: ExperimentConfig):
        rows.append((labels, config))

    if command == "table1":
        n = n_filter or 100
        for mu in (1.0, 2.0, 3.0):
            add({"n": n, "mu": mu, "sigma2": 1.0},
                exp1_config(n=n, replications=reps, master_seed=seed,
                            mu=mu, sigma2=1.0))
        for sigma2 in (0.1, 1.1, 1.15):
            add({"n": n, "mu": 1.0, "sigma2": sigma2},
                exp1_config(n=n, replications=reps, master_seed=seed,
                            mu=1.0, sigma2=sigma2))
        for mu in (0.0, 1.0, 2.0, 3.0):
            add({"n": n, "mu": mu, "sigma2": 1.15},
                exp1_config(n=n, replications=reps, master_seed=seed,
                            mu=mu, sigma2=1.15))
    elif command == "table2":
        for n in (n_filter,) if n_filter else (200, 400):
            for sigma2 in (0.1, 1.1, 1.15):
                add({"n": n, "mu": 1.0, "sigma2": sigma2},
                    exp1_config(n=n, replications=reps, master_seed=seed,
                                mu=1.0, sigma2=sigma2))
            for mu in (0.0, 2.0, 3.0):
                add({"n": n, "mu": mu, "sigma2": 1.15},
                    exp1_config(n=n, replications=reps, master_seed=seed,
                                mu=mu, sigma2=1.15))
    elif command == "table3":
        for n in (n_filter,) if n_filter else (100, 200):
            for sigma2 in (0.1, 0.5, 1.0):
                add({"n": n, "sigma2": sigma2},
                    exp2_config(n=n, replications=reps, master_seed=seed,
                                sigma2=sigma2))
    else:
        mechanism = _MECHANISM_BY_TABLE[command]
        cs = (0.6, 0.7, 0.8) if command == "table4" else (0.85, 0.90, 0.95)
        if c_filter is not None:
            cs = (c_filter,)
        for n in (n_filter,) if n_filter else (100, 200, 400):
            for c in cs:
                add({"n": n, "mechanism": mechanism, "c": c},
                    exp3_config(mechanism, c, n=n, replications=reps,
                                master_seed=seed))
    return rows


def _run_table(args) -> int:
    started = time.monotonic()
    configs = _table_configs(args.command, args.seed, args.reps,
                             getattr(args, "n", None), getattr(args, "c", None))
    csv_rows = []
    failures: dict[str, int] = {}
    any_used = False
    for labels, config in configs:
        summaries = run_experiment(config, threads=args.threads)
        for s in summaries:
            csv_rows.append([
                config.experiment, labels.get("n"), labels.get("mu"),
                labels.get("sigma2"), labels.get("mechanism"), labels.get("c"),
                s.component, s.estimator, s.mean, s.median, s.mse, s.bias,
                s.sd, s.replications_used, s.failures,
            ])
            failures[s.estimator] = failures.get(s.estimator, 0) + s.failures
            any_used = any_used or s.replications_used > 0
    _write_csv(args.out, TABLE_HEADER, csv_rows)
    _write_manifest(args.out, args.command, args.seed, args.threads,
                    time.monotonic() - started,
                    [asdict(c) for _, c in configs], failures, [args.out],
                    _decision_switches(configs[0][1]))
    return EXIT_OK if any_used else EXIT_ESTIMATION


# -- figure subcommands ---------------------------------------------------


def _run_figure1(args) -> int:
    started = time.monotonic()
    config = exp1_config(n=args.n, replications=args.reps, master_seed=args.seed,
                         mu=0.0, sigma2=args.sigma2, estimators=("rank",))
    grid = np.linspace(0.0, 10.0, 21)
    curve = median_curve(config, grid)
    _write_csv(args.out, FIGURE_HEADER, curve)
    outputs = [args.out]
    if not args.no_plot:
        xs = [p[0] for p in curve]
        ys = [p[1] for p in curve]
        outputs.append(render_curve(
            xs, ys, "coefficient", "median rank objective", png_path_for(args.out),
            title=f"rank objective, noise variance {args.sigma2:g}"))
    _write_manifest(args.out, args.command, args.seed, args.threads,
                    time.monotonic() - started, [asdict(config)], {}, outputs,
                    _decision_switches(config))
    return EXIT_OK


def _run_figure_curve(args) -> int:
    started = time.monotonic()
    if args.command == "figure2":
        config = exp1_config(n=args.n, replications=args.reps,
                             master_seed=args.seed, mu=0.0, sigma2=1.15,
                             estimators=("profile",))
    else:
        config = exp2_config(n=args.n, replications=args.reps,
                             master_seed=args.seed, sigma2=args.sigma2,
                             estimators=("profile",))
    grid = np.round(np.linspace(-3.0, 3.0, 61), 10)
    curve = f_curve_median(config, grid, threads=args.threads)
    _write_csv(args.out, FIGURE_HEADER, curve)
    outputs = [args.out]
    if not args.no_plot and curve:
        xs = np.array([p[0] for p in curve])
        ys = np.array([p[1] for p in curve])
        peak = float(np.max(ys))
        truth = np.exp(-0.5 * xs ** 2)
        outputs.append(render_curve(
            xs, ys / peak if peak > 0 else ys, "response",
            "base measure (unit peak)", png_path_for(args.out),
            reference=(xs, truth / truth.max(), "true curve"),
            title="median estimated base measure"))
    _write_manifest(args.out, args.command, args.seed, args.threads,
                    time.monotonic() - started, [asdict(config)], {}, outputs,
                    _decision_switches(config))
    return EXIT_OK


# -- fit subcommand --------------------------------------------------------


def parse_fit_csv(path) -> Dataset:
    """Read a dataset CSV with header x1,..,xd,y[,delta]."""
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("input CSV is empty") from None
        header = [h.strip() for h in header]
        has_delta = header[-1] == "delta"
        feature_cols = header[:-2] if has_delta else header[:-1]
        y_col = header[-2] if has_delta else header[-1]
        expected = [f"x{i + 1}" for i in range(len(feature_cols))]
        if y_col != "y" or feature_cols != expected or not feature_cols:
            raise ValueError(
                f"header must be x1,...,xd,y[,delta]; got {','.join(header)}")
        width = len(header)
        xs, ys, deltas = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValueError(f"line {lineno}: expected {width} fields, "
                                 f"got {len(row)}")
            values = []
            for name, cell in zip(header, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(f"line {lineno}, field {name!r}: could not "
                                     f"parse {cell.strip()!r} as a number") from None
            if has_delta:
                if values[-1] not in (0.0, 1.0):
                    raise ValueError(f"line {lineno}, field 'delta': must be 0 or 1")
                deltas.append(int(values[-1]))
                values = values[:-1]
            else:
                deltas.append(1)
            ys.append(values[-1])
            xs.append(values[:-1])
        if len(ys) < 2:
            raise ValueError("need at least 2 data rows")
    return Dataset(np.array(xs), np.array(ys), np.array(deltas))


def _run_fit(args) -> int:
    started = time.monotonic()
    dataset = parse_fit_csv(args.input)
    working = dataset.observed()
    index_kernel = (KernelSpec(args.index_bandwidth) if args.index_bandwidth
                    else None)
    y_kernel = KernelSpec(args.y_bandwidth) if args.y_bandwidth else None
    objective = ProfileObjective(working, index_kernel=index_kernel,
                                 y_kernel=y_kernel)
    if not args.dispersion > 0:
        raise ValueError("--dispersion must be positive")
    search = SearchConfig.box(args.box[0] / args.dispersion,
                              args.box[1] / args.dispersion, d=working.d)
    result = fit(objective, search)
    beta_report = args.dispersion * result.beta_hat

    rows = [[f"beta_{j + 1}", float(b)] for j, b in enumerate(beta_report)]
    rows.append(["loglik", result.loglik_at_max])
    rows.append(["converged", int(result.convergence_flag)])
    rows.append(["n_used", working.n])
    _write_csv(args.out, ["parameter", "value"], rows)

    curve_path = Path(args.out).with_name(Path(args.out).stem + "_fhat.csv")
    grid = np.linspace(float(working.y.min()), float(working.y.max()),
                       args.curve_points)
    curve_rows = []
    for y in grid:
        try:
            curve_rows.append([float(y), result.f_tilde_final(float(y)),
                               result.f_hat_final(float(y))])
        except EstimationError:
            continue
    _write_csv(curve_path, ["y", "f_tilde", "f_hat"], curve_rows)

    config_echo = {"input": str(args.input), "box": list(args.box),
                   "dispersion": args.dispersion,
                   "index_bandwidth": args.index_bandwidth,
                   "y_bandwidth": args.y_bandwidth,
                   "curve_points": args.curve_points, "n": working.n,
                   "d": working.d}
    switches = _decision_switches(profile_box=tuple(args.box))
    for out_path in (args.out, curve_path):
        _write_manifest(out_path, "fit", args.seed, args.threads,
                        time.monotonic() - started, [config_echo], {},
                        [args.out, curve_path], switches)
    return EXIT_OK


# -- custom subcommand ------------------------------------------------------


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(parser):
    def parse(text: str):
        return None if text.lower() in ("none", "") else parser(text)
    return parse


_CONFIG_FIELDS = {
    "experiment": str,
    "n": int,
    "replications": int,
    "beta_true": lambda v: tuple(float(p) for p in v.split(",")),
    "mu": float,
    "sigma2": float,
    "mechanism": _optional(str),
    "c": float,
    "master_seed": int,
    "index_bandwidth": _optional(float),
    "y_bandwidth": _optional(float),
    "kernel_family": str,
    "profile_box": lambda v: tuple(float(p) for p in v.split(",")),
    "rank_box": lambda v: tuple(float(p) for p in v.split(",")),
    "use_standardized": _parse_bool,
    "b_path": str,
    "renormalize_loo": _parse_bool,
    "estimators": _optional(lambda v: tuple(p.strip() for p in v.split(","))),
    "min_observed": int,
}


def parse_config_file(path) -> dict:
    """Parse a flat ``key = value`` config file with ``#`` comments."""
    values: dict = {}
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', "
                                 f"got {raw.strip()!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_FIELDS[key](text)
            except ValueError as exc:
                raise ValueError(f"line {lineno}, key {key!r}: {exc}") from None
    if "experiment" not in values:
        raise ValueError("config file must set 'experiment'")
    return values


def _run_custom(args) -> int:
    started = time.monotonic()
    values = parse_config_file(args.config)
    # Flags override config-file values, which override defaults.
    if args.seed is not None:
        values["master_seed"] = args.seed
    if args.reps is not None:
        values["replications"] = args.reps
    try:
        config = ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ValueError(str(exc)) from None
    summaries = run_experiment(config, threads=args.threads)
    csv_rows = []
    failures: dict[str, int] = {}
    any_used = False
    for s in summaries:
        csv_rows.append([
            config.experiment, config.n, config.mu, config.sigma2,
            config.mechanism, config.c if config.experiment == "exp3" else None,
            s.component, s.estimator, s.mean, s.median, s.mse, s.bias, s.sd,
            s.replications_used, s.failures,
        ])
        failures[s.estimator] = failures.get(s.estimator, 0) + s.failures
        any_used = any_used or s.replications_used > 0
    _write_csv(args.out, TABLE_HEADER, csv_rows)
    _write_manifest(args.out, "custom", config.master_seed, args.threads,
                    time.monotonic() - started, [asdict(config)], failures,
                    [args.out], _decision_switches(config))
    return EXIT_OK if any_used else EXIT_ESTIMATION


# -- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="spefit",
                     description="Profile-likelihood simulation studies and fits")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--seed", type=int, default=None,
                        help=f"master seed (default {DEFAULT_SEED})")
        sp.add_argument("--reps", type=int, default=None,
                        help="replications per configuration (default 100)")
        sp.add_argument("--threads", type=int,
                        default=max(1, os.cpu_count() or 1),
                        help="worker processes (output is identical for any value)")
        sp.add_argument("--out", default=out_default, help="output CSV path")

    for name in ("table1", "table2", "table3", "table4", "table5"):
        sp = sub.add_parser(name, help=f"reproduce simulation {name}")
        common(sp, f"{name}.csv")
        sp.add_argument("--n", type=int, default=None,
                        help="restrict to one sample size")
        if name in ("table4", "table5"):
            sp.add_argument("--c", type=float, default=None,
                            help="restrict to one observation probability")
        sp.set_defaults(func=_run_table)

    sp = sub.add_parser("figure1", help="median rank-objective curve data")
    common(sp, "figure1.csv")
    sp.add_argument("--sigma2", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--no-plot", action="store_true", help="skip the PNG")
    sp.set_defaults(func=_run_figure1)

    for name, help_text in (("figure2", "median base-measure curve, exp1"),
                            ("figure3", "median base-measure curve, exp2")):
        sp = sub.add_parser(name, help=help_text)
        common(sp, f"{name}.csv")
        sp.add_argument("--n", type=int, default=100)
        if name == "figure3":
            sp.add_argument("--sigma2", type=float, default=1.0)
        sp.add_argument("--no-plot", action="store_true", help="skip the PNG")
        sp.set_defaults(func=_run_figure_curve)

    sp = sub.add_parser("fit", help="profile fit of a dataset CSV")
    common(sp, "fit.csv")
    sp.add_argument("input", help="CSV with header x1,...,xd,y[,delta]")
    sp.add_argument("--box", type=float, nargs=2, default=(-10.0, 10.0),
                    metavar=("LO", "HI"), help="search box per coordinate")
    sp.add_argument("--dispersion", type=float, default=1.0,
                    help="known noise variance; estimates are reported on "
                         "the regression scale")
    sp.add_argument("--index-bandwidth", type=float, default=None)
    sp.add_argument("--y-bandwidth", type=float, default=None)
    sp.add_argument("--curve-points", type=int, default=101)
    sp.set_defaults(func=_run_fit)

    sp = sub.add_parser("custom", help="run a config file")
    common(sp, "custom.csv")
    sp.add_argument("--config", required=True, help="key = value config file")
    sp.set_defaults(func=_run_custom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed is None and args.command != "custom":
        args.seed = DEFAULT_SEED
    if args.reps is None and args.command != "custom":
        args.reps = 100
    try:
        return args.func(args)
    except ValueError as exc:
        sys.stderr.write(f"spefit: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"spefit: error: {exc}\n")
        return EXIT_USAGE
    except EstimationError as exc:
        sys.stderr.write(f"spefit: estimation failed: {exc}\n")
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
