"""
Command-line frontend.

Exit codes: 0 success, 1 selftest failure, 2 config parse error,
3 validation error, 4 solver failure, 5 acceptance precondition failure,
6 output error. Failures print a one-line JSON record on stderr.

Flags ``--seed``, ``--threads``, ``--out`` and ``--tol`` can also be set
through ``MIDSCALE_SEED``, ``MIDSCALE_THREADS``, ``MIDSCALE_OUT`` and
``MIDSCALE_TOL``; a flag wins over the environment, which wins over the
config file.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_battery
from .config import ConfigError, ConfigParseError, PreconditionError, RunConfig, run_experiment, run_qg
from .covering import greedy_net, inverse_mass_integral
from .experiments import _fmt, _jsonable
from .extension import ExtendedPotentials
from .measures import CostSpec, empirical_measure, read_cloud_csv
from .sinkhorn import ConvergenceError, solve

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4
EXIT_PRECONDITION = 5
EXIT_OUTPUT = 6

ENV_PREFIX = "MIDSCALE_"

EVAL_HELP = """\
--eval writes one header-less CSV row per input point with the columns
  f_hat, g_hat, T_1, ..., T_d
where f_hat and g_hat are the extended potentials at the point and T is the
entropic map evaluated at the point."""


class CliError(Exception):
    def __init__(self, code, kind, message, **details):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.details = details

    def record(self) -> str:
        return json.dumps(_jsonable({"error": self.kind, "exit_code": self.code, "message": str(self), **self.details}))


def _env(name, cast):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None or raw == "":
        return None
    try:
        return cast(raw)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, "validation", f"bad {ENV_PREFIX}{name.upper()}={raw!r}") from exc


def _override(args, name, cast):
    value = getattr(args, name, None)
    return value if value is not None else _env(name, cast)


def _default(value, fallback):
    return fallback if value is None else value


def _table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "output", f"cannot write {path}: {exc}") from exc


def _load_config(path, args) -> RunConfig:
    try:
        cfg = RunConfig.load(path)
        changes = {
            "seed": _override(args, "seed", int),
            "threads": _override(args, "threads", int),
            "out": _override(args, "out", str),
            "tol": _override(args, "tol", float),
        }
        return cfg.replace(**changes)
    except ConfigParseError as exc:
        raise CliError(EXIT_PARSE, "config_parse", str(exc), path=str(path)) from exc
    except (ConfigError, ValueError, TypeError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc), path=str(path)) from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _load_config(args.config, args)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        result = run_experiment(cfg)
    except ConvergenceError as exc:
        raise CliError(EXIT_SOLVER, "solver", str(exc), residual=exc.residual, iterations=exc.iterations) from exc
    except PreconditionError as exc:
        raise CliError(EXIT_PRECONDITION, "precondition", str(exc), **exc.details) from exc
    except (ConfigError, ValueError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc)) from exc

    # single aggregation point: everything below only writes files
    out = Path(cfg.out)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    digest = cfg.hash()
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(cfg.dumps(), encoding="utf-8", newline="\n")
        for table in result.tables:
            (out / f"{table.experiment}.csv").write_text(table.csv_text(), encoding="utf-8", newline="\n")
            side = table.sidecar(
                config_hash=digest,
                seeds={"base_seed": cfg.seed, "scheme": "SeedSequence([base_seed, crc32(experiment), grid_value, rep])"},
                timestamp=stamp,
                version=__version__,
                **result.extra,
            )
            (out / f"{table.experiment}.json").write_text(
                json.dumps(_jsonable(side), indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, "output", f"cannot write outputs: {exc}", out=str(out)) from exc
    for table in result.tables:
        slope = "nan" if table.slope is None else f"{table.slope:.4f}"
        err = "nan" if table.stderr is None else f"{table.stderr:.4f}"
        print(f"{table.experiment}: slope {slope} +/- {err}  -> {out / (table.experiment + '.csv')}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    tol = _default(_override(args, "tol", float), 1e-9)
    seed = _default(_override(args, "seed", int), 0)
    if not tol > 0:
        raise CliError(EXIT_VALIDATION, "validation", "tol must be positive")
    try:
        results = run_battery(seed=seed, tol=tol, perturb=args.perturb)
    except ConvergenceError as exc:
        raise CliError(EXIT_SOLVER, "solver", str(exc), residual=exc.residual) from exc
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _read_cloud(path):
    try:
        return read_cloud_csv(path)
    except OSError as exc:
        raise CliError(EXIT_PARSE, "input", f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, "validation", f"bad point cloud {path}: {exc}") from exc


def cmd_covering(args) -> int:
    if any(not d > 0 for d in args.delta):
        raise CliError(EXIT_VALIDATION, "validation", "every delta must be positive")
    pts = _read_cloud(args.cloud)
    P = empirical_measure(pts)
    rows = [(float(d), greedy_net(pts, d).count, inverse_mass_integral(P, d)) for d in args.delta]
    _emit(_table_csv(["delta", "greedy_count", "inverse_mass_integral"], rows), _override(args, "out", str))
    return EXIT_OK


def cmd_qg_check(args) -> int:
    cfg = _load_config(args.config, args)
    if cfg.experiment != "qg":
        raise CliError(EXIT_VALIDATION, "validation", 'qg-check needs a config with experiment = "qg"')
    try:
        res = run_qg(cfg)
    except ConvergenceError as exc:
        raise CliError(EXIT_SOLVER, "solver", str(exc), residual=exc.residual) from exc
    _emit(res.csv_text(), _override(args, "out", str))
    return EXIT_OK


def cmd_solve(args) -> int:
    if not args.eps > 0:
        raise CliError(EXIT_VALIDATION, "validation", f"eps must be positive, got {args.eps}")
    tol = _default(_override(args, "tol", float), 1e-9)
    if not tol > 0:
        raise CliError(EXIT_VALIDATION, "validation", "tol must be positive")
    X, Y = _read_cloud(args.x), _read_cloud(args.y)
    if X.shape[1] != Y.shape[1]:
        raise CliError(EXIT_VALIDATION, "validation", "point clouds have different dimensions")
    E = None
    if args.eval:
        E = _read_cloud(args.eval)
        if E.shape[1] != X.shape[1]:
            raise CliError(EXIT_VALIDATION, "validation", "evaluation points have the wrong dimension")
    if args.lipschitz is not None:
        cost = CostSpec(args.cost, lipschitz=args.lipschitz).freeze(X, Y)
    else:
        cost = CostSpec(args.cost).freeze(X, Y)
    a = np.full(X.shape[0], 1.0 / X.shape[0])
    b = np.full(Y.shape[0], 1.0 / Y.shape[0])
    try:
        sol = solve(a, b, cost(X, Y), args.eps, tol=tol)
    except ConvergenceError as exc:
        raise CliError(EXIT_SOLVER, "solver", str(exc), residual=exc.residual, iterations=exc.iterations) from exc
    out = _override(args, "out", str)
    record = json.loads(sol.to_json())
    record.update(value=sol.value, rescale_factor=cost.scale, lipschitz=cost.effective_lipschitz)
    _emit(json.dumps(record) + "\n", out)
    if E is not None:
        pot = ExtendedPotentials(sol, X, Y, cost)
        cols = np.column_stack([pot.extend_f(E), pot.extend_g(E), pot.entropic_map(E)])
        _emit(_table_csv(None, cols.tolist()), args.eval_out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midscale",
        description="Empirical entropic OT: solver, diagnostics and rate experiments.",
        epilog=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"midscale {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--seed", type=int, default=None, help="base seed (env MIDSCALE_SEED)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (env MIDSCALE_THREADS)")
        p.add_argument("--out", default=None, help=out_help + " (env MIDSCALE_OUT)")
        p.add_argument("--tol", type=float, default=None, help="solver tolerance (env MIDSCALE_TOL)")

    p = sub.add_parser("run", help="run an experiment from a TOML config")
    p.add_argument("config")
    common(p, "output directory, overrides the config's 'out'")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("selftest", help="run the exact-inequality battery")
    common(p, "unused")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="add this constant to the solved potentials before checking (negative control)")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("covering", help="greedy net sizes and inverse-mass integrals of a point cloud")
    p.add_argument("cloud", help="header-less CSV, one point per row")
    p.add_argument("--delta", type=float, nargs="+", required=True)
    common(p, "output CSV file (default stdout)")
    p.set_defaults(func=cmd_covering)

    p = sub.add_parser("qg-check", help="quadratic-growth diagnostic from a TOML config (experiment = \"qg\")")
    p.add_argument("config")
    common(p, "output CSV file (default stdout)")
    p.set_defaults(func=cmd_qg_check)

    p = sub.add_parser("solve", help="one-off Sinkhorn solve between two point clouds",
                       epilog=EVAL_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("x", help="source cloud CSV")
    p.add_argument("y", help="target cloud CSV")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--cost", choices=["sqeuclidean", "euclidean"], default="sqeuclidean")
    p.add_argument("--lipschitz", type=float, default=None, help="raw Lipschitz constant of the cost")
    p.add_argument("--eval", default=None, help="CSV of points at which to evaluate f_hat, g_hat and the map")
    p.add_argument("--eval-out", default=None, help="CSV file for --eval results (default stdout)")
    common(p, "JSON file for the solution (default stdout)")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(exc.record(), file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
