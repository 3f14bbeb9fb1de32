"""Command-line front end: simulation, analytic tables, comparison reports.

Outputs are reproducible (identical config and seed give identical bytes,
independent of --threads) and atomic (written to a temp file and renamed, so
failures never leave partial artifacts).  CSV uses 17-significant-digit
floats, which round-trip exactly; JSON reports carry schema_version "1".
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import diffusion, experiments, formulas
from .core import RandomStream, sample_brownian

__all__ = ["main"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".hardedge-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_path(args, default_name: str) -> str:
    if args.output:
        return args.output
    base = os.environ.get("HARDEDGE_OUTPUT_DIR", ".")
    return os.path.join(base, default_name)


def _config_items(args, keys):
    return [(k, getattr(args, k)) for k in keys if getattr(args, k, None) is not None]


def _write_csv(path, config_items, fieldnames, rows):
    buf = io.StringIO()
    for k, v in config_items:
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_floats(s: str):
    return [float(v) for v in s.split(",") if v.strip()]


def cmd_sample_limit(args) -> int:
    opts = diffusion.SimOpts(dt=args.dt, horizon=args.horizon)
    config = _config_items(
        args, ["a", "mu", "mu_grid", "n_paths", "seed", "dt", "horizon", "k_max",
               "mu_min", "tol_mu", "format"]
    )
    rows = []
    if args.mu_grid:
        grid_mu = _parse_floats(args.mu_grid)
        horizon = args.horizon or diffusion.default_horizon(max(grid_mu))
        tg = diffusion.grid_for(max(grid_mu), diffusion.SimOpts(dt=args.dt, horizon=horizon))
        for r in range(args.n_paths):
            path = sample_brownian(RandomStream(args.seed, r), tg)
            counts = diffusion.cycle_count_profile(path, args.a, grid_mu, opts)
            for mu, c in zip(grid_mu, counts):
                rows.append(("count", r, "", mu, int(c), ""))
    else:
        if args.mu is None:
            print("sample-limit needs --mu or --mu-grid", file=sys.stderr)
            return 2
        horizon = args.horizon or diffusion.default_horizon(args.mu)
        tg = diffusion.grid_for(args.mu, diffusion.SimOpts(dt=args.dt, horizon=horizon))
        exceed = np.zeros(args.k_max, dtype=np.int64)
        for r in range(args.n_paths):
            path = sample_brownian(RandomStream(args.seed, r), tg)
            sample = diffusion.extract_points(path, args.a, args.mu_min, args.tol_mu, opts)
            for k, p in enumerate(sample.points, start=1):
                rows.append(("point", r, k, "", p, ""))
                if k <= args.k_max and p > args.mu:
                    exceed[k - 1] += 1
        for k in range(1, args.k_max + 1):
            p = exceed[k - 1] / args.n_paths
            se = math.sqrt(p * (1 - p) / args.n_paths)
            rows.append(("exceedance", "", k, args.mu, p, se))
    path = _out_path(args, "sample_limit.csv" if args.format == "csv" else "sample_limit.json")
    if args.format == "csv":
        _write_csv(path, config, ["kind", "replica", "k", "mu", "value", "stderr"], rows)
    else:
        _write_json(
            path,
            {
                "schema_version": experiments.SCHEMA_VERSION,
                "config": dict(config),
                "rows": [
                    dict(zip(["kind", "replica", "k", "mu", "value", "stderr"], r))
                    for r in rows
                ],
            },
        )
    print(path)
    return 0


_ANALYTIC_CHOICES = (
    "costs",
    "tail-a0",
    "largest-tail",
    "largest-density",
    "conjecture",
    "laplace",
    "rate",
)


def cmd_analytic(args) -> int:
    acc = formulas.SeriesAccuracy(abs_tol=args.abs_tol, max_terms=args.max_terms)
    a = args.a
    rows = []  # formula, a, b, parity, arg, value, error_bound, conjecture
    f = args.formula
    arg_list = _parse_floats(args.arg_list) if args.arg_list else []
    if f == "costs":
        seq = formulas.cost_sequence(a, args.n_max, args.parity)
        for n, v in enumerate(seq):
            rows.append((f, a, "", args.parity, n, float(v), 0.0, False))
    elif f == "tail-a0":
        for mu in arg_list:
            sv = formulas.tail_prob_a0(mu, acc)
            rows.append((f, 0.0, "", "", mu, sv.value, sv.error_bound, sv.conjecture))
    elif f == "largest-tail":
        for mu in arg_list:
            sv = formulas.largest_tail(a, mu, acc)
            rows.append((f, a, "", "", mu, sv.value, sv.error_bound, sv.conjecture))
    elif f == "largest-density":
        for x in arg_list:
            sv = formulas.largest_density(a, x, acc)
            rows.append((f, a, "", "", x, sv.value, sv.error_bound, sv.conjecture))
    elif f == "conjecture":
        for mu in arg_list:
            sv = formulas.conjectured_hit_prob(a, args.b, mu, acc)
            rows.append((f, a, args.b, "", mu, sv.value, sv.error_bound, sv.conjecture))
    elif f == "laplace":
        for theta in arg_list:
            sv = formulas.laplace_hat_mu1(a, theta, acc)
            rows.append((f, a, "", "", theta, sv.value, sv.error_bound, sv.conjecture))
    elif f == "rate":
        params = formulas.RateParams(a, args.phase)
        for t in arg_list:
            v = formulas.rate_function(params, t)
            rows.append((f, a, "", f"phase{args.phase}", t, v, 0.0, False))
    config = _config_items(
        args, ["formula", "a", "b", "parity", "phase", "n_max", "arg_list", "format"]
    )
    path = _out_path(args, f"analytic_{f}.csv")
    _write_csv(
        path,
        config,
        ["formula", "a", "b", "parity", "arg", "value", "error_bound", "conjecture"],
        rows,
    )
    print(path)
    return 0


def cmd_compare(args) -> int:
    kwargs = {}
    if args.n_paths is not None:
        if args.experiment == "finite-beta-convergence":
            kwargs["n_runs"] = args.n_paths
        elif args.experiment == "matrix-vs-gaps":
            kwargs["n_samples"] = args.n_paths
        else:
            kwargs["n_paths"] = args.n_paths
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.threads is not None:
        kwargs["n_jobs"] = args.threads
    try:
        report = experiments.run_experiment(args.experiment, **kwargs)
    except KeyError as e:
        print(str(e.args[0]), file=sys.stderr)
        return 2
    path = _out_path(args, f"compare_{args.experiment}.json")
    _write_json(path, report)
    print(path)
    return 0 if report["status"] in ("pass", "informational") else 1


def _build_parser():
    p = argparse.ArgumentParser(
        prog="hardedge",
        description="Hard-edge limit point process: simulation and analytics",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample-limit", help="sample the limit point process")
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--mu", type=float)
    s.add_argument("--mu-grid", dest="mu_grid")
    s.add_argument("--n-paths", dest="n_paths", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--horizon", type=float)
    s.add_argument("--k-max", dest="k_max", type=int, default=4)
    s.add_argument("--mu-min", dest="mu_min", type=float, default=1e-3)
    s.add_argument("--tol-mu", dest="tol_mu", type=float, default=1e-3)
    s.add_argument("--threads", type=int)
    s.add_argument("--output")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_sample_limit)

    s = sub.add_parser("analytic", help="evaluate closed formulas over a grid")
    s.add_argument("--formula", choices=_ANALYTIC_CHOICES, required=True)
    s.add_argument("--a", type=float, default=0.0)
    s.add_argument("--b", type=float, default=0.25)
    s.add_argument("--arg-list", dest="arg_list")
    s.add_argument("--n-max", dest="n_max", type=int, default=10)
    s.add_argument(
        "--parity",
        choices=(formulas.MINUS_TERMINAL, formulas.PLUS_TERMINAL),
        default=formulas.MINUS_TERMINAL,
    )
    s.add_argument("--phase", type=int, choices=(1, 2), default=1)
    s.add_argument("--abs-tol", dest="abs_tol", type=float, default=1e-12)
    s.add_argument("--max-terms", dest="max_terms", type=int, default=10**5)
    s.add_argument("--output")
    s.add_argument("--format", choices=("csv",), default="csv")
    s.set_defaults(func=cmd_analytic)

    s = sub.add_parser("compare", help="run a named comparison experiment")
    s.add_argument("--experiment", required=True)
    s.add_argument("--n-paths", dest="n_paths", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--output")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
