"""Command-line driver: ``frogsim <command> ...``.

Exit codes: 0 success (or certified), 2 not certified / unknown, 1 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import binary_certificate, dary_certificate, find_d0, optimize_constants
from .engine import SimConfig, resolve_threads, run_trials, summarize, trials_csv
from .operators import Poisson, StarModelParams, exact_B, monte_carlo_B

EXIT_OK, EXIT_USAGE, EXIT_NOT_CERTIFIED = 0, 1, 2
SWEEP_CSV_HEADER = "# frogsim sweep v1"


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    # a manifest from an earlier run carries its config under "config"
    if isinstance(data, dict) and "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def _build_config(args) -> SimConfig:
    data = _load_config(args.config)
    flags = {
        "d": args.d, "mu": args.mu, "walk": args.walk, "depth_cap": args.depth,
        "step_cap": args.step_cap, "trials": args.trials, "seed": args.seed,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    try:
        return SimConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _threads(args) -> int:
    try:
        return resolve_threads(args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_simulate(args) -> int:
    config = _build_config(args)
    threads = _threads(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    records = run_trials(config, threads)
    summary = summarize(records)
    paths = {name: str(out / name) for name in ("manifest.json", "summary.json", "trials.csv")}
    _write(out / "trials.csv", trials_csv(records))
    _write(out / "summary.json", json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    manifest = {
        "command": "simulate",
        "config": config.to_dict(),
        "seed": config.seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": paths,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary.to_dict(), sort_keys=True))
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def sweep_rows(base: SimConfig, ds, mus, k: int, threads: int) -> list[list]:
    rows = []
    for d in sorted(ds):
        for mu in sorted(mus):
            records = run_trials(base.replace(d=d, mu=mu), threads)
            visits = np.array([r.root_visits for r in records])
            rows.append([
                d, mu, float(visits.mean()), float((visits >= k).mean()),
                float(np.mean([r.censored for r in records])),
            ])
    return rows


def cmd_sweep(args) -> int:
    base = _build_config(args)
    threads = _threads(args)
    try:
        ds, mus = _int_list(args.d_values), _float_list(args.mu_values)
    except ValueError as exc:
        raise UsageError(f"bad grid: {exc}") from exc
    if not ds or not mus:
        raise UsageError("grid must be nonempty")
    try:
        rows = sweep_rows(base, ds, mus, args.k, threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    buf = io.StringIO()
    buf.write(SWEEP_CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "mu", "mean_visits", f"p_visits_ge_{args.k}", "censoring_rate"])
    w.writerows(rows)
    if args.out:
        _write(Path(args.out), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_operator(args) -> int:
    try:
        params = StarModelParams(args.d, args.mu, Poisson(args.lam))
        if args.mc:
            dist = monte_carlo_B(params, args.mc, args.seed, _threads(args))
        else:
            dist = exact_B(args.d, args.mu, args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    table, _ = dist.pmf_table()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["k", "probability"])
    for k, p in enumerate(table):
        if p > 0:
            w.writerow([k, repr(float(p))])
    if dist.inf_mass > 0:
        w.writerow(["inf", repr(dist.inf_mass)])
    return EXIT_OK


def _emit(report) -> int:
    print(report.to_json())
    return EXIT_OK if report.certified else EXIT_NOT_CERTIFIED


def cmd_certify(args) -> int:
    try:
        if args.kind == "binary":
            return _emit(binary_certificate(args.mu))
        report = dary_certificate(args.d, args.C, args.c, "exact" if args.exact_q else "bounded", args.grid_step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return _emit(report)


def cmd_find_d0(args) -> int:
    try:
        d0 = find_d0(args.C, args.c)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = dary_certificate(d0, args.C, args.c)
    report.d0 = d0
    return _emit(report)


def cmd_optimize(args) -> int:
    try:
        result = optimize_constants(args.d, "bounded" if args.bounded_q else "exact")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if result.feasible else EXIT_NOT_CERTIFIED


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with SimConfig fields, or a manifest.json")
    p.add_argument("--d", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--walk", choices=["srw", "nonbacktracking", "self-similar"])
    p.add_argument("--depth", type=int, help="depth cap")
    p.add_argument("--step-cap", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (default: $FROGSIM_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frogsim", description="Frog model simulator and recurrence certifier.")
    parser.add_argument("--version", action="version", version=f"frogsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run trials and write manifest.json, summary.json, trials.csv")
    _sim_flags(p)
    p.add_argument("--out", default="run", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid over d and mu, one CSV row per cell")
    _sim_flags(p)
    p.add_argument("--d-values", required=True, help="comma-separated d values")
    p.add_argument("--mu-values", required=True, help="comma-separated mu values")
    p.add_argument("--k", type=int, default=1, help="report P[visits >= k]")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("operator", help="pmf of B(Poi(lambda)) as CSV")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact law (default)")
    mode.add_argument("--mc", type=_positive_int, metavar="N", help="Monte Carlo with N samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_operator)

    p = sub.add_parser("certify", help="recurrence certificate as JSON")
    csub = p.add_subparsers(dest="kind", required=True)
    b = csub.add_parser("binary")
    b.add_argument("--mu", type=float, required=True)
    b.set_defaults(func=cmd_certify)
    g = csub.add_parser("dary")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--C", type=float, required=True)
    g.add_argument("--c", type=float, required=True)
    g.add_argument("--exact-q", action="store_true")
    g.add_argument("--grid-step", type=float)
    g.set_defaults(func=cmd_certify)

    p = sub.add_parser("find-d0", help="smallest d where the lambda-free majorant is below e^C")
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.set_defaults(func=cmd_find_d0)

    p = sub.add_parser("optimize", help="smallest certifiable C for a given d")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--bounded-q", action="store_true", help="use the Hoeffding bound instead of exact q")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"frogsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
