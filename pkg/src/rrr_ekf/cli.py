"""Command-line interface: ``rrr-ekf {simulate,fit,compare,report}``.

Exit codes: 0 success, 2 configuration or data error (including usage
errors), 3 numeric failure or divergence, 1 for I/O failures.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .errors import DegenerateInputError, EstimationError, NumericError
from .io import (RunConfig, _write_csv, load_report_state, read_dataset, read_run_config,
                 save_report_state, write_dataset, write_report, write_truth)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _add_run_options(p):
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--case", type=int, choices=(1, 2, 3))
    p.add_argument("--iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--p0-scale", type=float, dest="p0_scale")
    p.add_argument("--q-seed", type=float, dest="q_seed")
    p.add_argument("--no-em-cross-terms", action="store_false", dest="em_cross_terms", default=None)
    p.add_argument("--acceleration", choices=("aitken", "none"))
    p.add_argument("--roll-length", choices=("b", "cbar"), dest="roll_length")
    p.add_argument("--qbar", type=float, help="dynamic pressure, lbf/ft^2 (case 2)")
    p.add_argument("--rho", type=float, help="air density, slug/ft^3 (case 2)")
    p.add_argument("--backend", choices=("compiled", "python"))
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrr-ekf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset and its truth record")
    p.add_argument("--case", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--N", type=int, default=2000, dest="N")
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--airspeed", type=float, default=400.0)
    p.add_argument("--units", choices=("internal", "display"), default="internal")
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--truth", help="truth JSON path (default: <out>.truth.json)")

    p = sub.add_parser("fit", help="run one method and write a report")
    _add_run_options(p)
    p.add_argument("--method", choices=("reference", "mt", "ms"))
    p.add_argument("--state", help="also save the report state as JSON")

    p = sub.add_parser("compare", help="run reference, MT and MS on one dataset")
    _add_run_options(p)

    p = sub.add_parser("report", help="regenerate report files from a saved state")
    p.add_argument("state", help="report state JSON written by fit --state")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _run_config(args) -> RunConfig:
    cfg = read_run_config(args.config) if args.config else RunConfig()
    keys = ("case", "method", "iterations", "tolerance", "patience", "p0_scale", "q_seed",
            "em_cross_terms", "acceleration", "roll_length", "qbar", "rho", "backend")
    changes = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return cfg.updated(**changes)


def _simulate(args):
    from .simulator import SimConfig, simulate_dataset

    sim = simulate_dataset(SimConfig(case=args.case, N=args.N, dt=args.dt, seed=args.seed,
                                     airspeed=args.airspeed))
    write_dataset(sim.data, args.out, sim.model, units=args.units)
    write_truth(sim, args.truth or args.out + ".truth.json")
    return EXIT_OK


def _fit_one(cfg, model, data, method):
    from .tuning import estimate

    return estimate(model, data, cfg.recipe(), method, backend=cfg.backend)


def _fit(args):
    cfg = _run_config(args)
    model = cfg.model()
    data = read_dataset(args.data, model)
    report = _fit_one(cfg, model, data, cfg.method)
    write_report(report, args.out)
    if args.state:
        save_report_state(report, args.state)
    return EXIT_OK


def _workers():
    raw = os.environ.get("RRR_EKF_THREADS", "")
    try:
        n = int(raw) if raw else os.cpu_count() or 1
    except ValueError:
        n = 1
    return max(1, min(3, n))


def _compare(args):
    from .tuning import METHODS

    cfg = _run_config(args)
    model = cfg.model()
    data = read_dataset(args.data, model)
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        futures = [pool.submit(_fit_one, cfg, model, data, m) for m in METHODS]
        reports = [f.result() for f in futures]
    os.makedirs(args.out, exist_ok=True)
    for m, r in zip(METHODS, reports):
        write_report(r, os.path.join(args.out, m))
    cols = list(METHODS)
    names = model.param_names
    _write_csv(os.path.join(args.out, "compare_theta.csv"), ["name"] + cols,
               [[n] + [r.theta_hat[i] for r in reports] for i, n in enumerate(names)])
    _write_csv(os.path.join(args.out, "compare_sigma.csv"), ["name"] + cols,
               [[n] + [r.sigma_theta[i] for r in reports] for i, n in enumerate(names)])
    qr = [["Q", s] + [r.Q[i, i] for r in reports] for i, s in enumerate(model.state_names)]
    qr += [["R", s] + [r.R[i, i] for r in reports] for i, s in enumerate(model.meas_names)]
    _write_csv(os.path.join(args.out, "compare_qr.csv"), ["matrix", "channel"] + cols, qr)
    _write_csv(os.path.join(args.out, "compare_costs.csv"), ["cost"] + cols,
               [[f"J{k + 1}"] + [r.costs[k] for r in reports] for k in range(8)])
    return EXIT_OK


def _report(args):
    write_report(load_report_state(args.state), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    handler = {"simulate": _simulate, "fit": _fit, "compare": _compare, "report": _report}
    try:
        return handler[args.command](args)
    except (NumericError, DegenerateInputError) as exc:
        print(f"rrr-ekf: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EstimationError as exc:
        print(f"rrr-ekf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rrr-ekf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
