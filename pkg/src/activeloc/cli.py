"""Command-line interface: ``activeloc <command> ...`` or ``python3 -m activeloc``."""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, reference_template
from .dynamics import controllability_index
from .experiment import InfeasibleSystemError, random_feasible_system, run_experiment, write_outputs
from .geometry import min_enclosing_ball
from .localize import LoopContext, active_localize
from .recovery import condition_report, max_deviation
from .svp import find_svp


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def _cmd_svp(args) -> int:
    svp = find_svp(args.alpha, args.dim, seed=args.seed)
    print(json.dumps(svp.to_dict(), indent=2))
    return 0


def _cmd_check(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    svp = find_svp(cfg.alpha, cfg.n)
    nbar = controllability_index(cfg.sys)
    D = max_deviation(cfg.sys, svp.N, 1)
    Dbar = max_deviation(cfg.sys, svp.N, nbar)
    r0 = args.r0 if args.r0 is not None else min_enclosing_ball(cfg.X0_box.vertices).radius
    rows = condition_report(
        r=cfg.r,
        eta=svp.eta,
        n=cfg.n,
        N=svp.N,
        nbar=nbar,
        D=D,
        Dbar=Dbar,
        diam_M=cfg.M_box.diameter,
        diam_X0=cfg.X0_box.diameter,
        r0=r0,
    )
    print(f"N = {svp.N}  eta = {svp.eta:.12g}  nbar = {nbar}  D = {D:.12g}  Dbar = {Dbar:.12g}")
    for row in rows:
        verdict = "PASS" if row["pass"] else "FAIL"
        print(f"{row['name']:<17} lhs = {row['lhs']:.12g}  rhs = {row['rhs']:.12g}  {verdict}")
    # only the landmark condition is required by the closed loop
    return 0 if rows[-1]["pass"] else 1


def _cmd_random(args) -> int:
    template = reference_template(args.setup, seed=args.seed)
    try:
        draw = random_feasible_system(args.seed, args.dim, args.lam, template, input_dim=args.inputs)
    except InfeasibleSystemError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    text = draw.config.dumps()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    print(
        f"rejections = {draw.rejections}  Dbar = {draw.Dbar:.12g}  landmark margin = {draw.margin:.12g}",
        file=_sys.stderr,
    )
    return 0


def _cmd_simulate(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    x0, m = _floats(args.x0), _floats(args.m)
    trace = active_localize(cfg, x0, m, context=LoopContext.for_config(cfg))
    if args.out:
        out = Path(args.out)
        with open(out, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(
                ["k", "y", "in_recovery", "recovery_step_index", "diam_x0_cloud", "diam_x0_bound", "diam_m_cloud"]
                + [f"x{i + 1}" for i in range(cfg.n)]
                + [f"u{i + 1}" for i in range(cfg.sys.m)]
            )
            for k in range(trace.steps):
                w.writerow(
                    [k, int(trace.y[k]), int(trace.in_recovery[k]), int(trace.recovery_step_index[k])]
                    + [repr(float(v)) for v in (trace.diam_x0_cloud[k], trace.diam_x0_bound[k], trace.diam_m_cloud[k])]
                    + [repr(float(v)) for v in trace.x[k]]
                    + [repr(float(v)) for v in trace.u[k]]
                )
    print(json.dumps(trace.summary(), indent=2))
    return 1 if trace.violated else 0


def _cmd_experiment(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.steps is not None:
        overrides["max_steps"] = args.steps
    if overrides:
        d = cfg.to_dict()
        d.update(overrides)
        cfg = ScenarioConfig.from_dict(d)
    try:
        report = run_experiment(cfg, workers=args.workers)
    except InfeasibleSystemError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    write_outputs(report, args.out, plots=args.plots)
    s = report.summary()
    print(
        f"trials = {s['trials']}  N nbar = {report.N * report.nbar}  max gap = {s['max_gap']}  "
        f"final mean diam X0 = {s['final_mean_diam_x0']:.6g}  final mean diam M = {s['final_mean_diam_m']:.6g}"
    )
    if not report.ok:
        print(f"violations in trials {report.violated_trials}", file=_sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activeloc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("svp", help="construct a spherical Voronoi partition")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_svp)

    s = sub.add_parser("check-conditions", help="evaluate the recovery feasibility inequalities")
    s.add_argument("--config", required=True)
    s.add_argument("--r0", type=float, default=None, help="enclosing radius (default: ball around X0_box)")
    s.set_defaults(func=_cmd_check)

    s = sub.add_parser("random-system", help="sample a feasible scenario")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--inputs", type=int, default=None, help="columns of B (default: dim)")
    s.add_argument("--setup", type=int, default=1, choices=(1, 2), help="box priors template")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_random)

    s = sub.add_parser("simulate", help="run one closed-loop trial")
    s.add_argument("--config", required=True)
    s.add_argument("--x0", required=True, help="comma or space separated coordinates")
    s.add_argument("--m", required=True)
    s.add_argument("--out", default=None, help="per-step CSV")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("experiment", help="run the multi-trial experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--plots", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--steps", type=int, default=None)
    s.set_defaults(func=_cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args))


if __name__ == "__main__":
    raise SystemExit(main())
