"""Random feasible systems and the multi-trial experiment runner."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ControlPolicy, ScenarioConfig
from .dynamics import (
    ConditioningError,
    ControllabilityError,
    LinSys,
    controllability_index,
    fit_growth_bound,
    inverse_gap_norms,
    lambda_min,
)
from .geometry import Polytope
from .localize import LoopContext, TrialTrace, active_localize, theoretical_bound
from .recovery import check_landmark_condition, landmark_margin, max_deviation
from .svp import find_svp

MAX_DRAWS = 100_000

STEP_HEADER = ["trial", "k", "y", "in_recovery", "diam_x0_cloud", "diam_x0_bound", "diam_m_cloud", "diam_xk_cloud"]
AGG_HEADER = [
    "k",
    "min_diam_x0",
    "mean_diam_x0",
    "max_diam_x0",
    "bound",
    "min_diam_m",
    "mean_diam_m",
    "max_diam_m",
]


class InfeasibleSystemError(RuntimeError):
    """No system passing the recovery conditions was found."""


@dataclass(frozen=True)
class FeasibleDraw:
    """Outcome of :func:`random_feasible_system` with its bookkeeping."""

    config: ScenarioConfig
    rejections: int
    Dbar: float
    margin: float


def _box(b) -> Polytope:
    if isinstance(b, Polytope):
        return b
    if "lo" in b:
        return Polytope.from_bounds(b["lo"], b["hi"])
    return Polytope.box(b["center"], b["side"])


def _draw_matrix(rng: np.random.Generator, n: int, lam: float) -> np.ndarray:
    """``lam Q R Q^{-1}`` with ``R`` block diagonal of slight rotations/stretches and ``Q`` near orthogonal."""
    R = np.zeros((n, n))
    i = 0
    while i < n:
        if i + 1 < n and rng.random() < 0.5:
            th = rng.uniform(-0.02, 0.02)
            R[i : i + 2, i : i + 2] = [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]
            i += 2
        else:
            R[i, i] = 1.0 + rng.uniform(0.0, 0.003)
            i += 1
    # pin the smallest eigenvalue modulus to exactly lam
    moduli = np.abs(np.linalg.eigvals(R))
    R = R / moduli.min()
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q @ (np.eye(n) + 0.02 * rng.standard_normal((n, n)))
    return lam * Q @ R @ np.linalg.inv(Q)


def random_feasible_system(
    seed: int,
    n: int,
    lambda_target: float,
    cfg_template: dict | None = None,
    *,
    input_dim: int | None = None,
    max_draws: int = MAX_DRAWS,
) -> FeasibleDraw:
    """Sample an unstable controllable pair meeting the landmark condition.

    Parameters
    ----------
    seed : int
    n : int
        State dimension.
    lambda_target : float
        Smallest eigenvalue modulus of the generated ``A`` (must exceed 1).
    cfg_template : dict
        Scenario fields other than ``sys`` (``r``, ``X0_box``, ``M_box`` and
        optional run settings), as produced by ``reference_template``.
    input_dim : int, optional
        Columns of ``B`` (default ``n``).

    Returns
    -------
    FeasibleDraw
        The accepted configuration, number of rejected draws, ``Dbar`` and the
        slack of the landmark condition.

    Raises
    ------
    InfeasibleSystemError
        If no draw passes within ``max_draws``.  When even the smallest
        possible ``Dbar`` for this instability fails, raised immediately.
    """
    if lambda_target <= 1.0:
        raise ValueError("lambda_target must exceed 1")
    if cfg_template is None:
        raise ValueError("cfg_template is required")
    t = dict(cfg_template)
    t.pop("lambda_target", None)
    r = float(t["r"])
    X0_box, M_box = _box(t["X0_box"]), _box(t["M_box"])
    if X0_box.n != n or M_box.n != n:
        raise ValueError("template boxes must have dimension n")
    alpha = float(t.get("alpha", math.sqrt(3.0) / 2.0))
    svp = find_svp(alpha, n)
    diam_M = M_box.diameter
    m_in = n if input_dim is None else int(input_dim)

    # |lam^t - 1| <= ||A^t - I|| and nbar >= ceil(n / m), so Dbar >= lam^{N nbar_min + 1} - 1
    nbar_min = math.ceil(n / m_in)
    floor_D = lambda_target ** (svp.N * nbar_min + 1) - 1.0
    best = landmark_margin(r, svp.eta, floor_D, n) - diam_M / r
    if best < 0:
        raise InfeasibleSystemError(
            f"landmark condition fails for every system with lambda_min = {lambda_target}: "
            f"margin {best:.6g} at the smallest possible Dbar {floor_D:.6g}"
        )

    rng = np.random.default_rng(seed)
    rejections = 0
    tightest = -math.inf
    for _ in range(max_draws):
        A = _draw_matrix(rng, n, lambda_target)
        B = rng.standard_normal((n, m_in))
        try:
            sys = LinSys(A, B)
            nbar = controllability_index(sys)
        except (ValueError, ControllabilityError, ConditioningError):
            rejections += 1
            continue
        Dbar = max_deviation(sys, svp.N, nbar)
        margin = landmark_margin(r, svp.eta, Dbar, n) - diam_M / r
        if not check_landmark_condition(diam_M, r, svp.eta, Dbar, n):
            tightest = max(tightest, margin)
            rejections += 1
            continue
        policy = t.get("arbitrary_control_policy", {"kind": "zero"})
        if isinstance(policy, str):
            policy = {"kind": policy}
        cfg = ScenarioConfig(
            sys=sys,
            r=r,
            X0_box=X0_box,
            M_box=M_box,
            alpha=alpha,
            seed=int(t.get("seed", seed)),
            max_steps=int(t.get("max_steps", 500)),
            trials=int(t.get("trials", 40)),
            arbitrary_control_policy=ControlPolicy(policy.get("kind", "zero"), float(policy.get("scale", 0.0))),
            grid_resolution=int(t.get("grid_resolution", 201)),
            c_growth=float(t.get("c_growth", 0.5)),
        )
        return FeasibleDraw(cfg, rejections, Dbar, margin)
    raise InfeasibleSystemError(
        f"no feasible system in {max_draws} draws; tightest landmark margin {tightest:.6g}"
    )


def draw_initial(cfg: ScenarioConfig, rng: np.random.Generator, max_tries: int = 10_000):
    """Consistent ``(x0, m)``: ``m ~ U(M_box)`` then ``x0 ~ U(X0_box ∩ B(m, r))`` by rejection."""
    xlo, xhi = cfg.X0_box.bounds
    mlo, mhi = cfg.M_box.bounds
    r = cfg.r
    for _ in range(max_tries):
        m = rng.uniform(mlo, mhi)
        lo, hi = np.maximum(xlo, m - r), np.minimum(xhi, m + r)
        if np.any(lo > hi):
            continue
        for _ in range(64):
            x0 = rng.uniform(lo, hi)
            if np.linalg.norm(x0 - m) <= r:
                return x0, m
    raise RuntimeError("could not draw a consistent initial state and landmark")


@dataclass
class ExperimentReport:
    """Aggregated result of a multi-trial run."""

    config: ScenarioConfig
    traces: list[TrialTrace]
    aggregate: dict
    N: int
    nbar: int
    K: float
    violated_trials: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violated_trials

    def summary(self) -> dict:
        return {
            "trials": len(self.traces),
            "N": self.N,
            "nbar": self.nbar,
            "K": self.K,
            "violated_trials": list(self.violated_trials),
            "max_gap": max(t.last_gap for t in self.traces),
            "final_mean_diam_x0": float(self.aggregate["mean_diam_x0"][-1]),
            "final_mean_diam_m": float(self.aggregate["mean_diam_m"][-1]),
            "per_trial": [t.summary() for t in self.traces],
        }


def _run_trial(args) -> TrialTrace:
    cfg, trial, ctx = args
    rng = np.random.default_rng([cfg.seed, trial, 1])
    x0, m = draw_initial(cfg, rng)
    return active_localize(cfg, x0, m, trial=trial, context=ctx)


def _aggregate(traces: list[TrialTrace], bound: np.ndarray) -> dict:
    T = max(t.steps for t in traces)

    def stack(name):
        out = np.full((len(traces), T), np.nan)
        for i, t in enumerate(traces):
            v = getattr(t, name)
            out[i, : v.shape[0]] = v
        return out

    x0, mm = stack("diam_x0_cloud"), stack("diam_m_cloud")
    return {
        "k": np.arange(T),
        "min_diam_x0": np.nanmin(x0, axis=0),
        "mean_diam_x0": np.nanmean(x0, axis=0),
        "max_diam_x0": np.nanmax(x0, axis=0),
        "bound": bound[:T],
        "min_diam_m": np.nanmin(mm, axis=0),
        "mean_diam_m": np.nanmean(mm, axis=0),
        "max_diam_m": np.nanmax(mm, axis=0),
    }


def run_experiment(
    cfg: ScenarioConfig,
    out_dir=None,
    *,
    plots: bool = False,
    workers: int = 1,
) -> ExperimentReport:
    """Run ``cfg.trials`` closed-loop trials and aggregate their diameters.

    Trial ``i`` draws its start from ``default_rng([seed, i, 1])`` and its
    exploratory inputs from ``default_rng([seed, i])``, so results do not
    depend on ``workers``.  With ``out_dir`` set, writes ``steps.csv``,
    ``aggregate.csv`` and ``summary.json`` (plus SVG charts if ``plots``).

    Raises
    ------
    InfeasibleSystemError
        If the configuration fails the landmark condition.
    """
    ctx = LoopContext.for_config(cfg)
    Dbar = max_deviation(cfg.sys, ctx.svp.N, ctx.nbar)
    if not check_landmark_condition(cfg.M_box.diameter, cfg.r, ctx.svp.eta, Dbar, cfg.n):
        raise InfeasibleSystemError("configuration fails the landmark condition")
    jobs = [(cfg, i, ctx) for i in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            traces = list(ex.map(_run_trial, jobs))
    else:
        traces = [_run_trial(j) for j in jobs]
    bound = theoretical_bound(
        np.arange(cfg.max_steps), cfg.sys, cfg.r, ctx.growth, ctx.svp.N, ctx.nbar, cfg.X0_box.diameter
    )
    agg = _aggregate(traces, bound)
    report = ExperimentReport(
        cfg,
        traces,
        agg,
        ctx.svp.N,
        ctx.nbar,
        ctx.growth.K,
        [i for i, t in enumerate(traces) if t.violated],
    )
    if out_dir is not None:
        write_outputs(report, out_dir, plots=plots)
    return report


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_outputs(report: ExperimentReport, out_dir, *, plots: bool = False) -> None:
    """Write the per-step CSV, aggregate CSV, JSON summary and optional SVG charts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    header = STEP_HEADER + [f"x{i + 1}" for i in range(cfg.n)] + [f"u{i + 1}" for i in range(cfg.sys.m)]
    with open(out / "steps.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(report.traces):
            for k in range(t.steps):
                row = [
                    i,
                    int(t.k[k]),
                    int(t.y[k]),
                    bool(t.in_recovery[k]),
                    t.diam_x0_cloud[k],
                    t.diam_x0_bound[k],
                    t.diam_m_cloud[k],
                    t.diam_xk_cloud[k],
                    *t.x[k],
                    *t.u[k],
                ]
                w.writerow([_fmt(v) for v in row])
    agg = report.aggregate
    with open(out / "aggregate.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for k in range(agg["k"].shape[0]):
            w.writerow([_fmt(agg[h][k]) if h != "k" else str(k) for h in AGG_HEADER])
    (out / "summary.json").write_text(json.dumps(report.summary(), indent=2) + "\n")
    cfg.save(out / "config.json")
    if plots:
        from .plots import line_chart

        k = agg["k"]
        line_chart(
            out / "diam_x0.svg",
            k,
            agg["mean_diam_x0"],
            agg["min_diam_x0"],
            agg["max_diam_x0"],
            bound=agg["bound"],
            title="Initial-state estimate diameter",
            log_y=True,
        )
        line_chart(
            out / "diam_m.svg",
            k,
            agg["mean_diam_m"],
            agg["min_diam_m"],
            agg["max_diam_m"],
            title="Landmark estimate diameter",
        )


def certify_growth(sys: LinSys, c: float = 0.5, horizon: int = 1000) -> tuple[float, bool]:
    """Fit ``K`` and check ``||(A^k - I)^{-1}|| <= K lambda_min^{-c k}`` for ``k = 1..horizon``."""
    gb = fit_growth_bound(sys, c, horizon)
    norms = inverse_gap_norms(sys, horizon)
    k = np.arange(1, horizon + 1)
    rhs = gb.K * np.exp(-c * k * math.log(lambda_min(sys)))
    return gb.K, bool(np.all(norms <= rhs * (1 + 1e-12)))


__all__ = [
    "AGG_HEADER",
    "ExperimentReport",
    "FeasibleDraw",
    "InfeasibleSystemError",
    "STEP_HEADER",
    "certify_growth",
    "draw_initial",
    "random_feasible_system",
    "run_experiment",
    "write_outputs",
]
