"""Closed-loop localization from one-bit proximity measurements.

While the landmark is in range the controller applies an arbitrary input and
refines its estimates.  When the signal is lost it runs a recovery plan that
is guaranteed to bring the state back in range, keeping the estimates frozen
until the next positive bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .dynamics import GrowthBound, LinSys, controllability_index, fit_growth_bound, step
from .estimator import EstimatorOptions, EstimatorState, analytic_diam_bound, recovery_ball
from .geometry import EPS_MEM, estimate_membership
from .recovery import RecoveryConditionError, generalized_rcs
from .svp import SVP, find_svp

BOUND_TOL = 1e-6
MONOTONE_TOL = 1e-9


def sense(x, m, r: float) -> int:
    """1 if ``||x - m|| <= r`` (boundary included), else 0.

    Examples
    --------
    >>> sense([2.0, 0.0], [0.0, 0.0], 2.0)
    1
    """
    if r <= 0:
        raise ValueError("r must be positive")
    d = np.asarray(x, dtype=float) - np.asarray(m, dtype=float)
    return int(math.sqrt(float(d @ d)) <= r)


def theoretical_bound(
    k, sys: LinSys, r: float, gb: GrowthBound, N: int, nbar: int, diam_X0: float
):
    """Contraction envelope ``min(C a^k, diam_X0)``.

    ``C = 4 r K lambda_min^{c N nbar}`` and ``a = lambda_min^{-c}`` come from the
    growth bound ``gb``.  Accepts a scalar or an array of times.
    """
    lam, c = gb.lambda_min, gb.c
    logC = math.log(4.0 * r * gb.K) + c * N * nbar * math.log(lam)
    val = np.exp(logC - c * np.asarray(k, dtype=float) * math.log(lam))
    out = np.minimum(val, diam_X0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class TrialTrace:
    """Per-step record of one closed-loop run.

    Arrays are indexed by time ``k``.  ``diam_xk_cloud`` is NaN at steps with a
    zero bit, and ``recovery_step_index`` is -1 outside recovery.
    """

    k: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    diam_x0_cloud: np.ndarray
    diam_x0_bound: np.ndarray
    diam_m_cloud: np.ndarray
    diam_xk_cloud: np.ndarray
    in_recovery: np.ndarray
    recovery_step_index: np.ndarray
    last_gap: int = 0
    violations: list = field(default_factory=list)
    positives: list = field(default_factory=list)
    N: int = 0
    nbar: int = 1

    @property
    def steps(self) -> int:
        return self.k.shape[0]

    @property
    def violated(self) -> bool:
        return bool(self.violations)

    def summary(self) -> dict:
        return {
            "steps": int(self.steps),
            "positives": len(self.positives),
            "last_gap": int(self.last_gap),
            "max_allowed_gap": int(self.N * self.nbar),
            "final_diam_x0_cloud": float(self.diam_x0_cloud[-1]),
            "final_diam_x0_bound": float(self.diam_x0_bound[-1]),
            "final_diam_m_cloud": float(self.diam_m_cloud[-1]),
            "violations": list(self.violations),
        }


@dataclass(frozen=True)
class LoopContext:
    """Quantities shared by every trial of a scenario."""

    svp: SVP
    nbar: int
    growth: GrowthBound

    @classmethod
    def for_config(cls, cfg: ScenarioConfig) -> "LoopContext":
        svp = find_svp(cfg.alpha, cfg.n)
        nbar = controllability_index(cfg.sys)
        gb = fit_growth_bound(cfg.sys, cfg.c_growth, max(1000, cfg.max_steps))
        return cls(svp, nbar, gb)


def active_localize(
    cfg: ScenarioConfig,
    x0,
    m,
    *,
    trial: int = 0,
    context: LoopContext | None = None,
    options: EstimatorOptions | None = None,
    check: bool = True,
) -> TrialTrace:
    """Run one closed-loop trial from true initial state ``x0`` and landmark ``m``.

    Ground truth is used only to simulate the plant and to audit the
    estimates; the controller sees nothing but the measured bits.  Audit
    failures (memberships, bounds, monotonicity, gap length) are recorded in
    ``violations``; an exhausted recovery ends the trial.
    """
    sys, r, n = cfg.sys, cfg.r, cfg.n
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    m = np.asarray(m, dtype=float).reshape(-1)
    if sense(x0, m, r) != 1:
        raise ValueError("the initial state must see the landmark")
    ctx = context or LoopContext.for_config(cfg)
    svp, nbar, gb = ctx.svp, ctx.nbar, ctx.growth
    N = svp.N
    if options is None:
        options = EstimatorOptions(grid_resolution=cfg.grid_resolution)
    diam_X0 = cfg.X0_box.diameter
    rng = np.random.default_rng([cfg.seed, trial])

    T = cfg.max_steps
    xs = np.zeros((T, n))
    us = np.zeros((T, sys.m))
    ys = np.zeros(T, dtype=int)
    dx0 = np.zeros(T)
    dm = np.zeros(T)
    dxk = np.full(T, np.nan)
    rec = np.zeros(T, dtype=bool)
    rec_idx = np.full(T, -1)
    bound = theoretical_bound(np.arange(T), sys, r, gb, N, nbar, diam_X0)

    est = EstimatorState.start(cfg.X0_box, cfg.M_box, sys, r, options)
    violations: list[str] = []
    plan = None
    plan_pos = 0
    zeros_run = 0
    max_run = 0
    prev_dx0 = math.inf
    prev_dm = math.inf
    seen_bloats: set[int] = set()
    x = x0.copy()
    last_k = -1

    for k in range(T):
        last_k = k
        xs[k] = x
        y = sense(x, m, r)
        ys[k] = y
        if y:
            zeros_run = 0
            plan = None
            M_prior = est.M_hat
            X0_hat, Xk_hat, M_hat = est.positive()
            u = cfg.arbitrary_control_policy.draw(rng, sys.m)
            dxk[k] = Xk_hat.cloud_diameter
            if check:
                _audit_positive(
                    k, x0, x, m, r, est, M_prior, seen_bloats, violations, sys, dxk[k]
                )
        else:
            zeros_run += 1
            max_run = max(max_run, zeros_run)
            rec[k] = True
            if plan is None:
                ball = recovery_ball(est.Xk_hat, r, options)
                u0 = est.controls[est.L[-1]]
                try:
                    plan = generalized_rcs(svp, ball.center, ball.radius, sys, r, u0, nbar)
                except RecoveryConditionError as exc:
                    violations.append(f"k={k}: recovery refused: {exc}")
                    break
                plan_pos = 0
            if plan_pos >= len(plan):
                violations.append(f"k={k}: recovery exhausted {len(plan)} steps without a positive bit")
                break
            u = plan.controls[plan_pos]
            rec_idx[k] = plan_pos
            plan_pos += 1
        us[k] = u
        dx0[k] = est.X0_hat.cloud_diameter
        dm[k] = est.M_hat.cloud_diameter
        if check:
            d_k = est.L[-1]
            if d_k < k - N * nbar:
                violations.append(f"k={k}: last positive time {d_k} older than k - N nbar")
            if zeros_run > N * nbar:
                violations.append(f"k={k}: {zeros_run} consecutive zero bits exceed N nbar = {N * nbar}")
            if dx0[k] > bound[k] + BOUND_TOL:
                violations.append(f"k={k}: X0 diameter {dx0[k]:.6g} above bound {bound[k]:.6g}")
            if d_k >= 1 and dx0[k] > analytic_diam_bound(sys, r, d_k) + MONOTONE_TOL:
                violations.append(f"k={k}: X0 diameter above the pair-ellipsoid bound")
            if dx0[k] > prev_dx0 + MONOTONE_TOL:
                violations.append(f"k={k}: X0 diameter increased {prev_dx0:.12g} -> {dx0[k]:.12g}")
            if dm[k] > prev_dm + MONOTONE_TOL:
                violations.append(f"k={k}: landmark diameter increased {prev_dm:.12g} -> {dm[k]:.12g}")
        prev_dx0, prev_dm = dx0[k], dm[k]
        est.apply(u)
        x = step(sys, x, u)

    T_run = last_k + 1
    sl = slice(0, T_run)
    return TrialTrace(
        k=np.arange(T_run),
        x=xs[sl],
        u=us[sl],
        y=ys[sl],
        diam_x0_cloud=dx0[sl],
        diam_x0_bound=bound[sl],
        diam_m_cloud=dm[sl],
        diam_xk_cloud=dxk[sl],
        in_recovery=rec[sl],
        recovery_step_index=rec_idx[sl],
        last_gap=max_run,
        violations=violations,
        positives=list(est.L),
        N=N,
        nbar=nbar,
    )


def _audit_positive(k, x0, xk, m, r, est: EstimatorState, M_prior, seen_bloats, violations, sys, dxk):
    if not estimate_membership(est.X0_hat, x0):
        violations.append(f"k={k}: true x0 outside the initial-state estimate")
    if not estimate_membership(est.Xk_hat, xk):
        violations.append(f"k={k}: true x_k outside the current-state estimate")
    for b in est.M_hat.bloated:
        if id(b) in seen_bloats:
            continue
        seen_bloats.add(id(b))
        if float(b.polytope.distance(m[None, :])[0]) > b.radius + EPS_MEM:
            violations.append(f"k={k}: true landmark outside constraint from time {b.key}")
    if not est.M_hat.base.contains(m):
        violations.append(f"k={k}: true landmark outside its prior box")
    # pair ellipsoids must agree with the distance between the unrolled states
    s = np.asarray(est._offsets)
    for E in est.X0_hat.ellipsoids:
        if E.label is None or E.label[0] != k:
            continue
        j = E.label[1]
        xj = sys.power(j) @ x0 + s[j]
        near = np.linalg.norm(xk - xj) <= 2 * r + EPS_MEM
        inside = E.contains(x0)
        if near != inside or not inside:
            violations.append(f"k={k}: pair ellipsoid ({k},{j}) disagrees with state distance")
    if dxk > M_prior.cloud_diameter + 2 * r + MONOTONE_TOL:
        violations.append(f"k={k}: current-state diameter above landmark diameter + 2r")


__all__ = [
    "LoopContext",
    "TrialTrace",
    "active_localize",
    "sense",
    "theoretical_bound",
]

