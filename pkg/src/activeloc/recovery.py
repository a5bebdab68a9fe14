"""Recovery controls that steer the state back into the sensing ball after a lost signal.

The plan probes each partition direction in turn.  If the state at loss time
lies in ``B(c0, r0)`` and ``r0`` is small compared with how far the plant
drifts over the plan, one of the probes lands inside the sensing ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import LinSys, controllability_index, gramian, spectral_norm
from .svp import SVP


class RecoveryConditionError(ValueError):
    """Raised when a probe coefficient ``r - ||A^t - I|| r0`` would be negative."""


@dataclass(frozen=True)
class RecoveryPlan:
    """A synthesized recovery sequence.

    Attributes
    ----------
    svp : SVP
    c0, r0 : enclosing ball of the state at loss time
    u0 : control applied at loss time
    controls : ndarray, shape (N * nbar, m)
        ``u_1 .. u_{N nbar}``.
    nbar : int
    coefficients : ndarray, shape (N,)
        Probe step lengths ``r - ||A^{nbar i + 1} - I|| r0``.
    """

    svp: SVP
    c0: np.ndarray
    r0: float
    u0: np.ndarray
    controls: np.ndarray
    nbar: int
    coefficients: np.ndarray

    def __len__(self) -> int:
        return self.controls.shape[0]

    @property
    def probe_offsets(self) -> np.ndarray:
        """Local times ``nbar * i + 1`` (i = 1..N) at which probes land, counted from the loss-time state."""
        return self.nbar * np.arange(1, self.svp.N + 1) + 1


def _check_ball(c0, r0, n):
    c0 = np.asarray(c0, dtype=float).reshape(-1)
    if c0.shape[0] != n:
        raise ValueError(f"c0 must lie in R^{n}")
    if r0 < 0:
        raise ValueError("r0 must be nonnegative")
    return c0


def rcs(svp: SVP, c0, r0: float, sys: LinSys, r: float, u0=None) -> RecoveryPlan:
    """Recovery sequence for fully actuated plants (``B = I``).

    ``u_i = e_i p_i - (A^{i+1} - I) c0 - sum_{j<i} A^{i-j} u_j`` with
    ``e_i = r - ||A^{i+1} - I|| r0`` (spectral norm).

    Raises
    ------
    ValueError
        If ``B`` is not the identity.
    RecoveryConditionError
        If some ``e_i`` is negative.
    """
    if sys.B.shape != (sys.n, sys.n) or not np.allclose(sys.B, np.eye(sys.n), atol=0.0, rtol=0.0):
        raise ValueError("rcs requires B = I; use generalized_rcs otherwise")
    if r <= 0:
        raise ValueError("r must be positive")
    n = sys.n
    c0 = _check_ball(c0, r0, n)
    u0 = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float).reshape(-1)
    I = np.eye(n)
    p = svp.vectors
    us = [u0]
    coeffs = np.empty(svp.N)
    for i in range(1, svp.N + 1):
        D = sys.power(i + 1) - I
        e = r - spectral_norm(D) * r0
        if e < 0:
            raise RecoveryConditionError(
                f"probe {i}: r - ||A^{i+1} - I|| r0 = {e:.6g} < 0 (enclosing radius too large)"
            )
        coeffs[i - 1] = e
        acc = np.zeros(n)
        for j in range(i):
            acc += sys.power(i - j) @ us[j]
        us.append(e * p[i - 1] - D @ c0 - acc)
    return RecoveryPlan(svp, c0, float(r0), u0, np.array(us[1:]), 1, coeffs)


def generalized_rcs(
    svp: SVP,
    c0,
    R0: float,
    sys: LinSys,
    r: float,
    u0=None,
    nbar: int | None = None,
) -> RecoveryPlan:
    """Block recovery sequence for any controllable pair.

    Each probe is reached with ``nbar`` inputs shaped by the inverse Gramian,
    ``u_{(i-1) nbar + j} = (A^{nbar-j} B)^T W^{-1} [e_i p_i - (A^{nbar i+1} - I) c0
    - sum_{k <= (i-1) nbar} A^{nbar i - k} B u_k]``.  With ``B = I`` and
    ``nbar = 1`` this coincides with :func:`rcs`.

    Raises
    ------
    ConditioningError
        If the Gramian condition number exceeds 1e12.
    RecoveryConditionError
        If some probe coefficient is negative.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    n, m = sys.n, sys.m
    c0 = _check_ball(c0, R0, n)
    nb = controllability_index(sys) if nbar is None else int(nbar)
    W = gramian(sys, nb)
    u0 = np.zeros(m) if u0 is None else np.asarray(u0, dtype=float).reshape(-1)
    I = np.eye(n)
    p = svp.vectors
    gains = [sys.power(nb - j) @ sys.B for j in range(1, nb + 1)]
    us = [u0]
    coeffs = np.empty(svp.N)
    for i in range(1, svp.N + 1):
        t = nb * i + 1
        D = sys.power(t) - I
        e = r - spectral_norm(D) * R0
        if e < 0:
            raise RecoveryConditionError(
                f"probe {i}: r - ||A^{t} - I|| R0 = {e:.6g} < 0 (enclosing radius too large)"
            )
        coeffs[i - 1] = e
        acc = np.zeros(n)
        for k in range((i - 1) * nb + 1):
            acc += sys.power(nb * i - k) @ (sys.B @ us[k])
        z = np.linalg.solve(W, e * p[i - 1] - D @ c0 - acc)
        for G in gains:
            us.append(G.T @ z)
    return RecoveryPlan(svp, c0, float(R0), u0, np.array(us[1:]), nb, coeffs)


def probe_state(sys: LinSys, plan: RecoveryPlan, x0, i: int) -> np.ndarray:
    """Closed-form state at local time ``nbar i + 1`` when starting from ``x0``.

    ``A^{t} x0 + e_i p_i - (A^{t} - I) c0`` with ``t = nbar i + 1``.
    """
    t = plan.nbar * i + 1
    At = sys.power(t)
    return At @ np.asarray(x0, dtype=float) + plan.coefficients[i - 1] * plan.svp.vectors[i - 1] - (
        At - np.eye(sys.n)
    ) @ plan.c0


def max_deviation(sys: LinSys, N: int, nbar: int = 1) -> float:
    """``max_{1 <= k <= N nbar} ||A^{k+1} - I||_2``.

    Examples
    --------
    >>> max_deviation(LinSys(2 * np.eye(2), np.eye(2)), 2, 1)
    7.0
    """
    if N < 1 or nbar < 1:
        raise ValueError("N and nbar must be at least 1")
    I = np.eye(sys.n)
    return max(spectral_norm(sys.power(k + 1) - I) for k in range(1, N * nbar + 1))


def radius_bound(r: float, eta: float, D: float) -> float:
    """Largest admissible enclosing radius, ``r (1 - eta) / (D (3 - eta))``."""
    return r * (1.0 - eta) / (D * (3.0 - eta))


def diameter_bound(r: float, eta: float, Dbar: float, n: int) -> float:
    """Largest admissible set diameter, the radius bound scaled by ``sqrt(2 (n+1) / n)``."""
    return radius_bound(r, eta, Dbar) * math.sqrt(2.0 * (n + 1) / n)


def _leq(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def check_radius_condition(r0: float, r: float, eta: float, D: float) -> bool:
    """True iff ``r0 <= r (1 - eta) / (D (3 - eta))``."""
    return _leq(r0, radius_bound(r, eta, D))


def check_recovery_condition(diam_X0: float, r: float, eta: float, Dbar: float, n: int) -> bool:
    """True iff a set of diameter ``diam_X0`` can always be recovered (non-strict).

    Examples
    --------
    >>> check_recovery_condition(6.0, 2.0, 0.5, 0.1, 2)
    True
    """
    return _leq(diam_X0, diameter_bound(r, eta, Dbar, n))


def landmark_margin(r: float, eta: float, Dbar: float, n: int) -> float:
    """Right-hand side of the landmark condition, ``diameter_bound / r - 2``."""
    return diameter_bound(r, eta, Dbar, n) / r - 2.0


def check_landmark_condition(diam_M: float, r: float, eta: float, Dbar: float, n: int) -> bool:
    """True iff ``diam_M / r <= diameter_bound / r - 2`` (non-strict).

    Equivalent to ``diam_M + 2 r <= diameter_bound``: every current-state
    estimate then stays recoverable.
    """
    rhs = landmark_margin(r, eta, Dbar, n)
    if rhs < 0:
        return False
    return _leq(diam_M / r, rhs)


def condition_report(
    *,
    r: float,
    eta: float,
    n: int,
    N: int,
    nbar: int,
    D: float,
    Dbar: float,
    diam_M: float,
    diam_X0: float,
    r0: float,
) -> list[dict]:
    """Both sides and verdict of each recovery-feasibility inequality."""
    rows = [
        {
            "name": "enclosing-radius",
            "lhs": r0,
            "rhs": radius_bound(r, eta, D),
            "pass": check_radius_condition(r0, r, eta, D),
        },
        {
            "name": "diameter-direct",
            "lhs": diam_X0,
            "rhs": diameter_bound(r, eta, D, n),
            "pass": check_recovery_condition(diam_X0, r, eta, D, n),
        },
        {
            "name": "diameter-block",
            "lhs": diam_X0,
            "rhs": diameter_bound(r, eta, Dbar, n),
            "pass": check_recovery_condition(diam_X0, r, eta, Dbar, n),
        },
        {
            "name": "landmark",
            "lhs": diam_M / r,
            "rhs": landmark_margin(r, eta, Dbar, n),
            "pass": check_landmark_condition(diam_M, r, eta, Dbar, n),
        },
    ]
    for row in rows:
        row.update({"N": N, "nbar": nbar, "eta": eta})
    return rows


__all__ = [
    "RecoveryConditionError",
    "RecoveryPlan",
    "check_landmark_condition",
    "check_radius_condition",
    "check_recovery_condition",
    "condition_report",
    "diameter_bound",
    "generalized_rcs",
    "landmark_margin",
    "max_deviation",
    "probe_state",
    "radius_bound",
    "rcs",
]
