"""Unstable linear plant ``x_{k+1} = A x_k + B u_k`` and its reachability helpers."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polytope

INSTABILITY_MARGIN = 1e-12
MAX_CONDITION = 1e12


class ControllabilityError(ValueError):
    """Raised for pairs (A, B) that cannot steer the state everywhere."""


class ConditioningError(ArithmeticError):
    """Raised when a matrix that must be inverted is numerically singular."""


def spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2))


def _rank(M: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(M))


@dataclass(eq=False)
class LinSys:
    """Discrete-time linear system with a strictly unstable transition matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
    B : array_like, shape (n, m)
    validate : bool
        Check instability and controllability (default True).

    Notes
    -----
    Matrix powers are memoized; extending the cache is guarded by a lock so a
    system can be shared by concurrent readers.
    """

    A: np.ndarray
    B: np.ndarray
    validate: bool = field(default=True, repr=False)
    _powers: list = field(default_factory=list, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.shape[0] != A.shape[0]:
            raise ValueError("B must have as many rows as A")
        A.setflags(write=False)
        B.setflags(write=False)
        self.A, self.B = A, B
        self._powers = [np.eye(A.shape[0])]
        if self.validate:
            lam = np.abs(np.linalg.eigvals(A))
            if np.any(lam <= 1.0 + INSTABILITY_MARGIN):
                raise ValueError(
                    f"A must be strictly unstable; smallest eigenvalue modulus is {lam.min():.6g}"
                )
            ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(self.n)])
            if _rank(ctrb) < self.n:
                raise ControllabilityError("(A, B) is not controllable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def power(self, k: int) -> np.ndarray:
        """``A^k`` from the memo (extended by repeated multiplication)."""
        if k < 0:
            raise ValueError("negative power")
        if k >= len(self._powers):
            with self._lock:
                while len(self._powers) <= k:
                    self._powers.append(self.A @ self._powers[-1])
        return self._powers[k]

    def powers(self, k: int) -> np.ndarray:
        """Stacked ``A^0 .. A^k``, shape (k + 1, n, n)."""
        self.power(k)
        return np.stack(self._powers[: k + 1])

    def __getstate__(self):
        # locks do not pickle; worker processes rebuild the power memo
        return {"A": self.A, "B": self.B, "validate": self.validate}

    def __setstate__(self, state):
        self.A, self.B, self.validate = state["A"], state["B"], state["validate"]
        self._powers = [np.eye(self.A.shape[0])]
        self._lock = threading.Lock()

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LinSys":
        return cls(np.array(d["A"], dtype=float), np.array(d["B"], dtype=float))


def step(sys: LinSys, x, u) -> np.ndarray:
    """One transition ``A x + B u``.

    Examples
    --------
    >>> step(LinSys(2 * np.eye(2), np.eye(2)), [1.0, 0.0], [0.0, 1.0]).tolist()
    [2.0, 1.0]
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape[0] != sys.n or u.shape[0] != sys.m:
        raise ValueError(f"expected x in R^{sys.n} and u in R^{sys.m}")
    return sys.A @ x + sys.B @ u


def offsets(sys: LinSys, u_seq) -> np.ndarray:
    """Input-driven offsets ``s_0 .. s_k`` with ``x_t = A^t x_0 + s_t``.

    Computed by the same recurrence as :func:`step`, starting from ``s_0 = 0``.
    """
    U = np.asarray(u_seq, dtype=float).reshape(-1, sys.m) if len(u_seq) else np.zeros((0, sys.m))
    s = np.zeros((U.shape[0] + 1, sys.n))
    BU = U @ sys.B.T
    for t in range(U.shape[0]):
        s[t + 1] = sys.A @ s[t] + BU[t]
    return s


def reach(sys: LinSys, u_seq, X0: Polytope) -> Polytope:
    """Forward image of ``X0`` after applying ``u_seq``.

    Each vertex ``v`` maps to ``A^k v + sum_i A^{k-1-i} B u_i``.
    """
    k = len(u_seq)
    if k == 0:
        return X0
    s = offsets(sys, u_seq)[-1]
    return X0.affine_image(sys.power(k), s)


def controllability_index(sys: LinSys) -> int:
    """Fewest steps ``nbar`` with ``rank [B, AB, ..., A^{nbar-1} B] = n``.

    Raises
    ------
    ControllabilityError
        If the rank never reaches n.
    """
    blocks = []
    for k in range(sys.n):
        blocks.append(sys.power(k) @ sys.B)
        if _rank(np.hstack(blocks)) == sys.n:
            return k + 1
    raise ControllabilityError("(A, B) is not controllable")


def gramian(sys: LinSys, nbar: int) -> np.ndarray:
    """Finite-horizon controllability Gramian ``sum_{k<nbar} A^k B B^T (A^k)^T``.

    Raises
    ------
    ConditioningError
        If the Gramian is singular or its condition number exceeds 1e12.
    """
    if nbar < 1:
        raise ValueError("nbar must be at least 1")
    W = np.zeros((sys.n, sys.n))
    for k in range(nbar):
        AkB = sys.power(k) @ sys.B
        W += AkB @ AkB.T
    W = 0.5 * (W + W.T)
    ev = np.linalg.eigvalsh(W)
    if ev[0] <= 0 or ev[-1] / ev[0] > MAX_CONDITION:
        raise ConditioningError(f"Gramian over {nbar} steps is singular or ill-conditioned")
    return W


def lambda_min(sys: LinSys) -> float:
    """Smallest eigenvalue modulus of ``A``."""
    return float(np.min(np.abs(np.linalg.eigvals(sys.A))))


@dataclass(frozen=True)
class GrowthBound:
    """Certified bound ``||(A^k - I)^{-1}|| <= K * lambda_min^{-c k}`` for ``1 <= k <= horizon``."""

    K: float
    c: float
    lambda_min: float
    horizon: int
    k_star: int = 1

    def __call__(self, k) -> float:
        return self.K * self.lambda_min ** (-self.c * np.asarray(k, dtype=float))


def inverse_gap_norms(sys: LinSys, horizon: int) -> np.ndarray:
    """``||(A^k - I)^{-1}||_2`` for ``k = 1..horizon``.

    Raises
    ------
    ConditioningError
        If some ``A^k - I`` has condition number above 1e12.
    """
    I = np.eye(sys.n)
    out = np.empty(horizon)
    for k in range(1, horizon + 1):
        s = np.linalg.svd(sys.power(k) - I, compute_uv=False)
        if not np.all(np.isfinite(s)) or s[-1] <= 0 or s[0] / s[-1] > MAX_CONDITION:
            raise ConditioningError(f"A^{k} - I is numerically singular")
        out[k - 1] = 1.0 / s[-1]
    return out


def fit_growth_bound(sys: LinSys, c: float = 0.5, horizon: int = 1000) -> GrowthBound:
    """Smallest ``K`` making the inverse-gap bound hold on ``1..horizon`` for the given ``c``.

    The maximization is done in log space to avoid overflow of ``lambda^{ck}``.

    Examples
    --------
    >>> gb = fit_growth_bound(LinSys(2 * np.eye(2), np.eye(2)), 0.5, 10)
    >>> round(gb.K, 12) == round(math.sqrt(2), 12)
    True
    """
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    lam = lambda_min(sys)
    norms = inverse_gap_norms(sys, horizon)
    ks = np.arange(1, horizon + 1)
    logs = np.log(norms) + c * ks * math.log(lam)
    i = int(np.argmax(logs))
    return GrowthBound(float(math.exp(logs[i])), float(c), lam, int(horizon), int(ks[i]))


__all__ = [
    "ConditioningError",
    "ControllabilityError",
    "GrowthBound",
    "LinSys",
    "controllability_index",
    "fit_growth_bound",
    "gramian",
    "inverse_gap_norms",
    "lambda_min",
    "offsets",
    "reach",
    "spectral_norm",
    "step",
]
