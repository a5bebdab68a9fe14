"""Spherical Voronoi partitions: spreading unit vectors and certifying cap coverage.

A partition is described by N unit vectors ``p_i``.  Cell ``R_i`` holds the
directions whose inner product with ``p_i`` is largest (ties go to the lowest
index).  A partition covers at level ``alpha`` when every direction in ``R_i``
has inner product at least ``alpha`` with ``p_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

EPS_COVER = 1e-9
DEFAULT_N_CAP = 512
SAMPLED_DIRECTIONS = 100_000


class VecOptError(RuntimeError):
    """Raised when vector spreading fails; ``best`` holds the best configuration seen."""

    def __init__(self, message: str, best: np.ndarray | None = None):
        super().__init__(message)
        self.best = best


class DegenerateCellError(ValueError):
    """Raised when a basis vector owns no region of the sphere."""


@dataclass(frozen=True)
class UnitVectorSet:
    """N distinct unit vectors in R^n, stored as rows of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if V.shape[0] < 2:
            raise ValueError("need at least two vectors")
        norms = np.linalg.norm(V, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("all vectors must have unit norm")
        G = V @ V.T
        np.fill_diagonal(G, -np.inf)
        if np.max(G) >= 1.0 - 1e-9:
            raise ValueError("duplicate vectors")
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "vectors", V)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def N(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.N


@dataclass(frozen=True)
class SVP:
    """A certified partition.

    Attributes
    ----------
    basis : UnitVectorSet
    alpha : float
        Coverage level that was certified.
    eta : float
        Largest pairwise inner product of the basis.
    cell_min_alignments : tuple of float
        ``m_i``, the smallest inner product with ``p_i`` over cell ``R_i``.
    certificate : str
        ``"exact"`` (cell vertices enumerated) or ``"sampled"``.
    """

    basis: UnitVectorSet
    alpha: float
    eta: float
    cell_min_alignments: tuple
    certificate: str = "exact"

    @property
    def N(self) -> int:
        return self.basis.N

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def vectors(self) -> np.ndarray:
        return self.basis.vectors

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n": self.n,
            "N": self.N,
            "eta": self.eta,
            "vectors": self.vectors.tolist(),
            "cell_min_alignments": list(self.cell_min_alignments),
            "certificate": self.certificate,
        }


def max_alignment(v: UnitVectorSet) -> float:
    """Largest inner product between two distinct basis vectors.

    Examples
    --------
    >>> max_alignment(vec_opt(2, 2))
    -1.0
    """
    G = v.vectors @ v.vectors.T
    np.fill_diagonal(G, -np.inf)
    return float(G.max())


def cell_of(v: UnitVectorSet, w) -> int:
    """Index of the cell containing direction ``w`` (0-based, ties to lowest index)."""
    s = v.vectors @ np.asarray(w, dtype=float)
    best = s.max()
    return int(np.flatnonzero(s >= best - 1e-12)[0])


def cells_of(v: UnitVectorSet, W: np.ndarray) -> np.ndarray:
    """Vectorized :func:`cell_of` over rows of ``W``."""
    S = np.asarray(W, dtype=float) @ v.vectors.T
    return np.argmax(S >= S.max(axis=1, keepdims=True) - 1e-12, axis=1)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _circle(N: int) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(N) / N
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def _simplex(N: int, n: int) -> np.ndarray:
    """N vertices of a regular simplex centred at the origin, embedded in R^n."""
    E = np.eye(N) - 1.0 / N
    # orthonormal basis of the (N-1)-dim span, via SVD
    _, _, vt = np.linalg.svd(E)
    X = E @ vt[: N - 1].T
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    out = np.zeros((N, n))
    out[:, : N - 1] = X
    return out


# ---------------------------------------------------------------------------
# Numerical spreading
# ---------------------------------------------------------------------------


def _smoothed_max(P: np.ndarray, tau: float, mask: np.ndarray):
    """Log-sum-exp smoothing of the max pairwise inner product, batched over restarts."""
    G = P @ np.swapaxes(P, 1, 2)
    Gm = np.where(mask, G, -np.inf)
    gmax = Gm.max(axis=(1, 2))
    E = np.exp((Gm - gmax[:, None, None]) / tau)
    S = E.sum(axis=(1, 2))
    f = gmax + tau * np.log(S / 2.0)
    W = 2.0 * E / S[:, None, None]
    return f, W, gmax


def _spread(P: np.ndarray, taus, iters: int) -> np.ndarray:
    R, N, _ = P.shape
    mask = ~np.eye(N, dtype=bool)[None]
    step = np.full(R, 0.5 / N)
    for tau in taus:
        f, W, _ = _smoothed_max(P, tau, mask)
        for _ in range(iters):
            g = W @ P
            g -= np.einsum("rij,rij->ri", g, P)[..., None] * P
            cand = P - step[:, None, None] * g
            cand /= np.linalg.norm(cand, axis=2, keepdims=True)
            fc, Wc, _ = _smoothed_max(cand, tau, mask)
            ok = fc < f
            P = np.where(ok[:, None, None], cand, P)
            f = np.where(ok, fc, f)
            W = np.where(ok[:, None, None], Wc, W)
            step = np.where(ok, step * 1.5, step * 0.5)
            step = np.clip(step, 1e-12, 1.0)
    return P


def _polish(P: np.ndarray, maxiter: int = 300) -> np.ndarray:
    """Solve the epigraph form (min t s.t. <p_i,p_j> <= t, |p_i| = 1) locally."""
    N, n = P.shape
    iu, ju = np.triu_indices(N, 1)
    G0 = P @ P.T
    x0 = np.concatenate([P.ravel(), [G0[iu, ju].max()]])

    def unpack(x):
        return x[:-1].reshape(N, n), x[-1]

    def ineq(x):
        Q, t = unpack(x)
        return t - np.einsum("ij,ij->i", Q[iu], Q[ju])

    def ineq_jac(x):
        Q, _ = unpack(x)
        J = np.zeros((iu.size, N * n + 1))
        rows = np.arange(iu.size)
        for d in range(n):
            J[rows, iu * n + d] = -Q[ju, d]
            J[rows, ju * n + d] = -Q[iu, d]
        J[:, -1] = 1.0
        return J

    def eq(x):
        Q, _ = unpack(x)
        return np.einsum("ij,ij->i", Q, Q) - 1.0

    def eq_jac(x):
        Q, _ = unpack(x)
        J = np.zeros((N, N * n + 1))
        for d in range(n):
            J[np.arange(N), np.arange(N) * n + d] = 2.0 * Q[:, d]
        return J

    grad = np.zeros(N * n + 1)
    grad[-1] = 1.0
    res = minimize(
        lambda x: x[-1],
        x0,
        jac=lambda x: grad,
        constraints=[
            {"type": "ineq", "fun": ineq, "jac": ineq_jac},
            {"type": "eq", "fun": eq, "jac": eq_jac},
        ],
        method="SLSQP",
        options={"maxiter": maxiter, "ftol": 1e-15},
    )
    Q, _ = unpack(res.x)
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    return Q


def _gamma(P: np.ndarray) -> float:
    G = P @ P.T
    np.fill_diagonal(G, -np.inf)
    return float(G.max())


def vec_opt(
    N: int,
    n: int,
    seed: int = 0,
    restarts: int = 16,
    polish: bool = True,
) -> UnitVectorSet:
    """Spread N unit vectors in R^n to (locally) minimize their largest pairwise inner product.

    Closed forms are used for n = 2 (evenly spaced angles), N = 2 (antipodal
    pair) and N <= n + 1 (regular simplex).  Otherwise ``restarts`` random
    starts are run through an annealed log-sum-exp descent on the sphere, the
    best one is polished on the exact minimax problem, and the result is fully
    determined by ``seed``.

    Raises
    ------
    VecOptError
        If no restart produces a valid set of distinct vectors.
    """
    if N < 2 or n < 2:
        raise ValueError("need N >= 2 and n >= 2")
    if n == 2:
        return UnitVectorSet(_circle(N))
    if N == 2:
        V = np.zeros((2, n))
        V[0, 0], V[1, 0] = 1.0, -1.0
        return UnitVectorSet(V)
    if N <= n + 1:
        return UnitVectorSet(_simplex(N, n))
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((restarts, N, n))
    P /= np.linalg.norm(P, axis=2, keepdims=True)
    P = _spread(P, np.geomspace(1e-1, 1e-4, 7), iters=60)
    gammas = np.array([_gamma(Q) for Q in P])
    order = np.argsort(gammas, kind="stable")
    best, best_gamma = P[order[0]], gammas[order[0]]
    if polish:
        for idx in order[:2]:
            Q = _polish(P[idx])
            gq = _gamma(Q)
            if np.all(np.isfinite(Q)) and gq < best_gamma:
                best, best_gamma = Q, gq
    if not np.isfinite(best_gamma) or best_gamma >= 1.0 - 1e-9:
        raise VecOptError(f"spreading failed for N={N}, n={n}", best)
    return UnitVectorSet(best)


# ---------------------------------------------------------------------------
# Cell geometry
# ---------------------------------------------------------------------------


def _cell_min_2d(V: np.ndarray, i: int) -> float:
    ang = np.arctan2(V[:, 1], V[:, 0])
    rel = np.mod(ang - ang[i], 2 * np.pi)
    others = np.delete(rel, i)
    ahead = others.min()  # counter-clockwise neighbour
    behind = 2 * np.pi - others.max()  # clockwise neighbour
    half = max(ahead, behind) / 2.0
    return float(math.cos(half))


def _cell_min_3d(V: np.ndarray, i: int) -> float:
    """Exact minimum of <p_i, w> over the closed cell on the 2-sphere.

    The minimum of a linear function over a spherical polygon is attained at
    a vertex (two active bisector planes), at a stationary point along an edge
    (one active plane), or at the interior stationary point ``-p_i``.
    """
    p = V[i]
    D = p[None, :] - np.delete(V, i, axis=0)  # cell: D w >= 0
    tol = 1e-10
    cands = [-p]
    for d in D:
        # stationary point of <p, w> on the great circle d.w = 0
        q = p - (p @ d) / (d @ d) * d
        nq = np.linalg.norm(q)
        if nq > 1e-14:
            cands.extend([q / nq, -q / nq])
    a_idx, b_idx = np.triu_indices(D.shape[0], 1)
    C = np.cross(D[a_idx], D[b_idx])
    nc = np.linalg.norm(C, axis=1)
    C = C[nc > 1e-14] / nc[nc > 1e-14, None]
    W = np.vstack([np.array(cands), C, -C])
    feasible = np.all(W @ D.T >= -tol, axis=1)
    if not feasible.any():
        raise DegenerateCellError(f"cell {i} is empty")
    return float((W[feasible] @ p).min())


@lru_cache(maxsize=8)
def _sample_dirs(n: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(20240601 + n)
    W = rng.standard_normal((count, n))
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def _cell_min_sampled(V: np.ndarray, i: int, count: int = SAMPLED_DIRECTIONS) -> float:
    W = _sample_dirs(V.shape[1], count)
    S = W @ V.T
    own = np.argmax(S >= S.max(axis=1, keepdims=True) - 1e-12, axis=1) == i
    if not own.any():
        raise DegenerateCellError(f"cell {i} received no samples")
    return float(S[own, i].min())


def cell_min_alignment(v: UnitVectorSet, i: int) -> float:
    """Smallest inner product between ``p_i`` and any direction of its cell.

    Exact for n = 2 (neighbour bisectors) and n = 3 (cell vertex enumeration);
    for n > 3 it is an estimate over 10^5 sampled directions, see
    :func:`coverage_certificate`.

    Examples
    --------
    >>> round(cell_min_alignment(vec_opt(4, 2), 0), 12) == round(math.sqrt(0.5), 12)
    True
    """
    if not 0 <= i < v.N:
        raise IndexError(f"cell index {i} out of range for {v.N} vectors")
    if v.n == 2:
        return _cell_min_2d(v.vectors, i)
    if v.n == 3:
        return _cell_min_3d(v.vectors, i)
    return _cell_min_sampled(v.vectors, i)


def coverage_certificate(v: UnitVectorSet) -> tuple[np.ndarray, str]:
    """All cell minima and whether they were computed exactly or by sampling."""
    m = np.array([cell_min_alignment(v, i) for i in range(v.N)])
    return m, ("exact" if v.n <= 3 else "sampled")


@lru_cache(maxsize=64)
def find_svp(
    alpha: float,
    n: int,
    N_start: int | None = None,
    N_cap: int = DEFAULT_N_CAP,
    seed: int = 0,
) -> SVP:
    """Smallest N (from ``N_start``, default n + 1) whose spread vectors cover at level ``alpha``.

    Caps are closed: a cell passes when its minimum alignment is at least
    ``alpha - EPS_COVER``.

    Raises
    ------
    RuntimeError
        If N would exceed ``N_cap``.

    Examples
    --------
    >>> find_svp(0.0, 2).N
    3
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    N = max(2, n + 1 if N_start is None else int(N_start))
    while N <= N_cap:
        v = vec_opt(N, n, seed=seed)
        m, kind = coverage_certificate(v)
        if np.all(m >= alpha - EPS_COVER):
            return SVP(v, float(alpha), max_alignment(v), tuple(float(x) for x in m), kind)
        N += 1
    raise RuntimeError(f"no {alpha}-covering found with N <= {N_cap} in dimension {n}")


RECOVERY_ALPHA = math.sqrt(3.0) / 2.0


def recovery_svp(n: int, seed: int = 0) -> SVP:
    """The sqrt(3)/2-level partition used by recovery controls."""
    return find_svp(RECOVERY_ALPHA, n, seed=seed)


__all__ = [
    "EPS_COVER",
    "RECOVERY_ALPHA",
    "SVP",
    "DegenerateCellError",
    "UnitVectorSet",
    "VecOptError",
    "cell_min_alignment",
    "cell_of",
    "cells_of",
    "coverage_certificate",
    "find_svp",
    "max_alignment",
    "recovery_svp",
    "vec_opt",
]
