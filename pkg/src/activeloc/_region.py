"""Convex regions given by halfspaces and ellipsoids, probed by ray casting.

The estimator keeps its sets symbolic; this module turns such a constraint
list into boundary samples, a containing polytope, an interior point and an
accurate diameter.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import HalfspaceIntersection, QhullError

from .geometry import Polytope, sphere_directions


class Region:
    """``{x : G x <= h} ∩ E_1 ∩ ... ∩ E_q`` with unit-norm rows in ``G``."""

    def __init__(self, G: np.ndarray, h: np.ndarray, mus: np.ndarray, Ps: np.ndarray):
        G = np.asarray(G, dtype=float)
        nrm = np.linalg.norm(G, axis=1)
        self.G = G / nrm[:, None]
        self.h = np.asarray(h, dtype=float) / nrm
        self.mus = np.asarray(mus, dtype=float).reshape(-1, G.shape[1])
        self.Ps = np.asarray(Ps, dtype=float).reshape(-1, G.shape[1], G.shape[1])
        if self.Ps.shape[0]:
            self.kappa = np.sqrt(np.linalg.eigvalsh(self.Ps)[:, -1])
        else:
            self.kappa = np.zeros(0)

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def n_half(self) -> int:
        return self.G.shape[0]

    def with_halfspaces(self, G: np.ndarray, h: np.ndarray) -> "Region":
        out = Region.__new__(Region)
        nrm = np.linalg.norm(G, axis=1)
        out.G = np.vstack([self.G, G / nrm[:, None]])
        out.h = np.concatenate([self.h, h / nrm])
        out.mus, out.Ps, out.kappa = self.mus, self.Ps, self.kappa
        return out

    # -- pointwise ---------------------------------------------------------

    def quadforms(self, X: np.ndarray) -> np.ndarray:
        """Shape (q, count)."""
        return quad_batch(X, self.mus, self.Ps)

    def slack(self, X: np.ndarray) -> np.ndarray:
        """Radius of a ball around each point known to fit inside the region (negative outside)."""
        X = np.atleast_2d(X)
        s = np.min(self.h[None, :] - X @ self.G.T, axis=1)
        if self.mus.shape[0]:
            q = self.quadforms(X)
            se = (1.0 - np.sqrt(np.maximum(q, 0.0))) / self.kappa[:, None]
            s = np.minimum(s, se.min(axis=0))
        return s

    def member(self, X: np.ndarray, tol: float) -> np.ndarray:
        X = np.atleast_2d(X)
        ok = np.all(X @ self.G.T <= self.h + tol, axis=1)
        if self.mus.shape[0]:
            ok &= np.all(self.quadforms(X) <= 1.0 + tol, axis=0)
        return ok

    # -- rays --------------------------------------------------------------

    def ray_exit(self, c: np.ndarray, D: np.ndarray):
        """Exit distance along each unit row of ``D`` from interior point ``c``.

        Returns the distances and the index of the constraint hit (halfspaces
        first, then ellipsoids).
        """
        gd = D @ self.G.T
        room = self.h - self.G @ c
        with np.errstate(divide="ignore", invalid="ignore"):
            th = np.where(gd > 0, room[None, :] / gd, np.inf)
        t = th.min(axis=1)
        act = th.argmin(axis=1)
        if self.mus.shape[0]:
            q, n = self.Ps.shape[0], self.n
            a = self.Ps.reshape(q, n * n) @ (D[:, :, None] * D[:, None, :]).reshape(-1, n * n).T
            w = c[None, :] - self.mus
            Pw = np.matmul(self.Ps, w[:, :, None])[:, :, 0]
            b = Pw @ D.T
            g = np.sum(w * Pw, axis=1) - 1.0
            disc = np.sqrt(np.maximum(b * b - a * g[:, None], 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                te = np.where(b > 0, -g[:, None] / (b + disc), (disc - b) / a)
            te = np.maximum(te, 0.0)
            ie = te.argmin(axis=0)
            tmin = te[ie, np.arange(D.shape[0])]
            use = tmin < t
            t = np.where(use, tmin, t)
            act = np.where(use, self.n_half + ie, act)
        return t, act

    def exits(self, c: np.ndarray, D: np.ndarray) -> np.ndarray:
        """Exit distance of each ray through each constraint separately, shape (rays, constraints)."""
        gd = D @ self.G.T
        room = self.h - self.G @ c
        with np.errstate(divide="ignore", invalid="ignore"):
            th = np.where(gd > 0, room[None, :] / gd, np.inf)
        if not self.mus.shape[0]:
            return th
        q, n = self.Ps.shape[0], self.n
        a = self.Ps.reshape(q, n * n) @ (D[:, :, None] * D[:, None, :]).reshape(-1, n * n).T
        w = c[None, :] - self.mus
        Pw = np.matmul(self.Ps, w[:, :, None])[:, :, 0]
        b = Pw @ D.T
        g = np.sum(w * Pw, axis=1) - 1.0
        disc = np.sqrt(np.maximum(b * b - a * g[:, None], 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            te = np.where(b > 0, -g[:, None] / (b + disc), (disc - b) / a)
        return np.hstack([th, np.maximum(te, 0.0).T])

    def exit_of(self, c: np.ndarray, D: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Exit distance of ray ``D[i]`` through constraint ``idx[i]`` alone."""
        t = np.full(D.shape[0], np.inf)
        hs = idx < self.n_half
        if hs.any():
            j = idx[hs]
            gd = np.sum(D[hs] * self.G[j], axis=1)
            room = self.h[j] - self.G[j] @ c
            with np.errstate(divide="ignore", invalid="ignore"):
                t[hs] = np.where(gd > 0, room / gd, np.inf)
        el = ~hs
        if el.any():
            j = idx[el] - self.n_half
            P, d = self.Ps[j], D[el]
            w = c[None, :] - self.mus[j]
            Pd = np.matmul(P, d[:, :, None])[:, :, 0]
            a = np.sum(d * Pd, axis=1)
            b = np.sum(w * Pd, axis=1)
            g = np.sum(w * np.matmul(P, w[:, :, None])[:, :, 0], axis=1) - 1.0
            disc = np.sqrt(np.maximum(b * b - a * g, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                te = np.where(b > 0, -g / (b + disc), (disc - b) / a)
            t[el] = np.maximum(te, 0.0)
        return t

    def corners(self, c: np.ndarray, D: np.ndarray, act: np.ndarray, iters: int = 12) -> np.ndarray:
        """Boundary points where the active constraint switches between neighbouring planar rays.

        ``D`` must be ordered by angle.  Each switch is bracketed by two rays
        and located by regula falsi on the difference of the two exit
        distances; the returned points are exact boundary points of the region.
        """
        if self.n != 2 or D.shape[0] < 3:
            return np.zeros((0, self.n))
        nxt = np.roll(np.arange(D.shape[0]), -1)
        sw = np.flatnonzero(act != act[nxt])
        if sw.size == 0:
            return np.zeros((0, 2))
        ang = np.arctan2(D[:, 1], D[:, 0])
        lo = ang[sw]
        hi = lo + (ang[nxt[sw]] - lo) % (2.0 * np.pi)
        ia, ib = act[sw], act[nxt[sw]]
        lin = (ia < self.n_half) & (ib < self.n_half)
        extra = []
        if lin.any():
            # two planes meet at a vertex: solve for it directly
            M = np.stack([self.G[ia[lin]], self.G[ib[lin]]], axis=1)
            rhs = np.stack([self.h[ia[lin]], self.h[ib[lin]]], axis=1)
            good = np.abs(np.linalg.det(M)) > 1e-12
            if good.any():
                v = np.linalg.solve(M[good], rhs[good][:, :, None])[:, :, 0]
                extra.append(np.arctan2(v[:, 1] - c[1], v[:, 0] - c[0]))
            lo, hi, ia, ib = lo[~lin], hi[~lin], ia[~lin], ib[~lin]
        if lo.size:
            extra.append(self._switch_angles(c, lo, hi, ia, ib, iters))
        theta = np.concatenate(extra) if extra else np.zeros(0)
        if theta.size == 0:
            return np.zeros((0, 2))
        pts, _ = self.boundary(c, np.stack([np.cos(theta), np.sin(theta)], axis=1))
        return pts

    def _switch_angles(self, c, lo, hi, ia, ib, iters):
        def g(theta):
            U = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            return self.exit_of(c, U, ia) - self.exit_of(c, U, ib)

        glo, ghi = g(lo), g(hi)
        ok = np.isfinite(glo) & np.isfinite(ghi) & (glo <= 0) & (ghi >= 0)
        U0 = np.stack([np.cos(lo), np.sin(lo)], axis=1)
        tol = 1e-13 * float(np.max(self.exit_of(c, U0, ia), initial=0.0, where=np.isfinite(glo)))
        side = np.zeros(lo.size, dtype=int)
        mid = 0.5 * (lo + hi)
        for _ in range(iters):
            den = ghi - glo
            with np.errstate(divide="ignore", invalid="ignore"):
                mid = np.where(ok & (den > 0), hi - ghi * (hi - lo) / den, 0.5 * (lo + hi))
            gm = g(mid)
            gm = np.where(np.isfinite(gm), gm, 0.0)
            if np.all(np.abs(gm[ok]) <= tol):
                break
            left = gm <= 0
            # Illinois step: halve the stale endpoint value to keep convergence superlinear
            glo_new = np.where(left, gm, np.where(side == -1, 0.5 * glo, glo))
            ghi_new = np.where(left, np.where(side == 1, 0.5 * ghi, ghi), gm)
            lo, hi = np.where(left, mid, lo), np.where(left, hi, mid)
            side = np.where(left, 1, -1)
            glo, ghi = glo_new, ghi_new
        return mid[ok]

    def boundary(self, c: np.ndarray, D: np.ndarray):
        t, act = self.ray_exit(c, D)
        return c[None, :] + t[:, None] * D, act

    def normals(self, B: np.ndarray, act: np.ndarray) -> np.ndarray:
        """Outward unit normals of the active constraint at boundary points."""
        Nrm = np.empty_like(B)
        hm = act < self.n_half
        Nrm[hm] = self.G[act[hm]]
        em = ~hm
        if em.any():
            e = act[em] - self.n_half
            v = np.einsum("pij,pj->pi", self.Ps[e], B[em] - self.mus[e])
            Nrm[em] = v / np.linalg.norm(v, axis=1, keepdims=True)
        return Nrm

    # -- interior points ---------------------------------------------------

    def deep_point(self, start: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
        """Locally maximize the inscribed-ball radius, starting from ``start``.

        Works in coordinates ``x = start + scale * z`` so that tiny regions are
        handled at unit scale.
        """
        n = self.n
        scale = max(scale, 1e-300)
        hz = (self.h - self.G @ start) / scale
        L = np.linalg.cholesky(self.Ps) if self.mus.shape[0] else None
        wz = (start[None, :] - self.mus) / scale if L is not None else None
        kz = self.kappa * scale

        def cons(v):
            z, s = v[:n], v[n]
            out = [hz - self.G @ z - s]
            if L is not None:
                y = np.einsum("eji,ej->ei", L, wz + z[None, :])
                out.append(1.0 - scale * np.sqrt(np.einsum("ei,ei->e", y, y) + 1e-300) - kz * s)
            return np.concatenate(out)

        v0 = np.zeros(n + 1)
        res = minimize(
            lambda v: -v[n],
            v0,
            jac=lambda v: np.concatenate([np.zeros(n), [-1.0]]),
            constraints=[{"type": "ineq", "fun": cons}],
            method="SLSQP",
            options={"maxiter": 200, "ftol": 1e-14},
        )
        cands = [start, start + scale * res.x[:n]]
        sl = self.slack(np.array(cands))
        i = int(np.argmax(sl))
        return cands[i], float(sl[i])

    # -- outer polytope ------------------------------------------------------

    def outer_polytope(
        self,
        c: np.ndarray,
        B: np.ndarray,
        act: np.ndarray,
        fallback: Polytope,
        shift: float = 1e-11,
    ) -> Polytope:
        """Polytope containing the region: its halfspaces plus tangents at ``B``.

        Tangent planes are pushed outward by ``shift`` (relative to the local
        scale) to absorb roundoff in the boundary points.
        """
        em = act >= self.n_half
        Nt = self.normals(B[em], act[em]) if em.any() else np.zeros((0, self.n))
        ot = np.einsum("ij,ij->i", Nt, B[em]) if em.any() else np.zeros(0)
        Gall = np.vstack([self.G, Nt])
        hall = np.concatenate([self.h, ot])
        scale = max(float(np.max(np.linalg.norm(B - c, axis=1))), 1e-300)
        hl = (hall - Gall @ c) / scale + shift
        if np.any(hl <= 0):
            return fallback
        try:
            hs = HalfspaceIntersection(np.hstack([Gall, -hl[:, None]]), np.zeros(self.n))
            V = c + scale * hs.intersections
        except (QhullError, ValueError):
            return fallback
        if not np.all(np.isfinite(V)):
            return fallback
        try:
            return Polytope(V)
        except ValueError:
            return fallback


def quad_batch(X: np.ndarray, mus: np.ndarray, Ps: np.ndarray) -> np.ndarray:
    """``(x - mu_e)^T P_e (x - mu_e)`` for every ellipsoid ``e`` and row ``x``; shape (q, count).

    Expanded into matrix products about the centroid of ``X``, which keeps the
    cancellation error at the scale of the point spread.
    """
    q, n = Ps.shape[0], X.shape[1]
    if q == 0:
        return np.zeros((0, X.shape[0]))
    o = X.mean(axis=0)
    Y = X - o
    M = mus - o
    PM = np.matmul(Ps, M[:, :, None])[:, :, 0]
    quad = Ps.reshape(q, n * n) @ (Y[:, :, None] * Y[:, None, :]).reshape(-1, n * n).T
    return quad - 2.0 * (PM @ Y.T) + np.sum(M * PM, axis=1)[:, None]


def ray_directions(n: int, count: int) -> np.ndarray:
    return sphere_directions(n, count)
