"""Convex-set primitives: balls, ellipsoids, polytopes and constraint-list sets.

Every membership test in the package goes through the helpers here, with a
shared tolerance ``EPS_MEM`` applied to quadratic forms and distances so that
points sitting exactly on a boundary are never rejected by roundoff.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

EPS_MEM = 1e-9


class DimensionError(ValueError):
    """Raised when point and set dimensions disagree."""


def _as_point(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and x.shape[0] != n:
        raise DimensionError(f"expected a point in R^{n}, got length {x.shape[0]}")
    return x


def _as_points(points, n: int | None = None) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise DimensionError("points must be a 2-D array of shape (count, n)")
    if n is not None and pts.shape[1] != n:
        raise DimensionError(f"expected points in R^{n}, got R^{pts.shape[1]}")
    return pts


# ---------------------------------------------------------------------------
# Balls and ellipsoids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball ``B(center, radius)``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not self.radius >= 0:
            raise ValueError("ball radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def contains(self, x, tol: float = EPS_MEM) -> bool:
        x = _as_point(x, self.n)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)


@dataclass(frozen=True)
class Ellipsoid:
    """Ellipsoid ``{x : (x - mu)^T P (x - mu) <= 1}``.

    Parameters
    ----------
    mu : array_like, shape (n,)
        Center.
    P : array_like, shape (n, n)
        Symmetric positive definite shape matrix.
    label : tuple, optional
        Free-form tag, e.g. the measurement pair ``(k, j)`` that produced it.
    """

    mu: np.ndarray
    P: np.ndarray
    label: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        mu = _as_point(self.mu)
        P = np.asarray(self.P, dtype=float)
        n = mu.shape[0]
        if P.shape != (n, n):
            raise DimensionError(f"shape matrix must be {n}x{n}, got {P.shape}")
        scale = np.linalg.norm(P)
        if np.linalg.norm(P - P.T) > 1e-9 * scale:
            raise ValueError("ellipsoid shape matrix is not symmetric")
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise ValueError("ellipsoid shape matrix is not positive definite") from exc
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    def quadform(self, points) -> np.ndarray:
        """Evaluate ``(x - mu)^T P (x - mu)`` for each row of ``points``."""
        d = _as_points(points, self.n) - self.mu
        return np.einsum("ij,jk,ik->i", d, self.P, d)

    def contains(self, x, tol: float = EPS_MEM) -> bool:
        return bool(self.quadform(x)[0] <= 1.0 + tol)

    @cached_property
    def diameter(self) -> float:
        return 2.0 / math.sqrt(np.linalg.eigvalsh(self.P)[0])

    def affine_image(self, T: np.ndarray, b: np.ndarray) -> "Ellipsoid":
        """Image under ``x -> T x + b`` for invertible ``T``."""
        Ti = np.linalg.inv(T)
        Q = Ti.T @ self.P @ Ti
        return Ellipsoid(T @ self.mu + b, 0.5 * (Q + Q.T), self.label)


def contains(E: Ellipsoid, x, tol: float = EPS_MEM) -> bool:
    """Return True iff ``x`` lies in the closed ellipsoid ``E`` (up to ``tol``).

    Raises
    ------
    DimensionError
        If ``x`` and ``E.mu`` have different lengths.
    """
    x = _as_point(x)
    if x.shape[0] != E.n:
        raise DimensionError(f"point has length {x.shape[0]}, ellipsoid lives in R^{E.n}")
    return E.contains(x, tol)


# ---------------------------------------------------------------------------
# Polytopes
# ---------------------------------------------------------------------------


def _affine_frame(points: np.ndarray, rtol: float = 1e-12):
    """Return (origin, orthonormal basis rows, rank) of the affine hull."""
    origin = points.mean(axis=0)
    centered = points - origin
    if points.shape[0] == 1:
        return origin, np.zeros((0, points.shape[1])), 0
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    scale = max(s[0], 1e-300)
    rank = int(np.sum(s > rtol * max(scale, np.abs(points).max())))
    return origin, vt[:rank], rank


def _extreme_points(points: np.ndarray) -> np.ndarray:
    """Prune ``points`` down to the extreme points of their convex hull."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] <= 1:
        return pts
    origin, basis, rank = _affine_frame(pts)
    if rank == 0:
        return pts[:1]
    local = (pts - origin) @ basis.T
    if rank == 1:
        t = local[:, 0]
        return pts[[int(np.argmin(t)), int(np.argmax(t))]]
    try:
        hull = ConvexHull(local)
    except QhullError:
        return pts
    return pts[np.sort(hull.vertices)]


@dataclass(frozen=True)
class Polytope:
    """Convex polytope in vertex representation.

    The constructor prunes non-extreme points unless ``pruned=True`` is passed,
    which callers use when the vertex list is already known to be extreme
    (for example the image of an extreme set under an invertible affine map).
    """

    vertices: np.ndarray
    pruned: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V[None, :] if V.size else V.reshape(0, 0)
        if V.ndim != 2 or V.shape[0] == 0:
            raise ValueError("a polytope needs at least one vertex")
        if not self.pruned:
            V = _extreme_points(V)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "pruned", True)

    @classmethod
    def box(cls, center, side) -> "Polytope":
        """Axis-aligned box with the given center and side length(s)."""
        c = _as_point(center)
        half = np.broadcast_to(np.asarray(side, dtype=float) / 2.0, c.shape)
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=c.shape[0])))
        return cls(c + corners * half, pruned=bool(np.all(half > 0)))

    @classmethod
    def from_bounds(cls, lo, hi) -> "Polytope":
        lo, hi = _as_point(lo), _as_point(hi)
        return cls.box((lo + hi) / 2.0, hi - lo)

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @cached_property
    def _dist_payload(self):
        src = self.__dict__.pop("_payload_source", None)
        if src is not None:
            # carry the source ring over instead of rebuilding the hull
            P, T, b = src
            origin, basis, rank, payload = P._dist_payload
            det = float(np.linalg.det(T)) * float(np.linalg.det(basis)) if rank == 2 else 0.0
            if det != 0.0:
                ring = (origin + payload[0] @ basis) @ T.T + b
                if det < 0:
                    ring = ring[::-1]
                return np.zeros(2), np.eye(2), 2, _ring_payload(ring)
        return _distance_payload(self.vertices)

    @property
    def full_dimensional(self) -> bool:
        return self._dist_payload[2] == self.n

    @cached_property
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Unit-normal H-representation ``(G, h)`` with ``G x <= h``.

        ``None`` for lower-dimensional polytopes.
        """
        if not self.full_dimensional:
            return None
        if self.n == 1:
            lo, hi = self.vertices.min(), self.vertices.max()
            return np.array([[1.0], [-1.0]]), np.array([hi, -lo])
        hull = ConvexHull(self.vertices)
        eq = hull.equations
        return eq[:, :-1].copy(), -eq[:, -1].copy()

    @cached_property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def diameter(self) -> float:
        return cloud_diameter(self.vertices)

    def affine_image(self, T: np.ndarray, b: np.ndarray) -> "Polytope":
        """Vertex-wise image under ``x -> T x + b``.

        Extreme points stay extreme when ``T`` is invertible, so no pruning is
        done; callers with singular maps should build a fresh polytope.
        """
        T = np.asarray(T, dtype=float)
        b = np.asarray(b, dtype=float)
        out = Polytope(self.vertices @ T.T + b, pruned=True)
        if self.n == 2 and self.vertices.shape[0] >= 3:
            out.__dict__["_payload_source"] = (self, T, b)
        return out

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from each row of ``points`` to the polytope."""
        return _polytope_distance(_as_points(points, self.n), self)

    def contains(self, x, tol: float = EPS_MEM) -> bool:
        return bool(self.distance(x)[0] <= tol)


def _segment_distance(X: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from rows of ``X`` to segments ``a[e] -> b[e]``, shape (len(X), E)."""
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    L2 = np.where(L2 > 0, L2, 1.0)
    rel = X[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pej,ej->pe", rel, ab) / L2, 0.0, 1.0)
    diff = rel - t[..., None] * ab[None, :, :]
    return np.sqrt(np.einsum("pej,pej->pe", diff, diff))


def _polygon_payload(V: np.ndarray):
    hull = ConvexHull(V)
    return _ring_payload(V[hull.vertices])  # counter-clockwise


def _ring_payload(a: np.ndarray):
    b = np.roll(a, -1, axis=0)
    e = b - a
    G = np.stack([e[:, 1], -e[:, 0]], axis=1)
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return a, b, G, np.einsum("ij,ij->i", G, a)


def _polygon_distance(X: np.ndarray, payload) -> np.ndarray:
    """Exact distance to a convex polygon.

    Edges are stored in ring order with outward normals.  For a point outside,
    the nearest feature is the most violated edge or one of its two
    neighbours, so only three segments are measured per point.
    """
    a, b, G, h = payload
    viol = X @ G.T - h
    top = viol.argmax(axis=1)
    d = np.zeros(X.shape[0])
    out = viol[np.arange(X.shape[0]), top] > 1e-15
    if out.any():
        Xo, E = X[out], a.shape[0]
        idx = (top[out, None] + np.array([-1, 0, 1])[None, :]) % E
        A, Bv = a[idx], b[idx]
        ab = Bv - A
        L2 = np.sum(ab * ab, axis=2)
        rel = Xo[:, None, :] - A
        t = np.clip(np.sum(rel * ab, axis=2) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
        diff = rel - t[..., None] * ab
        d[out] = np.sqrt(np.sum(diff * diff, axis=2).min(axis=1))
    return d


def _triangle_distance(X: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Distance from rows of ``X`` to filled triangles ``tri`` (T, 3, 3)."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    e0, e1 = b - a, c - a
    normal = np.cross(e0, e1)
    nn = np.einsum("ij,ij->i", normal, normal)
    rel = X[:, None, :] - a[None]
    # barycentric coordinates of the in-plane projection
    d00 = np.einsum("ij,ij->i", e0, e0)
    d01 = np.einsum("ij,ij->i", e0, e1)
    d11 = np.einsum("ij,ij->i", e1, e1)
    d20 = np.einsum("ptj,tj->pt", rel, e0)
    d21 = np.einsum("ptj,tj->pt", rel, e1)
    den = d00 * d11 - d01 * d01
    den = np.where(den > 0, den, 1.0)
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    inside = (v >= 0) & (w >= 0) & (v + w <= 1)
    plane = np.abs(np.einsum("ptj,tj->pt", rel, normal)) / np.sqrt(np.where(nn > 0, nn, 1.0))
    edges = np.minimum(
        np.minimum(_segment_distance(X, a, b), _segment_distance(X, b, c)),
        _segment_distance(X, c, a),
    )
    return np.where(inside & (nn > 0)[None], plane, edges)


def _polyhedron_payload(V: np.ndarray):
    hull = ConvexHull(V)
    return V[hull.simplices], hull.equations[:, :-1], -hull.equations[:, -1]


def _polyhedron_distance(X: np.ndarray, payload) -> np.ndarray:
    tri, G, h = payload
    inside = np.all(X @ G.T <= h + 1e-15, axis=1)
    d = np.zeros(X.shape[0])
    out = ~inside
    if out.any():
        d[out] = _triangle_distance(X[out], tri).min(axis=1)
    return d


def _project_rows_to_simplex(W: np.ndarray) -> np.ndarray:
    m = W.shape[1]
    U = -np.sort(-W, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    idx = np.arange(1, m + 1)
    cond = U - css / idx > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(W.shape[0]), rho] / (rho + 1)
    return np.maximum(W - theta[:, None], 0.0)


def _hull_distance_iterative(X: np.ndarray, V: np.ndarray, iters: int = 5000) -> np.ndarray:
    """Accelerated projected gradient over vertex weights, for n >= 4."""
    m = V.shape[0]
    L = np.linalg.norm(V, 2) ** 2
    W = np.full((X.shape[0], m), 1.0 / m)
    Y, t = W.copy(), 1.0
    for _ in range(iters):
        grad = (Y @ V - X) @ V.T
        Wn = _project_rows_to_simplex(Y - grad / L)
        tn = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        Y = Wn + ((t - 1) / tn) * (Wn - W)
        if np.max(np.abs(Wn - W)) < 1e-15:
            W = Wn
            break
        W, t = Wn, tn
    return np.linalg.norm(W @ V - X, axis=1)


def _distance_payload(V: np.ndarray):
    origin, basis, rank = _affine_frame(V)
    Vl = (V - origin) @ basis.T
    if rank == 0:
        payload = None
    elif rank == 1:
        payload = (Vl[:, 0].min(), Vl[:, 0].max())
    elif rank == 2:
        payload = _polygon_payload(Vl)
    elif rank == 3:
        payload = _polyhedron_payload(Vl)
    else:
        payload = Vl
    return origin, basis, rank, payload


def _polytope_distance(X: np.ndarray, P: Polytope) -> np.ndarray:
    origin, basis, rank, payload = P._dist_payload
    rel = X - origin
    local = rel @ basis.T
    if rank == P.n:
        off = 0.0
    else:
        resid = rel - local @ basis
        off = np.einsum("ij,ij->i", resid, resid)
    if rank == 0:
        inplane = np.zeros(X.shape[0])
    elif rank == 1:
        lo, hi = payload
        t = local[:, 0]
        inplane = np.maximum(lo - t, 0.0) + np.maximum(t - hi, 0.0)
    elif rank == 2:
        inplane = _polygon_distance(local, payload)
    elif rank == 3:
        inplane = _polyhedron_distance(local, payload)
    else:
        inplane = _hull_distance_iterative(local, payload)
    return np.sqrt(inplane**2 + off)


def dist_to_polytope(x, P: Polytope) -> float:
    """Euclidean distance from ``x`` to ``conv(P.vertices)``; zero inside.

    Examples
    --------
    >>> seg = Polytope(np.array([[0.0, 0.0], [1.0, 0.0]]))
    >>> dist_to_polytope([0.5, 2.0], seg)
    2.0
    """
    if len(P.vertices) == 0:
        raise ValueError("empty vertex list")
    x = _as_point(x)
    if x.shape[0] != P.n:
        raise DimensionError(f"point has length {x.shape[0]}, polytope lives in R^{P.n}")
    return float(_polytope_distance(x[None, :], P)[0])


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


def _ball_from_support(R: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Smallest ball with all of ``R`` on its boundary (circumscribed in their span)."""
    if len(R) == 0:
        return None, -1.0
    p0 = R[0]
    if len(R) == 1:
        return p0.copy(), 0.0
    D = np.array([p - p0 for p in R[1:]])
    # center = p0 + D^T a with D D^T a = 0.5 |D|^2
    G = D @ D.T
    rhs = 0.5 * np.einsum("ij,ij->i", D, D)
    a, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    c = p0 + D.T @ a
    return c, float(np.linalg.norm(c - p0))


def _welzl(P: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    """Move-to-front variant of Welzl's algorithm (iterative outer loop)."""

    def mtf(end: int, R: list[np.ndarray]):
        c, rad = _ball_from_support(R)
        if len(R) == n + 1:
            return c, rad
        i = 0
        while i < end:
            p = P[i].copy()
            if c is None or np.linalg.norm(p - c) > rad * (1 + 1e-12) + 1e-15:
                c, rad = mtf(i, R + [p])
                # move p to the front so later passes see it early
                P[1 : i + 1] = P[0:i].copy()
                P[0] = p
            i += 1
        return c, rad

    return mtf(P.shape[0], [])


def min_enclosing_ball(points, seed: int = 0) -> Ball:
    """Smallest ball containing every point.

    Parameters
    ----------
    points : array_like, shape (count, n)
    seed : int
        Seed for the random insertion order; the result does not depend on it
        beyond roundoff.

    Examples
    --------
    >>> min_enclosing_ball([[-1.0, 0.0], [1.0, 0.0]]).radius
    1.0
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("empty point list")
    n = pts.shape[1]
    if pts.shape[0] > 64 and n <= 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            pass
    pts = np.unique(pts, axis=0)
    rng = np.random.default_rng(seed)
    P = pts[rng.permutation(pts.shape[0])].copy()
    c, rad = _welzl(P, n)
    # guard the certificate against roundoff in the support solve
    rad = max(rad, float(np.max(np.linalg.norm(pts - c, axis=1))))
    return Ball(c, rad)


def _pairwise_max(P: np.ndarray) -> float:
    """Exact max pairwise distance, processed in row blocks."""
    chunk = max(1, 4_000_000 // max(P.shape[0] * P.shape[1], 1))
    best = 0.0
    for i in range(0, P.shape[0], chunk):
        diff = P[i : i + chunk, None, :] - P[None, :, :]
        best = max(best, float(np.einsum("ijk,ijk->ij", diff, diff).max()))
    return math.sqrt(best)


def _exact_max_pair(P: np.ndarray) -> float:
    """Exact max distance among a modest number of points."""
    diff = P[:, None, :] - P[None, :, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max()))


def _calipers(ring: np.ndarray) -> float:
    """Diameter of a convex polygon given counter-clockwise, by rotating calipers."""
    m = ring.shape[0]
    best = 0.0
    j = 1
    for i in range(m):
        a, b = ring[i], ring[(i + 1) % m]
        e = b - a
        # advance j while the triangle area (distance from edge) keeps growing
        while True:
            nj = (j + 1) % m
            if e[0] * (ring[nj, 1] - a[1]) - e[1] * (ring[nj, 0] - a[0]) > e[0] * (ring[j, 1] - a[1]) - e[1] * (
                ring[j, 0] - a[0]
            ):
                j = nj
            else:
                break
        for q in (a, b):
            d = ring[j] - q
            best = max(best, float(d @ d))
    return math.sqrt(best)


def cloud_diameter(points) -> float:
    """Largest pairwise distance within a point cloud.

    Large clouds in two or three dimensions are first reduced to their hull
    vertices, which does not change the answer.

    Examples
    --------
    >>> cloud_diameter([[0.0, 0.0], [3.0, 4.0]])
    5.0
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    if pts.shape[0] == 1:
        return 0.0
    if pts.shape[0] > 256 and pts.shape[1] in (2, 3):
        try:
            hv = ConvexHull(pts).vertices
        except (QhullError, ValueError):
            hv = None
        if hv is not None:
            if pts.shape[1] == 2 and hv.shape[0] > 1500:
                return _calipers(pts[hv])
            pts = pts[hv]
    if pts.shape[0] <= 1500:
        return _exact_max_pair(pts)
    return _pairwise_max(pts)


def jung_radius(diam: float, n: int) -> float:
    """Radius of a ball guaranteed to cover any set of diameter ``diam`` in R^n.

    Examples
    --------
    >>> round(jung_radius(1.0, 2), 5)
    0.57735
    """
    if diam < 0:
        raise ValueError("diameter must be nonnegative")
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return math.sqrt(n / (2.0 * (n + 1))) * diam


# ---------------------------------------------------------------------------
# Constraint-list sets
# ---------------------------------------------------------------------------


class Bloated(NamedTuple):
    """Minkowski sum ``polytope + B(0, radius)``; ``key``/``stamp`` are bookkeeping tags."""

    polytope: Polytope
    radius: float
    key: int | None = None
    stamp: int | None = None


@dataclass(frozen=True)
class EstimateSet:
    """Convex set stored as ``base ∩ ellipsoids ∩ bloated`` plus a sample cloud.

    Attributes
    ----------
    base : Polytope
    ellipsoids : tuple of Ellipsoid
    bloated : tuple of Bloated
    cloud : ndarray, shape (count, n)
        Points known to satisfy every constraint.
    anchor : ndarray, optional
        A point strictly inside the set, when one is known.
    outer : Polytope, optional
        A polytope known to contain the set.
    grid_rows : ndarray, optional
        Row index of each cloud point when the cloud is a filtered regular grid
        kept in row-major order; enables a fast hull screen for the diameter.
    version : int
        Incremented whenever the represented set shrinks.
    """

    base: Polytope
    ellipsoids: tuple = ()
    bloated: tuple = ()
    cloud: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    anchor: np.ndarray | None = None
    outer: Polytope | None = None
    grid_rows: np.ndarray | None = None
    version: int = 0

    @property
    def n(self) -> int:
        return self.base.n

    @cached_property
    def cloud_diameter(self) -> float:
        if self.cloud.shape[0] == 0:
            return 0.0
        if self.grid_rows is not None and self.cloud.shape[0] > 2:
            return cloud_diameter(self.cloud[_row_extremes(self.grid_rows)])
        return cloud_diameter(self.cloud)

    def member_mask(self, points, tol: float = EPS_MEM) -> np.ndarray:
        """Vectorized membership of each row of ``points``."""
        X = _as_points(points, self.n)
        ok = _polytope_distance(X, self.base) <= tol
        for E in self.ellipsoids:
            ok &= E.quadform(X) <= 1.0 + tol
        for B in self.bloated:
            ok &= _polytope_distance(X, B.polytope) <= B.radius + tol
        return ok


def _row_extremes(rows: np.ndarray) -> np.ndarray:
    """Indices of the first and last entry of each run in a sorted row-id array."""
    if rows.shape[0] == 0:
        return np.zeros(0, dtype=int)
    step = rows[1:] != rows[:-1]
    edge = np.ones(rows.shape[0], dtype=bool)
    edge[1:-1] = step[1:] | step[:-1]
    return np.flatnonzero(edge)


def estimate_membership(S: EstimateSet, x, tol: float = EPS_MEM) -> bool:
    """True iff ``x`` satisfies every constraint stored in ``S``.

    Examples
    --------
    >>> S = EstimateSet(Polytope.box([0.5, 0.5], 1.0),
    ...                 bloated=(Bloated(Polytope(np.array([[0., 0.], [1., 0.]])), 0.5),))
    >>> estimate_membership(S, [0.5, 0.4])
    True
    """
    x = _as_point(x)
    if x.shape[0] != S.n:
        raise DimensionError(f"point has length {x.shape[0]}, set lives in R^{S.n}")
    return bool(S.member_mask(x[None, :], tol)[0])


def grid_cloud(box: Polytope, resolution: int, max_points: int = 250_000):
    """Regular grid over an axis-aligned box, in row-major order.

    Returns the points and the row id of each point (all coordinates but the
    last identify the row).  The per-axis resolution is reduced when the full
    grid would exceed ``max_points``.
    """
    lo, hi = box.bounds
    n = lo.shape[0]
    res = int(resolution)
    while res > 2 and res**n > max_points:
        res -= 1
    axes = [np.linspace(lo[i], hi[i], res) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    rows = np.arange(pts.shape[0]) // res
    return pts, rows


def box_support(lo: np.ndarray, hi: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Support function of the box ``[lo, hi]`` evaluated at rows of ``dirs``."""
    c, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    return dirs @ c + np.abs(dirs) @ half


def sphere_directions(n: int, count: int) -> np.ndarray:
    """Deterministic, roughly uniform unit directions in R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (1 + 5**0.5) * i
        rho = np.sqrt(1 - z * z)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(12345 + n)
    D = rng.standard_normal((count, n))
    D = np.vstack([np.eye(n), -np.eye(n), D])
    return D / np.linalg.norm(D, axis=1, keepdims=True)


__all__ = [
    "EPS_MEM",
    "Ball",
    "Bloated",
    "DimensionError",
    "Ellipsoid",
    "EstimateSet",
    "Polytope",
    "box_support",
    "cloud_diameter",
    "contains",
    "dist_to_polytope",
    "estimate_membership",
    "grid_cloud",
    "jung_radius",
    "min_enclosing_ball",
    "sphere_directions",
]
