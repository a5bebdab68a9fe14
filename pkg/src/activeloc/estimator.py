"""Set-membership estimation of the initial state, current state and landmark.

Two positive measurements at times ``j < k`` mean ``||x_k - x_j|| <= 2r``,
which pins ``x_0`` to the ellipsoid ``E(mu_kj, P_kj)``.  The landmark lies
within ``r`` of every positively measured state, and the current state lies in
the forward image of the initial-state estimate.

Sets are kept symbolic (box ∩ ellipsoids ∩ bloated polytopes) so membership is
exact.  For the initial-state set the sample cloud is regenerated after each
cut by ray casting from an interior point, with the two diameter endpoints
refined to near machine precision.  For the landmark set the cloud is a regular
grid that is only ever filtered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from ._region import Region, quad_batch
from .dynamics import MAX_CONDITION, ConditioningError, LinSys, offsets
from .geometry import (
    EPS_MEM,
    Ball,
    Bloated,
    Ellipsoid,
    EstimateSet,
    Polytope,
    _polytope_distance,
    _row_extremes,
    box_support,
    cloud_diameter,
    grid_cloud,
    jung_radius,
    min_enclosing_ball,
    sphere_directions,
)


class EmptyEstimateError(RuntimeError):
    """Raised when an estimate loses its interior, which contradicts consistent data."""


@dataclass(frozen=True)
class EstimatorOptions:
    """Tuning knobs for the estimator.

    Attributes
    ----------
    n_rays : int
        Boundary samples cast per refinement of the initial-state set.
    max_new_ellipsoids : int
        Extra cutting ellipsoids admitted per update, besides the pair with time 0.
    max_ellipsoids : int
        Soft cap on stored ellipsoids; beyond it only the pair with time 0 is added.
    landmark_refresh : int
        Older landmark constraints re-tightened per update.
    support_directions : int
        Directions used to approximate rounded sets by polygons.
    recovery_directions : int
        Directions used for the outer polygon that feeds the recovery ball.
    grid_resolution : int
        Points per axis of the landmark grid cloud.
    """

    n_rays: int = 64
    max_new_ellipsoids: int = 4
    max_ellipsoids: int = 64
    landmark_refresh: int = 2
    support_directions: int = 32
    recovery_directions: int = 256
    grid_resolution: int = 201


DEFAULT_OPTIONS = EstimatorOptions()

# old cloud points this far outside a new constraint (in quadratic-form or
# halfspace units) still count as inside; absorbs roundoff at the boundary
MEMBER_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Pair ellipsoids
# ---------------------------------------------------------------------------


def _pair_matrices(k: int, js: np.ndarray, pw: np.ndarray, s: np.ndarray, r: float):
    A_kj = pw[k][None, :, :] - pw[js]
    sv = np.linalg.svd(A_kj, compute_uv=False)
    bad = (sv[:, -1] <= 0) | (sv[:, 0] > MAX_CONDITION * sv[:, -1])
    if np.any(bad):
        j = int(js[np.flatnonzero(bad)[0]])
        raise ConditioningError(f"A^{k} - A^{j} is numerically singular")
    d = s[k][None, :] - s[js]
    mu = -np.linalg.solve(A_kj, d[..., None])[..., 0]
    P = np.einsum("jki,jkl->jil", A_kj, A_kj) / (4.0 * r * r)
    P = 0.5 * (P + np.swapaxes(P, 1, 2))
    return mu, P


def compute_mu(k: int, j: int, u, sys: LinSys) -> np.ndarray:
    """Center ``-(A^k - A^j)^{-1} (s_k - s_j)`` of the pair ellipsoid.

    ``s_t`` is the state reached from the origin after inputs ``u_0 .. u_{t-1}``.

    Raises
    ------
    ConditioningError
        If ``A^k - A^j`` is numerically singular.
    """
    if not k > j >= 0:
        raise ValueError("need k > j >= 0")
    if len(u) < k:
        raise ValueError("input sequence shorter than k")
    s = offsets(sys, np.asarray(u, dtype=float).reshape(-1, sys.m)[:k])
    mu, _ = _pair_matrices(k, np.array([j]), sys.powers(k), s, 1.0)
    return mu[0]


def compute_ellipsoid_matrix(k: int, j: int, sys: LinSys, r: float) -> np.ndarray:
    """Shape matrix ``(A^k - A^j)^T (A^k - A^j) / (4 r^2)``.

    Examples
    --------
    >>> compute_ellipsoid_matrix(1, 0, LinSys(2 * np.eye(2), np.eye(2)), 2.0).tolist()
    [[0.0625, 0.0], [0.0, 0.0625]]
    """
    if not k > j >= 0:
        raise ValueError("need k > j >= 0")
    if r <= 0:
        raise ValueError("r must be positive")
    s = np.zeros((k + 1, sys.n))
    _, P = _pair_matrices(k, np.array([j]), sys.powers(k), s, r)
    return P[0]


def pair_ellipsoid(k: int, j: int, u, sys: LinSys, r: float) -> Ellipsoid:
    """The ellipsoid of initial states compatible with positive bits at ``j`` and ``k``."""
    s = offsets(sys, np.asarray(u, dtype=float).reshape(-1, sys.m)[:k])
    mu, P = _pair_matrices(k, np.array([j]), sys.powers(k), s, r)
    return Ellipsoid(mu[0], P[0], (k, j))


def analytic_diam_bound(sys: LinSys, r: float, d_k: int) -> float:
    """Diameter of the pair ellipsoid ``(d_k, 0)``: ``4 r ||(A^{d_k} - I)^{-1}||``.

    Examples
    --------
    >>> round(analytic_diam_bound(LinSys(2 * np.eye(2), np.eye(2)), 2.0, 3), 6)
    1.142857
    """
    if d_k < 1:
        raise ValueError("d_k must be at least 1")
    M = sys.power(d_k) - np.eye(sys.n)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 0 or sv[0] > MAX_CONDITION * sv[-1]:
        raise ConditioningError(f"A^{d_k} - I is numerically singular")
    return 4.0 * r / float(sv[-1])


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _trusted_ellipsoid(mu: np.ndarray, P: np.ndarray, label) -> Ellipsoid:
    """Build an ellipsoid whose shape matrix is symmetric PD by construction."""
    E = object.__new__(Ellipsoid)
    object.__setattr__(E, "mu", mu)
    object.__setattr__(E, "P", P)
    object.__setattr__(E, "label", label)
    return E


def _region_of(S: EstimateSet) -> Region:
    G, h = S.base.halfspaces
    if S.ellipsoids:
        mus = np.array([E.mu for E in S.ellipsoids])
        Ps = np.array([E.P for E in S.ellipsoids])
    else:
        mus = np.zeros((0, S.n))
        Ps = np.zeros((0, S.n, S.n))
    return Region(G, h, mus, Ps)


def _bloat_mask(X: np.ndarray, poly: Polytope, radius: float) -> np.ndarray:
    """Rows of ``X`` within ``radius`` (+tolerance) of ``poly``; cheap ball screen first."""
    V = poly.vertices
    o = V.mean(axis=0)
    R_out = float(np.max(np.linalg.norm(V - o, axis=1)))
    d = np.linalg.norm(X - o, axis=1)
    mask = d <= radius
    amb = ~mask & (d <= radius + R_out + EPS_MEM)
    if amb.any():
        mask[amb] = _polytope_distance(X[amb], poly) <= radius + EPS_MEM
    return mask


def _inner_rounded(V: np.ndarray, r: float, U: np.ndarray):
    """H-representation of a polytope inscribed in ``conv(V) + B(0, r)``.

    Its vertices are the support points of the rounded set in directions ``U``.
    """
    pts = V[np.argmax(U @ V.T, axis=1)] + r * U
    hull = ConvexHull(pts)
    return hull.equations[:, :-1], -hull.equations[:, -1]


def _choose_anchor(reg: Region, cands: np.ndarray, keep_first: bool, scale: float):
    sl = reg.slack(cands)
    best = int(np.argmax(sl))
    i = 0 if keep_first and sl[0] > 0 and sl[0] >= 0.25 * sl[best] else best
    c, sc = cands[i], float(sl[i])
    if sc <= 1e-9 * scale:
        c, sc = reg.deep_point(c, scale)
    if not sc > 0:
        raise EmptyEstimateError("estimate has no interior point")
    return c, sc


# ---------------------------------------------------------------------------
# Initial estimates
# ---------------------------------------------------------------------------


def _sample_region(reg: Region, c: np.ndarray, options: EstimatorOptions, fallback: Polytope, prev=None):
    """Boundary samples of a region and a polytope containing it.

    With ``prev`` (the cloud of a larger nested region) the samples are taken
    on ``region ∩ conv(prev)`` instead, and the old points still inside the
    region are kept, so the cloud diameter can only shrink.  The containing
    polytope always comes from the region itself.
    """
    D = sphere_directions(reg.n, options.n_rays)
    B, act = reg.boundary(c, D)
    outer = reg.outer_polytope(c, B, act, fallback)

    def fresh():
        return _hull_points(np.vstack([B, reg.corners(c, D, act)]))

    if prev is None:
        return fresh(), outer, act
    try:
        eq = ConvexHull(prev).equations
    except (QhullError, ValueError):
        return fresh(), outer, act
    inner = reg.with_halfspaces(eq[:, :-1], -eq[:, -1])
    scale = max(cloud_diameter(prev), 1e-300)
    cands = np.vstack([c[None, :], prev.mean(axis=0)[None, :], 0.5 * (c + prev.mean(axis=0))[None, :]])
    try:
        ci, _ = _choose_anchor(inner, cands, True, scale)
    except EmptyEstimateError:
        # the region slipped out of the old inner cloud; restart from fresh samples
        return fresh(), outer, act
    Bi, acti = inner.boundary(ci, D)
    old = prev[reg.member(prev, MEMBER_SLACK)]
    pts = np.vstack([old, Bi, inner.corners(ci, D, acti)])
    return _hull_points(pts), outer, act


def _hull_points(pts: np.ndarray) -> np.ndarray:
    try:
        return pts[np.sort(ConvexHull(pts).vertices)]
    except (QhullError, ValueError):
        return pts


def initial_estimates(
    X0_box: Polytope,
    M_box: Polytope,
    options: EstimatorOptions = DEFAULT_OPTIONS,
) -> tuple[EstimateSet, EstimateSet]:
    """Estimates before any measurement: the prior boxes themselves.

    The initial-state cloud is sampled on the box boundary; the landmark cloud
    is a regular grid over its box.
    """
    reg = Region(*X0_box.halfspaces, np.zeros((0, X0_box.n)), np.zeros((0, X0_box.n, X0_box.n)))
    c = X0_box.vertices.mean(axis=0)
    cloud, _, _ = _sample_region(reg, c, options, X0_box)
    cloud = _hull_points(np.vstack([cloud, X0_box.vertices]))
    X0_hat = EstimateSet(X0_box, (), (), cloud, anchor=c, outer=X0_box, version=0)
    pts, rows = grid_cloud(M_box, options.grid_resolution)
    M_hat = EstimateSet(M_box, (), (), pts, outer=M_box, grid_rows=rows, version=0)
    return X0_hat, M_hat


def _refine_initial(X0: EstimateSet, k: int, L, pw, s, r, options: EstimatorOptions) -> tuple:
    """Intersect with the cutting pair ellipsoids ``(k, j)``; returns (set, new ellipsoids)."""
    if len(L) < 2:
        return X0, ()
    js = np.asarray(L[:-1], dtype=int)
    mu, P = _pair_matrices(k, js, pw, s, r)
    pts = X0.cloud
    q = quad_batch(pts, mu, P)
    cut = (q > 1.0).sum(axis=1)
    chosen: list[int] = []
    i0 = 0  # L always starts with 0
    if cut[i0] > 0:
        chosen.append(i0)
    else:
        Vo = X0.outer.vertices - mu[i0]
        if np.any(np.einsum("pi,ij,pj->p", Vo, P[i0], Vo) > 1.0):
            chosen.append(i0)
    room = options.max_ellipsoids - len(X0.ellipsoids)
    budget = min(options.max_new_ellipsoids, max(room, 0))
    if budget > 0:
        depth = q.max(axis=1)
        order = np.lexsort((-depth, -cut))
        for i in order:
            if len(chosen) - (i0 in chosen) >= budget or cut[i] == 0:
                break
            if i != i0:
                chosen.append(int(i))
    if not chosen:
        return X0, ()
    new = tuple(_trusted_ellipsoid(mu[i], P[i], (k, int(js[i]))) for i in chosen)
    ells = X0.ellipsoids + new
    S = replace(X0, ellipsoids=ells)
    reg = _region_of(S)
    scale = max(X0.cloud_diameter, 1e-300)
    survivors = pts[reg.member(pts, 0.0)]
    cands = [X0.anchor]
    if survivors.shape[0]:
        cands.append(survivors.mean(axis=0))
    cands.append(mu[i0])
    c, _ = _choose_anchor(reg, np.array(cands), True, scale)
    cloud, outer, act = _sample_region(reg, c, options, X0.outer, X0.cloud)
    # drop ellipsoids that provably no longer shape the set
    nh = reg.n_half
    active = set((act[act >= nh] - nh).tolist())
    keep = []
    Vo = outer.vertices
    for e, E in enumerate(ells):
        if e in active or E.label == (k, 0):
            keep.append(E)
            continue
        W = Vo - E.mu
        if np.any(np.einsum("pi,ij,pj->p", W, E.P, W) > 1.0 - 1e-12):
            keep.append(E)
    out = EstimateSet(
        X0.base,
        tuple(keep),
        (),
        cloud,
        anchor=c,
        outer=outer,
        version=X0.version + 1,
    )
    return out, new


def _refine_landmark(X0n: EstimateSet, M: EstimateSet, k: int, pw, s, r, options) -> EstimateSet:
    O = X0n.outer
    ver = X0n.version
    bloats = {b.key: b for b in M.bloated}
    stale = sorted((b.stamp, b.key) for b in M.bloated if b.stamp < ver and b.key != k)
    keys = [k] + [key for _, key in stale[: options.landmark_refresh]]
    cloud, rows = M.cloud, M.grid_rows
    lo, hi = M.outer.bounds
    lo, hi = lo.copy(), hi.copy()
    changed = False
    for j in keys:
        poly = O.affine_image(pw[j], s[j])
        bloats[j] = Bloated(poly, r, j, ver)
        plo, phi = poly.bounds
        lo = np.maximum(lo, plo - r)
        hi = np.minimum(hi, phi + r)
        if cloud.shape[0] == 0:
            continue
        probe = _row_extremes(rows) if rows is not None else np.arange(cloud.shape[0])
        if np.all(_bloat_mask(cloud[probe], poly, r)):
            continue  # hull of the cloud already inside: nothing to filter
        keep = _bloat_mask(cloud, poly, r)
        cloud = cloud[keep]
        rows = rows[keep] if rows is not None else None
        changed = True
    hi = np.maximum(hi, lo)
    outer = Polytope.from_bounds(lo, hi)
    bl = tuple(bloats[key] for key in sorted(bloats))
    out = EstimateSet(
        M.base,
        (),
        bl,
        cloud,
        outer=outer,
        grid_rows=rows,
        version=M.version + (1 if changed else 0),
    )
    if not changed and "cloud_diameter" in M.__dict__:
        out.__dict__["cloud_diameter"] = M.cloud_diameter
    return out


def _landmark_hull(M: EstimateSet) -> np.ndarray:
    """Candidate hull vertices of the landmark cloud, or its outer box corners when empty."""
    if M.cloud.shape[0] == 0:
        return M.outer.vertices
    if M.grid_rows is not None:
        return M.cloud[_row_extremes(M.grid_rows)]
    return M.cloud


def _current_state(X0n: EstimateSet, M: EstimateSet, k: int, pw, s, r, options) -> EstimateSet:
    n = X0n.n
    Ak, sk = pw[k], s[k]
    U = sphere_directions(n, options.support_directions)
    Gi, hi = _inner_rounded(_landmark_hull(M), r, U)
    base_reg = _region_of(X0n)
    cands = np.vstack([X0n.anchor[None, :], X0n.cloud, 0.5 * (X0n.cloud + X0n.anchor)])
    scale = max(X0n.cloud_diameter, 1e-300)
    try:
        reg = base_reg.with_halfspaces(Gi @ Ak, hi - Gi @ sk)
        c, _ = _choose_anchor(reg, cands, True, scale)
    except EmptyEstimateError:
        # the sampled landmark hull can miss the true landmark near its
        # boundary; fall back to supporting halfspaces of the rounded outer box
        lo, hi_b = M.outer.bounds
        reg = base_reg.with_halfspaces(U @ Ak, box_support(lo, hi_b, U) + r - U @ sk)
        c, _ = _choose_anchor(reg, cands, True, scale)
    D = sphere_directions(n, options.n_rays)
    B, _ = reg.boundary(c, D)
    pts = np.vstack([c[None, :], B]) @ Ak.T + sk
    ells = tuple(
        _trusted_ellipsoid(Ak @ E.mu + sk, _push_shape(E.P, Ak), E.label) for E in X0n.ellipsoids
    )
    return EstimateSet(
        X0n.base.affine_image(Ak, sk),
        ells,
        (Bloated(M.outer, r),),
        pts,
        anchor=Ak @ c + sk,
        outer=X0n.outer.affine_image(Ak, sk),
        version=X0n.version,
    )


def _push_shape(P: np.ndarray, T: np.ndarray) -> np.ndarray:
    Ti = np.linalg.inv(T)
    Q = Ti.T @ P @ Ti
    return 0.5 * (Q + Q.T)


# ---------------------------------------------------------------------------
# Public update
# ---------------------------------------------------------------------------


def estimate(
    X0: EstimateSet,
    M: EstimateSet,
    L_k,
    u,
    sys: LinSys,
    r: float,
    options: EstimatorOptions = DEFAULT_OPTIONS,
    state_offsets: np.ndarray | None = None,
) -> tuple[EstimateSet, EstimateSet, EstimateSet]:
    """One update after a positive measurement at time ``k = max(L_k)``.

    Parameters
    ----------
    X0, M : EstimateSet
        Current initial-state and landmark estimates.
    L_k : sequence of int
        Strictly increasing times with positive measurements; starts at 0 and
        ends at the current time.
    u : sequence
        Inputs ``u_0 .. u_{k-1}``.
    sys : LinSys
    r : float
        Sensing radius.
    state_offsets : ndarray, optional
        Precomputed ``s_0 .. s_k`` (see :func:`activeloc.dynamics.offsets`).

    Returns
    -------
    X0', Xk', M'
        Refined initial-state set, current-state set and landmark set.  All
        three contain their true values whenever the measurements are
        consistent.
    """
    L = [int(t) for t in L_k]
    if not L:
        raise ValueError("L_k must be nonempty")
    if any(b <= a for a, b in zip(L, L[1:])):
        raise ValueError("L_k must be strictly increasing")
    if L[0] != 0:
        raise ValueError("L_k must start at time 0")
    k = L[-1]
    if len(u) != k:
        raise ValueError(f"expected {k} inputs, got {len(u)}")
    if state_offsets is None:
        state_offsets = offsets(sys, np.asarray(u, dtype=float).reshape(-1, sys.m))
    pw = sys.powers(k)
    X0n, _ = _refine_initial(X0, k, L, pw, state_offsets, r, options)
    Xk = _current_state(X0n, M, k, pw, state_offsets, r, options)
    Mn = _refine_landmark(X0n, M, k, pw, state_offsets, r, options)
    return X0n, Xk, Mn


def recovery_ball(Xk: EstimateSet, r: float, options: EstimatorOptions = DEFAULT_OPTIONS) -> Ball:
    """Ball guaranteed to contain the current-state set.

    The set is enclosed in a polytope (its reach polytope intersected with
    supporting halfspaces of the rounded landmark box); the smallest ball
    around that polytope's vertices is returned.  Its radius never exceeds
    the covering radius for the polytope's diameter.
    """
    n = Xk.n
    U = sphere_directions(n, options.recovery_directions)
    lo, hi = Xk.bloated[0].polytope.bounds
    Go, ho = Xk.outer.halfspaces
    G = np.vstack([Go, U])
    h = np.concatenate([ho, box_support(lo, hi, U) + r])
    c = Xk.anchor
    scale = max(cloud_diameter(Xk.cloud), 1e-12)
    hl = (h - G @ c) / scale
    V = None
    if np.all(hl > 0):
        try:
            hs = HalfspaceIntersection(np.hstack([G, -hl[:, None]]), np.zeros(n))
            V = c + scale * hs.intersections
        except (QhullError, ValueError):
            V = None
    if V is None or not np.all(np.isfinite(V)):
        V = Xk.outer.vertices
    ball = min_enclosing_ball(V)
    # the covering radius for the set's diameter can never be smaller
    assert ball.radius <= jung_radius(cloud_diameter(V), n) * (1 + 1e-9) + 1e-12
    return ball


@dataclass
class EstimatorState:
    """Mutable estimator bookkeeping for one closed-loop run.

    Attributes
    ----------
    X0_hat, M_hat : EstimateSet
    L : list of int
        Times with positive measurements.
    controls : list of ndarray
        Inputs applied so far.
    Xk_hat : EstimateSet or None
        Current-state estimate at the last positive time.
    """

    X0_hat: EstimateSet
    M_hat: EstimateSet
    sys: LinSys
    r: float
    options: EstimatorOptions = DEFAULT_OPTIONS
    L: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    Xk_hat: EstimateSet | None = None
    _offsets: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._offsets:
            self._offsets = [np.zeros(self.sys.n)]

    @classmethod
    def start(cls, X0_box: Polytope, M_box: Polytope, sys: LinSys, r: float, options=DEFAULT_OPTIONS):
        X0_hat, M_hat = initial_estimates(X0_box, M_box, options)
        return cls(X0_hat, M_hat, sys, r, options)

    @property
    def k(self) -> int:
        """Current time (number of inputs applied)."""
        return len(self.controls)

    def positive(self) -> tuple[EstimateSet, EstimateSet, EstimateSet]:
        """Record a positive bit at the current time and refine all estimates."""
        k = self.k
        if self.L and self.L[-1] >= k:
            raise ValueError("positive bit already recorded for this time")
        self.L.append(k)
        self.X0_hat, self.Xk_hat, self.M_hat = estimate(
            self.X0_hat,
            self.M_hat,
            self.L,
            self.controls,
            self.sys,
            self.r,
            self.options,
            np.asarray(self._offsets),
        )
        return self.X0_hat, self.Xk_hat, self.M_hat

    def apply(self, u) -> None:
        """Advance time by one input."""
        u = np.asarray(u, dtype=float).reshape(-1)
        self.controls.append(u)
        self._offsets.append(self.sys.A @ self._offsets[-1] + self.sys.B @ u)


__all__ = [
    "DEFAULT_OPTIONS",
    "EmptyEstimateError",
    "EstimatorOptions",
    "EstimatorState",
    "analytic_diam_bound",
    "compute_ellipsoid_matrix",
    "compute_mu",
    "estimate",
    "initial_estimates",
    "pair_ellipsoid",
    "recovery_ball",
]
