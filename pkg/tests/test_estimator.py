import math

import numpy as np
import pytest

from activeloc.dynamics import ConditioningError, LinSys, offsets, step
from activeloc.estimator import (
    EstimatorState,
    analytic_diam_bound,
    compute_ellipsoid_matrix,
    compute_mu,
    estimate,
    initial_estimates,
    pair_ellipsoid,
    recovery_ball,
)
from activeloc.geometry import Polytope, cloud_diameter, estimate_membership, grid_cloud, jung_radius
from activeloc.localize import sense

TWO = LinSys(2 * np.eye(2), np.eye(2))
DIAG23 = LinSys(np.diag([2.0, 3.0]), np.eye(2))


def _unrolled_offset(sys, U, t):
    s = np.zeros(sys.n)
    for u in U[:t]:
        s = step(sys, s, u)
    return s


# ---------------------------------------------------------------- pair ellipsoids


def test_mu_zero_inputs():
    assert np.allclose(compute_mu(3, 1, np.zeros((3, 2)), DIAG23), 0.0)


def test_mu_one_step():
    v = np.array([0.7, -1.3])
    assert np.allclose(compute_mu(1, 0, [v], TWO), -v, atol=1e-15)


def test_mu_diagonal_two_steps():
    U = np.ones((2, 2))
    d = _unrolled_offset(DIAG23, U, 2) - _unrolled_offset(DIAG23, U, 1)
    Akj = np.linalg.matrix_power(DIAG23.A, 2) - DIAG23.A
    want = -np.linalg.solve(Akj, d)
    assert np.allclose(compute_mu(2, 1, U, DIAG23), want, atol=1e-15)
    assert np.allclose(want, [-1.0, -0.5])


def test_mu_argument_checks():
    with pytest.raises(ValueError):
        compute_mu(1, 1, np.zeros((1, 2)), TWO)
    with pytest.raises(ValueError):
        compute_mu(3, 0, np.zeros((2, 2)), TWO)


def test_ellipsoid_matrix_one_step():
    assert np.allclose(compute_ellipsoid_matrix(1, 0, TWO, 2.0), np.eye(2) / 16.0)


def test_ellipsoid_matrix_diagonal():
    assert np.allclose(compute_ellipsoid_matrix(2, 1, DIAG23, 1.0), np.diag([1.0, 9.0]))


def test_ellipsoid_matrix_radius_scaling():
    A = LinSys(np.array([[1.1, 0.2], [0.0, 1.3]]), np.eye(2))
    assert np.allclose(compute_ellipsoid_matrix(4, 1, A, 2.0), compute_ellipsoid_matrix(4, 1, A, 1.0) / 4.0)


def test_pair_ellipsoid_matches_distance_condition():
    # x0 is in E(k, j) exactly when the unrolled states are within 2r
    rng = np.random.default_rng(0)
    sys = LinSys(np.array([[1.05, 0.1], [-0.05, 1.02]]), np.eye(2))
    r = 1.5
    for _ in range(200):
        k = int(rng.integers(1, 30))
        j = int(rng.integers(0, k))
        U = rng.normal(size=(k, 2)) * 0.3
        E = pair_ellipsoid(k, j, U, sys, r)
        x0 = rng.normal(size=2) * 3
        xs = [x0]
        for u in U:
            xs.append(step(sys, xs[-1], u))
        gap = np.linalg.norm(xs[k] - xs[j])
        if abs(gap - 2 * r) > 1e-7:
            assert E.contains(x0) == (gap <= 2 * r)


def test_analytic_bound_one():
    assert analytic_diam_bound(TWO, 2.0, 1) == pytest.approx(8.0)


def test_analytic_bound_three():
    assert analytic_diam_bound(TWO, 2.0, 3) == pytest.approx(8.0 / 7.0, rel=1e-12)
    assert analytic_diam_bound(TWO, 2.0, 3) == pytest.approx(1.1429, abs=5e-5)


def test_analytic_bound_monotone():
    sys = LinSys(np.diag([1.02, 1.3]), np.eye(2))
    vals = [analytic_diam_bound(sys, 2.0, d) for d in range(1, 80)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_analytic_bound_is_pair_diameter():
    sys = LinSys(np.array([[1.05, 0.3], [0.0, 1.1]]), np.eye(2))
    for d in (1, 5, 40):
        E = pair_ellipsoid(d, 0, np.zeros((d, 2)), sys, 2.0)
        assert analytic_diam_bound(sys, 2.0, d) == pytest.approx(E.diameter, rel=1e-10)


def test_analytic_bound_arguments():
    with pytest.raises(ValueError):
        analytic_diam_bound(TWO, 2.0, 0)


def test_singular_pair_raises():
    # A - I has condition number about 6e12
    near = LinSys(np.diag([1.0 + 1.5e-12, 10.0]), np.eye(2))
    with pytest.raises(ConditioningError):
        compute_ellipsoid_matrix(1, 0, near, 1.0)
    with pytest.raises(ConditioningError):
        analytic_diam_bound(near, 1.0, 1)


# ---------------------------------------------------------------- estimate


def _boxes():
    return Polytope.box([0.0, 0.0], 4.0), Polytope.box([0.2, 0.1], 1.0)


def test_estimate_input_checks():
    X0_box, M_box = _boxes()
    X0, M = initial_estimates(X0_box, M_box)
    with pytest.raises(ValueError):
        estimate(X0, M, [], [], TWO, 2.0)
    with pytest.raises(ValueError):
        estimate(X0, M, [1], [[0.0, 0.0]], TWO, 2.0)
    with pytest.raises(ValueError):
        estimate(X0, M, [0, 2], [[0.0, 0.0]], TWO, 2.0)


def test_estimate_at_time_zero():
    X0_box, M_box = _boxes()
    r = 2.0
    X0, M = initial_estimates(X0_box, M_box)
    X0n, Xk, Mn = estimate(X0, M, [0], [], TWO, r)
    assert X0n.ellipsoids == ()
    assert X0n.cloud_diameter == pytest.approx(X0_box.diameter, rel=1e-12)
    # landmark set is the landmark box within r of the initial box: all of it here
    pts, _ = grid_cloud(M_box, 41)
    assert all(estimate_membership(Mn, p) for p in pts)
    # current-state set equals the initial box near the landmark box
    rng = np.random.default_rng(0)
    X = rng.uniform(-2, 2, size=(2000, 2))
    want = M_box.distance(X) <= r
    got = Xk.member_mask(X)
    assert np.array_equal(got, want)


def test_estimate_scalar_contraction():
    # x0 = m = 0 under A = 2I stays at the origin and every bit is positive
    X0_box, M_box = Polytope.box([0.0, 0.0], 4.0), Polytope.box([0.0, 0.0], 1.0)
    r = 2.0
    st = EstimatorState.start(X0_box, M_box, TWO, r)
    grid, _ = grid_cloud(X0_box, 401)
    for k in range(6):
        X0n, Xk, Mn = st.positive()
        if k >= 1:
            for j in range(k):
                E = pair_ellipsoid(k, j, np.zeros((k, 2)), TWO, r)
                assert np.allclose(E.mu, 0.0)
                assert np.allclose(E.P, (2**k - 2**j) ** 2 * np.eye(2) / 16.0)
            bound = 4 * r / (2**k - 1)
            assert analytic_diam_bound(TWO, r, k) == pytest.approx(bound)
            # brute-force grid filter of the box by every pair ellipsoid
            keep = np.ones(grid.shape[0], dtype=bool)
            for kk in range(1, k + 1):
                for j in range(kk):
                    keep &= pair_ellipsoid(kk, j, np.zeros((kk, 2)), TWO, r).quadform(grid) <= 1 + 1e-9
            brute = cloud_diameter(grid[keep])
            assert brute <= bound + 1e-12
            assert X0n.cloud_diameter <= bound + 1e-9
            assert X0n.cloud_diameter >= brute - 1e-9
            assert X0n.cloud_diameter == pytest.approx(min(bound, X0_box.diameter), rel=1e-3)
        assert estimate_membership(X0n, [0.0, 0.0])
        assert estimate_membership(Mn, [0.0, 0.0])
        st.apply(np.zeros(2))


def _feasible_sys(rng):
    th = rng.uniform(-0.02, 0.02)
    lam = rng.uniform(1.005, 1.014)
    A = lam * np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    return LinSys(A, np.eye(2))


def test_estimate_contains_truth_monte_carlo():
    rng = np.random.default_rng(11)
    X0_box, M_box = Polytope.box([0.2, -0.2], 3.5), Polytope.box([0.5, 0.5], 1.0)
    r = 2.0
    for _ in range(40):
        sys = _feasible_sys(rng)
        m = rng.uniform(0.0, 1.0, 2)
        while True:
            x0 = rng.uniform([-1.55, -1.95], [1.95, 1.55])
            if sense(x0, m, r):
                break
        st = EstimatorState.start(X0_box, M_box, sys, r)
        x = x0
        prev_x0 = prev_m = math.inf
        for k in range(25):
            if sense(x, m, r):
                X0n, Xk, Mn = st.positive()
                assert estimate_membership(X0n, x0)
                assert estimate_membership(Xk, x)
                assert estimate_membership(Mn, m)
                assert np.all(X0n.member_mask(X0n.cloud))
                assert X0n.cloud_diameter <= prev_x0 + 1e-9
                assert Mn.cloud_diameter <= prev_m + 1e-9
                prev_x0, prev_m = X0n.cloud_diameter, Mn.cloud_diameter
            u = rng.uniform(-0.3, 0.3, 2)
            st.apply(u)
            x = step(sys, x, u)


def test_state_offsets_match_iteration():
    rng = np.random.default_rng(2)
    sys = LinSys(np.array([[1.02, 0.1], [0.0, 1.01]]), np.eye(2))
    st = EstimatorState.start(*_boxes(), sys, 2.0)
    U = rng.normal(size=(15, 2))
    for u in U:
        st.apply(u)
    assert np.allclose(np.asarray(st._offsets), offsets(sys, U), rtol=1e-12, atol=1e-14)


def test_recovery_ball_encloses_current_set():
    rng = np.random.default_rng(5)
    X0_box, M_box = Polytope.box([0.2, -0.2], 3.5), Polytope.box([0.5, 0.5], 1.0)
    sys = _feasible_sys(rng)
    st = EstimatorState.start(X0_box, M_box, sys, 2.0)
    for _ in range(3):
        st.positive()
        st.apply(np.zeros(2))
    X0n, Xk, Mn = st.positive()
    ball = recovery_ball(Xk, 2.0)
    # sample the current-state set densely and check the ball covers it
    lo, hi = Xk.outer.bounds
    X = rng.uniform(lo, hi, size=(50_000, 2))
    inside = X[Xk.member_mask(X)]
    assert inside.shape[0] > 100
    assert np.all(np.linalg.norm(inside - ball.center, axis=1) <= ball.radius + 1e-9)
    assert ball.radius <= jung_radius(Xk.outer.diameter, 2) * (1 + 1e-9)
