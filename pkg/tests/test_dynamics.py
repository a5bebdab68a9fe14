import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activeloc.dynamics import (
    ConditioningError,
    ControllabilityError,
    LinSys,
    controllability_index,
    fit_growth_bound,
    gramian,
    inverse_gap_norms,
    lambda_min,
    offsets,
    reach,
    step,
)
from activeloc.experiment import _draw_matrix
from activeloc.geometry import Polytope

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
JORDAN = np.array([[1.1, 1.0], [0.0, 1.1]])


def _sys(A, B=None):
    A = np.asarray(A, dtype=float)
    return LinSys(A, np.eye(A.shape[0]) if B is None else B)


def _random_sys(rng, n, m):
    while True:
        A = rng.normal(size=(n, n))
        ev = np.abs(np.linalg.eigvals(A))
        A = A / ev.min() * rng.uniform(1.01, 1.3)
        B = rng.normal(size=(n, m))
        try:
            return LinSys(A, B)
        except (ValueError, ControllabilityError):
            continue


# ---------------------------------------------------------------- construction


def test_rejects_stable_matrix():
    with pytest.raises(ValueError):
        _sys(np.diag([1.5, 0.9]))


def test_rejects_unit_eigenvalue():
    with pytest.raises(ValueError):
        _sys(np.eye(2))


def test_rejects_uncontrollable_pair():
    with pytest.raises(ControllabilityError):
        LinSys(2 * np.eye(2), np.array([[1.0], [0.0]]))


def test_roundtrip_dict():
    s = LinSys(JORDAN, np.array([[0.0], [1.0]]))
    t = LinSys.from_dict(s.to_dict())
    assert np.array_equal(s.A, t.A) and np.array_equal(s.B, t.B)


# ---------------------------------------------------------------- step / reach


def test_step_zero():
    assert np.array_equal(step(_sys(2 * np.eye(2)), [0.0, 0.0], [0.0, 0.0]), [0.0, 0.0])


def test_step_scaled_identity():
    assert step(_sys(2 * np.eye(2)), [1.0, 0.0], [0.0, 1.0]).tolist() == [2.0, 1.0]


def test_step_diagonal():
    assert step(_sys(np.diag([2.0, 3.0])), [1.0, 1.0], [0.0, 0.0]).tolist() == [2.0, 3.0]


def test_step_dimension_mismatch():
    with pytest.raises(ValueError):
        step(_sys(2 * np.eye(2)), [1.0, 0.0, 0.0], [0.0, 0.0])


def test_reach_zero_steps():
    P = Polytope(UNIT_SQUARE)
    assert reach(_sys(2 * np.eye(2)), [], P) is P


def test_reach_singleton_power():
    x0 = np.array([0.3, -0.7])
    R = reach(_sys(2 * np.eye(2)), np.zeros((3, 2)), Polytope(x0[None, :]))
    assert np.allclose(R.vertices, [8 * x0])


def test_reach_square_one_step():
    R = reach(_sys(2 * np.eye(2)), [[1.0, 1.0]], Polytope(UNIT_SQUARE))
    expect = 2 * UNIT_SQUARE + 1.0
    assert sorted(map(tuple, R.vertices)) == sorted(map(tuple, expect))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_reach_matches_iterated_step(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 4)), int(rng.integers(1, 3))
    sys = _random_sys(rng, n, m)
    k = int(rng.integers(1, 30))
    U = rng.normal(size=(k, m))
    x = x0 = rng.normal(size=n)
    for u in U:
        x = step(sys, x, u)
    R = reach(sys, U, Polytope(x0[None, :]))
    assert np.allclose(R.vertices[0], x, rtol=1e-9, atol=1e-9 * np.linalg.norm(x))
    assert np.allclose(offsets(sys, U)[-1] + sys.power(k) @ x0, x, rtol=1e-9, atol=1e-12)


def test_reach_keeps_extreme_points():
    rng = np.random.default_rng(1)
    P = Polytope(rng.normal(size=(12, 2)))
    sys = _sys([[1.2, 0.5], [-0.3, 1.1]])
    R = reach(sys, rng.normal(size=(4, 2)), P)
    assert R.vertices.shape[0] == P.vertices.shape[0]
    rebuilt = Polytope(R.vertices)
    assert rebuilt.vertices.shape[0] == P.vertices.shape[0]


# ---------------------------------------------------------------- controllability


def test_index_full_input():
    assert controllability_index(_sys(2 * np.eye(2))) == 1


def test_index_jordan_single_input():
    # [B, AB] = [[0, 1], [1, 1.1]] has rank 2, B alone rank 1
    assert controllability_index(LinSys(JORDAN, np.array([[0.0], [1.0]]))) == 2


def test_index_three_dim_single_input():
    rng = np.random.default_rng(4)
    sys = _random_sys(rng, 3, 1)
    assert controllability_index(sys) == 3


def test_gramian_identity_input():
    assert np.allclose(gramian(_sys(2 * np.eye(2)), 1), np.eye(2))


def test_gramian_two_terms():
    assert np.allclose(gramian(_sys(2 * np.eye(2)), 2), 5 * np.eye(2))


def test_gramian_jordan_by_hand():
    sys = LinSys(JORDAN, np.array([[0.0], [1.0]]))
    B = np.array([0.0, 1.0])
    AB = np.array([1.0, 1.1])
    W = np.outer(B, B) + np.outer(AB, AB)
    assert np.allclose(gramian(sys, 2), W, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(W) > 0)


def test_gramian_singular():
    with pytest.raises(ConditioningError):
        gramian(LinSys(JORDAN, np.array([[0.0], [1.0]])), 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_gramian_reindexed_sum(seed):
    rng = np.random.default_rng(seed)
    sys = _random_sys(rng, 2, 1)
    nb = controllability_index(sys)
    W = gramian(sys, nb)
    S = sum((sys.power(nb - j) @ sys.B) @ (sys.power(nb - j) @ sys.B).T for j in range(1, nb + 1))
    assert np.allclose(S, W, rtol=1e-9, atol=1e-9 * np.abs(W).max())


# ---------------------------------------------------------------- spectrum and growth


def test_lambda_min_identity_scale():
    assert lambda_min(_sys(2 * np.eye(2))) == pytest.approx(2.0)


def test_lambda_min_diagonal():
    assert lambda_min(_sys(np.diag([1.014, 3.0]))) == pytest.approx(1.014, abs=1e-14)


def test_lambda_min_rotation():
    t = 0.7
    R = 1.2 * np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    assert lambda_min(_sys(R)) == pytest.approx(1.2, abs=1e-14)


def test_growth_bound_scalar_enumeration():
    gb = fit_growth_bound(_sys(2 * np.eye(2)), 0.5, 10)
    K = max(2 ** (k / 2) / (2**k - 1) for k in range(1, 11))
    assert gb.K == pytest.approx(K, rel=1e-12)
    assert gb.K == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert gb.k_star == 1


def test_growth_bound_limit_c_to_one():
    gb = fit_growth_bound(_sys(2 * np.eye(2)), 0.9999, 60)
    assert gb.K == pytest.approx(2.0, rel=1e-3)


def test_growth_bound_single_step():
    sys = _sys([[1.3, 0.2], [0.0, 1.1]])
    gb = fit_growth_bound(sys, 0.5, 1)
    expect = np.linalg.norm(np.linalg.inv(sys.A - np.eye(2)), 2) * lambda_min(sys) ** 0.5
    assert gb.K == pytest.approx(expect, rel=1e-12)


def test_growth_bound_arguments():
    with pytest.raises(ValueError):
        fit_growth_bound(_sys(2 * np.eye(2)), 1.0, 5)
    with pytest.raises(ValueError):
        fit_growth_bound(_sys(2 * np.eye(2)), 0.5, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_growth_bound_certificate(seed):
    rng = np.random.default_rng(seed)
    sys = LinSys(_draw_matrix(rng, 2, float(rng.uniform(1.005, 1.05))), np.eye(2))
    gb = fit_growth_bound(sys, 0.5, 300)
    ks = np.arange(1, 301)
    direct = np.array([np.linalg.norm(np.linalg.inv(sys.power(k) - np.eye(2)), 2) for k in ks])
    assert np.all(direct <= gb(ks) * (1 + 1e-9))
    assert np.allclose(inverse_gap_norms(sys, 300), direct, rtol=1e-9)


def test_power_cache_consistent():
    sys = _sys([[1.05, 0.1], [0.0, 1.02]])
    assert np.allclose(sys.power(40), np.linalg.matrix_power(sys.A, 40), rtol=1e-12)
    assert np.array_equal(sys.powers(5)[3], sys.power(3))
