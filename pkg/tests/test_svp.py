import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activeloc.svp import (
    UnitVectorSet,
    cell_min_alignment,
    cell_of,
    cells_of,
    coverage_certificate,
    find_svp,
    max_alignment,
    vec_opt,
)

ROOT3_2 = math.sqrt(3.0) / 2.0


def _unit(deg):
    a = math.radians(deg)
    return np.array([math.cos(a), math.sin(a)])


def _arc_cover_count(alpha):
    # oracle: smallest N whose evenly spaced closed arcs of half-width arccos(alpha) cover the circle
    half = math.acos(alpha)
    N = 2
    while 2 * N * half < 2 * math.pi - 1e-12:
        N += 1
    return N


# ---------------------------------------------------------------- vec_opt


@pytest.mark.parametrize("n", [2, 3, 5])
def test_two_vectors_are_antipodal(n):
    v = vec_opt(2, n)
    assert max_alignment(v) == pytest.approx(-1.0, abs=1e-12)


def test_hexagon():
    v = vec_opt(6, 2)
    assert max_alignment(v) == pytest.approx(0.5, abs=1e-12)


def test_icosahedron():
    v = vec_opt(12, 3)
    assert max_alignment(v) == pytest.approx(1 / math.sqrt(5.0), abs=1e-6)


@pytest.mark.parametrize("N", [3, 5, 7, 11, 24])
def test_planar_closed_form(N):
    assert max_alignment(vec_opt(N, 2)) == pytest.approx(math.cos(2 * math.pi / N), abs=1e-12)


@pytest.mark.parametrize("N,n", [(8, 3), (10, 4), (6, 2)])
def test_vec_opt_deterministic(N, n):
    a, b = vec_opt(N, n, seed=5), vec_opt(N, n, seed=5)
    assert np.array_equal(a.vectors, b.vectors)


def test_vec_opt_unit_norms():
    v = vec_opt(9, 3, seed=1)
    assert np.allclose(np.linalg.norm(v.vectors, axis=1), 1.0, atol=1e-9)


def test_unit_vector_set_validation():
    with pytest.raises(ValueError):
        UnitVectorSet(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        UnitVectorSet(np.array([[1.0, 0.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        UnitVectorSet(np.array([[1.0, 0.0], [1.0, 0.0]]))


# ---------------------------------------------------------------- alignments


def test_max_alignment_antipodal():
    assert max_alignment(UnitVectorSet(np.array([[1.0, 0.0], [-1.0, 0.0]]))) == -1.0


def test_max_alignment_seven():
    V = np.array([_unit(360 * i / 7) for i in range(7)])
    assert max_alignment(UnitVectorSet(V)) == pytest.approx(math.cos(2 * math.pi / 7), abs=1e-12)
    assert max_alignment(UnitVectorSet(V)) == pytest.approx(0.62349, abs=5e-6)


def test_cell_min_antipodal():
    v = UnitVectorSet(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert cell_min_alignment(v, 0) == pytest.approx(0.0, abs=1e-12)
    assert cell_min_alignment(v, 1) == pytest.approx(0.0, abs=1e-12)


def test_cell_min_hexagon():
    v = vec_opt(6, 2)
    for i in range(6):
        assert cell_min_alignment(v, i) == pytest.approx(ROOT3_2, abs=1e-12)


def test_cell_min_square():
    v = UnitVectorSet(np.array([_unit(90 * i) for i in range(4)]))
    assert cell_min_alignment(v, 2) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_cell_min_index_check():
    with pytest.raises(IndexError):
        cell_min_alignment(vec_opt(4, 2), 4)


@pytest.mark.parametrize("N", [4, 6, 12, 20])
def test_cell_min_3d_against_sampling(N):
    v = vec_opt(N, 3, seed=2)
    W = np.random.default_rng(N).normal(size=(200_000, 3))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    idx = cells_of(v, W)
    for i in range(N):
        own = W[idx == i]
        sampled = float(np.min(own @ v.vectors[i]))
        exact = cell_min_alignment(v, i)
        assert exact <= sampled + 1e-12
        assert sampled - exact < 0.02


def test_sampled_certificate_above_three():
    m, kind = coverage_certificate(vec_opt(10, 4, seed=0))
    assert kind == "sampled"
    assert m.shape == (10,)


# ---------------------------------------------------------------- find_svp


def test_find_svp_zero_alpha():
    # the antipodal pair already covers with closed caps, but the search starts at n + 1
    assert _arc_cover_count(0.0) == 2
    assert find_svp(0.0, 2).N == 3


def test_find_svp_hexagon_level():
    s = find_svp(ROOT3_2, 2)
    assert s.N == 6 == _arc_cover_count(ROOT3_2)
    assert s.eta == pytest.approx(0.5, abs=1e-12)
    assert s.certificate == "exact"


def test_find_svp_high_level():
    s = find_svp(0.99, 2)
    assert s.N == 23 == math.ceil(math.pi / math.acos(0.99)) == _arc_cover_count(0.99)


def test_find_svp_bad_alpha():
    with pytest.raises(ValueError):
        find_svp(1.0, 2)


def test_find_svp_cap():
    with pytest.raises(RuntimeError):
        find_svp(0.999, 2, N_cap=10)


def test_find_svp_certificate_3d():
    s = find_svp(ROOT3_2, 3)
    assert s.certificate == "exact"
    assert min(s.cell_min_alignments) >= ROOT3_2 - 1e-9
    assert s.eta == pytest.approx(max_alignment(s.basis), abs=0)
    assert s.eta < 1


# ---------------------------------------------------------------- cell_of


def test_cell_of_self():
    v = vec_opt(6, 2)
    for i in range(6):
        assert cell_of(v, v.vectors[i]) == i


def test_cell_of_between_neighbours():
    v = vec_opt(6, 2)  # p_0 at 0 degrees, p_1 at 60 degrees
    assert cell_of(v, _unit(10)) == 0
    assert cell_of(v, _unit(50)) == 1


def test_cell_of_tie_breaks_low():
    v = vec_opt(6, 2)
    assert cell_of(v, _unit(30)) == 0


@pytest.mark.parametrize("n,N", [(2, 6), (3, 12), (3, 27)])
def test_coverage_certificate_sampled(n, N):
    s = find_svp(ROOT3_2, n) if N != 12 else None
    v = s.basis if s is not None else vec_opt(12, 3)
    alpha = min(coverage_certificate(v)[0])
    W = np.random.default_rng(0).normal(size=(100_000, n))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    idx = cells_of(v, W)
    assert np.all(np.sum(W * v.vectors[idx], axis=1) >= alpha - 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_in_cell_pairs_bound(seed):
    s = find_svp(ROOT3_2, 2)
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(4000, 2))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    idx = cells_of(s.basis, W)
    for i in range(s.N):
        own = W[idx == i]
        G = own @ own.T
        assert G.min() >= 2 * ROOT3_2**2 - 1 - 1e-9
