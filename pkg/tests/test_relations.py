import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cd_lasso
from slcrf.errors import FormatError, ShapeError
from slcrf.relations import (dump_matrix, knn_spatial, lasso_objective, latent_affinity,
                             read_matrix, relationship_matrix, sparse_code_init, spatial_affinity)


def grid(h, w):
    return np.array([(r, c) for r in range(h) for c in range(w)])


@given(st.integers(2, 6), st.integers(2, 6), st.integers(1, 6))
def test_knn_graph_is_symmetric_without_self_loops(h, w, k):
    g = knn_spatial(grid(h, w), k)
    npt.assert_array_equal(g.adjacency, g.adjacency.T)
    assert not g.adjacency.diagonal().any()
    assert np.all(g.degree() >= min(k, h * w - 1))


def test_knn_ties_go_to_lower_index():
    g = knn_spatial(grid(3, 3), 2)
    # centre pixel 4 has four neighbours at distance 1: 1, 3, 5, 7
    npt.assert_array_equal(g.knn[4], [1, 3])
    npt.assert_array_equal(g.knn[0], [1, 3])


def test_knn_rejects_bad_arguments():
    with pytest.raises(ValueError):
        knn_spatial(grid(1, 1), 3)
    with pytest.raises(ValueError):
        knn_spatial(grid(2, 2), 0)
    with pytest.raises(ValueError):
        knn_spatial(grid(2, 2), 1, omega=0)


def test_lasso_matches_coordinate_descent_oracle():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 9))
    beta = 0.3
    Z, info = sparse_code_init(X, beta, max_iter=20000, tol=1e-15, return_info=True)
    ref = cd_lasso(X, beta)
    assert abs(lasso_objective(X, Z, beta) - lasso_objective(X, ref, beta)) < 1e-8
    npt.assert_allclose(Z, ref, atol=1e-5)
    assert np.all(np.diff(info["objective"]) <= 1e-12)
    assert not Z.diagonal().any()


def test_lasso_zero_dictionary_and_huge_beta():
    npt.assert_array_equal(sparse_code_init(np.zeros((3, 4)), 1.0), 0.0)
    X = np.random.default_rng(1).standard_normal((4, 5))
    npt.assert_array_equal(sparse_code_init(X, 1e6), 0.0)


def test_lasso_warns_when_not_converged():
    X = np.random.default_rng(2).standard_normal((5, 8))
    with pytest.warns(RuntimeWarning):
        sparse_code_init(X, 1e-3, max_iter=2, tol=0.0)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.floats(0, 5))
def test_affinity_properties(seed, gamma):
    rng = np.random.default_rng(seed)
    P = grid(3, 4)
    g = knn_spatial(P, 3)
    Z = rng.standard_normal((12, 12))
    R = relationship_matrix(Z, g, P, gamma)
    npt.assert_array_equal(R.S1, R.S1.T)
    npt.assert_array_equal(R.S2, R.S2.T)
    assert np.all(R.S1 >= 0) and np.all(R.S2 >= 0) and np.all(R.S2 <= 1)
    assert not R.S2[~g.adjacency].any()
    npt.assert_allclose(R.S, R.S1 + gamma * R.S2)


def test_spatial_affinity_values():
    P = np.array([(0, 0), (0, 1), (3, 4)])
    g = knn_spatial(P, 2)
    S2 = spatial_affinity(g, P, omega=10.0)
    assert S2[0, 1] == pytest.approx(np.exp(-0.1))
    assert S2[0, 2] == pytest.approx(np.exp(-2.5))
    npt.assert_allclose(latent_affinity(np.array([[0, 2.0], [-4.0, 0]])), [[0, 1.0], [1.0, 0]])


def test_relationship_matrix_checks():
    P = grid(2, 2)
    g = knn_spatial(P, 1)
    with pytest.raises(ShapeError):
        relationship_matrix(np.zeros((3, 3)), g, P, 1.0)
    with pytest.raises(ValueError):
        relationship_matrix(np.zeros((4, 4)), g, P, -1.0)


def test_matrix_dump_round_trip(tmp_path):
    A = np.random.default_rng(0).standard_normal((3, 5))
    dump_matrix(tmp_path / "a.bin", A)
    npt.assert_array_equal(read_matrix(tmp_path / "a.bin"), A.astype(np.float32))
    (tmp_path / "b.bin").write_bytes((tmp_path / "a.bin").read_bytes()[:-1])
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "b.bin")
