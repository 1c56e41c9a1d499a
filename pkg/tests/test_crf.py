import numpy as np
import numpy.testing as npt
import pytest

from slcrf import crf
from slcrf.gradcheck import numeric_gradient, relative_error
from slcrf.relations import knn_spatial


def setup(seed=0, n=6, K=3, c=3):
    rng = np.random.default_rng(seed)
    latent = rng.standard_normal((K, n))
    w = crf.CrfWeights.initialize(c, K, seed=seed, scale=0.7)
    w.b_hl[:] = rng.standard_normal(c)
    P = np.array([(i // 3, i % 3) for i in range(n)])
    adj = knn_spatial(P, 2).adjacency
    S = np.abs(rng.standard_normal((n, n)))
    targets = np.array([0, -1, 2, -1, 1, -1])
    return latent, w, S, adj, targets


def test_unary_energy_by_hand():
    probs = np.array([[0.5, 0.2], [0.5, 0.8]])
    assert crf.unary_energy(probs, np.array([0, 1])) == pytest.approx(-np.log(0.5) - np.log(0.8))
    assert crf.unary_energy(probs, np.array([-1, -1])) == 0.0
    assert crf.unary_energy(np.array([[0.0], [1.0]]), np.array([0])) == pytest.approx(-np.log(1e-12))


def test_pairwise_smoothness_by_hand():
    probs = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], bool)
    S = np.array([[0, 2.0, 9], [2.0, 0, 1.0], [9, 1.0, 0]])
    # rows: node0 -> 2*2/2, node1 -> (2*2 + 1*2)/3, node2 -> 1*2/1
    assert crf.pairwise_energy(probs, S, adj) == pytest.approx(2 + 2 + 2)
    assert crf.pairwise_energy(probs[:, [0, 0, 0]], S, adj) == 0.0
    assert crf.pairwise_energy(probs, S, adj, h2=0.5, mode=crf.LINEAR) == pytest.approx(-0.5 * 6)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        crf.pairwise_energy(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2), bool), mode="x")


def test_classify_ties_to_lowest_id():
    w = crf.CrfWeights(np.zeros((3, 2)), np.zeros(3))
    a = crf.classify(np.ones((2, 4)), w)
    npt.assert_array_equal(a.hard, 0)
    npt.assert_allclose(a.probs, 1 / 3)


@pytest.mark.parametrize("seed", range(3))
def test_head_gradients_match_finite_differences(seed):
    latent, w, S, adj, targets = setup(seed)
    eta, lam = 0.7, 1.3
    g = crf.h_gradients(latent, crf.classify(latent, w), targets, S, adj, eta, lam)
    f = lambda: lam * crf.energy(latent, w, S, adj, targets, eta)
    assert relative_error(g["W_hl"], numeric_gradient(f, w.W_hl)) < 1e-7
    assert relative_error(g["b_hl"], numeric_gradient(f, w.b_hl)) < 1e-7
    assert g["h2"] == 0.0


def test_literal_mode_h2_gradient():
    latent, w, S, adj, targets = setup(1)
    g = crf.h_gradients(latent, crf.classify(latent, w), targets, S, adj, 0.5, 2.0, crf.LINEAR)
    box = np.array([w.h2])

    def f():
        w.h2 = float(box[0])
        return 2.0 * crf.energy(latent, w, S, adj, targets, 0.5, crf.LINEAR)

    assert g["h2"] == pytest.approx(numeric_gradient(f, box)[0], rel=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_affinity_gradient_matches_finite_differences(seed):
    latent, w, S, adj, _ = setup(seed)
    probs = crf.classify(latent, w).probs
    G = crf.pairwise_affinity_grad(probs, S, adj)
    num = numeric_gradient(lambda: crf.pairwise_energy(probs, S, adj), S)
    assert relative_error(G, num) < 1e-7
    assert not G[~adj].any()


def test_h2_is_clamped():
    w = crf.CrfWeights(np.zeros((2, 2)), np.zeros(2), 1.0, h2_max=2.0)
    crf.h_update(w, {"W_hl": 0, "b_hl": 0, "h2": -100.0}, tau=1.0)
    assert w.h2 == 2.0
    crf.h_update(w, {"W_hl": 0, "b_hl": 0, "h2": 100.0}, tau=1.0)
    assert w.h2 == 0.0


def test_zero_step_leaves_head_unchanged():
    latent, w, S, adj, targets = setup(0)
    before = w.copy()
    g = crf.h_gradients(latent, crf.classify(latent, w), targets, S, adj)
    crf.h_update(w, g, tau=0.0)
    npt.assert_array_equal(w.W_hl, before.W_hl)
    npt.assert_array_equal(w.b_hl, before.b_hl)


def test_initial_h2_is_non_negative():
    latent, w, S, adj, _ = setup(2)
    assert crf.initial_h2(crf.classify(latent, w).probs, S, adj) >= 0
