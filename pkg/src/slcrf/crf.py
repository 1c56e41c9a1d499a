"""CRF energy over latent codes: softmax unary term plus graph pairwise term.

Latent codes are stored column-wise, ``latent`` of shape ``(K, n)``;
probabilities are ``(c, n)``.  Labelled pixels carry a 0-based class id in
``targets`` and unlabelled ones ``-1``.

Two pairwise modes are available:

``"smoothness"`` (default)
    ``sum_i sum_{j in N(i)} S_ij ||y_i - y_j||^2 / sum_{j in N(i)} S_ij``,
    a normalised label-disagreement penalty on strong affinities.
``"linear"``
    ``sum_i sum_{j in N(i)} -h2 * S_ij`` with ``h2`` a learned, clamped
    scalar.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numerics import softmax

SMOOTHNESS = "smoothness"
LINEAR = "linear"
MODES = (SMOOTHNESS, LINEAR)
LOG_FLOOR = 1e-12


@dataclass
class CrfWeights:
    """Softmax head ``W_hl`` (c x K), ``b_hl`` (c,) and smoothness weight ``h2``."""

    W_hl: np.ndarray
    b_hl: np.ndarray
    h2: float = 0.0
    h2_max: float = 1e3

    @classmethod
    def initialize(cls, classes, latent_dim, seed=0, scale=0.01, dtype=np.float64, h2_max=1e3):
        rng = np.random.default_rng(seed)
        W = (scale * rng.standard_normal((classes, latent_dim))).astype(dtype)
        return cls(W, np.zeros(classes, dtype=dtype), 0.0, h2_max)

    @property
    def classes(self):
        return self.W_hl.shape[0]

    def copy(self):
        return CrfWeights(self.W_hl.copy(), self.b_hl.copy(), float(self.h2), self.h2_max)


@dataclass
class LabelAssignment:
    probs: np.ndarray
    hard: np.ndarray


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown pairwise mode {mode!r}; expected one of {MODES}")


def logits(latent, weights):
    latent = np.asarray(latent)
    if latent.ndim != 2 or latent.shape[0] != weights.W_hl.shape[1]:
        raise ShapeError(f"latent must be (K={weights.W_hl.shape[1]}, n), got {latent.shape}")
    return weights.W_hl @ latent + weights.b_hl[:, np.newaxis]


def classify(latent, weights):
    """Softmax class probabilities and argmax labels (ties to the lowest id)."""
    probs = softmax(logits(latent, weights), axis=0)
    return LabelAssignment(probs=probs, hard=np.argmax(probs, axis=0))


def unary_energy(probs, targets):
    """Cross-entropy summed over labelled pixels; ``log`` floored at 1e-12."""
    probs = np.asarray(probs)
    targets = np.asarray(targets)
    idx = np.flatnonzero(targets >= 0)
    if idx.size == 0:
        return 0.0
    p = probs[targets[idx], idx]
    return float(-np.sum(np.log(np.maximum(p, LOG_FLOOR))))


def _masked(S, adjacency):
    return np.where(adjacency, S, 0.0)


def label_distances(probs):
    """``D_ij = ||y_i - y_j||^2`` between probability columns."""
    Y = np.asarray(probs, dtype=np.float64)
    sq = np.sum(Y * Y, axis=0)
    D = sq[:, np.newaxis] + sq[np.newaxis, :] - 2.0 * (Y.T @ Y)
    return np.maximum(D, 0.0)


def _row_normalised(Sm):
    deg = Sm.sum(axis=1)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return Sm * inv[:, np.newaxis], deg, inv


def pairwise_energy(probs, S, adjacency, h2=0.0, mode=SMOOTHNESS):
    """Pairwise CRF term over the graph edges (both orientations)."""
    _check_mode(mode)
    Sm = _masked(np.asarray(S), adjacency)
    if mode == LINEAR:
        return float(-h2 * Sm.sum())
    A, _, _ = _row_normalised(Sm)
    return float(np.sum(A * label_distances(probs)))


def energy(latent, weights, S, adjacency, targets, eta, mode=SMOOTHNESS):
    """``unary + eta * pairwise``; the partition function is never formed."""
    a = classify(latent, weights)
    return unary_energy(a.probs, targets) + eta * pairwise_energy(a.probs, S, adjacency,
                                                                  weights.h2, mode)


def initial_h2(probs, S, adjacency):
    """Edge average of ``(y_i - y_j)^2 / sum_j S_ij`` (start value for ``h2``)."""
    Sm = _masked(np.asarray(S), adjacency)
    _, deg, inv = _row_normalised(Sm)
    D = label_distances(probs)
    vals = (D * inv[:, np.newaxis])[adjacency]
    return float(vals.mean()) if vals.size else 0.0


def pairwise_prob_grad(probs, S, adjacency):
    """Gradient of the smoothness energy w.r.t. the probability columns."""
    Sm = _masked(np.asarray(S), adjacency)
    A, _, _ = _row_normalised(Sm)
    B = A + A.T
    Y = np.asarray(probs, dtype=np.float64)
    return 2.0 * (Y * B.sum(axis=0)[np.newaxis, :] - Y @ B)


def pairwise_affinity_grad(probs, S, adjacency, h2=0.0, mode=SMOOTHNESS):
    """Gradient of the pairwise energy w.r.t. the entries ``S_ij`` (zero off
    the graph).  Each ``S_ij`` is treated as an independent variable."""
    _check_mode(mode)
    if mode == LINEAR:
        return np.where(adjacency, -h2, 0.0)
    Sm = _masked(np.asarray(S), adjacency)
    _, deg, inv = _row_normalised(Sm)
    D = label_distances(probs)
    row_energy = np.sum(Sm * D, axis=1) * inv
    G = (D - row_energy[:, np.newaxis]) * inv[:, np.newaxis]
    return np.where(adjacency, G, 0.0)


def softmax_backward(probs, grad_probs):
    """Chain a gradient w.r.t. softmax outputs back to the logits."""
    return probs * (grad_probs - np.sum(probs * grad_probs, axis=0, keepdims=True))


def logit_grad(probs, targets, S=None, adjacency=None, eta=0.0, mode=SMOOTHNESS, lambda2=1.0):
    """Gradient of ``lambda2 * (unary + eta * pairwise)`` w.r.t. the logits."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets)
    g = np.zeros_like(probs)
    idx = np.flatnonzero(targets >= 0)
    g[:, idx] = probs[:, idx]
    g[targets[idx], idx] -= 1.0
    if eta and mode == SMOOTHNESS and S is not None:
        g += eta * softmax_backward(probs, pairwise_prob_grad(probs, S, adjacency))
    return lambda2 * g


def h_gradients(latent, assignment, targets, S, adjacency, eta=1.0, lambda2=1.0,
                mode=SMOOTHNESS):
    """Gradients of ``L4 = lambda2 * (unary + eta * pairwise)`` w.r.t. ``h``.

    Returns ``{"W_hl", "b_hl", "h2"}``.  In smoothness mode ``h2`` does not
    enter the energy and its gradient is zero; in linear mode it is
    ``-lambda2 * eta * sum S_ij`` over graph edges.
    """
    _check_mode(mode)
    latent = np.asarray(latent, dtype=np.float64)
    dlog = logit_grad(assignment.probs, targets, S, adjacency, eta, mode, lambda2)
    grads = {"W_hl": dlog @ latent.T, "b_hl": dlog.sum(axis=1), "h2": 0.0}
    if mode == LINEAR and S is not None:
        grads["h2"] = float(-lambda2 * eta * _masked(np.asarray(S), adjacency).sum())
    return grads


def h_update(weights, grads, tau=0.0002):
    """Gradient step on ``h1`` and ``h2``; ``h2`` is clamped to ``[0, h2_max]``."""
    weights.W_hl -= tau * grads["W_hl"]
    weights.b_hl -= tau * grads["b_hl"]
    weights.h2 = float(np.clip(weights.h2 - tau * grads["h2"], 0.0, weights.h2_max))
    return weights
