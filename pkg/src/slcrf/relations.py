"""Spectral-spatial relationship structures over the working pixel set.

* spatial k-nearest-neighbour graph on pixel coordinates,
* lasso self-expression ``Z`` of a feature dictionary,
* the affinities ``S1 = |Z + Z^T| / 2``, ``S2`` (Gaussian on graph edges)
  and their blend ``S = S1 + gamma * S2``.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError
from .numerics import soft_threshold


@dataclass
class SpatialGraph:
    """kNN lists plus their symmetric closure.

    ``knn[i]`` holds the ``k`` nearest pixels of ``i`` (closest first);
    ``adjacency`` is the boolean edge set ``i in knn[j] or j in knn[i]``.
    """

    knn: np.ndarray
    adjacency: np.ndarray
    k: int

    @property
    def n(self):
        return self.adjacency.shape[0]

    def degree(self):
        return self.adjacency.sum(axis=1)


@dataclass
class RelationshipMatrices:
    S1: np.ndarray
    S2: np.ndarray
    S: np.ndarray


def pairwise_sq_distances(positions):
    P = np.asarray(positions, dtype=np.float64)
    diff = P[:, np.newaxis, :] - P[np.newaxis, :, :]
    return np.sum(diff * diff, axis=-1)


def knn_spatial(positions, k, omega=1e3):
    """Spatial kNN graph on integer pixel coordinates.

    Distances are Euclidean on ``(row, col)``; ties go to the lower pixel
    index.  ``omega`` is only validated here (it scales the edge weights in
    :func:`relationship_matrix`).
    """
    P = np.asarray(positions)
    n = P.shape[0]
    if n < 2:
        raise ValueError("need at least two pixels for a neighbour graph")
    if k < 1:
        raise ValueError("k must be >= 1")
    if omega <= 0:
        raise ValueError("omega must be positive")
    kk = min(k, n - 1)
    d2 = pairwise_sq_distances(P)
    np.fill_diagonal(d2, np.inf)
    # stable sort on distance keeps index order among equal distances
    order = np.argsort(d2, axis=1, kind="stable")[:, :kk]
    adj = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), kk)
    adj[rows, order.ravel()] = True
    adj |= adj.T
    return SpatialGraph(knn=order, adjacency=adj, k=kk)


def lasso_objective(X, Z, beta):
    R = X - X @ Z
    return float(np.sum(R * R) + beta * np.sum(np.abs(Z)))


def sparse_code_init(X, beta, max_iter=500, tol=1e-8, zero_diagonal=True, return_info=False,
                     warn=True):
    """Self-expressive lasso ``min_Z ||X - X Z||_F^2 + beta ||Z||_1``.

    Solved by iterative shrinkage with step ``1/L``, ``L = 2 ||X||_2^2``;
    the diagonal of ``Z`` is held at zero so no column explains itself.

    Parameters
    ----------
    X : ndarray, shape (features, n)
        Dictionary; columns are samples.
    beta : float
        l1 weight.
    max_iter, tol : int, float
        Stops once the relative objective change drops below ``tol``.
    warn : bool
        Emit a ``RuntimeWarning`` when ``max_iter`` is reached first.
    return_info : bool
        Also return ``{"objective": [...], "converged": bool, "iters": int}``.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    G = X.T @ X
    L = 2.0 * np.linalg.norm(X, 2) ** 2
    Z = np.zeros((n, n))
    history = [lasso_objective(X, Z, beta)]
    converged = False
    if L == 0:
        converged = True
    else:
        step = 1.0 / L
        for it in range(max_iter):
            grad = 2.0 * (G @ Z - G)
            Z = soft_threshold(Z - step * grad, beta * step)
            if zero_diagonal:
                np.fill_diagonal(Z, 0.0)
            history.append(lasso_objective(X, Z, beta))
            prev, cur = history[-2], history[-1]
            if abs(prev - cur) <= tol * max(abs(prev), 1e-300):
                converged = True
                break
    if warn and not converged:
        warnings.warn(f"sparse_code_init stopped after {max_iter} iterations without converging",
                      RuntimeWarning, stacklevel=2)
    if return_info:
        return Z, {"objective": history, "converged": converged, "iters": len(history) - 1}
    return Z


def spatial_affinity(graph, positions, omega=1e3):
    """``S2_ij = exp(-||P_i - P_j||^2 / omega)`` on graph edges, 0 elsewhere."""
    d2 = pairwise_sq_distances(positions)
    S2 = np.where(graph.adjacency, np.exp(-d2 / omega), 0.0)
    np.fill_diagonal(S2, 0.0)
    return S2


def latent_affinity(Z):
    Z = np.asarray(Z)
    return np.abs(Z + Z.T) / 2.0


def relationship_matrix(Z, graph, positions, gamma, omega=1e3, S2=None):
    """Build ``S1``, ``S2`` and ``S = S1 + gamma * S2``.

    ``S2`` may be passed in when it has already been computed; it depends
    only on the graph and the pixel positions.
    """
    Z = np.asarray(Z)
    if Z.shape != (graph.n, graph.n):
        raise ShapeError(f"Z is {Z.shape}, graph has {graph.n} nodes")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    S1 = latent_affinity(Z)
    if S2 is None:
        S2 = spatial_affinity(graph, positions, omega)
    return RelationshipMatrices(S1=S1, S2=S2, S=S1 + gamma * S2)


def dump_matrix(path, A):
    """Debug dump: ``u32 rows, u32 cols`` (little endian) then f32 row-major."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise ShapeError("dump_matrix expects a 2-D array")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", *A.shape))
        fh.write(np.ascontiguousarray(A, dtype="<f4").tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        data = fh.read()
    rows, cols = struct.unpack("<II", data[:8])
    if len(data) != 8 + 4 * rows * cols:
        raise FormatError(f"{path}: payload does not match {rows}x{cols} header")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(rows, cols).astype(np.float32)
