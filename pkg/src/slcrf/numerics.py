"""Dense tensor and matrix primitives shared by the rest of the package.

Feature cubes are numpy arrays laid out ``(x, y, z)`` in C order, so the
spectral axis ``z`` is fastest.  Matrices are plain 2-D arrays.
"""

import numpy as np

from .errors import ConfigError

_DTYPES = {"float64": np.float64, "float32": np.float32}


def resolve_dtype(f64=True):
    """Return the working float type: float64 for checks, float32 for training."""
    return np.float64 if f64 else np.float32


def as_dtype(name):
    try:
        return _DTYPES[np.dtype(name).name]
    except (KeyError, TypeError):
        raise ConfigError(f"unsupported float width {name!r}") from None


def softmax(logits, axis=0):
    """Numerically stable softmax along ``axis``.

    Parameters
    ----------
    logits : array_like
        Real scores. A 1-D vector, or a matrix whose columns (``axis=0``)
        are independent score vectors.
    axis : int
        Axis holding the class scores.

    Returns
    -------
    ndarray
        Non-negative probabilities summing to one along ``axis``.
    """
    z = np.asarray(logits)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input contains non-finite values")
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def column_shrink(Q, threshold):
    """Column-wise group shrinkage (proximal map of ``threshold * ||.||_{2,1}``).

    Each column ``q`` becomes ``max(0, ||q|| - threshold) * q / ||q||``.
    Zero columns stay zero.
    """
    if threshold < 0:
        raise ValueError("shrinkage threshold must be non-negative")
    Q = np.asarray(Q)
    norms = np.sqrt(np.sum(Q * Q, axis=0))
    scale = np.zeros_like(norms)
    nz = norms > 0
    scale[nz] = np.maximum(0.0, norms[nz] - threshold) / norms[nz]
    return Q * scale[np.newaxis, :]


def soft_threshold(Q, threshold):
    """Element-wise soft threshold (proximal map of ``threshold * ||.||_1``)."""
    if threshold < 0:
        raise ValueError("shrinkage threshold must be non-negative")
    Q = np.asarray(Q)
    return np.sign(Q) * np.maximum(np.abs(Q) - threshold, 0.0)


def rotate180(kernel):
    """Flip a kernel along its last three axes.

    Works on a bare ``(P, Q, R)`` kernel or on a weight bank whose trailing
    three axes are spatial/spectral.
    """
    k = np.asarray(kernel)
    if k.ndim < 3:
        raise ValueError("rotate180 needs at least three axes")
    return k[..., ::-1, ::-1, ::-1].copy()


def _sequential_sum(values):
    # cumsum accumulates strictly left to right, unlike np.sum's pairwise
    # blocking, so the result does not depend on array length heuristics
    if values.size == 0:
        return 0.0
    return np.cumsum(values, dtype=np.float64)[-1]


def norms(A):
    """Frobenius, entry-wise l1 and column-wise l2,1 norms of ``A``.

    Reductions run in fixed sequential order (column-major, as the matrix is
    stored) so the result is reproducible bit for bit.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, np.newaxis]
    if A.size == 0:
        return {"frobenius": 0.0, "l1": 0.0, "l21": 0.0}
    # per-column sequential sums, then a sequential sum across columns
    col_sq = np.cumsum(A * A, axis=0)[-1]
    col_abs = np.cumsum(np.abs(A), axis=0)[-1]
    sq = _sequential_sum(col_sq)
    l1 = _sequential_sum(col_abs)
    l21 = _sequential_sum(np.sqrt(col_sq))
    return {"frobenius": float(np.sqrt(sq)), "l1": float(l1), "l21": float(l21)}


def frob2(A):
    """Squared Frobenius norm (fast path, not order-pinned)."""
    A = np.asarray(A)
    return float(np.vdot(A, A).real)
