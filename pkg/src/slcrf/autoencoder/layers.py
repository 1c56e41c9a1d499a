"""Batched 3-D layer kernels with hand-written backward passes.

All feature stacks are 5-D arrays ``(N, C, X, Y, Z)``: batch, channel and the
two spatial axes followed by the spectral axis.  Convolutions are "valid"
(no padding).  Weight banks are ``(C_out, C_in, P, Q, R)``.

Forward convolutions accumulate over ``(k, p, q, r)`` in that fixed order,
one vectorised multiply-add per term, so every output voxel sees exactly the
arithmetic of a plain nested loop.
"""

import numpy as np

from ..errors import ShapeError


def _triple(v):
    if np.isscalar(v):
        return (int(v),) * 3
    v = tuple(int(s) for s in v)
    if len(v) != 3:
        raise ShapeError(f"expected three per-axis values, got {v}")
    return v


def conv_output_shape(in_shape, kernel, stride):
    """Spatial output size of a valid strided convolution (or pooling)."""
    kernel = _triple(kernel)
    stride = _triple(stride)
    out = []
    for n, k, s in zip(in_shape, kernel, stride):
        if s < 1 or k < 1:
            raise ShapeError("kernel sizes and strides must be >= 1")
        if k > n:
            raise ShapeError(f"kernel {kernel} larger than input {tuple(in_shape)}")
        out.append((n - k) // s + 1)
    return tuple(out)


def deconv_output_shape(in_shape, kernel, stride):
    kernel = _triple(kernel)
    stride = _triple(stride)
    return tuple((n - 1) * s + k for n, k, s in zip(in_shape, kernel, stride))


def _window(x, p, q, r, out_shape, stride):
    ox, oy, oz = out_shape
    sx, sy, sz = stride
    return x[..., p:p + sx * (ox - 1) + 1:sx,
             q:q + sy * (oy - 1) + 1:sy,
             r:r + sz * (oz - 1) + 1:sz]


def relu(a):
    return np.maximum(a, 0)


def relu_grad(a):
    # derivative at exactly zero is taken as 0
    return (a > 0).astype(a.dtype)


# --------------------------------------------------------------------------
# convolution
# --------------------------------------------------------------------------

def conv3d(x, W, b, stride=1):
    """Valid 3-D convolution (cross-correlation), pre-activation output.

    ``out[n, j, x, y, z] = b[j] + sum_{k,p,q,r} W[j,k,p,q,r] *
    in[n, k, x*sx + p, y*sy + q, z*sz + r]``.
    """
    x = np.asarray(x)
    if x.ndim != 5:
        raise ShapeError(f"conv3d expects (N, C, X, Y, Z) input, got {x.shape}")
    J, K, P, Q, R = W.shape
    if x.shape[1] != K:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel expects {K}")
    stride = _triple(stride)
    out_shape = conv_output_shape(x.shape[2:], (P, Q, R), stride)
    out = np.empty((x.shape[0], J) + out_shape, dtype=np.result_type(x, W))
    out[...] = b.reshape(1, J, 1, 1, 1)
    for k in range(K):
        xk = x[:, k:k + 1]
        for p in range(P):
            for q in range(Q):
                for r in range(R):
                    w = W[:, k, p, q, r].reshape(1, J, 1, 1, 1)
                    out += w * _window(xk, p, q, r, out_shape, stride)
    return out


def conv3d_backward(U, x, W, stride=1, need_input_grad=True):
    """Gradients of a valid convolution given the output error ``U``.

    Returns ``(dW, db, dx)``.  ``dx`` is the transposed convolution of ``U``
    with the kernel, i.e. the full correlation with the 180-degree rotated
    kernel; it is computed here by scattering each kernel tap back onto the
    input grid, which is the same sum.
    """
    J, K, P, Q, R = W.shape
    stride = _triple(stride)
    out_shape = U.shape[2:]
    dW = np.empty_like(W)
    for p in range(P):
        for q in range(Q):
            for r in range(R):
                xs = _window(x, p, q, r, out_shape, stride)
                dW[:, :, p, q, r] = np.tensordot(U, xs, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
    db = U.sum(axis=(0, 2, 3, 4))
    dx = None
    if need_input_grad:
        dx = np.zeros_like(x, dtype=np.result_type(x, U))
        ox, oy, oz = out_shape
        sx, sy, sz = stride
        for p in range(P):
            for q in range(Q):
                for r in range(R):
                    contrib = np.moveaxis(np.tensordot(U, W[:, :, p, q, r], axes=([1], [0])), -1, 1)
                    dx[:, :, p:p + sx * (ox - 1) + 1:sx,
                       q:q + sy * (oy - 1) + 1:sy,
                       r:r + sz * (oz - 1) + 1:sz] += contrib
    return dW, db, dx


def upsample_pad(x, kernel, stride):
    """Zero-insert ``stride - 1`` voxels between inputs and pad ``kernel - 1``
    zeros on every side, the input layout of a transposed convolution."""
    kernel = _triple(kernel)
    stride = _triple(stride)
    N, C = x.shape[:2]
    n = x.shape[2:]
    inserted = tuple((m - 1) * s + 1 for m, s in zip(n, stride))
    padded = tuple(m + 2 * (k - 1) for m, k in zip(inserted, kernel))
    out = np.zeros((N, C) + padded, dtype=x.dtype)
    px, py, pz = (k - 1 for k in kernel)
    sx, sy, sz = stride
    out[:, :, px:px + inserted[0]:sx, py:py + inserted[1]:sy, pz:pz + inserted[2]:sz] = x
    return out


def _tap_slices(in_shape, kernel, stride, p, q, r):
    # output voxels fed by input voxel i through tap (p, q, r) of a
    # deconvolution: o = i * s + (P - 1 - p)
    (nx, ny, nz), (P, Q, R), (sx, sy, sz) = in_shape, kernel, stride
    ox, oy, oz = P - 1 - p, Q - 1 - q, R - 1 - r
    return (Ellipsis,
            slice(ox, ox + sx * (nx - 1) + 1, sx),
            slice(oy, oy + sy * (ny - 1) + 1, sy),
            slice(oz, oz + sz * (nz - 1) + 1, sz))


def deconv3d(x, W, b, stride=1, output_shape=None):
    """3-D deconvolution: convolve the zero-inserted, zero-padded input.

    Output size per axis is ``(n - 1) * stride + kernel``.  ``output_shape``
    may request extra trailing voxels (bias only), which is needed when this
    serves as the exact adjoint of a convolution whose stride did not tile
    its input.

    Rather than materialising the padded input (see :func:`upsample_pad`),
    each kernel tap scatters the input onto the output grid.  Taps are
    visited in the same ``(k, p, q, r)`` order as the padded convolution, so
    every output voxel accumulates the same non-zero terms in the same order.
    """
    x = np.asarray(x)
    if x.ndim != 5:
        raise ShapeError(f"deconv3d expects (N, C, X, Y, Z) input, got {x.shape}")
    J, K, P, Q, R = W.shape
    if x.shape[1] != K:
        raise ShapeError(f"input has {x.shape[1]} channels, kernel expects {K}")
    stride = _triple(stride)
    natural = deconv_output_shape(x.shape[2:], (P, Q, R), stride)
    if output_shape is None:
        output_shape = natural
    output_shape = tuple(output_shape)
    if any(o < m for o, m in zip(output_shape, natural)):
        raise ShapeError(f"output_shape {output_shape} smaller than {natural}")
    out = np.empty((x.shape[0], J) + output_shape, dtype=np.result_type(x, W))
    out[...] = b.reshape(1, J, 1, 1, 1)
    for k in range(K):
        xk = x[:, k:k + 1]
        for p in range(P):
            for q in range(Q):
                for r in range(R):
                    sl = _tap_slices(x.shape[2:], (P, Q, R), stride, p, q, r)
                    out[sl] += W[:, k, p, q, r].reshape(1, J, 1, 1, 1) * xk
    return out


def deconv3d_backward(U, x, W, stride=1, need_input_grad=True):
    """Gradients of :func:`deconv3d` (without ``output_shape`` padding)."""
    J, K, P, Q, R = W.shape
    stride = _triple(stride)
    dW = np.empty_like(W)
    dx = np.zeros_like(x, dtype=np.result_type(x, U)) if need_input_grad else None
    for p in range(P):
        for q in range(Q):
            for r in range(R):
                Us = U[_tap_slices(x.shape[2:], (P, Q, R), stride, p, q, r)]
                dW[:, :, p, q, r] = np.tensordot(Us, x, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
                if need_input_grad:
                    dx += np.moveaxis(np.tensordot(Us, W[:, :, p, q, r], axes=([1], [0])), -1, 1)
    db = U.sum(axis=(0, 2, 3, 4))
    return dW, db, dx


def adjoint_kernel(W):
    """Kernel that turns :func:`deconv3d` into the adjoint of :func:`conv3d`.

    Swaps input/output channels and rotates each tap by 180 degrees.
    """
    from ..numerics import rotate180
    return rotate180(np.transpose(W, (1, 0, 2, 3, 4)))


# --------------------------------------------------------------------------
# pooling
# --------------------------------------------------------------------------

def maxpool3d(x, window, stride=None):
    """Max pooling over ``window`` with ties resolved to the lowest linear
    index inside the window.  Returns ``(out, argmax)`` where ``argmax`` holds
    the winning window offset ``(p*Q + q)*R + r`` per output voxel."""
    x = np.asarray(x)
    window = _triple(window)
    stride = window if stride is None else _triple(stride)
    out_shape = conv_output_shape(x.shape[2:], window, stride)
    P, Q, R = window
    best = None
    arg = None
    o = 0
    for p in range(P):
        for q in range(Q):
            for r in range(R):
                v = _window(x, p, q, r, out_shape, stride)
                if best is None:
                    best = v.copy()
                    arg = np.zeros(best.shape, dtype=np.int64)
                else:
                    take = v > best
                    best[take] = v[take]
                    arg[take] = o
                o += 1
    return best, arg


def maxpool3d_backward(U, argmax, in_shape, window, stride=None):
    window = _triple(window)
    stride = window if stride is None else _triple(stride)
    P, Q, R = window
    out_shape = U.shape[2:]
    ox, oy, oz = out_shape
    sx, sy, sz = stride
    dx = np.zeros(in_shape, dtype=U.dtype)
    o = 0
    for p in range(P):
        for q in range(Q):
            for r in range(R):
                dx[:, :, p:p + sx * (ox - 1) + 1:sx,
                   q:q + sy * (oy - 1) + 1:sy,
                   r:r + sz * (oz - 1) + 1:sz] += np.where(argmax == o, U, 0)
                o += 1
    return dx


# --------------------------------------------------------------------------
# fully connected and batch norm
# --------------------------------------------------------------------------

def fc(x, W, b):
    """Affine map on a batch of row vectors: ``x @ W.T + b``."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != W.shape[1]:
        raise ShapeError(f"fc expects (N, {W.shape[1]}) input, got {x.shape}")
    return x @ W.T + b


def fc_backward(U, x, W, need_input_grad=True):
    dW = U.T @ x
    db = U.sum(axis=0)
    dx = U @ W if need_input_grad else None
    return dW, db, dx


def batchnorm(x, gamma, beta, running_mean, running_var, train, momentum=0.1, eps=1e-5):
    """Per-channel batch normalisation for ``(N, C, ...)`` stacks.

    In training mode the running statistics are updated in place.
    Returns ``(y, cache)``.
    """
    axes = (0,) + tuple(range(2, x.ndim))
    shape = (1, -1) + (1,) * (x.ndim - 2)
    if train:
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        running_var *= 1 - momentum
        running_var += momentum * var
    else:
        mu = running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu.reshape(shape)) * inv.reshape(shape)
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return y, (xhat, inv, train)


def batchnorm_backward(dy, gamma, cache):
    xhat, inv, train = cache
    axes = (0,) + tuple(range(2, dy.ndim))
    shape = (1, -1) + (1,) * (dy.ndim - 2)
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma.reshape(shape)
    if not train:
        return dxhat * inv.reshape(shape), dgamma, dbeta
    m = dy.size // dy.shape[1]
    dx = (inv.reshape(shape) / m) * (
        m * dxhat
        - dxhat.sum(axis=axes).reshape(shape)
        - xhat * (dxhat * xhat).sum(axis=axes).reshape(shape)
    )
    return dx, dgamma, dbeta
