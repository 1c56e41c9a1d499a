"""Independent reference implementations used by the tests.

Everything here is deliberately naive: explicit Python loops, grid
searches and coordinate descent, written without reusing package code.
"""

import numpy as np


def naive_conv3d(x, W, b, stride):
    """Per-voxel loops; accumulation in (k, p, q, r) order after the bias."""
    N, K, X, Y, Zd = x.shape
    J, _, P, Q, R = W.shape
    sx, sy, sz = stride
    ox, oy, oz = (X - P) // sx + 1, (Y - Q) // sy + 1, (Zd - R) // sz + 1
    out = np.empty((N, J, ox, oy, oz))
    for n in range(N):
        for j in range(J):
            for a in range(ox):
                for c in range(oy):
                    for e in range(oz):
                        acc = float(b[j])
                        for k in range(K):
                            for p in range(P):
                                for q in range(Q):
                                    for r in range(R):
                                        acc += float(W[j, k, p, q, r]) * float(
                                            x[n, k, a * sx + p, c * sy + q, e * sz + r])
                        out[n, j, a, c, e] = acc
    return out


def naive_zero_insert_pad(x, kernel, stride):
    N, K, X, Y, Zd = x.shape
    P, Q, R = kernel
    sx, sy, sz = stride
    shape = (N, K, (X - 1) * sx + 1 + 2 * (P - 1), (Y - 1) * sy + 1 + 2 * (Q - 1),
             (Zd - 1) * sz + 1 + 2 * (R - 1))
    out = np.zeros(shape)
    for n in range(N):
        for k in range(K):
            for i in range(X):
                for j in range(Y):
                    for l in range(Zd):
                        out[n, k, P - 1 + i * sx, Q - 1 + j * sy, R - 1 + l * sz] = x[n, k, i, j, l]
    return out


def naive_deconv3d(x, W, b, stride):
    """Zero-insert, pad by kernel-1, then a unit-stride naive convolution."""
    return naive_conv3d(naive_zero_insert_pad(x, W.shape[2:], stride), W, b, (1, 1, 1))


def naive_maxpool3d(x, window, stride):
    N, C, X, Y, Zd = x.shape
    P, Q, R = window
    sx, sy, sz = stride
    ox, oy, oz = (X - P) // sx + 1, (Y - Q) // sy + 1, (Zd - R) // sz + 1
    out = np.empty((N, C, ox, oy, oz))
    for n in range(N):
        for c in range(C):
            for a in range(ox):
                for d in range(oy):
                    for e in range(oz):
                        best = -np.inf
                        for p in range(P):
                            for q in range(Q):
                                for r in range(R):
                                    v = x[n, c, a * sx + p, d * sy + q, e * sz + r]
                                    if v > best:
                                        best = v
                        out[n, c, a, d, e] = best
    return out


def prox_objective(M, Z, T, beta, eps):
    """beta * sum of column norms + eps/2 ||Z - M + T/eps||^2 (batched over
    leading axes of ``M``)."""
    D = Z - M + T / eps
    return beta * np.sum(np.sqrt(np.sum(M * M, axis=-2)), axis=-1) \
        + 0.5 * eps * np.sum(D * D, axis=(-2, -1))


def radial_grid_prox(Z, T, beta, eps, rounds=12, points=201):
    """Column-wise minimiser found by successive grid refinement along the
    ray through ``q = z + t/eps`` (the minimiser lies on that ray)."""
    Q = Z + T / eps
    M = np.zeros_like(Q)
    for j in range(Q.shape[1]):
        q = Q[:, j]
        nq = np.sqrt(np.sum(q * q))
        if nq == 0:
            continue
        u = q / nq
        f = lambda t: beta * t + 0.5 * eps * (t - nq) ** 2
        lo, hi = 0.0, nq
        for _ in range(rounds):
            ts = np.linspace(lo, hi, points)
            vals = np.array([f(t) for t in ts])
            i = int(np.argmin(vals))
            lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, points - 1)]
        t = 0.5 * (lo + hi)
        if f(0.0) <= f(t):
            t = 0.0
        M[:, j] = t * u
    return M


def cd_lasso(X, beta, sweeps=5000, tol=1e-13):
    """Coordinate descent on ||X - X Z||^2 + beta ||Z||_1 with diag(Z) = 0."""
    n = X.shape[1]
    G = X.T @ X
    Z = np.zeros((n, n))
    for j in range(n):
        z = np.zeros(n)
        for _ in range(sweeps):
            delta = 0.0
            for i in range(n):
                if i == j or G[i, i] == 0:
                    continue
                # partial residual correlation without coordinate i
                rho = G[i, j] - G[i] @ z + G[i, i] * z[i]
                new = np.sign(rho) * max(abs(rho) - beta / 2.0, 0.0) / G[i, i]
                delta = max(delta, abs(new - z[i]))
                z[i] = new
            if delta < tol:
                break
        Z[:, j] = z
    return Z
