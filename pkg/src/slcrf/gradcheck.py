"""Central finite-difference checks of the hand-written gradients.

Errors are reported per parameter array as
``max|analytic - numeric| / max(max|analytic|, max|numeric|)``.
"""

import numpy as np

from . import crf, optimizer
from .autoencoder import Network, architectures, layers as L
from .relations import knn_spatial, spatial_affinity


def relative_error(analytic, numeric, floor=1e-12):
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), floor)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


def numeric_gradient(f, x, h=1e-6):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``x`` (in place)."""
    g = np.zeros(x.shape)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out[i] = (fp - fm) / (2.0 * h)
    return g


def tiny_problem(seed, n=10, bands=8, latent=4, classes=3, batch_norm=False, pooled=False):
    """A small working set with random coding state and CRF head."""
    rng = np.random.default_rng(seed)
    arch = architectures.tiny(bands=bands, latent=latent, pooled=pooled, batch_norm=batch_norm)
    net = Network.initialize(arch, seed=seed)
    for p in net.params:
        if "b" in p:
            p["b"][:] = 0.1 * rng.standard_normal(p["b"].shape)
    patches = rng.uniform(0.0, 1.0, (n, 5, 5, bands))
    side = int(np.ceil(np.sqrt(n)))
    positions = np.array([(i // side, i % side) for i in range(n)])
    graph = knn_spatial(positions, 3)
    targets = np.full(n, -1)
    targets[: max(2, n // 3)] = rng.integers(0, classes, max(2, n // 3))
    data = optimizer.TrainingData(patches, positions, targets, classes, graph,
                                  spatial_affinity(graph, positions))
    Z = 0.1 * rng.standard_normal((n, n))
    np.fill_diagonal(Z, 0.0)
    state = optimizer.CodingState(Z, 0.1 * rng.standard_normal((n, n)),
                                  0.01 * rng.standard_normal((n, n)), 0.01)
    weights = crf.CrfWeights.initialize(classes, latent, seed=seed, scale=0.5)
    weights.b_hl[:] = 0.1 * rng.standard_normal(classes)
    hp = optimizer.Hyperparams(alpha=0.01, beta=0.1, gamma=0.5, eta=0.3, lambda1=0.05,
                               lambda2=0.2, latent=latent, k=3)
    return net, data, state, weights, hp


def check_theta(seed, batch_norm=False, pooled=False, h=1e-6):
    """Full theta-objective gradient of the tiny net against finite differences.

    Returns ``{"layer{i}.{key}": relative error}``.
    """
    net, data, state, weights, hp = tiny_problem(seed, batch_norm=batch_norm, pooled=pooled)
    train = batch_norm
    grads = optimizer.theta_gradient(net, data, state, weights, hp, train=train)
    out = {}
    for i, (p, g) in enumerate(zip(net.params, grads)):
        for key, gv in g.items():
            num = numeric_gradient(lambda: optimizer.theta_loss(net, data, state, weights, hp,
                                                                train=train), p[key], h)
            out[f"layer{i}.{key}"] = relative_error(gv, num)
    return out


def _layer_suites(seed):
    rng = np.random.default_rng(seed)
    res = {}
    x = rng.standard_normal((2, 2, 5, 4, 6))
    W = rng.standard_normal((3, 2, 2, 3, 2))
    b = rng.standard_normal(3)
    stride = (1, 1, 2)
    U = rng.standard_normal(L.conv3d(x, W, b, stride).shape)
    dW, db, dx = L.conv3d_backward(U, x, W, stride)
    f = lambda: float(np.sum(U * L.conv3d(x, W, b, stride)))
    res["conv3d.x"] = relative_error(dx, numeric_gradient(f, x))
    res["conv3d.W"] = relative_error(dW, numeric_gradient(f, W))
    res["conv3d.b"] = relative_error(db, numeric_gradient(f, b))

    y = rng.standard_normal((2, 3, 3, 2, 3))
    V = rng.standard_normal((2, 3, 2, 2, 3))
    c = rng.standard_normal(2)
    U = rng.standard_normal(L.deconv3d(y, V, c, stride).shape)
    dV, dc, dy = L.deconv3d_backward(U, y, V, stride)
    f = lambda: float(np.sum(U * L.deconv3d(y, V, c, stride)))
    res["deconv3d.x"] = relative_error(dy, numeric_gradient(f, y))
    res["deconv3d.W"] = relative_error(dV, numeric_gradient(f, V))
    res["deconv3d.b"] = relative_error(dc, numeric_gradient(f, c))

    z = rng.standard_normal((2, 2, 4, 4, 4))
    out, arg = L.maxpool3d(z, (2, 2, 2), (2, 2, 2))
    U = rng.standard_normal(out.shape)
    dz = L.maxpool3d_backward(U, arg, z.shape, (2, 2, 2), (2, 2, 2))
    f = lambda: float(np.sum(U * L.maxpool3d(z, (2, 2, 2), (2, 2, 2))[0]))
    res["maxpool3d.x"] = relative_error(dz, numeric_gradient(f, z))

    a = rng.standard_normal((4, 3, 2, 2, 2))
    gam = rng.uniform(0.5, 1.5, 3)
    bet = rng.standard_normal(3)
    rm, rv = np.zeros(3), np.ones(3)
    out, cache = L.batchnorm(a, gam, bet, rm.copy(), rv.copy(), True)
    U = rng.standard_normal(out.shape)
    da, dg, dbeta = L.batchnorm_backward(U, gam, cache)
    f = lambda: float(np.sum(U * L.batchnorm(a, gam, bet, rm.copy(), rv.copy(), True)[0]))
    res["batchnorm.x"] = relative_error(da, numeric_gradient(f, a))
    res["batchnorm.gamma"] = relative_error(dg, numeric_gradient(f, gam))
    res["batchnorm.beta"] = relative_error(dbeta, numeric_gradient(f, bet))
    return res


def run_suites(seeds=range(5), tol=1e-4):
    """All suites over ``seeds``; returns ``[(name, worst error over seeds)]``."""
    worst = {}
    for seed in seeds:
        found = dict(_layer_suites(seed))
        found.update({f"theta.{k}": v for k, v in check_theta(seed).items()})
        for k, v in found.items():
            worst[k] = max(worst.get(k, 0.0), v)
    return sorted(worst.items())
