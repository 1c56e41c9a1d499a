"""The 3-D convolutional autoencoder: architecture, forward and backprop."""

from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import ConfigError, ShapeError
from . import layers as L

CONV = "conv3d"
POOL = "maxpool3d"
DECONV = "deconv3d"
FC = "fc"
KINDS = (CONV, POOL, DECONV, FC)


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the autoencoder.

    ``kernel`` is ``(P, Q, R)`` for conv/deconv, the pool window for
    max-pooling and ignored for fully connected layers, which use
    ``in_features``/``out_features``.  Conv layers read ``in_channels`` from
    the previous layer and create ``out_channels`` feature cubes.
    """

    kind: str
    out_channels: int = 0
    kernel: tuple = (1, 1, 1)
    stride: tuple = (1, 1, 1)
    out_features: int = 0
    activation: str = "relu"
    batch_norm: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        object.__setattr__(self, "kernel", L._triple(self.kernel))
        object.__setattr__(self, "stride", L._triple(self.stride))
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ConfigError("kernel dims and strides must be >= 1")
        if self.activation not in ("relu", "none"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.kind == FC and self.batch_norm:
            raise ConfigError("batch norm is only supported on conv/deconv layers")

    @property
    def parameterized(self):
        return self.kind != POOL

    def to_dict(self):
        d = asdict(self)
        d["kernel"] = list(self.kernel)
        d["stride"] = list(self.stride)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{**d, "kernel": tuple(d["kernel"]), "stride": tuple(d["stride"])})


def conv(out_channels, kernel, stride=1, activation="relu", batch_norm=False):
    return LayerSpec(CONV, out_channels=out_channels, kernel=kernel, stride=stride,
                     activation=activation, batch_norm=batch_norm)


def deconv(out_channels, kernel, stride=1, activation="relu", batch_norm=False):
    return LayerSpec(DECONV, out_channels=out_channels, kernel=kernel, stride=stride,
                     activation=activation, batch_norm=batch_norm)


def pool(window, stride=None):
    return LayerSpec(POOL, kernel=window, stride=window if stride is None else stride,
                     activation="none")


def dense(out_features, activation="relu"):
    return LayerSpec(FC, out_features=out_features, activation=activation)


@dataclass
class Architecture:
    """A validated layer sequence with its derived shapes.

    ``encoder_depth`` (M1) counts the encoder layers; the output of layer M1
    is the latent vector.  The stack is flattened before the first fully
    connected layer and reshaped back to the same cube shape after the last.
    """

    input_shape: tuple
    layers: list
    encoder_depth: int
    shapes: list = field(init=False)
    in_dims: list = field(init=False)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        self.layers = list(self.layers)
        M = len(self.layers)
        if not 1 <= self.encoder_depth < M:
            raise ConfigError("encoder_depth must lie strictly inside the layer list")
        if self.layers[self.encoder_depth - 1].kind != FC:
            raise ConfigError("the latent layer (index encoder_depth) must be fully connected")
        kinds = [s.kind for s in self.layers]
        fc_idx = [i for i, k in enumerate(kinds) if k == FC]
        if fc_idx != list(range(fc_idx[0], fc_idx[-1] + 1)):
            raise ConfigError("fully connected layers must form one contiguous block")
        if any(k == DECONV for k in kinds[:fc_idx[0]]) or any(k in (CONV, POOL) for k in kinds[fc_idx[-1] + 1:]):
            raise ConfigError("convs/pools must precede the FC block and deconvs follow it")
        self._fc_first, self._fc_last = fc_idx[0], fc_idx[-1]
        self._propagate()

    def _propagate(self):
        shape = (1,) + self.input_shape
        shapes, in_dims = [], []
        bottleneck = None
        for i, spec in enumerate(self.layers):
            if i == self._fc_first:
                bottleneck = shape
                shape = (int(np.prod(shape)),)
            if i == self._fc_last + 1:
                if shape[0] != int(np.prod(bottleneck)):
                    raise ConfigError(
                        f"decoder FC width {shape[0]} cannot be reshaped to {bottleneck}")
                shape = bottleneck
            in_dims.append(shape)
            if spec.kind == CONV:
                shape = (spec.out_channels,) + L.conv_output_shape(shape[1:], spec.kernel, spec.stride)
            elif spec.kind == POOL:
                shape = (shape[0],) + L.conv_output_shape(shape[1:], spec.kernel, spec.stride)
            elif spec.kind == DECONV:
                shape = (spec.out_channels,) + L.deconv_output_shape(shape[1:], spec.kernel, spec.stride)
            else:
                shape = (spec.out_features,)
            shapes.append(shape)
        if self._fc_last == len(self.layers) - 1:
            raise ConfigError("decoder must end with a deconvolution restoring the input cube")
        if shape != (1,) + self.input_shape:
            raise ConfigError(f"decoder output {shape} does not restore input {(1,) + self.input_shape}")
        self.shapes = shapes
        self.in_dims = in_dims
        self.bottleneck = bottleneck

    @property
    def latent_dim(self):
        return self.shapes[self.encoder_depth - 1][0]

    @property
    def depth(self):
        return len(self.layers)

    def to_dict(self):
        return {"input_shape": list(self.input_shape), "encoder_depth": self.encoder_depth,
                "layers": [s.to_dict() for s in self.layers]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["input_shape"]), [LayerSpec.from_dict(s) for s in d["layers"]],
                   d["encoder_depth"])


class Network:
    """Parameters of an :class:`Architecture` plus forward/backward passes.

    ``params`` is a list with one dict per layer (empty for pooling) holding
    ``W`` and ``b`` and, for batch-normalised layers, ``gamma``, ``beta`` and
    the running statistics ``mean``/``var``.
    """

    def __init__(self, arch, params, dtype=np.float64):
        self.arch = arch
        self.params = params
        self.dtype = np.dtype(dtype).type

    @classmethod
    def initialize(cls, arch, seed=0, dtype=np.float64):
        """He-normal weights (std ``sqrt(2 / fan_in)``), zero biases (none on
        batch-normalised layers)."""
        rng = np.random.default_rng(seed)
        params = []
        for spec, ind, outd in zip(arch.layers, arch.in_dims, arch.shapes):
            p = {}
            if spec.kind in (CONV, DECONV):
                shape = (spec.out_channels, ind[0]) + spec.kernel
                fan_in = ind[0] * int(np.prod(spec.kernel))
            elif spec.kind == FC:
                shape = (spec.out_features, ind[0])
                fan_in = ind[0]
            else:
                params.append(p)
                continue
            p["W"] = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
            if not spec.batch_norm:
                p["b"] = np.zeros(shape[0], dtype=dtype)
            else:
                # the normalisation cancels any bias, so none is stored
                p["gamma"] = np.ones(shape[0], dtype=dtype)
                p["beta"] = np.zeros(shape[0], dtype=dtype)
                p["mean"] = np.zeros(shape[0], dtype=dtype)
                p["var"] = np.ones(shape[0], dtype=dtype)
            params.append(p)
        return cls(arch, params, dtype)

    def copy(self):
        return Network(self.arch, [{k: v.copy() for k, v in p.items()} for p in self.params],
                       self.dtype)

    # learnable arrays (running BN statistics excluded)
    TRAINABLE = ("W", "b", "gamma", "beta")

    def named_arrays(self):
        """All stored arrays in manifest order, as ``("layer{i}.{key}", array)``."""
        for i, p in enumerate(self.params):
            for key in ("W", "b", "gamma", "beta", "mean", "var"):
                if key in p:
                    yield f"layer{i}.{key}", p[key]

    def weights(self):
        return [p["W"] for p in self.params if "W" in p]

    def weight_norm2(self):
        return float(sum(np.vdot(W, W) for W in self.weights()))

    # ------------------------------------------------------------------
    def _as_batch(self, patches):
        x = np.asarray(patches, dtype=self.dtype)
        if x.shape == self.arch.input_shape:
            x = x[np.newaxis]
        if x.ndim != 4 or x.shape[1:] != self.arch.input_shape:
            raise ShapeError(f"patches must be {self.arch.input_shape} or a batch of them, got {x.shape}")
        return x[:, np.newaxis]

    def _run(self, x, stop, train):
        arch = self.arch
        cache = {"inputs": [], "pre": [], "bn": [], "argmax": [], "stop": stop, "train": train}
        for i in range(stop):
            spec, p = arch.layers[i], self.params[i]
            if i == arch._fc_first:
                x = x.reshape(x.shape[0], -1)
            if i == arch._fc_last + 1:
                x = x.reshape((x.shape[0],) + arch.bottleneck)
            cache["inputs"].append(x)
            bn = None
            arg = None
            b = p["b"] if "b" in p else np.zeros(len(p["W"]), dtype=self.dtype) if "W" in p else None
            if spec.kind == CONV:
                a = L.conv3d(x, p["W"], b, spec.stride)
            elif spec.kind == DECONV:
                a = L.deconv3d(x, p["W"], b, spec.stride)
            elif spec.kind == FC:
                a = L.fc(x, p["W"], b)
            else:
                a, arg = L.maxpool3d(x, spec.kernel, spec.stride)
            if spec.batch_norm:
                a, bn = L.batchnorm(a, p["gamma"], p["beta"], p["mean"], p["var"], train)
            cache["pre"].append(a)
            cache["bn"].append(bn)
            cache["argmax"].append(arg)
            x = L.relu(a) if spec.activation == "relu" else a
        cache["output"] = x
        return x, cache

    def encode(self, patches, train=False):
        """Latent vectors for one patch ``(b, b, d)`` or a batch ``(N, b, b, d)``.

        Returns ``(latent, cache)`` with ``latent`` of shape ``(N, K)``.
        """
        return self._run(self._as_batch(patches), self.arch.encoder_depth, train)

    def forward(self, patches, train=False):
        """Reconstruct patches.  Returns ``(reconstruction, cache)``; the
        reconstruction has the input's ``(N, b, b, d)`` shape."""
        x, cache = self._run(self._as_batch(patches), self.arch.depth, train)
        cache["latent"] = cache["inputs"][self.arch.encoder_depth]
        if cache["latent"].ndim != 2:
            cache["latent"] = cache["latent"].reshape(cache["latent"].shape[0], -1)
        return x[:, 0], cache

    def penultimate(self, cache):
        """Flattened input of the latent layer, ``X^(M1-1)`` per patch."""
        x = cache["inputs"][self.arch.encoder_depth - 1]
        return x.reshape(x.shape[0], -1)

    def backward(self, cache, d_output=None, d_latent=None, alpha=0.0):
        """Backpropagate through a cached pass.

        Parameters
        ----------
        cache : dict
            From :meth:`forward` (or :meth:`encode` when only ``d_latent`` is
            given).
        d_output : ndarray, optional
            Gradient of the loss w.r.t. the reconstruction, ``(N, b, b, d)``.
        d_latent : ndarray, optional
            Extra gradient w.r.t. the latent activations, ``(N, K)``.
        alpha : float
            Weight-decay coefficient; ``alpha * W`` is added to every weight
            gradient (biases are not decayed).

        Returns
        -------
        list of dict
            Gradients keyed like :attr:`params` (``W``, ``b``, ``gamma``,
            ``beta``).
        """
        if cache is None:
            raise ValueError("backward needs a forward cache")
        arch = self.arch
        stop = cache["stop"]
        M1 = arch.encoder_depth
        grads = [dict() for _ in self.params]
        U = None
        if d_output is not None:
            if stop != arch.depth:
                raise ValueError("d_output given but the cache is from encode()")
            U = np.asarray(d_output, dtype=self.dtype)[:, np.newaxis]
        for i in range(stop - 1, -1, -1):
            spec, p = arch.layers[i], self.params[i]
            if i == M1 - 1 and d_latent is not None:
                dl = np.asarray(d_latent, dtype=self.dtype)
                U = dl if U is None else U + dl
            if U is None:
                continue
            a = cache["pre"][i]
            if spec.activation == "relu":
                U = U * L.relu_grad(a)
            if spec.batch_norm:
                U, dg, dbeta = L.batchnorm_backward(U, p["gamma"], cache["bn"][i])
                grads[i]["gamma"] = dg
                grads[i]["beta"] = dbeta
            x = cache["inputs"][i]
            need = i > 0
            if spec.kind == CONV:
                dW, db, dx = L.conv3d_backward(U, x, p["W"], spec.stride, need)
            elif spec.kind == DECONV:
                dW, db, dx = L.deconv3d_backward(U, x, p["W"], spec.stride, need)
            elif spec.kind == FC:
                dW, db, dx = L.fc_backward(U, x, p["W"], need)
            else:
                dW = db = None
                dx = L.maxpool3d_backward(U, cache["argmax"][i], x.shape, spec.kernel, spec.stride)
            if dW is not None:
                grads[i]["W"] = dW + alpha * p["W"] if alpha else dW
                if "b" in p:
                    grads[i]["b"] = db
            U = dx
            if U is not None and i > 0 and i == arch._fc_first:
                U = U.reshape((U.shape[0],) + arch.shapes[i - 1])
            if U is not None and i == arch._fc_last + 1:
                U = U.reshape(U.shape[0], -1)
        return grads

    def sgd_update(self, grads, delta1=0.001):
        """In-place step ``param <- param - delta1 * grad``."""
        for p, g in zip(self.params, grads):
            for key, gv in g.items():
                p[key] -= np.asarray(delta1 * gv, dtype=p[key].dtype)
        return self


def reconstruction_loss(patches, reconstruction, network=None, alpha=0.0):
    """Mean squared reconstruction error plus ``alpha/2 * ||W||_F^2``.

    The squared error is averaged over the ``b*b*d`` voxels of each patch and
    then over the batch.
    """
    X = np.asarray(patches, dtype=np.float64)
    Y = np.asarray(reconstruction, dtype=np.float64)
    if X.shape != Y.shape:
        raise ShapeError(f"patch {X.shape} vs reconstruction {Y.shape}")
    loss = float(np.mean((X - Y) ** 2))
    if alpha and network is not None:
        loss += 0.5 * alpha * network.weight_norm2()
    return loss


def reconstruction_seed(patches, reconstruction):
    """Gradient of the batch-mean reconstruction error w.r.t. the output."""
    X = np.asarray(patches)
    Y = np.asarray(reconstruction)
    N = X.shape[0] if X.ndim == 4 else 1
    voxels = X[0].size if X.ndim == 4 else X.size
    return -(2.0 / (voxels * N)) * (X - Y)
