"""Alternating minimisation of the joint SLCRF objective.

Each outer iteration updates, in order, the autoencoder parameters
(``theta``), the self-expression matrix ``Z``, the auxiliary copy ``M``,
the CRF head ``h`` and the multiplier ``T``.  ``S`` is rebuilt from ``Z``
right after the ``Z`` step and held fixed for the rest of the iteration.

Objective::

    recon + alpha/2 ||W||^2 + lambda1 ||X - X M||^2 + lambda1 beta ||M||
          + lambda2 (unary + eta pairwise(S(Z)))

with ``X`` the ``K x n`` latent codes of the working set.
"""

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from . import crf
from .autoencoder import Network, architectures, reconstruction_seed
from .data import extract_patches, select_working_set
from .errors import ConfigError, DivergenceError, ShapeError
from .numerics import column_shrink, soft_threshold
from .relations import knn_spatial, relationship_matrix, sparse_code_init, spatial_affinity

log = logging.getLogger(__name__)

THETA, ZSTEP, MSTEP, HSTEP, TSTEP = "theta", "Z", "M", "h", "T"
ORDER = (THETA, ZSTEP, MSTEP, HSTEP, TSTEP)
TRACE_HEADER = ("iter", "objective", "lagrangian", "feasibility", "unary", "pairwise", "seconds")


@dataclass
class Hyperparams:
    """Every tunable of a training run.

    The constants ``omega, epsilon, alpha, delta1, delta2, tau`` default to
    the reference initialisation; ``beta, gamma, eta, lambda1, lambda2``
    default to the reference Indian Pines optimum.  See :data:`PRESETS` for
    named alternatives.
    """

    alpha: float = 0.0005
    beta: float = 1e2
    gamma: float = 10.0
    eta: float = 1e4
    lambda1: float = 1e3
    lambda2: float = 1e-3
    omega: float = 1e3
    epsilon: float = 0.01
    delta1: float = 0.001
    delta2: float = 1.0
    tau: float = 0.0002
    k: int = 5
    latent: int = 8
    patch: int = 5
    batch: int = 32
    max_outer_iters: int = 100
    tol_obj: float = 1e-4
    tol_feas: float = 1e-3
    seed: int = 0
    labeled_frac: float = 0.05
    working_cap: int = 2048
    arch: str = "desk"
    f64: bool = True
    pairwise_mode: str = crf.SMOOTHNESS
    # "column" is the l2,1 group shrinkage, "elementwise" plain soft-thresholding
    shrink: str = "column"
    # "fused" uses S1 + gamma S2; "spatial" uses S2 alone (RE-CRF ablation)
    relation: str = "fused"
    # latent-seed coefficient of the sparse-coding term: "textbook" (I-Z)(I-Z)^T
    # or "alternate" I - Z - Z^T - Z Z^T
    latent_coefficient: str = "textbook"
    safeguard_delta2: bool = True
    epsilon_growth: float = 1.0
    epsilon_max: float = 1e2
    h_steps: int = 1
    theta_epochs: int = 1
    h2_max: float = 1e3
    init_beta: float = None
    init_max_iter: int = 200
    init_tol: float = 1e-6
    head_scale: float = 0.01

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "eta", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("omega", "epsilon", "delta1", "delta2", "tau"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("k", "latent", "batch", "h_steps", "theta_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_outer_iters < 0:
            raise ConfigError("max_outer_iters must be >= 0")
        if self.patch < 1 or self.patch % 2 == 0:
            raise ConfigError("patch must be a positive odd number")
        if self.epsilon_growth < 1.0:
            raise ConfigError("epsilon_growth must be >= 1")
        choices = {"pairwise_mode": crf.MODES, "shrink": ("column", "elementwise"),
                   "relation": ("fused", "spatial"), "latent_coefficient": ("textbook", "alternate")}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @property
    def dtype(self):
        return np.float64 if self.f64 else np.float32

    def updated(self, **changes):
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown hyperparameters {sorted(unknown)}")
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls().updated(**d)


PRESETS = {
    "indian_pines": dict(beta=1e2, gamma=10.0, eta=1e4, lambda1=1e3, lambda2=1e-3),
    "houston": dict(beta=1e3, gamma=10.0, eta=10.0, lambda1=1e3, lambda2=1e-9),
    # tuned for the 24x24x12 synthetic scenes; see the decisions ledger
    "desk": dict(beta=1e-4, gamma=1.0, eta=0.1, lambda1=1e-5, lambda2=1.0, delta2=100.0,
                 tau=0.02, h_steps=5, epsilon_growth=1.1, epsilon_max=1.0, init_beta=1e-2,
                 max_outer_iters=40),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return Hyperparams().updated(**{**PRESETS[name], **overrides})


# --------------------------------------------------------------------------
# state and data containers
# --------------------------------------------------------------------------

@dataclass
class CodingState:
    Z: np.ndarray
    M: np.ndarray
    T: np.ndarray
    epsilon: float = 0.01

    def __post_init__(self):
        if not (self.Z.shape == self.M.shape == self.T.shape) or self.Z.ndim != 2 \
                or self.Z.shape[0] != self.Z.shape[1]:
            raise ShapeError("Z, M and T must be equal square matrices")

    @property
    def n(self):
        return self.Z.shape[0]

    def copy(self):
        return CodingState(self.Z.copy(), self.M.copy(), self.T.copy(), self.epsilon)

    def feasibility(self):
        return float(np.linalg.norm(self.Z - self.M))

    def feasibility_inf(self):
        return float(np.max(np.abs(self.Z - self.M))) if self.Z.size else 0.0


@dataclass
class TrainingData:
    """The working set: patches, pixel coordinates, targets and graph.

    ``targets`` holds 0-based class ids for labelled pixels and -1 elsewhere.
    """

    patches: np.ndarray
    positions: np.ndarray
    targets: np.ndarray
    classes: int
    graph: object
    S2: np.ndarray

    @property
    def n(self):
        return self.patches.shape[0]


def prepare_data(scene, labeled, hp):
    """Build the working set from a normalised scene and labelled coordinates."""
    coords = select_working_set(scene, labeled, cap=hp.working_cap, seed=hp.seed)
    patches = extract_patches(scene, coords, hp.patch).astype(hp.dtype)
    targets = np.full(len(coords), -1, dtype=np.int64)
    lab = {tuple(c) for c in np.asarray(labeled).tolist()}
    for i, (y, x) in enumerate(coords.tolist()):
        if (y, x) in lab:
            targets[i] = int(scene.labels[y, x]) - 1
    graph = knn_spatial(coords, hp.k, hp.omega)
    S2 = spatial_affinity(graph, coords, hp.omega)
    return TrainingData(patches, coords, targets, scene.classes, graph, S2)


def build_network(hp, bands):
    if hp.arch == "desk":
        arch = architectures.desk(bands=bands, latent=hp.latent, patch=hp.patch)
    elif hp.arch == "tiny":
        arch = architectures.tiny(bands=bands, latent=hp.latent)
    elif hp.arch in architectures.BUILDERS:
        arch = architectures.BUILDERS[hp.arch](patch=hp.patch, bands=bands)
    else:
        raise ConfigError(f"unknown architecture {hp.arch!r}")
    return Network.initialize(arch, seed=hp.seed, dtype=hp.dtype)


class Snapshot(NamedTuple):
    """Network outputs over the whole working set."""

    latent: np.ndarray       # (K, n)
    penultimate: np.ndarray  # (F, n)
    recon: float             # mean squared reconstruction error


def evaluate_network(network, patches, batch=256):
    lat, pen, sq = [], [], 0.0
    for s in range(0, len(patches), batch):
        chunk = patches[s:s + batch]
        out, cache = network.forward(chunk)
        lat.append(cache["latent"])
        pen.append(network.penultimate(cache))
        diff = np.asarray(chunk, dtype=np.float64) - out
        sq += float(np.sum(diff * diff))
    latent = np.concatenate(lat).T.astype(np.float64)
    pen = np.concatenate(pen).T.astype(np.float64)
    return Snapshot(latent, pen, sq / patches.size)


def encode_all(network, patches, batch=256):
    parts = [network.encode(patches[s:s + batch])[0] for s in range(0, len(patches), batch)]
    return np.concatenate(parts).T.astype(np.float64)


# --------------------------------------------------------------------------
# objective and Lagrangian
# --------------------------------------------------------------------------

def affinity(Z, data, hp):
    if hp.relation == "spatial":
        return data.S2
    return relationship_matrix(Z, data.graph, data.positions, hp.gamma, hp.omega, S2=data.S2).S


def _sparsity(M, hp):
    if hp.shrink == "column":
        return float(np.sum(np.linalg.norm(M, axis=0)))
    return float(np.sum(np.abs(M)))


def objective_terms(state, network, weights, data, hp, snap=None):
    """Named components of the objective (``total`` is their weighted sum)."""
    if snap is None:
        snap = evaluate_network(network, data.patches)
    X = snap.latent
    R = X - X @ state.M
    S = affinity(state.Z, data, hp)
    probs = crf.classify(X, weights).probs
    terms = {
        "recon": snap.recon,
        "decay": 0.5 * hp.alpha * network.weight_norm2(),
        "coding": hp.lambda1 * float(np.sum(R * R)),
        "sparsity": hp.lambda1 * hp.beta * _sparsity(state.M, hp),
        "unary": crf.unary_energy(probs, data.targets),
        "pairwise": crf.pairwise_energy(probs, S, data.graph.adjacency, weights.h2,
                                        hp.pairwise_mode),
    }
    terms["total"] = (terms["recon"] + terms["decay"] + terms["coding"] + terms["sparsity"]
                      + hp.lambda2 * (terms["unary"] + hp.eta * terms["pairwise"]))
    return terms


def objective(state, network, weights, data, hp, snap=None):
    return objective_terms(state, network, weights, data, hp, snap)["total"]


def augmentation(state, form="square"):
    """Constraint part of the augmented Lagrangian.

    ``"inner"``: ``<T, Z-M> + eps/2 ||Z-M||^2``;
    ``"square"``: ``eps/2 ||Z - M + T/eps||^2 - ||T||^2 / (2 eps)``.
    """
    eps = state.epsilon
    D = state.Z - state.M
    if form == "inner":
        return float(np.sum(state.T * D) + 0.5 * eps * np.sum(D * D))
    if form == "square":
        Q = D + state.T / eps
        return float(0.5 * eps * np.sum(Q * Q) - np.sum(state.T * state.T) / (2.0 * eps))
    raise ValueError(f"unknown form {form!r}")


def lagrangian(state, network, weights, data, hp, snap=None, form="square"):
    return objective(state, network, weights, data, hp, snap) + augmentation(state, form)


# --------------------------------------------------------------------------
# theta
# --------------------------------------------------------------------------

def latent_coefficient(Z, hp):
    n = Z.shape[0]
    I = np.eye(n)
    if hp.latent_coefficient == "alternate":
        return I - Z - Z.T - Z @ Z.T
    R = I - Z
    return R @ R.T


def _latent_seed(X_full, cols, coef, probs, weights, data, S, hp):
    """Gradient of the coupling terms w.r.t. the latent columns ``cols``."""
    g = np.zeros((X_full.shape[0], len(cols)))
    if hp.lambda1:
        g += 2.0 * hp.lambda1 * (X_full @ coef[:, cols])
    if hp.lambda2:
        dlog = crf.logit_grad(probs, data.targets, S, data.graph.adjacency,
                              hp.eta, hp.pairwise_mode, hp.lambda2)
        g += weights.W_hl.T @ dlog[:, cols]
    return g.T


def theta_loss(network, data, state, weights, hp, train=False):
    """Full-batch theta objective (coupling terms included, ``Z``-only
    constants as well)."""
    recon, cache = network.forward(data.patches, train=train)
    X = cache["latent"].T.astype(np.float64)
    R = X - X @ state.Z
    S = affinity(state.Z, data, hp)
    probs = crf.classify(X, weights).probs
    diff = np.asarray(data.patches, dtype=np.float64) - recon
    loss = float(np.mean(diff * diff)) + 0.5 * hp.alpha * network.weight_norm2()
    loss += hp.lambda1 * float(np.sum(R * R)) + hp.lambda1 * hp.beta * float(np.sum(np.abs(state.Z)))
    loss += augmentation(state, "square")
    loss += hp.lambda2 * (crf.unary_energy(probs, data.targets)
                          + hp.eta * crf.pairwise_energy(probs, S, data.graph.adjacency,
                                                         weights.h2, hp.pairwise_mode))
    return loss


def theta_gradient(network, data, state, weights, hp, train=False):
    """Analytic full-batch gradient matching :func:`theta_loss`."""
    recon, cache = network.forward(data.patches, train=train)
    X = cache["latent"].T.astype(np.float64)
    S = affinity(state.Z, data, hp)
    probs = crf.classify(X, weights).probs
    cols = np.arange(data.n)
    seed = _latent_seed(X, cols, latent_coefficient(state.Z, hp), probs, weights, data, S, hp)
    return network.backward(cache, reconstruction_seed(data.patches, recon), seed, hp.alpha)


def step_theta(network, state, weights, data, hp, rng, snap, S):
    """Mini-batch SGD epoch(s) over the working set.

    The latent matrix of the whole working set is cached from ``snap``
    and its batch columns refreshed after every forward pass; each batch
    gradient is scaled by ``n / |B|`` so it estimates the full gradient.
    """
    n = data.n
    X_full = snap.latent.copy()
    probs = crf.classify(X_full, weights).probs
    coef = latent_coefficient(state.Z, hp) if hp.lambda1 else None
    for _ in range(hp.theta_epochs):
        order = rng.permutation(n)
        for s in range(0, n, hp.batch):
            cols = np.sort(order[s:s + hp.batch])
            recon, cache = network.forward(data.patches[cols], train=True)
            xb = cache["latent"].T.astype(np.float64)
            X_full[:, cols] = xb
            probs[:, cols] = crf.classify(xb, weights).probs
            seed = (n / len(cols)) * _latent_seed(X_full, cols, coef, probs, weights, data, S, hp)
            grads = network.backward(cache, reconstruction_seed(data.patches[cols], recon),
                                     seed, hp.alpha)
            network.sgd_update(grads, hp.delta1)
    return network


# --------------------------------------------------------------------------
# Z, M, T
# --------------------------------------------------------------------------

def _sgn(A):
    return np.sign(A)  # sign(0) == 0


def z_objective(state, X, probs, weights, data, hp):
    """The ``Z`` subproblem: coding fidelity, CRF affinity term and penalty.

    In linear mode the affinity term enters with ``+h2``, the opposite sign
    to the CRF energy; smoothness mode uses the smoothness energy itself.
    """
    Z = state.Z
    R = X - X @ Z
    val = hp.lambda1 * float(np.sum(R * R))
    if hp.lambda2 and hp.eta and hp.relation == "fused":
        S = affinity(Z, data, hp)
        if hp.pairwise_mode == crf.LINEAR:
            val += hp.lambda2 * hp.eta * weights.h2 * float(np.sum(S[data.graph.adjacency]))
        else:
            val += hp.lambda2 * hp.eta * crf.pairwise_energy(probs, S, data.graph.adjacency)
    Q = Z - state.M + state.T / state.epsilon
    return val + 0.5 * state.epsilon * float(np.sum(Q * Q))


def z_gradient(state, X, probs, weights, data, hp):
    Z = state.Z
    G = np.zeros_like(Z)
    if hp.lambda1:
        G += 2.0 * hp.lambda1 * (X.T @ (X @ Z - X))
    if hp.lambda2 and hp.eta and hp.relation == "fused":
        S = affinity(Z, data, hp)
        GS = crf.pairwise_affinity_grad(probs, S, data.graph.adjacency, weights.h2,
                                        hp.pairwise_mode)
        if hp.pairwise_mode == crf.LINEAR:
            GS = -GS
        G += hp.lambda2 * hp.eta * (GS + GS.T) * _sgn(Z + Z.T) / 2.0
    G += state.epsilon * (Z - state.M) + state.T
    return G


def z_step_size(X, state, hp):
    if not hp.safeguard_delta2:
        return hp.delta2
    L = 2.0 * hp.lambda1 * float(np.linalg.norm(X, 2)) ** 2 + state.epsilon
    return min(hp.delta2, 1.0 / L)


def step_z(state, X, probs, weights, data, hp):
    """One linearised gradient step on the ``Z`` subproblem; diagonal re-zeroed."""
    G = z_gradient(state, X, probs, weights, data, hp)
    if not np.all(np.isfinite(G)):
        raise DivergenceError("non-finite gradient in the Z step")
    Z = state.Z - z_step_size(X, state, hp) * G
    np.fill_diagonal(Z, 0.0)
    return CodingState(Z, state.M, state.T, state.epsilon)


def step_m(state, hp):
    """``M = shrink(Z + T/eps, beta/eps)`` (column-wise l2 or elementwise)."""
    Q = state.Z + state.T / state.epsilon
    thr = hp.beta / state.epsilon
    M = column_shrink(Q, thr) if hp.shrink == "column" else soft_threshold(Q, thr)
    return CodingState(state.Z, M, state.T, state.epsilon)


def step_t(state, hp):
    T = state.T + state.epsilon * (state.Z - state.M)
    return CodingState(state.Z, state.M, T, state.epsilon)


def step_h(weights, X, data, hp, S):
    for _ in range(hp.h_steps):
        a = crf.classify(X, weights)
        g = crf.h_gradients(X, a, data.targets, S, data.graph.adjacency,
                            hp.eta, hp.lambda2, hp.pairwise_mode)
        crf.h_update(weights, g, hp.tau)
    return weights


# --------------------------------------------------------------------------
# trace
# --------------------------------------------------------------------------

@dataclass
class TraceRecord:
    iter: int
    objective: float
    lagrangian: float
    feasibility: float
    unary: float
    pairwise: float
    seconds: float
    steps: tuple = ()


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    stopped: str = ""

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path=None, timing=True):
        """CSV text (and file when ``path`` is given); ``timing=False``
        writes 0 in the ``seconds`` column so the file is reproducible."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.records:
            w.writerow([r.iter, repr(r.objective), repr(r.lagrangian), repr(r.feasibility),
                        repr(r.unary), repr(r.pairwise), repr(r.seconds if timing else 0.0)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != TRACE_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return [dict(zip(TRACE_HEADER, (int(r[0]),) + tuple(float(v) for v in r[1:])))
            for r in rows[1:]]


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

class TrainResult(NamedTuple):
    network: Network
    weights: crf.CrfWeights
    state: CodingState
    trace: TrainTrace


def initialize(data, hp, network=None):
    """Network, CRF head and coding state before the first outer iteration.

    ``Z0`` is the lasso self-expression of the penultimate encoder features,
    ``M0`` its proximal image and ``T0 = 0``.
    """
    if network is None:
        network = build_network(hp, data.patches.shape[-1])
    weights = crf.CrfWeights.initialize(data.classes, network.arch.latent_dim, seed=hp.seed + 1,
                                        scale=hp.head_scale, h2_max=hp.h2_max)
    snap = evaluate_network(network, data.patches)
    n = data.n
    if hp.lambda1 or hp.relation == "fused":
        beta0 = hp.beta if hp.init_beta is None else hp.init_beta
        # a warm start only; a truncated solve is fine
        Z0, info = sparse_code_init(snap.penultimate, beta0, max_iter=hp.init_max_iter,
                                    tol=hp.init_tol, return_info=True, warn=False)
        log.debug("lasso start: %d iterations, converged=%s", info["iters"], info["converged"])
    else:
        Z0 = np.zeros((n, n))
    state = step_m(CodingState(Z0, np.zeros((n, n)), np.zeros((n, n)), hp.epsilon), hp)
    if hp.pairwise_mode == crf.LINEAR:
        probs = crf.classify(snap.latent, weights).probs
        weights.h2 = min(crf.initial_h2(probs, affinity(Z0, data, hp), data.graph.adjacency),
                         hp.h2_max)
    return network, weights, state, snap


def run(data, hp, network=None, callback=None):
    """Alternate the five updates until the stopping rule fires.

    Stops when the relative objective change drops below ``tol_obj`` while
    ``max|Z - M| < tol_feas``, or after ``max_outer_iters`` iterations.
    Raises :class:`DivergenceError` (carrying the trace) when the objective
    exceeds 1000 times its initial value or stops being finite.
    """
    network, weights, state, snap = initialize(data, hp, network)
    rng = np.random.default_rng(hp.seed)
    trace = TrainTrace()
    terms = objective_terms(state, network, weights, data, hp, snap)
    obj0 = terms["total"]
    trace.initial = {"objective": obj0, "feasibility": state.feasibility(),
                     "lagrangian": obj0 + augmentation(state)}
    prev = obj0
    S = affinity(state.Z, data, hp)
    for it in range(1, hp.max_outer_iters + 1):
        t0 = time.perf_counter()
        steps = []
        step_theta(network, state, weights, data, hp, rng, snap, S)
        snap = evaluate_network(network, data.patches)
        steps.append(THETA)
        probs = crf.classify(snap.latent, weights).probs
        try:
            state = step_z(state, snap.latent, probs, weights, data, hp)
        except DivergenceError as exc:
            trace.stopped = "diverged"
            raise DivergenceError(f"{exc} at iteration {it}", trace=trace) from None
        S = affinity(state.Z, data, hp)
        steps.append(ZSTEP)
        state = step_m(state, hp)
        steps.append(MSTEP)
        step_h(weights, snap.latent, data, hp, S)
        steps.append(HSTEP)
        state = step_t(state, hp)
        steps.append(TSTEP)
        if hp.epsilon_growth > 1.0:
            state.epsilon = min(state.epsilon * hp.epsilon_growth, hp.epsilon_max)
        terms = objective_terms(state, network, weights, data, hp, snap)
        obj = terms["total"]
        rec = TraceRecord(it, obj, obj + augmentation(state), state.feasibility(),
                          terms["unary"], terms["pairwise"], time.perf_counter() - t0, tuple(steps))
        trace.records.append(rec)
        if callback is not None:
            callback(rec)
        if not np.isfinite(obj) or obj > 1e3 * abs(obj0):
            trace.stopped = "diverged"
            raise DivergenceError(f"objective {obj:.4g} at iteration {it} (initial {obj0:.4g})",
                                  trace=trace)
        change = abs(prev - obj) / max(abs(prev), 1e-300)
        prev = obj
        if change < hp.tol_obj and state.feasibility_inf() < hp.tol_feas:
            trace.stopped = "converged"
            break
    else:
        trace.stopped = "max_iters"
    return TrainResult(network, weights, state, trace)


def predict(network, weights, scene, hp, batch=256):
    """Class map (1-based ids) for every pixel of a normalised scene."""
    H, W = scene.labels.shape
    coords = np.argwhere(np.ones((H, W), dtype=bool))
    out = np.empty(H * W, dtype=np.int64)
    for s in range(0, len(coords), batch):
        patches = extract_patches(scene, coords[s:s + batch], hp.patch).astype(hp.dtype)
        lat = network.encode(patches)[0].T.astype(np.float64)
        out[s:s + batch] = crf.classify(lat, weights).hard + 1
    return out.reshape(H, W)
