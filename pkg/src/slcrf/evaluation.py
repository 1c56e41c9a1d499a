"""Accuracy metrics, map rendering, ablations and the PCA baseline.

Predictions and ground truth use 1-based class ids; truth 0 marks pixels
without ground truth, which every metric ignores.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import optimizer
from .data import HsiScene, extract_patches
from .errors import FormatError
from .numerics import softmax

# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    oa: float
    aa: float
    kappa: float
    per_class: np.ndarray
    confusion: np.ndarray

    def row(self, method):
        return [method, repr(self.oa), repr(self.aa), repr(self.kappa)] + \
               [repr(float(v)) for v in self.per_class]


def confusion_matrix(truth, predicted, classes):
    """``classes x classes`` counts; rows are true classes, columns predicted."""
    t = np.asarray(truth).ravel().astype(np.int64)
    p = np.asarray(predicted).ravel().astype(np.int64)
    if t.shape != p.shape:
        raise ValueError(f"truth has {t.size} entries, prediction {p.size}")
    keep = t > 0
    t, p = t[keep], p[keep]
    if t.size == 0:
        raise ValueError("no labelled pixels to evaluate")
    if t.max() > classes or p.min(initial=1) < 1 or p.max(initial=1) > classes:
        raise ValueError(f"class ids must lie in 1..{classes}")
    C = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(C, (t - 1, p - 1), 1)
    return C


def metrics_from_confusion(C):
    """OA, AA (over classes with ground truth) and Cohen's kappa."""
    C = np.asarray(C, dtype=np.int64)
    total = int(C.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    rows = C.sum(axis=1)
    cols = C.sum(axis=0)
    diag = np.diag(C)
    per_class = np.full(C.shape[0], np.nan)
    nz = rows > 0
    per_class[nz] = diag[nz] / rows[nz]
    po = float(diag.sum()) / total
    # exact integer arithmetic for the chance agreement
    pe = float(int(np.dot(rows, cols))) / float(total * total)
    if pe == 1.0:
        kappa = 1.0 if po == 1.0 else 0.0
    else:
        kappa = (po - pe) / (1.0 - pe)
    return MetricsReport(po, float(np.mean(per_class[nz])), kappa, per_class, C)


def metrics(truth, predicted, classes):
    return metrics_from_confusion(confusion_matrix(truth, predicted, classes))


def evaluate_map(prediction, labels, coords, classes):
    """Metrics of a predicted map restricted to ``coords`` (e.g. the
    unlabelled remainder)."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    return metrics(labels[coords[:, 0], coords[:, 1]], prediction[coords[:, 0], coords[:, 1]],
                   classes)


def write_metrics_csv(path, reports, classes):
    """``reports`` maps method name to :class:`MetricsReport`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "oa", "aa", "kappa"] + [f"class{c}" for c in range(1, classes + 1)])
        for method, rep in reports.items():
            w.writerow(rep.row(method))


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return {r[0]: dict(zip(rows[0][1:], map(float, r[1:]))) for r in rows[1:]}


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

_BASE_COLOURS = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
    (0, 128, 128), (220, 190, 255), (170, 110, 40), (255, 250, 200), (128, 0, 0),
    (170, 255, 195), (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
]


def palette(classes):
    """``(classes + 1, 3)`` uint8 colours; row 0 (unlabelled) is black.

    Beyond the fixed table colours come from an RGB lattice walk, skipping
    anything already used, so the map stays injective.
    """
    colours = [(0, 0, 0)] + _BASE_COLOURS[:classes]
    used = set(colours)
    step = 0
    while len(colours) < classes + 1:
        step += 1
        c = ((step * 97) % 256, (step * 57) % 256, (step * 193) % 256)
        if c not in used:
            used.add(c)
            colours.append(c)
    return np.array(colours, dtype=np.uint8)


def render_map(grid, path, colours=None, classes=None):
    """Write ``grid`` as a binary PPM (P6) and its palette as CSV.

    The palette is written next to the image as ``<stem>_palette.csv``.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D")
    if colours is None:
        colours = palette(int(classes if classes is not None else grid.max(initial=0)))
    colours = np.asarray(colours, dtype=np.uint8)
    if grid.min(initial=0) < 0 or grid.max(initial=0) >= len(colours):
        raise ValueError(f"class id outside the {len(colours) - 1}-class palette")
    rgb = colours[grid]
    H, W = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{W} {H}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb).tobytes())
    pal_path = os.path.splitext(path)[0] + "_palette.csv"
    with open(pal_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "r", "g", "b"])
        for i, (r, g, b) in enumerate(colours.tolist()):
            w.writerow([i, r, g, b])
    return path, pal_path


def read_ppm(path):
    """Parse a binary P6 PPM into an ``(H, W, 3)`` uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise FormatError(f"{path}: not an 8-bit P6 image")
    W, H = int(tokens[1]), int(tokens[2])
    pixels = data[pos + 1:]
    if len(pixels) != 3 * W * H:
        raise FormatError(f"{path}: pixel data has {len(pixels)} bytes, expected {3 * W * H}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(H, W, 3).copy()


def grid_from_rgb(rgb, colours):
    lookup = {tuple(c): i for i, c in enumerate(np.asarray(colours).tolist())}
    H, W, _ = rgb.shape
    flat = [lookup[tuple(px)] for px in rgb.reshape(-1, 3).tolist()]
    return np.array(flat, dtype=np.int64).reshape(H, W)


# ---------------------------------------------------------------------------
# softmax classifier on fixed features
# ---------------------------------------------------------------------------


@dataclass
class SoftmaxClassifier:
    W: np.ndarray
    b: np.ndarray
    mean: np.ndarray
    scale: np.ndarray

    def predict(self, features):
        """``features`` is ``(F, m)``; returns 0-based class ids."""
        Xs = (features - self.mean[:, None]) / self.scale[:, None]
        return np.argmax(self.W @ Xs + self.b[:, None], axis=0)


def train_softmax(features, targets, classes, lr=0.5, iters=500, l2=1e-4):
    """Full-batch gradient descent on the mean cross-entropy.

    Features are standardised with the training statistics; weights start
    at zero so the result is deterministic.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.int64)
    mean = X.mean(axis=1)
    scale = X.std(axis=1)
    scale[scale == 0] = 1.0
    Xs = (X - mean[:, None]) / scale[:, None]
    m = X.shape[1]
    W = np.zeros((classes, X.shape[0]))
    b = np.zeros(classes)
    onehot = np.zeros((classes, m))
    onehot[y, np.arange(m)] = 1.0
    for _ in range(iters):
        P = softmax(W @ Xs + b[:, None], axis=0)
        G = (P - onehot) / m
        W -= lr * (G @ Xs.T + l2 * W)
        b -= lr * G.sum(axis=1)
    return SoftmaxClassifier(W, b, mean, scale)


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------


def _targets(scene, labeled):
    return scene.labels[labeled[:, 0], labeled[:, 1]].astype(np.int64) - 1


def run_slcrf(scene, labeled, unlabeled, hp):
    """Train the full model; returns ``(result, report, prediction)``."""
    data = optimizer.prepare_data(scene, labeled, hp)
    result = optimizer.run(data, hp)
    pred = optimizer.predict(result.network, result.weights, scene, hp)
    return result, evaluate_map(pred, scene.labels, unlabeled, scene.classes), pred


def ablation_recrf(scene, labeled, unlabeled, hp):
    """Reconstruction plus CRF only: no sparse coding and ``S = S2``.

    Returns ``(weights, report)``.
    """
    result, report, _ = run_slcrf(scene, labeled, unlabeled,
                                  hp.updated(lambda1=0.0, relation="spatial"))
    return result.weights, report


def ablation_sl(scene, labeled, unlabeled, hp):
    """Reconstruction plus sparse coding, no CRF; a softmax classifier is
    then fit on the frozen latent features of the labelled pixels."""
    hp = hp.updated(lambda2=0.0)
    data = optimizer.prepare_data(scene, labeled, hp)
    result = optimizer.run(data, hp)
    feats = lambda coords: optimizer.encode_all(
        result.network, extract_patches(scene, coords, hp.patch).astype(hp.dtype))
    clf = train_softmax(feats(labeled), _targets(scene, labeled), scene.classes)
    H, W = scene.labels.shape
    allc = np.argwhere(np.ones((H, W), dtype=bool))
    pred = (clf.predict(feats(allc)) + 1).reshape(H, W)
    return evaluate_map(pred, scene.labels, unlabeled, scene.classes)


def jacobi_eigh(A, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Pivots are visited in row-major ``(p, q)`` order every sweep, so the
    result is reproducible.  Returns eigenvalues in descending order and
    unit eigenvectors as columns, each signed so its largest-magnitude
    entry is positive.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("jacobi_eigh expects a square matrix")
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(n)])
    signs[signs == 0] = 1.0
    return w, V * signs


@dataclass
class PCA:
    mean: np.ndarray
    components: np.ndarray  # (d, K), orthonormal columns
    variances: np.ndarray

    def transform(self, spectra):
        return (np.asarray(spectra, dtype=np.float64) - self.mean) @ self.components

    def inverse(self, scores):
        return scores @ self.components.T + self.mean


def fit_pca(spectra, components):
    """PCA of ``(N, d)`` spectra keeping ``components`` directions."""
    X = np.asarray(spectra, dtype=np.float64)
    d = X.shape[1]
    if not 1 <= components <= d:
        raise ValueError(f"components must lie in 1..{d}, got {components}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(X.shape[0] - 1, 1)
    w, V = jacobi_eigh(cov)
    return PCA(mean, V[:, :components], w[:components])


def baseline_pca_sc(scene, labeled, unlabeled, hp, components=None):
    """PCA on spectra, flattened patches of the scores, softmax classifier."""
    K = hp.latent if components is None else components
    H, W, d = scene.cube.shape
    pca = fit_pca(scene.cube.reshape(-1, d), K)
    scores = pca.transform(scene.cube.reshape(-1, d)).reshape(H, W, K)
    reduced = HsiScene(scores, scene.labels, scene.classes, scene.class_names)
    feats = lambda coords: extract_patches(reduced, coords, hp.patch).reshape(len(coords), -1).T
    clf = train_softmax(feats(labeled), _targets(scene, labeled), scene.classes)
    allc = np.argwhere(np.ones((H, W), dtype=bool))
    pred = (clf.predict(feats(allc)) + 1).reshape(H, W)
    return evaluate_map(pred, scene.labels, unlabeled, scene.classes)


def compare_methods(scene, labeled, unlabeled, hp):
    """Metrics of SLCRF, RE-CRF, SL-only and PCA-SC on the same split."""
    _, slcrf_rep, _ = run_slcrf(scene, labeled, unlabeled, hp)
    return {
        "SLCRF": slcrf_rep,
        "RE-CRF": ablation_recrf(scene, labeled, unlabeled, hp)[1],
        "SL-only": ablation_sl(scene, labeled, unlabeled, hp),
        "PCA-SC": baseline_pca_sc(scene, labeled, unlabeled, hp),
    }
