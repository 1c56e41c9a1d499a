"""Hyperspectral scenes: file container, preprocessing, patches and splits.

On disk a scene is three files::

    scene.json   {"height", "width", "bands", "dtype": "f32le", "order": "BSQ",
                  "classes", "class_names"?, "payload", "labels"}
    scene.f32    band-sequential little-endian float32 radiance
    scene.u16    row-major little-endian uint16 label grid (0 = unlabelled)

In memory the cube is ``(height, width, bands)`` so each pixel's spectrum
is contiguous.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ClassIdError, DtypeError, FormatError, LengthMismatchError

log = logging.getLogger(__name__)


@dataclass
class HsiScene:
    cube: np.ndarray
    labels: np.ndarray
    classes: int
    class_names: list = field(default_factory=list)
    scaling: tuple = None

    def __post_init__(self):
        if self.cube.ndim != 3:
            raise FormatError("cube must be (height, width, bands)")
        if self.labels.shape != self.cube.shape[:2]:
            raise FormatError(f"labels {self.labels.shape} vs cube {self.cube.shape[:2]}")
        if self.labels.size and int(self.labels.max()) > self.classes:
            raise ClassIdError(f"class id {int(self.labels.max())} exceeds declared {self.classes}")

    @property
    def height(self):
        return self.cube.shape[0]

    @property
    def width(self):
        return self.cube.shape[1]

    @property
    def bands(self):
        return self.cube.shape[2]


# --------------------------------------------------------------------------
# container I/O
# --------------------------------------------------------------------------

def save_scene(scene, header_path):
    """Write ``scene`` next to ``header_path`` (payload ``.f32``, labels ``.u16``)."""
    stem, _ = os.path.splitext(header_path)
    payload, labels = stem + ".f32", stem + ".u16"
    header = {
        "height": scene.height, "width": scene.width, "bands": scene.bands,
        "dtype": "f32le", "order": "BSQ", "classes": int(scene.classes),
        "class_names": list(scene.class_names),
        "payload": os.path.basename(payload), "labels": os.path.basename(labels),
    }
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=1)
    bsq = np.transpose(scene.cube, (2, 0, 1))
    with open(payload, "wb") as fh:
        fh.write(np.ascontiguousarray(bsq, dtype="<f4").tobytes())
    with open(labels, "wb") as fh:
        fh.write(np.ascontiguousarray(scene.labels, dtype="<u2").tobytes())
    return header_path


def load_scene(cube_path, labels_path=None):
    """Read a scene from its JSON header (and optional explicit label file)."""
    with open(cube_path) as fh:
        try:
            header = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{cube_path}: header is not valid JSON") from exc
    try:
        H, W, d = int(header["height"]), int(header["width"]), int(header["bands"])
    except KeyError as exc:
        raise FormatError(f"{cube_path}: header lacks {exc}") from None
    if header.get("dtype") != "f32le":
        raise DtypeError(f"{cube_path}: unsupported dtype {header.get('dtype')!r}")
    if header.get("order", "BSQ") != "BSQ":
        raise FormatError(f"{cube_path}: unsupported interleave {header.get('order')!r}")
    base = os.path.dirname(os.path.abspath(cube_path))
    stem = os.path.splitext(cube_path)[0]
    payload = os.path.join(base, header["payload"]) if "payload" in header else stem + ".f32"
    with open(payload, "rb") as fh:
        raw = fh.read()
    if len(raw) != 4 * H * W * d:
        raise LengthMismatchError(f"{payload}: {len(raw)} bytes, header implies {4 * H * W * d}")
    cube = np.frombuffer(raw, dtype="<f4").reshape(d, H, W).transpose(1, 2, 0).astype(np.float32)
    if labels_path is None:
        labels_path = os.path.join(base, header["labels"]) if "labels" in header else stem + ".u16"
    with open(labels_path, "rb") as fh:
        lraw = fh.read()
    if len(lraw) != 2 * H * W:
        raise LengthMismatchError(f"{labels_path}: {len(lraw)} bytes, header implies {2 * H * W}")
    labels = np.frombuffer(lraw, dtype="<u2").reshape(H, W).astype(np.uint16)
    names = header.get("class_names") or []
    classes = int(header.get("classes", len(names) or int(labels.max())))
    return HsiScene(cube=cube, labels=labels, classes=classes, class_names=list(names))


# --------------------------------------------------------------------------
# preprocessing
# --------------------------------------------------------------------------

def normalize(scene):
    """Per-band min-max scaling to ``[0, 1]``; constant bands become 0.

    The per-band ``(min, max)`` pairs are kept in ``scaling``.
    """
    cube = scene.cube
    lo = cube.min(axis=(0, 1))
    hi = cube.max(axis=(0, 1))
    span = hi - lo
    safe = np.where(span > 0, span, 1)
    out = np.where(span > 0, (cube - lo) / safe, 0).astype(cube.dtype)
    return replace(scene, cube=out, scaling=(lo, hi))


def _padded(scene, b):
    if b % 2 == 0 or b < 1:
        raise ValueError(f"patch size must be odd, got {b}")
    r = b // 2
    if r >= min(scene.height, scene.width):
        raise ValueError("patch radius exceeds the image")
    # reflect mode mirrors about the border pixel without repeating it
    return np.pad(scene.cube, ((r, r), (r, r), (0, 0)), mode="reflect"), r


def extract_patch(scene, row, col, b=5):
    """``b x b x d`` window centred on ``(row, col)``, mirror-padded at borders."""
    padded, r = _padded(scene, b)
    return padded[row:row + b, col:col + b].copy()


def extract_patches(scene, coords, b=5):
    """Stack of patches for an ``(n, 2)`` array of ``(row, col)`` pairs."""
    padded, r = _padded(scene, b)
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    out = np.empty((len(coords), b, b, scene.bands), dtype=scene.cube.dtype)
    for i, (y, x) in enumerate(coords):
        out[i] = padded[y:y + b, x:x + b]
    return out


# --------------------------------------------------------------------------
# splits and working sets
# --------------------------------------------------------------------------

@dataclass
class SplitSpec:
    labeled_fraction: float = 0.05
    seed: int = 0
    per_class: bool = True

    def __post_init__(self):
        if not 0 < self.labeled_fraction <= 1:
            raise ValueError("labeled_fraction must lie in (0, 1]")


def class_count(total, fraction):
    """Labelled samples for a class: ``round(fraction * total)``, at least 1.

    Python's round-half-to-even is used; it reproduces the standard Indian
    Pines 5% total of 512.
    """
    return max(1, int(round(fraction * total)))


def split_labels(scene, spec):
    """Stratified labelled/unlabelled split of the ground-truth pixels.

    Returns two ``(m, 2)`` coordinate arrays.
    """
    rng = np.random.default_rng(spec.seed)
    labeled, unlabeled = [], []
    if spec.per_class:
        for c in range(1, scene.classes + 1):
            coords = np.argwhere(scene.labels == c)
            if len(coords) == 0:
                log.warning("class %d has no ground-truth pixels; skipped", c)
                continue
            m = min(len(coords), class_count(len(coords), spec.labeled_fraction))
            pick = np.zeros(len(coords), dtype=bool)
            pick[rng.choice(len(coords), size=m, replace=False)] = True
            labeled.append(coords[pick])
            unlabeled.append(coords[~pick])
    else:
        coords = np.argwhere(scene.labels > 0)
        m = class_count(len(coords), spec.labeled_fraction)
        pick = np.zeros(len(coords), dtype=bool)
        pick[rng.choice(len(coords), size=m, replace=False)] = True
        labeled.append(coords[pick])
        unlabeled.append(coords[~pick])
    empty = np.zeros((0, 2), dtype=np.int64)
    lab = np.concatenate(labeled) if labeled else empty
    unl = np.concatenate(unlabeled) if unlabeled else empty
    return _sorted(lab), _sorted(unl)


def _sorted(coords):
    if len(coords) == 0:
        return coords.astype(np.int64)
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    return coords[order].astype(np.int64)


def select_working_set(scene, labeled, cap=2048, seed=0):
    """All labelled pixels plus uniformly sampled others, at most ``cap``."""
    H, W = scene.labels.shape
    labeled = np.asarray(labeled, dtype=np.int64).reshape(-1, 2)
    if len(labeled) > cap:
        raise ValueError(f"{len(labeled)} labelled pixels exceed the working-set cap {cap}")
    taken = np.zeros((H, W), dtype=bool)
    taken[labeled[:, 0], labeled[:, 1]] = True
    rest = np.argwhere(~taken)
    room = min(cap - len(labeled), len(rest))
    rng = np.random.default_rng(seed)
    extra = rest[np.sort(rng.choice(len(rest), size=room, replace=False))] if room else rest[:0]
    return _sorted(np.concatenate([labeled, extra]))


# --------------------------------------------------------------------------
# synthetic scenes
# --------------------------------------------------------------------------

def _signatures(classes, bands, rng, min_sep=0.15):
    z = np.linspace(0.0, 1.0, bands)
    for _ in range(1000):
        sigs = np.full((classes, bands), 0.5)
        for c in range(classes):
            for f in range(1, 4):
                a = rng.normal(scale=0.25 / f)
                phase = rng.uniform(0, 2 * np.pi)
                sigs[c] += a * np.cos(np.pi * f * z + phase)
        sigs = np.clip(sigs, 0.05, 0.95)
        d = np.sqrt(((sigs[:, None] - sigs[None]) ** 2).mean(axis=-1))
        d[np.diag_indices(classes)] = np.inf
        if d.min() >= min_sep:
            return sigs
    raise RuntimeError("could not draw separated class signatures")


def synthesize(classes=3, height=24, width=24, bands=12, noise=0.05, seed=0):
    """Voronoi-partitioned scene with one smooth spectral signature per class.

    Every class owns one seeded site; sites are redrawn until each class
    covers at least half its fair share of pixels.  Gaussian noise of
    standard deviation ``noise`` is added to every voxel.
    """
    if classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(1000):
        sites = np.column_stack([rng.uniform(0, height, classes), rng.uniform(0, width, classes)])
        d2 = (yy[..., None] - sites[:, 0]) ** 2 + (xx[..., None] - sites[:, 1]) ** 2
        owner = np.argmin(d2, axis=-1)
        counts = np.bincount(owner.ravel(), minlength=classes)
        if counts.min() >= 0.5 * height * width / classes:
            break
    sigs = _signatures(classes, bands, rng)
    cube = sigs[owner] + noise * rng.standard_normal((height, width, bands))
    labels = (owner + 1).astype(np.uint16)
    return HsiScene(cube=cube.astype(np.float32), labels=labels, classes=classes,
                    class_names=[f"class{c}" for c in range(1, classes + 1)])
