import json

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from slcrf.data import (HsiScene, SplitSpec, class_count, extract_patch, extract_patches,
                        load_scene, normalize, save_scene, select_working_set, split_labels,
                        synthesize)
from slcrf.errors import ClassIdError, DtypeError, FormatError, LengthMismatchError

INDIAN_PINES_TOTALS = [46, 1428, 830, 237, 483, 730, 28, 478, 20, 972, 2455, 593, 205, 1265, 386, 93]


def toy(h=4, w=5, d=3, classes=2, seed=0):
    rng = np.random.default_rng(seed)
    cube = rng.uniform(0, 100, (h, w, d)).astype(np.float32)
    labels = rng.integers(0, classes + 1, (h, w)).astype(np.uint16)
    return HsiScene(cube, labels, classes, ["a", "b"][:classes])


def test_scene_round_trip(tmp_path):
    s = toy()
    save_scene(s, tmp_path / "s.json")
    back = load_scene(tmp_path / "s.json")
    npt.assert_array_equal(back.cube, s.cube)
    npt.assert_array_equal(back.labels, s.labels)
    assert back.classes == 2 and back.class_names == ["a", "b"]
    # payload is band-sequential
    raw = np.frombuffer((tmp_path / "s.f32").read_bytes(), "<f4")
    npt.assert_array_equal(raw[:5], s.cube[0, :, 0])


def test_explicit_label_file(tmp_path):
    s = toy()
    save_scene(s, tmp_path / "s.json")
    other = np.ones_like(s.labels)
    (tmp_path / "gt.u16").write_bytes(other.astype("<u2").tobytes())
    npt.assert_array_equal(load_scene(tmp_path / "s.json", tmp_path / "gt.u16").labels, 1)


def test_scene_format_errors(tmp_path):
    s = toy()
    save_scene(s, tmp_path / "s.json")
    header = json.loads((tmp_path / "s.json").read_text())
    (tmp_path / "s.f32").write_bytes((tmp_path / "s.f32").read_bytes()[:-4])
    with pytest.raises(LengthMismatchError):
        load_scene(tmp_path / "s.json")
    (tmp_path / "d.json").write_text(json.dumps({**header, "dtype": "f64le"}))
    with pytest.raises(DtypeError):
        load_scene(tmp_path / "d.json")
    (tmp_path / "m.json").write_text(json.dumps({"height": 1}))
    with pytest.raises(FormatError):
        load_scene(tmp_path / "m.json")
    (tmp_path / "j.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_scene(tmp_path / "j.json")
    with pytest.raises(ClassIdError):
        HsiScene(np.zeros((2, 2, 1)), np.full((2, 2), 3, np.uint16), 2)


@given(st.integers(0, 1000))
def test_normalize_is_idempotent_and_bounded(seed):
    s = normalize(toy(seed=seed))
    assert s.cube.min() >= 0 and s.cube.max() <= 1
    npt.assert_allclose(normalize(s).cube, s.cube, atol=1e-6)


def test_constant_band_normalises_to_zero():
    s = toy()
    s.cube[..., 1] = 7.0
    n = normalize(s)
    npt.assert_array_equal(n.cube[..., 1], 0.0)
    assert n.scaling[0][1] == n.scaling[1][1] == 7.0


def test_mirror_padding_on_a_toy_grid():
    cube = np.arange(16, dtype=np.float32).reshape(4, 4, 1)
    s = HsiScene(cube, np.zeros((4, 4), np.uint16), 1)
    p = extract_patch(s, 0, 0, 5)[..., 0]
    npt.assert_array_equal(p[2:, 2:], cube[:3, :3, 0])
    npt.assert_array_equal(p[0], [10, 9, 8, 9, 10])
    npt.assert_array_equal(p[:, 0], [10, 6, 2, 6, 10])
    batch = extract_patches(s, [(0, 0), (3, 3)], 5)
    npt.assert_array_equal(batch[0, ..., 0], p)
    with pytest.raises(ValueError):
        extract_patch(s, 0, 0, 4)


def test_indian_pines_five_percent_total():
    assert sum(class_count(t, 0.05) for t in INDIAN_PINES_TOTALS) == 512
    assert class_count(3, 0.05) == 1


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.floats(0.05, 0.9))
def test_split_is_stratified_and_disjoint(seed, frac):
    s = synthesize(classes=3, height=12, width=12, bands=4, seed=seed % 50)
    lab, unl = split_labels(s, SplitSpec(frac, seed))
    assert len(lab) + len(unl) == 144
    assert not ({tuple(c) for c in lab.tolist()} & {tuple(c) for c in unl.tolist()})
    for c in range(1, 4):
        total = int((s.labels == c).sum())
        got = int((s.labels[lab[:, 0], lab[:, 1]] == c).sum())
        assert got == min(total, class_count(total, frac))


def test_split_is_seeded():
    s = synthesize(seed=1)
    a = split_labels(s, SplitSpec(0.05, 3))
    b = split_labels(s, SplitSpec(0.05, 3))
    npt.assert_array_equal(a[0], b[0])
    assert not np.array_equal(a[0], split_labels(s, SplitSpec(0.05, 4))[0])
    with pytest.raises(ValueError):
        SplitSpec(0.0)


def test_working_set_keeps_labels_and_respects_cap():
    s = synthesize(seed=0)
    lab, _ = split_labels(s, SplitSpec(0.05, 0))
    ws = select_working_set(s, lab, cap=100, seed=0)
    assert len(ws) == 100
    assert {tuple(c) for c in lab.tolist()} <= {tuple(c) for c in ws.tolist()}
    assert len(select_working_set(s, lab, cap=10_000)) == 24 * 24
    with pytest.raises(ValueError):
        select_working_set(s, lab, cap=3)


def test_synthetic_scene_properties():
    s = synthesize(classes=4, height=20, width=16, bands=10, noise=0.0, seed=2)
    assert s.cube.shape == (20, 16, 10) and s.cube.dtype == np.float32
    counts = np.bincount(s.labels.ravel(), minlength=5)
    assert counts[0] == 0 and counts[1:].min() >= 0.5 * 320 / 4
    # noise-free pixels are their class signature, so nearest centroid is exact
    flat, lab = s.cube.reshape(-1, 10), s.labels.ravel()
    cents = np.stack([flat[lab == c].mean(axis=0) for c in range(1, 5)])
    near = np.argmin(((flat[:, None] - cents[None]) ** 2).sum(-1), axis=1) + 1
    npt.assert_array_equal(near, lab)
    npt.assert_array_equal(synthesize(seed=5).cube, synthesize(seed=5).cube)
