import numpy as np
import numpy.testing as npt
import pytest

from slcrf.autoencoder import Network, architectures, load_checkpoint, save_checkpoint
from slcrf.autoencoder.network import reconstruction_loss
from slcrf.errors import FormatError, LengthMismatchError, ShapeError
from slcrf.gradcheck import check_theta


@pytest.mark.parametrize("name,bands,latent", [("indian_pines", 200, 144),
                                               ("paviau", 103, 216),
                                               ("houston", 48, 240)])
def test_reference_layouts_restore_the_input(name, bands, latent):
    arch = architectures.BUILDERS[name]()
    assert arch.latent_dim == latent
    assert arch.shapes[-1] == (1, 5, 5, bands)


def test_reference_layout_forward_shapes():
    net = Network.initialize(architectures.houston(), seed=0)
    x = np.random.default_rng(0).uniform(size=(2, 5, 5, 48))
    recon, cache = net.forward(x)
    assert recon.shape == x.shape
    assert cache["latent"].shape == (2, 240)


@pytest.mark.parametrize("bands", [8, 9, 12, 13])
def test_desk_layout_round_trips_any_band_count(bands):
    net = Network.initialize(architectures.desk(bands=bands), seed=1)
    x = np.zeros((3, 5, 5, bands))
    recon, _ = net.forward(x)
    assert recon.shape == x.shape
    assert net.encode(x)[0].shape == (3, 8)


def test_wrong_patch_shape_is_rejected():
    net = Network.initialize(architectures.tiny(), seed=0)
    with pytest.raises(ShapeError):
        net.forward(np.zeros((2, 5, 5, 9)))


@pytest.mark.parametrize("variant", [{}, {"batch_norm": True}, {"pooled": True}])
def test_theta_gradient_matches_finite_differences(variant):
    errs = check_theta(7, **variant)
    assert max(errs.values()) < 1e-5, errs


def test_batch_normalised_layers_store_no_bias():
    net = Network.initialize(architectures.tiny(batch_norm=True), seed=0)
    assert "b" not in net.params[0] and "gamma" in net.params[0]
    assert "b" in net.params[-1]


def test_zero_learning_rate_leaves_weights_unchanged():
    net = Network.initialize(architectures.tiny(), seed=0)
    before = net.copy()
    x = np.random.default_rng(0).uniform(size=(4, 5, 5, 8))
    recon, cache = net.forward(x)
    grads = net.backward(cache, d_output=recon - x)
    net.sgd_update(grads, delta1=0.0)
    for a, b in zip(net.params, before.params):
        for k in a:
            npt.assert_array_equal(a[k], b[k])


def test_sgd_reduces_reconstruction_loss():
    net = Network.initialize(architectures.tiny(), seed=3)
    x = np.random.default_rng(3).uniform(size=(6, 5, 5, 8))
    losses = []
    for _ in range(20):
        recon, cache = net.forward(x)
        losses.append(reconstruction_loss(x, recon))
        grads = net.backward(cache, d_output=2 * (recon - x) / x.size)
        net.sgd_update(grads, delta1=0.05)
    assert losses[-1] < losses[0]


def test_initialization_is_deterministic():
    a = Network.initialize(architectures.desk(), seed=5)
    b = Network.initialize(architectures.desk(), seed=5)
    for (na, xa), (nb, xb) in zip(a.named_arrays(), b.named_arrays()):
        assert na == nb
        npt.assert_array_equal(xa, xb)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_checkpoint_round_trip(tmp_path, dtype):
    net = Network.initialize(architectures.tiny(batch_norm=True), seed=2, dtype=dtype)
    path = tmp_path / "m.slcrf"
    extras = {"crf.W_hl": np.arange(6.0).reshape(2, 3), "split": np.arange(4, dtype=np.int64)}
    save_checkpoint(path, net, extras)
    back, ex = load_checkpoint(path)
    assert back.dtype is net.dtype
    assert back.arch.to_dict() == net.arch.to_dict()
    for (na, xa), (nb, xb) in zip(net.named_arrays(), back.named_arrays()):
        assert na == nb and xa.dtype == xb.dtype
        npt.assert_array_equal(xa, xb)
    npt.assert_array_equal(ex["split"], extras["split"])
    x = np.random.default_rng(0).uniform(size=(2, 5, 5, 8))
    npt.assert_array_equal(net.forward(x)[0], back.forward(x)[0])
    save_checkpoint(tmp_path / "again.slcrf", back, ex)
    assert (tmp_path / "again.slcrf").read_bytes() == path.read_bytes()


def test_checkpoint_corruption_is_detected(tmp_path):
    net = Network.initialize(architectures.tiny(), seed=0)
    path = tmp_path / "m.slcrf"
    save_checkpoint(path, net)
    raw = path.read_bytes()
    (tmp_path / "short").write_bytes(raw[:-4])
    with pytest.raises(LengthMismatchError):
        load_checkpoint(tmp_path / "short")
    (tmp_path / "long").write_bytes(raw + b"\0")
    with pytest.raises(LengthMismatchError):
        load_checkpoint(tmp_path / "long")
    (tmp_path / "magic").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "magic")
