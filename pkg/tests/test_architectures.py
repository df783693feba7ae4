import numpy as np
import pytest

from aemor import architectures as A
from aemor.errors import ContractError
from aemor.linalg import make_rng, variance
from aemor.neural import Network, NetworkSpec
from aemor.training import TrainConfig
from gradcheck import fd_errors, nudge_from_zero

L1 = L2 = 1e-3


@pytest.fixture
def rng():
    return make_rng(123)


def small_ae(width=6, latent=2, seed=0):
    enc = NetworkSpec((width, 5, latent), ("gelu", "identity"))
    dec = NetworkSpec((latent, 5, width), ("silu", "identity"))
    return A.Autoencoder.init(enc, dec, seed)


def test_ae_loss_is_mean_over_all_entries_plus_penalty(rng):
    ae = small_ae()
    x = rng.standard_normal((4, 6))
    rec = ae.decoder(ae.encoder(x))
    penalty = sum(L1 * np.abs(w).sum() + L2 * (w * w).sum()
                  for net in (ae.encoder, ae.decoder) for w in net.params.weights)
    assert A.ae_loss(ae, x, L1, L2) == pytest.approx(np.mean((rec - x) ** 2) + penalty, rel=1e-14)


def test_ae_gradient(rng):
    ae = small_ae()
    nudge_from_zero([ae.encoder.params, ae.decoder.params])
    x = rng.standard_normal((4, 6))

    def obj(ps):
        return A.ae_loss_and_grad(A.Autoencoder(Network(ae.encoder.spec, ps[0]), Network(ae.decoder.spec, ps[1])),
                                  x, L1, L2)

    assert fd_errors(obj, [ae.encoder.params.copy(), ae.decoder.params.copy()]) < 1e-6


def test_ae_rejects_mismatched_nets():
    with pytest.raises(ContractError):
        A.Autoencoder.init(NetworkSpec.build((6, 2)), NetworkSpec.build((3, 6)), 0)


def test_regressor_frozen_encoder_untouched(rng):
    ae = small_ae()
    x = rng.standard_normal((8, 6))
    theta = rng.uniform(size=(8, 2))
    before = [a.copy() for a in ae.encoder.params.arrays()]
    targets = A.ae_encode(ae, x)
    reg, trace = A.train_regressor(theta, targets, NetworkSpec.build((2, 6, 2)), TrainConfig(epochs=50))
    assert all(np.array_equal(a, b) for a, b in zip(before, ae.encoder.params.arrays()))
    assert A.regressor_loss(reg, ae.encoder, theta, x, 1e-7, 1e-7) == pytest.approx(
        A.regressor_loss_and_grad(reg, theta, targets, 1e-7, 1e-7)[0])


def test_regressor_gradient_and_columns(rng):
    spec = NetworkSpec((1, 6, 3), ("gelu", "identity"))
    reg = A.LatentRegressor(Network.init(spec, rng), param_columns=(1,))
    nudge_from_zero([reg.net.params])
    theta = rng.uniform(size=(5, 2))
    z = rng.standard_normal((5, 3))
    np.testing.assert_array_equal(reg(theta), reg.net(theta[:, [1]]))

    def obj(ps):
        return A.regressor_loss_and_grad(A.LatentRegressor(Network(spec, ps[0]), (1,)), theta, z, L1, L2)

    assert fd_errors(obj, [reg.net.params.copy()]) < 1e-6


def test_e2e_is_decoder_of_regressor(rng):
    ae = small_ae()
    reg = A.LatentRegressor(Network.init(NetworkSpec.build((2, 4, 2)), rng))
    theta = rng.uniform(size=(3, 2))
    out = A.e2e_predict(reg, ae.decoder, theta)
    assert np.array_equal(out, ae.decoder(reg(theta)))
    assert np.array_equal(out, A.e2e_predict(reg, ae.decoder, theta.copy()))


def force_model(rng, width=6, n_force=3, latent=2):
    specs = (NetworkSpec((width, 5, latent), ("gelu", "identity")),
             NetworkSpec((n_force, 4, latent), ("gelu", "identity")),
             NetworkSpec((latent, 5, width), ("silu", "identity")),
             NetworkSpec((latent, 4, n_force), ("silu", "identity")))
    return A.ForceAugmentedModel.init(*specs, seed=int(rng.integers(1000))), specs


def test_shared_latent_is_sum_of_encodings(rng):
    m, _ = force_model(rng)
    phi, f = rng.standard_normal((4, 6)), rng.standard_normal((4, 3))
    assert np.array_equal(A.fa_shared_latent(m, phi, f), m.phi_encoder(phi) + m.f_encoder(f))


def test_force_augmented_loss_normalization(rng):
    m, _ = force_model(rng)
    m.var_phi, m.var_f = 2.0, 0.5
    phi, f = rng.standard_normal((4, 6)), rng.standard_normal((4, 3))
    z = A.fa_shared_latent(m, phi, f)
    expected = np.mean((m.phi_decoder(z) - phi) ** 2) / 2.0 + np.mean((m.f_decoder(z) - f) ** 2) / 0.5
    assert A.fa_loss(m, phi, f) == pytest.approx(expected, rel=1e-14)


def test_force_augmented_gradient(rng):
    m, _ = force_model(rng)
    m.var_phi, m.var_f = 1.7, 0.3
    nudge_from_zero([n.params for n in m.nets()])
    phi, f = rng.standard_normal((4, 6)), rng.standard_normal((4, 3))
    obj = lambda ps: A.fa_loss_and_grad(m.with_params(ps), phi, f, L1, L2)
    assert fd_errors(obj, [n.params.copy() for n in m.nets()]) < 1e-6


def test_force_augmented_variances_frozen_before_training(rng):
    _, specs = force_model(rng)
    phi, f = rng.standard_normal((5, 6)) * 3, rng.standard_normal((5, 3)) * 0.1
    m, _ = A.train_force_augmented(phi, f, specs, TrainConfig(epochs=5))
    assert m.var_phi == variance(phi) and m.var_f == variance(f)


def multi_field(rng, widths=(5, 3), latents=(2, 1)):
    encs = [NetworkSpec((w, 4, k), ("gelu", "identity")) for w, k in zip(widths, latents)]
    dec = NetworkSpec((sum(latents), 6, sum(widths)), ("silu", "identity"))
    return A.MultiFieldModel.init(encs, dec, int(rng.integers(1000)), ("u", "T"))


def test_multifield_partition_and_order(rng):
    m = multi_field(rng)
    xs = [rng.standard_normal((3, 5)), rng.standard_normal((3, 3))]
    z = A.mf_encode(m, xs)
    np.testing.assert_array_equal(z, np.hstack([m.encoders[0](xs[0]), m.encoders[1](xs[1])]))
    parts = A.mf_forward(m, xs)
    assert [p.shape[1] for p in parts] == [5, 3]
    np.testing.assert_array_equal(np.hstack(parts), m.decoder(z))


def test_multifield_loss_and_gradient(rng):
    m = multi_field(rng)
    m.variances = (0.7, 2.5)
    xs = [rng.standard_normal((3, 5)), rng.standard_normal((3, 3))]
    parts = A.mf_forward(m, xs)
    expected = np.mean((parts[0] - xs[0]) ** 2) / 0.7 + np.mean((parts[1] - xs[1]) ** 2) / 2.5
    assert A.mf_loss(m, xs) == pytest.approx(expected, rel=1e-14)
    nudge_from_zero([n.params for n in m.nets()])
    obj = lambda ps: A.mf_loss_and_grad(m.with_params(ps), xs, L1, L2)
    assert fd_errors(obj, [n.params.copy() for n in m.nets()]) < 1e-6


def test_multifield_e2e_split(rng):
    m = multi_field(rng)
    regs = [A.LatentRegressor(Network.init(NetworkSpec.build((3, 4, k)), rng)) for k in (2, 1)]
    theta = rng.uniform(size=(2, 3))
    u, t = A.mf_e2e_predict(regs, m.decoder, theta, [5, 3])
    full = m.decoder(np.hstack([regs[0](theta), regs[1](theta)]))
    np.testing.assert_array_equal(np.hstack([u, t]), full)


def test_staggered_loss_and_gradient(rng):
    spec = NetworkSpec((2, 4, 4, 3), ("identity", "relu", "identity"))
    t = A.StaggeredForceNet(Network.init(spec, rng))
    for b in t.net.params.biases:
        b[:] = 0.05
    nudge_from_zero([t.net.params])
    z, f = rng.standard_normal((5, 2)), rng.standard_normal((5, 3))
    loss, _ = A.staggered_loss_and_grad(t, z, f)
    assert loss == pytest.approx(np.mean((t.net(z) - f) ** 2))
    obj = lambda ps: A.staggered_loss_and_grad(A.StaggeredForceNet(Network(spec, ps[0])), z, f, L1, L2)
    assert fd_errors(obj, [t.net.params.copy()]) < 1e-6


def test_staggered_predict_uses_regressor_latent(rng):
    spec = NetworkSpec.build((2, 4, 3), "relu")
    t = A.StaggeredForceNet(Network.init(spec, rng))
    reg = A.LatentRegressor(Network.init(NetworkSpec.build((2, 3, 2)), rng))
    theta = rng.uniform(size=(2, 2))
    np.testing.assert_array_equal(A.staggered_force_predict(t, reg, theta), t.net(reg(theta)))


def test_compose_deformed_configuration():
    ref = np.array([[0.0, 1.0], [2.0, 3.0]])
    np.testing.assert_array_equal(A.compose_deformed_configuration(ref, np.zeros_like(ref)), ref)
    u = np.array([[0.5, -1.0], [1.0, 1.0]])
    loop = np.array([[ref[i, j] + u[i, j] for j in range(2)] for i in range(2)])
    np.testing.assert_array_equal(A.compose_deformed_configuration(ref, u), loop)
    with pytest.raises(ContractError):
        A.compose_deformed_configuration(ref, np.zeros(2))
