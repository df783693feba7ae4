"""Autoencoder-based surrogate architectures and their losses.

All losses are returned together with their gradients so that every model can
be trained by :func:`aemor.training.train`. Snapshot inputs are ``(n_S, width)``
arrays, one snapshot per row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .linalg import make_rng, variance
from .neural import MLPParams, Network, NetworkSpec, backward, forward
from .training import LossTrace, TrainConfig, elastic_net, train


def _rows(x, width: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ContractError(f"{what}: expected width {width}, got shape {x.shape}")
    if x.shape[0] == 0:
        raise ContractError(f"{what}: no snapshots")
    return x


def _penalty(params: list[MLPParams], l1: float, l2: float):
    if l1 == 0 and l2 == 0:
        return 0.0, None
    return elastic_net(params, l1, l2)


def _add(grads: list[MLPParams], reg) -> list[MLPParams]:
    return grads if reg is None else [g + r for g, r in zip(grads, reg)]


# -- plain autoencoder --------------------------------------------------------

@dataclass
class Autoencoder:
    encoder: Network
    decoder: Network

    def __post_init__(self):
        if self.encoder.spec.n_out != self.decoder.spec.n_in:
            raise ContractError(
                f"encoder output {self.encoder.spec.n_out} != decoder input {self.decoder.spec.n_in}")
        if self.encoder.spec.n_in != self.decoder.spec.n_out:
            raise ContractError(
                f"encoder input {self.encoder.spec.n_in} != decoder output {self.decoder.spec.n_out}")

    @property
    def latent_dim(self) -> int:
        return self.encoder.spec.n_out

    @property
    def width(self) -> int:
        return self.encoder.spec.n_in

    @classmethod
    def init(cls, encoder: NetworkSpec, decoder: NetworkSpec, seed: int) -> "Autoencoder":
        rng = make_rng(seed)
        return cls(Network.init(encoder, rng), Network.init(decoder, rng))


def ae_encode(ae: Autoencoder, phi) -> np.ndarray:
    return ae.encoder(phi)


def ae_reconstruct(ae: Autoencoder, phi) -> np.ndarray:
    return ae.decoder(ae.encoder(phi))


def ae_loss_and_grad(ae: Autoencoder, snapshots, l1: float = 0.0, l2: float = 0.0):
    """Mean squared reconstruction error over all snapshot entries plus elastic net."""
    x = _rows(snapshots, ae.width, "ae_loss")
    enc, dec = ae.encoder, ae.decoder
    z, tape_e = forward(enc.spec, enc.params, x)
    y, tape_d = forward(dec.spec, dec.params, z)
    diff = y - x
    loss = float(np.mean(diff * diff))
    g_dec, dz = backward(dec.spec, dec.params, tape_d, 2.0 * diff / diff.size)
    g_enc, _ = backward(enc.spec, enc.params, tape_e, dz)
    reg, reg_grads = _penalty([enc.params, dec.params], l1, l2)
    return loss + reg, _add([g_enc, g_dec], reg_grads)


def ae_loss(ae: Autoencoder, snapshots, l1: float = 0.0, l2: float = 0.0) -> float:
    return ae_loss_and_grad(ae, snapshots, l1, l2)[0]


def train_autoencoder(snapshots, encoder: NetworkSpec, decoder: NetworkSpec,
                      cfg: TrainConfig, init: Autoencoder | None = None) -> tuple[Autoencoder, LossTrace]:
    x = np.asarray(snapshots, dtype=np.float64)
    ae = init or Autoencoder.init(encoder, decoder, cfg.seed)

    def objective(ps):
        model = Autoencoder(Network(ae.encoder.spec, ps[0]), Network(ae.decoder.spec, ps[1]))
        return ae_loss_and_grad(model, x, cfg.l1_penalty, cfg.l2_penalty)

    (pe, pd), trace = train(objective, [ae.encoder.params, ae.decoder.params], cfg,
                            names=["encoder", "decoder"], label="autoencoder")
    return Autoencoder(Network(ae.encoder.spec, pe), Network(ae.decoder.spec, pd)), trace


# -- parameter-to-latent regression ------------------------------------------

@dataclass
class LatentRegressor:
    net: Network
    # columns of theta consumed by this regressor (None = all)
    param_columns: tuple[int, ...] | None = None

    @property
    def param_dim(self) -> int:
        return self.net.spec.n_in

    @property
    def latent_dim(self) -> int:
        return self.net.spec.n_out

    def select(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if self.param_columns is None:
            return theta
        return theta[..., list(self.param_columns)]

    def __call__(self, theta) -> np.ndarray:
        return self.net(self.select(theta))


def regressor_loss_and_grad(p: LatentRegressor, theta, targets, l1: float = 0.0, l2: float = 0.0):
    """Mean squared latent error over ``n_S * n_K`` entries plus elastic net.

    ``targets`` are the latent codes of the frozen encoder, computed once by
    the caller.
    """
    x = _rows(p.select(theta), p.param_dim, "regressor input")
    z = _rows(targets, p.latent_dim, "regressor targets")
    if z.shape[0] != x.shape[0]:
        raise ContractError(f"{x.shape[0]} parameter rows but {z.shape[0]} latent targets")
    zhat, tape = forward(p.net.spec, p.net.params, x)
    diff = zhat - z
    loss = float(np.mean(diff * diff))
    g, _ = backward(p.net.spec, p.net.params, tape, 2.0 * diff / diff.size)
    reg, reg_grads = _penalty([p.net.params], l1, l2)
    return loss + reg, _add([g], reg_grads)


def regressor_loss(p: LatentRegressor, frozen_encoder: Network, theta, snapshots,
                   l1: float = 0.0, l2: float = 0.0) -> float:
    targets = frozen_encoder(np.asarray(snapshots, dtype=np.float64))
    if targets.ndim == 1:
        targets = targets[None, :]
    if targets.shape[1] != p.latent_dim:
        raise ContractError(f"encoder latent {targets.shape[1]} != regressor output {p.latent_dim}")
    return regressor_loss_and_grad(p, theta, targets, l1, l2)[0]


def train_regressor(theta, targets, spec: NetworkSpec, cfg: TrainConfig,
                    param_columns: tuple[int, ...] | None = None) -> tuple[LatentRegressor, LossTrace]:
    """Fit a regressor to fixed latent targets; no encoder is touched here."""
    targets = np.array(targets, dtype=np.float64, copy=True)
    reg = LatentRegressor(Network.init(spec, make_rng(cfg.seed)), param_columns)

    def objective(ps):
        return regressor_loss_and_grad(LatentRegressor(Network(spec, ps[0]), param_columns),
                                       theta, targets, cfg.l1_penalty, cfg.l2_penalty)

    (p,), trace = train(objective, [reg.net.params], cfg, names=["regressor"], label="regressor")
    return LatentRegressor(Network(spec, p), param_columns), trace


def e2e_predict(p: LatentRegressor, decoder: Network, theta) -> np.ndarray:
    if p.latent_dim != decoder.spec.n_in:
        raise ContractError(f"regressor latent {p.latent_dim} != decoder input {decoder.spec.n_in}")
    sel = p.select(theta)
    if sel.shape[-1] != p.param_dim:
        raise ContractError(f"theta has {sel.shape[-1]} entries, regressor expects {p.param_dim}")
    return decoder(p(theta))


# -- force-augmented model ----------------------------------------------------

@dataclass
class ForceAugmentedModel:
    phi_encoder: Network
    f_encoder: Network
    phi_decoder: Network
    f_decoder: Network
    # frozen data variances of the two fields (set when training starts)
    var_phi: float = 1.0
    var_f: float = 1.0

    def __post_init__(self):
        k = self.phi_encoder.spec.n_out
        if self.f_encoder.spec.n_out != k or self.phi_decoder.spec.n_in != k or self.f_decoder.spec.n_in != k:
            raise ContractError("force-augmented encoders/decoders disagree on the latent dimension")
        if self.phi_encoder.spec.n_in != self.phi_decoder.spec.n_out:
            raise ContractError("field encoder input and field decoder output widths differ")
        if self.f_encoder.spec.n_in != self.f_decoder.spec.n_out:
            raise ContractError("force encoder input and force decoder output widths differ")

    @property
    def latent_dim(self) -> int:
        return self.phi_encoder.spec.n_out

    def nets(self) -> list[Network]:
        return [self.phi_encoder, self.f_encoder, self.phi_decoder, self.f_decoder]

    @classmethod
    def init(cls, phi_encoder, f_encoder, phi_decoder, f_decoder, seed: int) -> "ForceAugmentedModel":
        rng = make_rng(seed)
        return cls(*(Network.init(s, rng) for s in (phi_encoder, f_encoder, phi_decoder, f_decoder)))

    def with_params(self, ps: list[MLPParams]) -> "ForceAugmentedModel":
        nets = [Network(n.spec, p) for n, p in zip(self.nets(), ps)]
        return ForceAugmentedModel(*nets, var_phi=self.var_phi, var_f=self.var_f)


def fa_shared_latent(m: ForceAugmentedModel, phi, f) -> np.ndarray:
    """Shared latent: field encoding plus force encoding."""
    return m.phi_encoder(phi) + m.f_encoder(f)


def fa_loss_and_grad(m: ForceAugmentedModel, phi, f, l1: float = 0.0, l2: float = 0.0):
    """Sum of the variance-normalized field and force MSEs plus elastic net over all four nets.

    Uses the variances frozen on ``m``.
    """
    phi = _rows(phi, m.phi_encoder.spec.n_in, "fa_loss field")
    f = _rows(f, m.f_encoder.spec.n_in, "fa_loss force")
    if phi.shape[0] != f.shape[0]:
        raise ContractError(f"{phi.shape[0]} field snapshots but {f.shape[0]} force snapshots")
    ep, ef, dp, df = m.nets()
    zp, tp = forward(ep.spec, ep.params, phi)
    zf, tf = forward(ef.spec, ef.params, f)
    z = zp + zf
    phi_hat, tdp = forward(dp.spec, dp.params, z)
    f_hat, tdf = forward(df.spec, df.params, z)
    rp = phi_hat - phi
    rf = f_hat - f
    loss = float(np.mean(rp * rp)) / m.var_phi + float(np.mean(rf * rf)) / m.var_f
    g_dp, dz1 = backward(dp.spec, dp.params, tdp, 2.0 * rp / (rp.size * m.var_phi))
    g_df, dz2 = backward(df.spec, df.params, tdf, 2.0 * rf / (rf.size * m.var_f))
    dz = dz1 + dz2
    g_ep, _ = backward(ep.spec, ep.params, tp, dz)
    g_ef, _ = backward(ef.spec, ef.params, tf, dz)
    reg, reg_grads = _penalty([n.params for n in m.nets()], l1, l2)
    return loss + reg, _add([g_ep, g_ef, g_dp, g_df], reg_grads)


def fa_loss(m: ForceAugmentedModel, phi, f, l1: float = 0.0, l2: float = 0.0) -> float:
    return fa_loss_and_grad(m, phi, f, l1, l2)[0]


def train_force_augmented(phi, f, specs: tuple[NetworkSpec, NetworkSpec, NetworkSpec, NetworkSpec],
                          cfg: TrainConfig) -> tuple[ForceAugmentedModel, LossTrace]:
    """Train the joint field/force autoencoder; ``specs`` is (phi_enc, f_enc, phi_dec, f_dec)."""
    phi = np.asarray(phi, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    m = ForceAugmentedModel.init(*specs, seed=cfg.seed)
    m.var_phi = variance(phi)
    m.var_f = variance(f)

    def objective(ps):
        return fa_loss_and_grad(m.with_params(ps), phi, f, cfg.l1_penalty, cfg.l2_penalty)

    ps, trace = train(objective, [n.params for n in m.nets()], cfg,
                      names=["phi_encoder", "f_encoder", "phi_decoder", "f_decoder"], label="force-augmented")
    return m.with_params(ps), trace


def fa_predict(m: ForceAugmentedModel, p: LatentRegressor, theta) -> tuple[np.ndarray, np.ndarray]:
    """Field and force prediction from parameters through the shared latent."""
    z = p(theta)
    return m.phi_decoder(z), m.f_decoder(z)


# -- multi-field model --------------------------------------------------------

@dataclass
class MultiFieldModel:
    encoders: list[Network]
    decoder: Network
    field_names: tuple[str, ...] = ()
    variances: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.field_names:
            self.field_names = tuple(f"field{i}" for i in range(len(self.encoders)))
        if len(self.field_names) != len(self.encoders):
            raise ContractError("one field name per encoder required")
        if not self.variances:
            self.variances = (1.0,) * len(self.encoders)
        if self.decoder.spec.n_in != sum(self.latent_dims):
            raise ContractError(f"decoder input {self.decoder.spec.n_in} != summed latents {sum(self.latent_dims)}")
        if self.decoder.spec.n_out != sum(self.widths):
            raise ContractError(f"decoder output {self.decoder.spec.n_out} != summed field widths {sum(self.widths)}")

    @property
    def widths(self) -> list[int]:
        return [e.spec.n_in for e in self.encoders]

    @property
    def latent_dims(self) -> list[int]:
        return [e.spec.n_out for e in self.encoders]

    @property
    def slices(self) -> list[slice]:
        return _slices(self.widths)

    @property
    def latent_slices(self) -> list[slice]:
        return _slices(self.latent_dims)

    def nets(self) -> list[Network]:
        return [*self.encoders, self.decoder]

    @classmethod
    def init(cls, encoders: list[NetworkSpec], decoder: NetworkSpec, seed: int,
             field_names=()) -> "MultiFieldModel":
        rng = make_rng(seed)
        encs = [Network.init(s, rng) for s in encoders]
        return cls(encs, Network.init(decoder, rng), tuple(field_names))

    def with_params(self, ps: list[MLPParams]) -> "MultiFieldModel":
        encs = [Network(e.spec, p) for e, p in zip(self.encoders, ps[:-1])]
        return MultiFieldModel(encs, Network(self.decoder.spec, ps[-1]), self.field_names, self.variances)


def _slices(widths) -> list[slice]:
    out, start = [], 0
    for w in widths:
        out.append(slice(start, start + w))
        start += w
    return out


def _split(y: np.ndarray, slices: list[slice]) -> list[np.ndarray]:
    return [y[..., s] for s in slices]


def mf_encode(m: MultiFieldModel, fields) -> np.ndarray:
    if len(fields) != len(m.encoders):
        raise ContractError(f"{len(fields)} fields given, model has {len(m.encoders)} encoders")
    return np.concatenate([e(x) for e, x in zip(m.encoders, fields)], axis=-1)


def mf_forward(m: MultiFieldModel, fields) -> list[np.ndarray]:
    """Encode each field, concatenate latents in field order, decode once, split per field."""
    return _split(m.decoder(mf_encode(m, fields)), m.slices)


def mf_loss_and_grad(m: MultiFieldModel, fields, l1: float = 0.0, l2: float = 0.0):
    if len(fields) != len(m.encoders):
        raise ContractError(f"{len(fields)} fields given, model has {len(m.encoders)} encoders")
    xs = [_rows(x, w, f"mf_loss field {n}") for x, w, n in zip(fields, m.widths, m.field_names)]
    if len({x.shape[0] for x in xs}) != 1:
        raise ContractError("fields hold different snapshot counts")
    zs, tapes = [], []
    for e, x in zip(m.encoders, xs):
        z, t = forward(e.spec, e.params, x)
        zs.append(z)
        tapes.append(t)
    y, tape_d = forward(m.decoder.spec, m.decoder.params, np.concatenate(zs, axis=1))
    loss = 0.0
    dy = np.empty_like(y)
    for s, x, var in zip(m.slices, xs, m.variances):
        r = y[:, s] - x
        loss += float(np.mean(r * r)) / var
        dy[:, s] = 2.0 * r / (r.size * var)
    g_dec, dz = backward(m.decoder.spec, m.decoder.params, tape_d, dy)
    g_encs = [backward(e.spec, e.params, t, dz[:, s])[0] for e, t, s in zip(m.encoders, tapes, m.latent_slices)]
    reg, reg_grads = _penalty([n.params for n in m.nets()], l1, l2)
    return loss + reg, _add([*g_encs, g_dec], reg_grads)


def mf_loss(m: MultiFieldModel, fields, l1: float = 0.0, l2: float = 0.0) -> float:
    return mf_loss_and_grad(m, fields, l1, l2)[0]


def train_multifield(fields, encoders: list[NetworkSpec], decoder: NetworkSpec, cfg: TrainConfig,
                     field_names=()) -> tuple[MultiFieldModel, LossTrace]:
    xs = [np.asarray(x, dtype=np.float64) for x in fields]
    m = MultiFieldModel.init(encoders, decoder, cfg.seed, field_names)
    m.variances = tuple(variance(x) for x in xs)

    def objective(ps):
        return mf_loss_and_grad(m.with_params(ps), xs, cfg.l1_penalty, cfg.l2_penalty)

    names = [f"encoder[{n}]" for n in m.field_names] + ["decoder"]
    ps, trace = train(objective, [n.params for n in m.nets()], cfg, names=names, label="multi-field")
    return m.with_params(ps), trace


def mf_e2e_predict(regressors: list[LatentRegressor], decoder: Network, theta,
                   widths: list[int]) -> list[np.ndarray]:
    """Per-field predictions from one shared parameter vector."""
    if sum(r.latent_dim for r in regressors) != decoder.spec.n_in:
        raise ContractError("regressor latent sizes do not add up to the decoder input")
    if sum(widths) != decoder.spec.n_out:
        raise ContractError("field widths do not add up to the decoder output")
    z = np.concatenate([r(theta) for r in regressors], axis=-1)
    return _split(decoder(z), _slices(widths))


# -- staggered force model ----------------------------------------------------

@dataclass
class StaggeredForceNet:
    net: Network

    @property
    def latent_dim(self) -> int:
        return self.net.spec.n_in


def staggered_loss_and_grad(t: StaggeredForceNet, latents, forces, l1: float = 0.0, l2: float = 0.0):
    """Mean squared force error over ``n_S * n_A * n_B`` entries plus elastic net."""
    z = _rows(latents, t.latent_dim, "staggered latents")
    f = _rows(forces, t.net.spec.n_out, "staggered forces")
    if z.shape[0] != f.shape[0]:
        raise ContractError(f"{z.shape[0]} latents but {f.shape[0]} force snapshots")
    fhat, tape = forward(t.net.spec, t.net.params, z)
    r = fhat - f
    loss = float(np.mean(r * r))
    g, _ = backward(t.net.spec, t.net.params, tape, 2.0 * r / r.size)
    reg, reg_grads = _penalty([t.net.params], l1, l2)
    return loss + reg, _add([g], reg_grads)


def train_staggered(latents, forces, spec: NetworkSpec, cfg: TrainConfig) -> tuple[StaggeredForceNet, LossTrace]:
    """Fit the force net on latents produced by an already trained regressor."""
    z = np.array(latents, dtype=np.float64, copy=True)
    f = np.asarray(forces, dtype=np.float64)
    t0 = StaggeredForceNet(Network.init(spec, make_rng(cfg.seed)))

    def objective(ps):
        return staggered_loss_and_grad(StaggeredForceNet(Network(spec, ps[0])), z, f,
                                       cfg.l1_penalty, cfg.l2_penalty)

    (p,), trace = train(objective, [t0.net.params], cfg, names=["force_net"], label="staggered")
    return StaggeredForceNet(Network(spec, p)), trace


def staggered_force_predict(t: StaggeredForceNet, p: LatentRegressor, theta) -> np.ndarray:
    if p.latent_dim != t.latent_dim:
        raise ContractError(f"regressor latent {p.latent_dim} != force net input {t.latent_dim}")
    return t.net(p(theta))


def compose_deformed_configuration(ref_positions, displacements) -> np.ndarray:
    """Current nodal positions: reference positions plus displacements."""
    ref = np.asarray(ref_positions, dtype=np.float64)
    u = np.asarray(displacements, dtype=np.float64)
    if ref.shape != u.shape:
        raise ContractError(f"reference positions {ref.shape} and displacements {u.shape} differ in shape")
    return ref + u
