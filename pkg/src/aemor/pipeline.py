"""Stage-by-stage training that produces :class:`SurrogateBundle` objects.

Stages follow a fixed order: an autoencoder (plain, force-augmented or
multi-field) first, then regressors against latents from the frozen
encoder(s), and the staggered force net last.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .architectures import (ae_encode, compose_deformed_configuration, fa_shared_latent, mf_encode,
                            train_autoencoder, train_force_augmented, train_multifield, train_regressor,
                            train_staggered)
from .bundle import SurrogateBundle, field_layout
from .data import SnapshotSet
from .errors import ContractError, DataError, StageOrderError
from .neural import NetworkSpec
from .pod import pod_basis
from .training import LossTrace, TrainConfig

ARCHITECTURES = ("ae", "regressor", "e2e", "force-augmented", "multi-field", "staggered", "pod")


def _stage(name: str, cfg: TrainConfig, trace: LossTrace | None) -> dict:
    rec = {"stage": name, "seed": int(cfg.seed), "epochs": int(cfg.epochs), "learning_rate": cfg.learning_rate,
           "l1_penalty": cfg.l1_penalty, "l2_penalty": cfg.l2_penalty}
    rec["final_loss"] = None if trace is None else trace.final
    return rec


def _role(topology: dict[str, NetworkSpec], role: str) -> NetworkSpec:
    if role not in topology:
        raise ContractError(f"topology has no {role!r} network; roles present: {sorted(topology)}")
    return topology[role]


def _pick_field(s: SnapshotSet, name: str | None):
    return s.fields[0] if name is None else s.field(name)


def _check_params(s: SnapshotSet, b: SurrogateBundle) -> None:
    if tuple(s.param_names) != tuple(b.param_names):
        raise DataError(f"snapshot parameters {s.param_names} differ from the bundle's {b.param_names}")


def fit_regressor_stage(s: SnapshotSet, prior: SurrogateBundle, topology, cfg: TrainConfig):
    """Add regressor(s) to an autoencoder bundle; encoder weights are only read."""
    _check_params(s, prior)
    traces = {}
    nets = dict(prior.nets)
    if prior.kind == "ae":
        f = s.field(prior.fields[0].name)
        targets = ae_encode(prior.autoencoder(), f.values)
        reg, tr = train_regressor(s.params, targets, _role(topology, "regressor"), cfg, prior.param_columns)
        nets["regressor"] = reg.net
        traces["regressor"] = tr
        kind = "e2e"
    elif prior.kind == "force-augmented" and "regressor" not in prior.nets:
        m = prior.force_augmented()
        targets = fa_shared_latent(m, s.field(prior.fields[0].name).values, s.forces.values)
        reg, tr = train_regressor(s.params, targets, _role(topology, "regressor"), cfg, prior.param_columns)
        nets["regressor"] = reg.net
        traces["regressor"] = tr
        kind = "force-augmented"
    elif prior.kind == "multi-field" and not any(k.startswith("regressor:") for k in prior.nets):
        m = prior.multi_field()
        z = mf_encode(m, [s.field(n).values for n in prior.field_names])
        start = 0
        for name, k in zip(prior.field_names, prior.latent_dims):
            reg, tr = train_regressor(s.params, z[:, start:start + k], _role(topology, f"regressor:{name}"), cfg,
                                      prior.param_columns)
            nets[f"regressor:{name}"] = reg.net
            traces[f"regressor:{name}"] = tr
            start += k
        kind = "multi-field"
    else:
        raise StageOrderError(f"a regressor stage needs an untrained-regressor autoencoder bundle, got {prior.kind!r}")
    chain = prior.chain + [_stage(name, cfg, tr) for name, tr in traces.items()]
    return SurrogateBundle(kind, prior.fields, prior.param_names, nets, prior.param_columns, dict(prior.scalars),
                           chain, prior.force_field, None, prior.problem), traces


def train_stage(arch: str, s: SnapshotSet, topology: dict[str, NetworkSpec], cfg: TrainConfig,
                prior: SurrogateBundle | None = None, field: str | None = None,
                param_columns: tuple[int, ...] | None = None, problem: str | None = None,
                pod_rank: int | None = None) -> tuple[SurrogateBundle, dict[str, LossTrace]]:
    """Run one architecture's training and return the bundle plus a loss trace per trained net group."""
    if arch not in ARCHITECTURES:
        raise ContractError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    cols = None if param_columns is None else tuple(int(c) for c in param_columns)

    if arch == "regressor":
        if prior is None:
            raise StageOrderError("the regressor stage needs a trained encoder bundle (train 'ae' first)")
        return fit_regressor_stage(s, prior, topology, cfg)

    if arch == "staggered":
        if prior is None or prior.kind != "e2e":
            got = "none" if prior is None else repr(prior.kind)
            raise StageOrderError(f"the staggered force net needs a trained e2e bundle, got {got}")
        if s.forces is None:
            raise DataError("snapshot set has no force block")
        _check_params(s, prior)
        latents = prior.regressor()(s.params)
        t, tr = train_staggered(latents, s.forces.values, _role(topology, "staggered"), cfg)
        nets = dict(prior.nets, staggered=t.net)
        b = SurrogateBundle("staggered", prior.fields, prior.param_names, nets, prior.param_columns,
                            dict(prior.scalars), prior.chain + [_stage("staggered", cfg, tr)], s.forces.field,
                            None, prior.problem)
        return b, {"staggered": tr}

    if prior is not None:
        raise StageOrderError(f"architecture {arch!r} starts a new chain and takes no prior bundle")

    if arch == "pod":
        f = _pick_field(s, field)
        r = pod_rank or min(f.width, s.n_snapshots)
        basis = pod_basis(f.values.T, r)
        b = SurrogateBundle("pod", [field_layout(f)], s.param_names, {}, cols, {}, [_stage("pod", cfg, None)],
                            None, basis, problem)
        return b, {}

    if arch in ("ae", "e2e"):
        f = _pick_field(s, field)
        ae, tr = train_autoencoder(f.values, _role(topology, "encoder"), _role(topology, "decoder"), cfg)
        b = SurrogateBundle("ae", [field_layout(f)], s.param_names, {"encoder": ae.encoder, "decoder": ae.decoder},
                            cols, {}, [_stage("ae", cfg, tr)], None, None, problem)
        if arch == "ae":
            return b, {"ae": tr}
        b2, traces = fit_regressor_stage(s, b, topology, cfg)
        return b2, {"ae": tr, **traces}

    if arch == "force-augmented":
        if s.forces is None:
            raise DataError("snapshot set has no force block")
        f = s.field(s.forces.field) if field is None else s.field(field)
        specs = tuple(_role(topology, r) for r in ("encoder", "f_encoder", "decoder", "f_decoder"))
        m, tr = train_force_augmented(f.values, s.forces.values, specs, cfg)
        nets = {"phi_encoder": m.phi_encoder, "f_encoder": m.f_encoder, "phi_decoder": m.phi_decoder,
                "f_decoder": m.f_decoder}
        b = SurrogateBundle("force-augmented", [field_layout(f)], s.param_names, nets, cols,
                            {"var_phi": m.var_phi, "var_f": m.var_f}, [_stage("force-augmented", cfg, tr)],
                            s.forces.field, None, problem)
        b2, traces = fit_regressor_stage(s, b, topology, cfg)
        return b2, {"force-augmented": tr, **traces}

    # multi-field
    names = s.field_names
    encs = [_role(topology, f"encoder:{n}") for n in names]
    m, tr = train_multifield([s.field(n).values for n in names], encs, _role(topology, "decoder"), cfg, names)
    nets = {f"encoder:{n}": e for n, e in zip(names, m.encoders)}
    nets["decoder"] = m.decoder
    scalars = {f"var:{n}": v for n, v in zip(names, m.variances)}
    b = SurrogateBundle("multi-field", [field_layout(s.field(n)) for n in names], s.param_names, nets, cols,
                        scalars, [_stage("multi-field", cfg, tr)], None, None, problem)
    b2, traces = fit_regressor_stage(s, b, topology, cfg)
    return b2, {"multi-field": tr, **traces}


def encoder_checksum(b: SurrogateBundle) -> str:
    """Digest of all encoder weights, for checking that later stages leave them untouched."""
    h = hashlib.sha256()
    for role in sorted(b.nets):
        if "encoder" in role:
            for a in b.nets[role].params.arrays():
                h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def compose_positions(morph: SurrogateBundle, displacement: SurrogateBundle, theta) -> np.ndarray:
    """Current nodal positions ``(n, n_nodes, dim)``: predicted geometry plus predicted displacement."""
    geo_f = morph.fields[0]
    dis_f = displacement.fields[0]
    if geo_f.n_nodes != dis_f.n_nodes or geo_f.dofs_per_node != dis_f.dofs_per_node:
        raise ContractError("morphing and displacement bundles describe different node sets")
    x = geo_f.full(morph.predict(theta)[geo_f.name])
    u = dis_f.full(displacement.predict(theta)[dis_f.name])
    shape = (x.shape[0], geo_f.n_nodes, geo_f.dofs_per_node)
    return compose_deformed_configuration(x.reshape(shape), u.reshape(shape))

