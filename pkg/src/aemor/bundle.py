"""Serialized surrogate models.

A bundle stores every network of a trained pipeline together with the field
layout it was trained on, so predictions can be scattered back onto full DOF
vectors and nodes. The manifest records the stage chain (seed, epochs, final
loss per stage) and the field order of multi-field models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .architectures import (Autoencoder, ForceAugmentedModel, LatentRegressor, MultiFieldModel,
                            StaggeredForceNet, fa_predict, mf_e2e_predict, staggered_force_predict)
from .container import BUNDLE_MAGIC, as_index, encode, read_container, write_container
from .data import Field
from .errors import ContractError, DataError, MorError, StageOrderError, StructureError
from .neural import MLPParams, Network, NetworkSpec
from .pod import PODBasis

KINDS = ("ae", "e2e", "force-augmented", "multi-field", "staggered", "pod")
PREDICTIVE = ("e2e", "force-augmented", "multi-field", "staggered")


def field_layout(f: Field) -> Field:
    """Copy of a field's layout without its snapshot values.

    Prescribed values that vary between snapshots are not known at new
    parameter points and are stored as NaN.
    """
    if f.prescribed_varies:
        prescribed = np.full(f.n_full - f.width, np.nan)
    else:
        prescribed = None if f.prescribed is None else f.prescribed.copy()
    return Field(f.name, np.zeros((0, f.width)), f.n_nodes, f.dofs_per_node, f.active.copy(), prescribed,
                 None if f.coords is None else f.coords.copy())


@dataclass
class SurrogateBundle:
    kind: str
    fields: list[Field]
    param_names: tuple[str, ...]
    nets: dict[str, Network] = field(default_factory=dict)
    param_columns: tuple[int, ...] | None = None
    scalars: dict[str, float] = field(default_factory=dict)
    chain: list[dict] = field(default_factory=list)
    force_field: str | None = None
    pod: PODBasis | None = None
    problem: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown bundle kind {self.kind!r}")
        self.param_names = tuple(self.param_names)

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def layout(self, name: str) -> Field:
        for f in self.fields:
            if f.name == name:
                return f
        raise DataError(f"bundle has no field {name!r}")

    @property
    def latent_dims(self) -> list[int]:
        if self.kind == "multi-field":
            return [self.nets[f"encoder:{n}"].spec.n_out for n in self.field_names]
        if "encoder" in self.nets:
            return [self.nets["encoder"].spec.n_out]
        if "phi_encoder" in self.nets:
            return [self.nets["phi_encoder"].spec.n_out]
        return [self.pod.rank] if self.pod is not None else []

    @property
    def regressor_input_dim(self) -> int:
        return len(self.param_columns) if self.param_columns is not None else len(self.param_names)

    # -- model views ---------------------------------------------------------

    def autoencoder(self) -> Autoencoder:
        return Autoencoder(self.nets["encoder"], self.nets["decoder"])

    def regressor(self, name: str = "regressor") -> LatentRegressor:
        if name not in self.nets:
            raise StageOrderError(f"bundle of kind {self.kind!r} has no trained regressor")
        return LatentRegressor(self.nets[name], self.param_columns)

    def force_augmented(self) -> ForceAugmentedModel:
        n = self.nets
        return ForceAugmentedModel(n["phi_encoder"], n["f_encoder"], n["phi_decoder"], n["f_decoder"],
                                   self.scalars["var_phi"], self.scalars["var_f"])

    def multi_field(self) -> MultiFieldModel:
        encs = [self.nets[f"encoder:{n}"] for n in self.field_names]
        var = tuple(self.scalars[f"var:{n}"] for n in self.field_names)
        return MultiFieldModel(encs, self.nets["decoder"], tuple(self.field_names), var)

    # -- prediction ----------------------------------------------------------

    def predict(self, theta) -> dict[str, np.ndarray]:
        """Active-DOF predictions per field (and ``"forces"`` when modelled), one row per θ."""
        theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
        if theta.size == 0:
            theta = theta.reshape(0, len(self.param_names))
        if theta.shape[1] != len(self.param_names):
            raise ContractError(f"theta has {theta.shape[1]} entries, bundle expects {len(self.param_names)} "
                                f"({', '.join(self.param_names)})")
        if self.kind == "pod" or ("decoder" not in self.nets and "phi_decoder" not in self.nets):
            raise ContractError(f"bundle of kind {self.kind!r} has no decoder to predict with")
        if self.kind == "ae":
            raise StageOrderError("bundle holds only an autoencoder; train a regressor stage before predicting")
        if self.kind == "multi-field":
            regs = [self.regressor(f"regressor:{n}") for n in self.field_names]
            if theta.shape[0] == 0:
                return {f.name: np.zeros((0, f.width)) for f in self.fields}
            parts = mf_e2e_predict(regs, self.nets["decoder"], theta, [f.width for f in self.fields])
            return dict(zip(self.field_names, parts))
        name = self.fields[0].name
        if theta.shape[0] == 0:
            out = {name: np.zeros((0, self.fields[0].width))}
            if self.force_field is not None:
                out["forces"] = np.zeros((0, self._force_width()))
            return out
        reg = self.regressor()
        if self.kind == "force-augmented":
            phi, f = fa_predict(self.force_augmented(), reg, theta)
            return {name: phi, "forces": f}
        out = {name: self.nets["decoder"](reg(theta))}
        if self.kind == "staggered":
            out["forces"] = staggered_force_predict(StaggeredForceNet(self.nets["staggered"]), reg, theta)
        return out

    def _force_width(self) -> int:
        net = self.nets.get("f_decoder") or self.nets.get("staggered")
        return net.spec.n_out

    # -- serialization -------------------------------------------------------

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "problem": self.problem,
            "param_names": list(self.param_names),
            "param_columns": None if self.param_columns is None else list(self.param_columns),
            "field_order": self.field_names,
            "fields": [{"name": f.name, "width": f.width, "n_nodes": f.n_nodes, "dofs_per_node": f.dofs_per_node,
                        "prescribed": f.prescribed is not None, "coords": f.coords is not None}
                       for f in self.fields],
            "latent_dims": self.latent_dims,
            "nets": {role: net.spec.to_dict() for role, net in sorted(self.nets.items())},
            "scalars": {k: float(v) for k, v in sorted(self.scalars.items())},
            "chain": self.chain,
            "force_field": self.force_field,
            "pod": None if self.pod is None else {"rank": self.pod.rank, "n_dim": self.pod.n_dim,
                                                  "centered": self.pod.mean is not None},
        }

    def _arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for f in self.fields:
            arrays[f"field/{f.name}/active"] = f.active.astype(np.float64)
            if f.prescribed is not None:
                arrays[f"field/{f.name}/prescribed"] = f.prescribed
            if f.coords is not None:
                arrays[f"field/{f.name}/coords"] = f.coords
        for role, net in sorted(self.nets.items()):
            for i, (w, b) in enumerate(zip(net.params.weights, net.params.biases)):
                arrays[f"net/{role}/W{i}"] = w
                arrays[f"net/{role}/b{i}"] = b
        if self.pod is not None:
            arrays["pod/xi"] = self.pod.xi
            arrays["pod/singular_values"] = self.pod.singular_values
            if self.pod.mean is not None:
                arrays["pod/mean"] = self.pod.mean
        return arrays

    def to_bytes(self) -> bytes:
        return encode(BUNDLE_MAGIC, self.manifest(), self._arrays())

    def save(self, path) -> int:
        return write_container(path, BUNDLE_MAGIC, self.manifest(), self._arrays())

    @classmethod
    def load(cls, path) -> "SurrogateBundle":
        header, arrays = read_container(path, BUNDLE_MAGIC)
        try:
            return cls._from_parts(header, arrays)
        except StructureError:
            raise
        except (KeyError, TypeError, ValueError, MorError) as exc:
            raise StructureError(f"bundle manifest does not match its payload: {exc}") from None

    @classmethod
    def _from_parts(cls, h: dict, arrays: dict) -> "SurrogateBundle":
        fields = []
        for meta in h["fields"]:
            name = meta["name"]
            active = as_index(arrays[f"field/{name}/active"], "active mask")
            if active.size != meta["width"]:
                raise StructureError(f"field {name!r}: manifest width {meta['width']} != mask size {active.size}")
            fields.append(Field(name, np.zeros((0, active.size)), int(meta["n_nodes"]), int(meta["dofs_per_node"]),
                                active, arrays.get(f"field/{name}/prescribed"), arrays.get(f"field/{name}/coords")))
        if [f.name for f in fields] != h["field_order"]:
            raise StructureError("field order in the manifest disagrees with the field table")
        nets = {}
        for role, sd in h["nets"].items():
            spec = NetworkSpec.from_dict(sd)
            ws, bs = [], []
            for i in range(spec.n_layers):
                ws.append(arrays.pop(f"net/{role}/W{i}"))
                bs.append(arrays.pop(f"net/{role}/b{i}"))
            params = MLPParams(ws, bs)
            try:
                params.check(spec)
            except ContractError as exc:
                raise StructureError(f"net {role!r}: {exc}") from None
            nets[role] = Network(spec, params)
        stray = [k for k in arrays if k.startswith("net/")]
        if stray:
            raise StructureError(f"payload holds arrays not described by the manifest: {stray}")
        pod = None
        if h["pod"] is not None:
            xi = arrays["pod/xi"]
            if list(xi.shape) != [h["pod"]["n_dim"], h["pod"]["rank"]]:
                raise StructureError(f"POD basis shape {xi.shape} disagrees with the manifest")
            pod = PODBasis(xi, arrays["pod/singular_values"], arrays.get("pod/mean"))
        cols = h["param_columns"]
        b = cls(h["kind"], fields, tuple(h["param_names"]), nets, None if cols is None else tuple(cols),
                dict(h["scalars"]), list(h["chain"]), h["force_field"], pod, h.get("problem"))
        if b.latent_dims != h["latent_dims"]:
            raise StructureError(f"latent dims {b.latent_dims} disagree with the manifest {h['latent_dims']}")
        return b
