"""Fully connected networks with exact reverse-mode gradients.

Inputs are batched row-wise: a ``(n, width)`` array is ``n`` independent
samples, and a 1-D array is treated as a single sample. Weights are stored
``(out, in)`` so that a layer computes ``x @ W.T + b``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, expit

from .errors import ContractError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Activation(str, enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    GELU = "gelu"
    SILU = "silu"

    @classmethod
    def parse(cls, value) -> "Activation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ContractError(f"unknown activation {value!r}") from None


def activation_apply(kind, x):
    kind = Activation.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is Activation.IDENTITY:
        return x
    if kind is Activation.RELU:
        return np.maximum(x, 0.0)
    if kind is Activation.GELU:
        return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))
    return x * expit(x)


def activation_grad(kind, x):
    """Derivative of the activation at ``x`` (ReLU'(0) = 0)."""
    kind = Activation.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is Activation.IDENTITY:
        return np.ones_like(x)
    if kind is Activation.RELU:
        return (x > 0.0).astype(np.float64)
    if kind is Activation.GELU:
        cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
        return cdf + x * _INV_SQRT2PI * np.exp(-0.5 * x * x)
    sig = expit(x)
    return sig * (1.0 + x * (1.0 - sig))


@dataclass(frozen=True)
class NetworkSpec:
    layer_widths: tuple[int, ...]
    activations: tuple[Activation, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        acts = tuple(Activation.parse(a) for a in self.activations)
        if len(widths) < 2:
            raise ContractError("a network needs at least an input and an output width")
        if any(w < 1 for w in widths):
            raise ContractError(f"layer widths must be positive, got {widths}")
        if len(acts) != len(widths) - 1:
            raise ContractError(f"{len(widths) - 1} weight layers but {len(acts)} activations")
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activations", acts)

    @classmethod
    def build(cls, widths, hidden="gelu", output="identity") -> "NetworkSpec":
        """Spec with one activation on every hidden layer and another on the output."""
        n = len(widths) - 1
        return cls(tuple(widths), tuple([hidden] * (n - 1) + [output]))

    @property
    def n_in(self) -> int:
        return self.layer_widths[0]

    @property
    def n_out(self) -> int:
        return self.layer_widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.activations)

    def to_dict(self) -> dict:
        return {"layer_widths": list(self.layer_widths), "activations": [a.value for a in self.activations]}

    @classmethod
    def from_dict(cls, d) -> "NetworkSpec":
        return cls(tuple(d["layer_widths"]), tuple(d["activations"]))

    def describe(self) -> str:
        parts = [str(self.layer_widths[0])]
        for act, w in zip(self.activations, self.layer_widths[1:]):
            tag = "" if act is Activation.IDENTITY else act.value.upper()
            parts.append(f"-{tag}-> {w}" if tag else f"--> {w}")
        return " ".join(parts)


@dataclass
class MLPParams:
    """Per-layer weights ``(out, in)`` and biases ``(out,)``.

    Also used to hold gradients, which share the parameter shapes.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "MLPParams":
        w = spec.layer_widths
        return cls([np.zeros((w[i + 1], w[i])) for i in range(spec.n_layers)],
                   [np.zeros(w[i + 1]) for i in range(spec.n_layers)])

    @classmethod
    def glorot(cls, spec: NetworkSpec, rng: np.random.Generator) -> "MLPParams":
        """Glorot-uniform weights, zero biases."""
        p = cls.zeros(spec)
        for i, wmat in enumerate(p.weights):
            fan_out, fan_in = wmat.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            p.weights[i] = rng.uniform(-limit, limit, size=wmat.shape)
        return p

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "MLPParams":
        return MLPParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def check(self, spec: NetworkSpec) -> None:
        if len(self.weights) != spec.n_layers or len(self.biases) != spec.n_layers:
            raise ContractError(f"params have {len(self.weights)} layers, spec has {spec.n_layers}")
        for i in range(spec.n_layers):
            shape = (spec.layer_widths[i + 1], spec.layer_widths[i])
            if self.weights[i].shape != shape or self.biases[i].shape != (shape[0],):
                raise ContractError(
                    f"layer {i}: weight {self.weights[i].shape} / bias {self.biases[i].shape}, expected {shape}")

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def __add__(self, other: "MLPParams") -> "MLPParams":
        return MLPParams([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])


Gradients = MLPParams


@dataclass
class Network:
    """A spec together with its parameters."""

    spec: NetworkSpec
    params: MLPParams

    def __post_init__(self):
        self.params.check(self.spec)

    @classmethod
    def init(cls, spec: NetworkSpec, rng: np.random.Generator) -> "Network":
        return cls(spec, MLPParams.glorot(spec, rng))

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "Network":
        return cls(spec, MLPParams.zeros(spec))

    def __call__(self, x) -> np.ndarray:
        return forward(self.spec, self.params, x)[0]


@dataclass
class Tape:
    """Network input plus the pre-activation of every layer."""

    inputs: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    squeeze: bool = False


def _batch(x, width: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ContractError(f"{what} width {x.shape[-1] if x.ndim else 0} does not match expected {width}")
    return x, squeeze


def forward(spec: NetworkSpec, params: MLPParams, x) -> tuple[np.ndarray, Tape]:
    a, squeeze = _batch(x, spec.n_in, "input")
    tape = Tape(inputs=a, squeeze=squeeze)
    for w, b, act in zip(params.weights, params.biases, spec.activations):
        z = a @ w.T + b
        tape.pre.append(z)
        a = activation_apply(act, z)
    return (a[0] if squeeze else a), tape


def backward(spec: NetworkSpec, params: MLPParams, tape: Tape, output_grad) -> tuple[MLPParams, np.ndarray]:
    """Reverse pass for a scalar loss whose gradient wrt the output is ``output_grad``."""
    if len(tape.pre) != spec.n_layers:
        raise ContractError(f"tape holds {len(tape.pre)} layers, spec has {spec.n_layers}")
    g, _ = _batch(output_grad, spec.n_out, "output gradient")
    if g.shape[0] != tape.inputs.shape[0]:
        raise ContractError(f"output gradient batch {g.shape[0]} does not match tape batch {tape.inputs.shape[0]}")
    grads = params.zeros_like()
    for i in range(spec.n_layers - 1, -1, -1):
        dz = g * activation_grad(spec.activations[i], tape.pre[i])
        a_prev = tape.inputs if i == 0 else activation_apply(spec.activations[i - 1], tape.pre[i - 1])
        grads.weights[i] = dz.T @ a_prev
        grads.biases[i] = dz.sum(axis=0)
        g = dz @ params.weights[i]
    return grads, (g[0] if tape.squeeze else g)


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ContractError("mse of empty arrays")
    return float(np.mean((pred - target) ** 2))
