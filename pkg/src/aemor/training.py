"""Full-batch Adam training with elastic-net regularization."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, TrainingError
from .neural import MLPParams

log = logging.getLogger(__name__)

Objective = Callable[[list[MLPParams]], tuple[float, list[MLPParams]]]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 5000
    l1_penalty: float = 1e-7
    l2_penalty: float = 1e-7
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    log_every: int = 500
    optimizer: str = "adam"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l1_penalty < 0 or self.l2_penalty < 0:
            raise ContractError("penalties must be non-negative")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ContractError("Adam betas must lie in [0, 1)")
        if int(self.epochs) < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be an unsigned 64-bit integer")
        if self.optimizer != "adam":
            raise ContractError(f"only the adam optimizer is supported, got {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdamState:
    m: list[MLPParams]
    v: list[MLPParams]
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[MLPParams]) -> "AdamState":
        return cls([p.zeros_like() for p in params], [p.zeros_like() for p in params])


@dataclass
class LossTrace:
    losses: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.losses)

    @property
    def final(self) -> float:
        return self.losses[-1]

    def to_csv(self, path, every: int = 1) -> None:
        """Write ``epoch,loss`` rows; ``every`` > 1 downsamples (last epoch always kept)."""
        n = len(self.losses)
        keep = [i for i in range(n) if i % every == 0 or i == n - 1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss"])
            for i in keep:
                w.writerow([i + 1, f"{self.losses[i]:.17g}"])


def elastic_net(params: MLPParams | Sequence[MLPParams], l1: float, l2: float):
    """``l1 * sum|w| + l2 * sum w^2`` over weight matrices (biases are not penalized).

    Accepts one parameter set or a list; the gradient mirrors the input.
    """
    if l1 < 0 or l2 < 0:
        raise ContractError("penalties must be non-negative")
    single = isinstance(params, MLPParams)
    plist = [params] if single else list(params)
    value = 0.0
    grads = []
    for p in plist:
        g = p.zeros_like()
        for i, w in enumerate(p.weights):
            value += l1 * float(np.abs(w).sum()) + l2 * float((w * w).sum())
            g.weights[i] = l1 * np.sign(w) + 2.0 * l2 * w
        grads.append(g)
    return value, (grads[0] if single else grads)


def _check_finite(grads: Sequence[MLPParams], names: Sequence[str] | None) -> None:
    for k, g in enumerate(grads):
        for layer, (w, b) in enumerate(zip(g.weights, g.biases)):
            for kind, arr in (("weight", w), ("bias", b)):
                bad = np.argwhere(~np.isfinite(arr))
                if bad.size:
                    net = names[k] if names else f"net{k}"
                    raise TrainingError(f"non-finite gradient in {net} layer {layer} {kind} at index {tuple(bad[0])}")


def adam_step(params: Sequence[MLPParams], grads: Sequence[MLPParams], state: AdamState,
              cfg: TrainConfig, names: Sequence[str] | None = None) -> None:
    """One bias-corrected Adam update, applied in place to ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("params, grads and Adam state hold different numbers of networks")
    _check_finite(grads, names)
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        for pa, ga, ma, va in zip(p.arrays(), g.arrays(), m.arrays(), v.arrays()):
            if pa.shape != ga.shape:
                raise ContractError(f"gradient shape {ga.shape} does not match parameter {pa.shape}")
            ma *= b1
            ma += (1.0 - b1) * ga
            va *= b2
            va += (1.0 - b2) * ga * ga
            pa -= cfg.learning_rate * (ma / c1) / (np.sqrt(va / c2) + cfg.adam_epsilon)


def train(objective: Objective, params: Sequence[MLPParams], cfg: TrainConfig,
          names: Sequence[str] | None = None, label: str = "model") -> tuple[list[MLPParams], LossTrace]:
    """Minimize ``objective`` with full-batch Adam for ``cfg.epochs`` epochs.

    ``objective`` maps the current parameter list to ``(loss, grads)`` where the
    loss already includes any regularization. Parameters are copied, never
    mutated in place.
    """
    params = [p.copy() for p in params]
    state = AdamState.for_params(params)
    trace = LossTrace()
    for epoch in range(int(cfg.epochs)):
        loss, grads = objective(params)
        if not math.isfinite(loss):
            last = trace.final if trace.losses else float("nan")
            raise TrainingError(f"{label}: loss became non-finite at epoch {epoch + 1} (last finite loss {last:.6g})")
        trace.losses.append(float(loss))
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            log.info("%s epoch %d loss %.6e", label, epoch + 1, loss)
        adam_step(params, grads, state, cfg, names)
    return params, trace
