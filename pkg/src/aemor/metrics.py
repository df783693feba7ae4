"""Prediction error metrics and the evaluation report."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .bundle import SurrogateBundle
from .data import Field, SnapshotSet
from .errors import ContractError, DataError
from .linalg import variance

METRICS = ("mse", "nmse", "rel_l2", "max_err", "mean_err")


def node_errors(layout: Field, pred, truth) -> np.ndarray:
    """Per-node Euclidean norm of the prediction error.

    ``pred`` and ``truth`` hold active DOFs; prescribed DOFs contribute zero,
    so nodes with every DOF prescribed always report zero error.
    """
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if pred.shape != truth.shape or pred.shape[1] != layout.width:
        raise ContractError(f"prediction {pred.shape} / truth {truth.shape} do not match field width {layout.width}")
    diff = np.zeros((pred.shape[0], layout.n_full))
    diff[:, layout.active] = pred - truth
    return np.linalg.norm(diff.reshape(pred.shape[0], layout.n_nodes, layout.dofs_per_node), axis=2)


def force_node_errors(layout: Field, pred, truth) -> np.ndarray:
    """Per-node error norm of forces living on the inactive DOFs of ``layout``."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    inactive = layout.inactive
    if pred.shape != truth.shape or pred.shape[1] != inactive.size:
        raise ContractError("force prediction does not match the inactive DOF count")
    diff = np.zeros((pred.shape[0], layout.n_full))
    diff[:, inactive] = pred - truth
    return np.linalg.norm(diff.reshape(pred.shape[0], layout.n_nodes, layout.dofs_per_node), axis=2)


def summarize(pred, truth, err_nodes, var: float) -> dict[str, float]:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    mse = float(np.mean((pred - truth) ** 2))
    norm = float(np.linalg.norm(truth))
    return {
        "mse": mse,
        "nmse": mse / var,
        "rel_l2": float(np.linalg.norm(pred - truth)) / norm if norm > 0 else float(np.linalg.norm(pred - truth)),
        "max_err": float(np.max(err_nodes)) if np.size(err_nodes) else 0.0,
        "mean_err": float(np.mean(err_nodes)) if np.size(err_nodes) else 0.0,
    }


@dataclass
class EvalReport:
    """One row per (snapshot, field); one metric column group per labelled model."""

    param_names: tuple[str, ...]
    labels: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    # (snapshot, field) -> label -> per-node error vector
    node_err: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        cols = ["snapshot", *self.param_names, "field"]
        for label in self.labels:
            cols += [f"{label}_{m}" for m in METRICS]
        return cols

    def value(self, snapshot: int, field_name: str, label: str, metric: str) -> float:
        for r in self.rows:
            if r["snapshot"] == snapshot and r["field"] == field_name:
                return r[f"{label}_{metric}"]
        raise KeyError((snapshot, field_name))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(r.get(c, "")) for c in self.columns])

    def nodes_to_csv(self, path, layouts: dict[str, Field]) -> None:
        """Plot-ready per-node errors: node coordinates followed by one column per model."""
        dims = max((f.coords.shape[1] for f in layouts.values() if f.coords is not None), default=0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snapshot", "field", "node", *("xyz"[:dims]), *(f"{l}_err" for l in self.labels)])
            for (snap, fname), per_label in self.node_err.items():
                lay = layouts[fname.removeprefix("forces:")]
                n = lay.n_nodes
                for node in range(n):
                    xy = [] if lay.coords is None else [_fmt(v) for v in lay.coords[node]]
                    errs = [_fmt(per_label[l][node]) if l in per_label else "" for l in self.labels]
                    w.writerow([snap, fname, node, *xy, *errs])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return v


def evaluate(bundles: dict[str, SurrogateBundle], truth: SnapshotSet, thetas=None) -> EvalReport:
    """Compare each labelled bundle against ``truth`` at ``thetas`` (default: every snapshot).

    Normalized MSE divides by the variance of the true field over the whole
    ground-truth set.
    """
    if not bundles:
        raise ContractError("evaluation needs at least one bundle")
    if thetas is None:
        rows = list(range(truth.n_snapshots))
    else:
        rows = [truth.find(t) for t in np.atleast_2d(np.asarray(thetas, dtype=np.float64))]
    report = EvalReport(truth.param_names, tuple(bundles))
    if not rows:
        return report
    theta = truth.params[rows]
    for label, b in bundles.items():
        if tuple(b.param_names) != truth.param_names:
            raise DataError(f"bundle {label!r} expects parameters {b.param_names}, truth has {truth.param_names}")
    preds = {label: b.predict(theta) for label, b in bundles.items()}
    names = []
    for b in bundles.values():
        names += [n for n in b.field_names if n not in names]
    targets = [(n, False) for n in names]
    if truth.forces is not None and any("forces" in p for p in preds.values()):
        targets.append((truth.forces.field, True))
    for name, is_force in targets:
        layout = truth.field(name)
        values = truth.forces.values if is_force else layout.values
        var = variance(values)
        key = f"forces:{name}" if is_force else name
        for i, r in enumerate(rows):
            row = {"snapshot": r, "field": key, **dict(zip(truth.param_names, truth.params[r]))}
            per_label = {}
            for label, p in preds.items():
                pk = "forces" if is_force else name
                if pk not in p:
                    continue
                if is_force:
                    err = force_node_errors(layout, p[pk][i], values[r])[0]
                else:
                    err = node_errors(layout, p[pk][i], values[r])[0]
                for m, v in summarize(p[pk][i], values[r], err, var).items():
                    row[f"{label}_{m}"] = v
                per_label[label] = err
            report.rows.append(row)
            report.node_err[(r, key)] = per_label
    return report
