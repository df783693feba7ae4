"""Command-line front end: ``aemor {generate,train,predict,eval,pod}``.

Each command reads an optional YAML config (``--config``); individual flags
override config values. Unknown config keys are rejected before any work
starts.

Exit codes: 0 success, 2 configuration error, 3 data error (including
malformed files), 4 numerical failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import data as D
from .bundle import SurrogateBundle
from .errors import ConfigError, ContractError, DataError, NumericalError
from .linalg import make_rng
from .metrics import evaluate
from .neural import NetworkSpec
from .pipeline import ARCHITECTURES, compose_positions, train_stage
from .pod import BUILTIN_FOMS, block_vs_monolithic, builtin_fom, pod_basis, reduce_and_solve, relative_error
from .presets import TEMPLATES, build_topology
from .training import TrainConfig

log = logging.getLogger("aemor")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5

KEYS = {
    "generate": {"preset", "seed", "out", "stride", "grid", "widths", "imperfection", "n_samples"},
    "train": {"snapshots", "arch", "out", "prior", "problem", "latent", "cap", "field", "param_columns",
              "topology", "train", "pod_rank", "seed", "epochs"},
    "predict": {"bundle", "morph", "theta", "out", "full"},
    "eval": {"bundles", "snapshots", "theta", "out", "nodes_out"},
    "pod": {"fom", "snapshots", "out", "seed", "n_train", "n_test", "ranks", "block_ranks"},
}
REQUIRED = {
    "generate": ("preset", "out"),
    "train": ("snapshots", "arch", "out"),
    "predict": ("bundle", "out"),
    "eval": ("bundles", "snapshots", "out"),
    "pod": ("fom", "out"),
}
DEFAULT_CAP = 128


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def load_config(command: str, path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    cfg = cfg or {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(cfg) - KEYS[command]
    if unknown:
        raise ConfigError(f"{path}: unknown keys for '{command}': {sorted(unknown)}")
    return cfg


def merge(command: str, args: argparse.Namespace) -> dict:
    cfg = load_config(command, args.config)
    for key in KEYS[command]:
        v = getattr(args, key, None)
        if v is not None and v != []:
            cfg[key] = v
    missing = [k for k in REQUIRED[command] if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"'{command}' is missing required settings: {missing}")
    return cfg


def parse_theta(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse parameter point {text!r}; use comma-separated numbers") from None


def _theta_matrix(values, dim: int) -> np.ndarray:
    if values is None:
        return np.zeros((0, dim))
    rows = [parse_theta(v) if isinstance(v, str) else [float(x) for x in v] for v in values]
    if not rows:
        return np.zeros((0, dim))
    if any(len(r) != dim for r in rows):
        raise ContractError(f"every parameter point needs {dim} entries")
    return np.array(rows, dtype=np.float64)


# -- generate -------------------------------------------------------------------


def _fom_snapshots(name: str, n: int, seed: int) -> D.SnapshotSet:
    fom = builtin_fom(name)
    thetas = make_rng(seed).uniform(0.0, 1.0, size=(n, fom.param_dim))
    sols = fom.snapshots(thetas).T
    fields = []
    slices = fom.field_slices or [slice(0, fom.n_dim)]
    names = fom.field_names or tuple(f"phi{i}" for i in range(len(slices)))
    for fname, sl in zip(names, slices):
        width = sl.stop - sl.start
        fields.append(D.Field(fname, sols[:, sl], width, 1, np.arange(width)))
    params = tuple(f"theta{i}" for i in range(fom.param_dim))
    return D.SnapshotSet(thetas, params, fields, provenance={"generator": name, "seed": seed})


def cmd_generate(cfg: dict) -> int:
    preset = cfg["preset"]
    seed = int(cfg.get("seed", 0))
    if preset in BUILTIN_FOMS:
        s = _fom_snapshots(preset, int(cfg.get("n_samples", 20)), seed)
    else:
        if preset not in D.PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(D.PRESETS) + sorted(BUILTIN_FOMS)}")
        opts = {}
        if "widths" in cfg:
            opts["widths"] = cfg["widths"]
        if preset == "thermo" and "imperfection" in cfg:
            opts["imperfection"] = bool(cfg["imperfection"])
        s = D.generate_synthetic(D.PRESETS[preset], cfg.get("grid"), seed, **opts)
    if cfg.get("stride"):
        s = D.subsample_time(s, int(cfg["stride"]))
    out = Path(cfg["out"])
    crc = D.write_snapshots(out, s)
    s.write_params_csv(out.with_suffix(".params.csv"))
    widths = " ".join(f"{f.name}:{f.width}" for f in s.fields)
    forces = f" forces:{s.forces.width}" if s.forces is not None else ""
    print(f"{out}: n_S={s.n_snapshots} widths {widths}{forces} crc=0x{crc:08x}")
    return EXIT_OK


# -- train ----------------------------------------------------------------------


def _topology(cfg: dict, s: D.SnapshotSet, arch: str, problem: str | None, cols) -> dict[str, NetworkSpec]:
    explicit = {role: NetworkSpec.from_dict(d) for role, d in (cfg.get("topology") or {}).items()}
    if problem is None:
        if arch != "pod" and not explicit:
            raise ConfigError("no topology: name a problem with known presets or give 'topology' explicitly")
        return explicit
    if arch == "multi-field":
        widths = {f.name: f.width for f in s.fields}
    else:
        f = s.field(cfg["field"]) if cfg.get("field") else (
            s.field(s.forces.field) if arch == "force-augmented" and s.forces is not None else s.fields[0])
        widths = {f.name: f.width}
    cap = cfg.get("cap", DEFAULT_CAP)
    cap = None if cap in (None, 0) else int(cap)
    force_width = s.forces.width if s.forces is not None else None
    p = len(cols) if cols is not None else len(s.param_names)
    topo = build_topology(problem, widths, force_width, cfg.get("latent"), p, cap)
    topo.update(explicit)
    return topo


def cmd_train(cfg: dict) -> int:
    arch = cfg["arch"]
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}; choose from {list(ARCHITECTURES)}")
    train_cfg = dict(cfg.get("train") or {})
    if "seed" in cfg:
        train_cfg["seed"] = int(cfg["seed"])
    if "epochs" in cfg:
        train_cfg["epochs"] = int(cfg["epochs"])
    tc = TrainConfig.from_dict(train_cfg)
    s = D.read_snapshots(cfg["snapshots"])
    prior = SurrogateBundle.load(cfg["prior"]) if cfg.get("prior") else None
    problem = cfg.get("problem") or (prior.problem if prior else None) or s.provenance.get("generator")
    if problem not in TEMPLATES:
        problem = None
    cols = cfg.get("param_columns")
    if cols is None and problem in D.PRESETS:
        cols = D.PRESETS[problem].regressor_columns
    if prior is not None:
        cols = prior.param_columns
    topo = _topology(cfg, s, arch, problem, cols)
    bundle, traces = train_stage(arch, s, topo, tc, prior, cfg.get("field"), cols, problem, cfg.get("pod_rank"))
    out = Path(cfg["out"])
    bundle.save(out)
    for stage, trace in traces.items():
        path = out.with_name(f"{out.stem}.{stage.replace(':', '-')}.loss.csv")
        trace.to_csv(path)
        print(f"{stage}: final loss {trace.final:.6e} ({len(trace)} epochs) -> {path}")
    print(f"{out}: bundle kind {bundle.kind}, latent {bundle.latent_dims}")
    return EXIT_OK


# -- predict --------------------------------------------------------------------


def cmd_predict(cfg: dict) -> int:
    b = SurrogateBundle.load(cfg["bundle"])
    theta = _theta_matrix(cfg.get("theta"), len(b.param_names))
    out = Path(cfg["out"])
    if cfg.get("morph"):
        morph = SurrogateBundle.load(cfg["morph"])
        pos = compose_positions(morph, b, theta)
        dims = pos.shape[2] if pos.ndim == 3 else b.fields[0].dofs_per_node
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point", *b.param_names, "node", *("xyz"[:dims])])
            for k in range(theta.shape[0]):
                for node in range(pos.shape[1]):
                    w.writerow([k, *map(fmt, theta[k]), node, *map(fmt, pos[k, node])])
        print(f"{out}: composed positions for {theta.shape[0]} point(s)")
        return EXIT_OK
    pred = b.predict(theta)
    full = bool(cfg.get("full", False))
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", *b.param_names, "field", "dof", "value"])
        for name, values in pred.items():
            if name == "forces":
                dofs = b.layout(b.force_field).inactive
            elif full:
                lay = b.layout(name)
                values, dofs = lay.full(values), np.arange(lay.n_full)
            else:
                dofs = b.layout(name).active
            for k in range(theta.shape[0]):
                for d, v in zip(dofs, values[k]):
                    w.writerow([k, *map(fmt, theta[k]), name, int(d), fmt(v)])
    print(f"{out}: {theta.shape[0]} point(s), fields {list(pred)}")
    return EXIT_OK


# -- eval -----------------------------------------------------------------------


def _bundle_specs(value) -> dict[str, str]:
    if isinstance(value, dict):
        return {str(k): str(v) for k, v in value.items()}
    out = {}
    for item in value:
        label, sep, path = str(item).partition("=")
        if not sep:
            label, path = Path(item).stem, item
        if label in out:
            raise ConfigError(f"duplicate bundle label {label!r}")
        out[label] = path
    return out


def cmd_eval(cfg: dict) -> int:
    bundles = {label: SurrogateBundle.load(p) for label, p in _bundle_specs(cfg["bundles"]).items()}
    truth = D.read_snapshots(cfg["snapshots"])
    thetas = cfg.get("theta")
    thetas = None if thetas is None else _theta_matrix(thetas, len(truth.param_names))
    report = evaluate(bundles, truth, thetas)
    report.to_csv(cfg["out"])
    if cfg.get("nodes_out"):
        report.nodes_to_csv(cfg["nodes_out"], {f.name: f for f in truth.fields})
    for row in report.rows:
        parts = [f"{l}: rel {row[f'{l}_rel_l2']:.3e} max {row[f'{l}_max_err']:.3e}"
                 for l in report.labels if f"{l}_rel_l2" in row]
        print(f"snapshot {row['snapshot']} {row['field']}: " + "; ".join(parts))
    return EXIT_OK


# -- pod ------------------------------------------------------------------------


def cmd_pod(cfg: dict) -> int:
    name = cfg["fom"]
    if name not in BUILTIN_FOMS:
        raise ConfigError(f"unknown FOM {name!r}; choose from {sorted(BUILTIN_FOMS)}")
    fom = builtin_fom(name)
    rng = make_rng(int(cfg.get("seed", 0)))
    if cfg.get("snapshots"):
        s = D.read_snapshots(cfg["snapshots"])
        if sum(s.widths) != fom.n_dim:
            raise DataError(f"snapshot width {sum(s.widths)} does not match FOM {name!r} with {fom.n_dim} DOFs")
        if s.params.shape[1] != fom.param_dim:
            raise DataError(f"snapshots have {s.params.shape[1]} parameters, FOM expects {fom.param_dim}")
        train_thetas = s.params
        train_snaps = np.hstack([f.values for f in s.fields]).T
    else:
        train_thetas = rng.uniform(0.0, 1.0, size=(int(cfg.get("n_train", 40)), fom.param_dim))
        train_snaps = fom.snapshots(train_thetas)
    test_thetas = rng.uniform(0.0, 1.0, size=(int(cfg.get("n_test", 10)), fom.param_dim))
    max_rank = min(train_snaps.shape)
    ranks = [int(r) for r in cfg.get("ranks") or range(1, max_rank + 1)]
    if any(not 1 <= r <= max_rank for r in ranks):
        raise ConfigError(f"ranks must lie in [1, {max_rank}]")
    full = pod_basis(train_snaps, max(ranks))
    exact = [fom.solve(t) for t in test_thetas]
    out = Path(cfg["out"])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "mean_rel_error", "max_rel_error", "projection_error"])
        for r in ranks:
            basis = full.truncate(r)
            errs = [relative_error(reduce_and_solve(fom, basis, t)[1], e) for t, e in zip(test_thetas, exact)]
            proj = float(np.sqrt(np.sum(full.singular_values[r:] ** 2)))
            w.writerow([r, fmt(np.mean(errs)), fmt(np.max(errs)), fmt(proj)])
    print(f"{out}: rank sweep over {len(ranks)} ranks, {len(test_thetas)} test points")
    if len(fom.field_slices) > 1:
        block_out = out.with_name(f"{out.stem}.block.csv")
        totals = cfg.get("block_ranks") or [2 * k for k in range(1, 9)]
        with open(block_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["total_rank", "block_error", "monolithic_error"])
            for total in totals:
                blk, mono = block_vs_monolithic(fom, train_thetas, test_thetas, int(total))
                w.writerow([int(total), fmt(blk), fmt(mono)])
        print(f"{block_out}: block vs monolithic at total ranks {list(totals)}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aemor", description="Autoencoder and POD reduced-order modelling toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--out", help="output path")
        return sp

    g = common(sub.add_parser("generate", help="write a synthetic snapshot file"))
    g.add_argument("--preset", help="problem preset or built-in FOM name")
    g.add_argument("--seed", type=int)
    g.add_argument("--stride", type=int, help="keep every k-th time step")
    g.add_argument("--widths", choices=["desk", "published"])
    g.add_argument("--n-samples", dest="n_samples", type=int, help="samples for built-in FOM presets")

    t = common(sub.add_parser("train", help="train one architecture stage"))
    t.add_argument("--snapshots", help="MORSNAP1 training file")
    t.add_argument("--arch", choices=ARCHITECTURES)
    t.add_argument("--prior", help="bundle from the previous stage")
    t.add_argument("--preset", dest="problem", help="problem whose topology presets to use")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--latent", type=int)
    t.add_argument("--cap", type=int, help="cap on hidden widths (0 = published widths)")
    t.add_argument("--field", help="field to train on (single-field architectures)")
    t.add_argument("--pod-rank", dest="pod_rank", type=int)

    pr = common(sub.add_parser("predict", help="evaluate a bundle at parameter points"))
    pr.add_argument("--bundle")
    pr.add_argument("--theta", action="append", default=[], help="comma-separated point; repeatable")
    pr.add_argument("--morph", help="geometry bundle to compose with a displacement bundle")
    pr.add_argument("--full", action="store_true", default=None, help="emit all DOFs incl. prescribed")

    e = common(sub.add_parser("eval", help="compare bundles against ground truth"))
    e.add_argument("--bundle", dest="bundles", action="append", default=[], help="[label=]path; repeatable")
    e.add_argument("--snapshots")
    e.add_argument("--theta", action="append", default=[])
    e.add_argument("--nodes-out", dest="nodes_out")

    po = common(sub.add_parser("pod", help="POD / Galerkin baseline on a built-in FOM"))
    po.add_argument("--fom", choices=sorted(BUILTIN_FOMS))
    po.add_argument("--snapshots")
    po.add_argument("--seed", type=int)
    return p


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "pod": cmd_pod}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = merge(args.command, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ContractError) as exc:
        print(f"aemor: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"aemor: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"aemor: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"aemor: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
