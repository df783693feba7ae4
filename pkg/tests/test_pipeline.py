import csv

import numpy as np
import pytest

from aemor import data as D
from aemor.bundle import SurrogateBundle
from aemor.container import BUNDLE_MAGIC, decode
from aemor.errors import ContractError, DataError, StageOrderError, StructureError
from aemor.metrics import METRICS, evaluate, node_errors
from aemor.pipeline import compose_positions, encoder_checksum, train_stage
from aemor.presets import build_topology
from aemor.training import TrainConfig

CFG = TrainConfig(epochs=30, seed=1)


@pytest.fixture(scope="module")
def uc():
    return D.generate_synthetic(D.PRESETS["unit_cell"])


@pytest.fixture(scope="module")
def uc_topology(uc):
    return build_topology("unit_cell", {"u": uc.widths[0]}, uc.forces.width, cap=16)


@pytest.fixture(scope="module")
def ae_bundle(uc, uc_topology):
    return train_stage("ae", uc, uc_topology, CFG, problem="unit_cell")[0]


@pytest.fixture(scope="module")
def e2e_bundle(uc, uc_topology, ae_bundle):
    return train_stage("regressor", uc, uc_topology, CFG, prior=ae_bundle)[0]


def test_stage_order(uc, uc_topology, ae_bundle, e2e_bundle):
    with pytest.raises(StageOrderError):
        train_stage("regressor", uc, uc_topology, CFG)
    with pytest.raises(StageOrderError):
        train_stage("staggered", uc, uc_topology, CFG, prior=ae_bundle)
    with pytest.raises(StageOrderError):
        train_stage("ae", uc, uc_topology, CFG, prior=ae_bundle)
    with pytest.raises(StageOrderError):
        train_stage("regressor", uc, uc_topology, CFG, prior=e2e_bundle)
    with pytest.raises(ContractError):
        train_stage("vae", uc, uc_topology, CFG)


def test_regressor_stage_leaves_encoder_untouched(ae_bundle, e2e_bundle):
    assert encoder_checksum(ae_bundle) == encoder_checksum(e2e_bundle)
    assert e2e_bundle.kind == "e2e"
    assert [c["stage"] for c in e2e_bundle.chain] == ["ae", "regressor"]


def test_e2e_in_one_call_matches_two_stages(uc, uc_topology, e2e_bundle):
    joint, traces = train_stage("e2e", uc, uc_topology, CFG, problem="unit_cell")
    assert set(traces) == {"ae", "regressor"}
    assert joint.to_bytes() == e2e_bundle.to_bytes()


def test_predict_contracts(ae_bundle, e2e_bundle, uc):
    with pytest.raises(StageOrderError):
        ae_bundle.predict([[0.5, 0.5]])
    with pytest.raises(ContractError, match="3 entries"):
        e2e_bundle.predict([[0.5, 0.5, 0.1]])
    assert e2e_bundle.predict(np.zeros((0, 2)))["u"].shape == (0, 300)
    out = e2e_bundle.predict(uc.params[:3])
    assert out["u"].shape == (3, 300)
    pod = train_stage("pod", uc, {}, CFG, pod_rank=3)[0]
    with pytest.raises(ContractError):
        pod.predict([[0.5, 0.5]])


def test_bundle_roundtrip_is_exact(tmp_path, e2e_bundle, uc):
    path = tmp_path / "m.bundle"
    crc = e2e_bundle.save(path)
    back = SurrogateBundle.load(path)
    assert isinstance(crc, int)
    assert back.to_bytes() == e2e_bundle.to_bytes()
    a, b = e2e_bundle.predict(uc.params), back.predict(uc.params)
    assert a["u"].tobytes() == b["u"].tobytes()
    assert path.read_bytes()[:7] == BUNDLE_MAGIC


def test_bundle_rejects_manifest_payload_mismatch(e2e_bundle):
    header, arrays = decode(e2e_bundle.to_bytes(), BUNDLE_MAGIC)
    arrays = dict(arrays)
    name = next(k for k in arrays if k.startswith("net/encoder/") and arrays[k].ndim == 2)
    arrays[name] = arrays[name][:, :-1]
    with pytest.raises(StructureError):
        SurrogateBundle._from_parts(header, arrays)


def test_bundle_rejects_latent_mismatch(e2e_bundle):
    header, arrays = decode(e2e_bundle.to_bytes(), BUNDLE_MAGIC)
    arrays = dict(arrays)
    reg_out = max(k for k in arrays if k.startswith("net/regressor/"))
    arrays[reg_out] = np.zeros(arrays[reg_out].shape[:-1] + (arrays[reg_out].shape[-1] + 1,))
    with pytest.raises(StructureError):
        SurrogateBundle._from_parts(header, arrays)


def test_staggered_chain(uc, uc_topology, e2e_bundle):
    stag, traces = train_stage("staggered", uc, uc_topology, CFG, prior=e2e_bundle)
    assert list(traces) == ["staggered"]
    out = stag.predict(uc.params[:2])
    assert out["forces"].shape == (2, 40)
    np.testing.assert_array_equal(out["u"], e2e_bundle.predict(uc.params[:2])["u"])
    assert encoder_checksum(stag) == encoder_checksum(e2e_bundle)


def test_force_augmented_bundle(uc, uc_topology, tmp_path):
    fa, traces = train_stage("force-augmented", uc, uc_topology, CFG)
    assert set(traces) == {"force-augmented", "regressor"}
    out = fa.predict(uc.params[:4])
    assert out["u"].shape == (4, 300) and out["forces"].shape == (4, 40)
    fa.save(tmp_path / "fa.bundle")
    back = SurrogateBundle.load(tmp_path / "fa.bundle")
    assert back.scalars == fa.scalars
    assert back.predict(uc.params[:4])["forces"].tobytes() == out["forces"].tobytes()


def test_multifield_bundle():
    s = D.generate_synthetic(D.PRESETS["thermo"], (D.THIRDS, D.THIRDS, (0.2, 0.6, 1.0)))
    topo = build_topology("thermo", dict(zip(s.field_names, s.widths)), param_dim=3, cap=16)
    b, traces = train_stage("multi-field", s, topo, CFG)
    assert set(traces) == {"multi-field", "regressor:u", "regressor:T"}
    out = b.predict([[0.5, 0.5, 0.5]])
    assert out["u"].shape == (1, s.widths[0]) and out["T"].shape == (1, s.widths[1])
    assert b.latent_dims == [4, 4]


def test_param_columns_and_morph_composition():
    morph_set = D.generate_synthetic(D.PRESETS["plate_morph"])
    plate_set = D.generate_synthetic(D.PRESETS["plate"])
    mt = build_topology("plate_morph", {"X": morph_set.widths[0]}, param_dim=1, cap=16)
    pt = build_topology("plate", {"u": plate_set.widths[0]}, cap=16)
    morph = train_stage("e2e", morph_set, mt, CFG, param_columns=(0,))[0]
    disp = train_stage("e2e", plate_set, pt, CFG)[0]
    a = morph.predict([[0.3, 0.1]])["X"]
    b = morph.predict([[0.3, 0.9]])["X"]
    np.testing.assert_array_equal(a, b)
    theta = [[0.3, 0.1], [0.7, 0.2]]
    pos = compose_positions(morph, disp, theta)
    assert pos.shape == (2, D.PLATE_GRID.n_nodes, 2)
    x = morph.fields[0].full(morph.predict(theta)["X"]).reshape(2, -1, 2)
    u = disp.fields[0].full(disp.predict(theta)["u"]).reshape(2, -1, 2)
    np.testing.assert_array_equal(pos, x + u)


def test_pod_bundle_roundtrip(tmp_path, uc):
    pod = train_stage("pod", uc, {}, CFG, pod_rank=4)[0]
    pod.save(tmp_path / "p.bundle")
    back = SurrogateBundle.load(tmp_path / "p.bundle")
    np.testing.assert_array_equal(back.pod.xi, pod.pod.xi)
    assert back.latent_dims == [4]


# metrics -----------------------------------------------------------------------

class Oracle:
    """Bundle stand-in predicting the stored truth exactly."""

    def __init__(self, truth, shift=0.0):
        self.truth, self.shift = truth, shift
        self.param_names = truth.param_names
        self.field_names = truth.field_names

    def predict(self, theta):
        rows = [self.truth.find(t) for t in theta]
        out = {f.name: f.values[rows] + self.shift for f in self.truth.fields}
        if self.truth.forces is not None:
            out["forces"] = self.truth.forces.values[rows]
        return out


def test_exact_prediction_gives_zero_errors(uc):
    rep = evaluate({"exact": Oracle(uc)}, uc)
    assert len(rep.rows) == 2 * uc.n_snapshots
    for r in rep.rows:
        assert all(r[f"exact_{m}"] == 0.0 for m in METRICS)


def test_prescribed_nodes_have_zero_error(uc):
    f = uc.fields[0]
    err = node_errors(f, f.values[:2] + 1.0, f.values[:2])
    fixed = np.concatenate([D.UNIT_CELL_GRID.row(0), D.UNIT_CELL_GRID.row(16)])
    assert np.all(err[:, fixed] == 0)
    np.testing.assert_allclose(np.delete(err, fixed, axis=1), np.sqrt(2))


def test_metric_values_and_two_label_report(tmp_path, uc):
    rep = evaluate({"a": Oracle(uc), "b": Oracle(uc, shift=0.1)}, uc, thetas=[[0.5, 0.5]])
    row = rep.rows[0]
    assert row["b_mse"] == pytest.approx(0.01)
    assert row["b_max_err"] == pytest.approx(0.1 * np.sqrt(2))
    var = np.var(uc.fields[0].values)
    assert row["b_nmse"] == pytest.approx(0.01 / var)
    path = tmp_path / "r.csv"
    rep.to_csv(path)
    header = next(csv.reader(open(path)))
    assert header[:4] == ["snapshot", "xi", "eta", "field"]
    assert [c for c in header if c.startswith("a_")] == [f"a_{m}" for m in METRICS]
    assert [c for c in header if c.startswith("b_")] == [f"b_{m}" for m in METRICS]
    rep.nodes_to_csv(tmp_path / "n.csv", {"u": uc.fields[0]})
    rows = list(csv.reader(open(tmp_path / "n.csv")))
    assert rows[0] == ["snapshot", "field", "node", "x", "y", "a_err", "b_err"]
    assert len(rows) == 1 + 2 * D.UNIT_CELL_GRID.nx * D.UNIT_CELL_GRID.ny


def test_evaluate_rejects_unknown_points_and_params(uc):
    with pytest.raises(DataError):
        evaluate({"a": Oracle(uc)}, uc, thetas=[[0.51, 0.5]])
    other = D.generate_synthetic(D.PRESETS["thermo"], (D.THIRDS, D.THIRDS, (1.0,)))
    with pytest.raises(DataError):
        evaluate({"a": Oracle(other)}, uc)
    with pytest.raises(ContractError):
        evaluate({}, uc)
