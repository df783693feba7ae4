import pytest

from aemor.errors import ContractError
from aemor.presets import DEFAULT_LATENT, build_topology

G, S, R, I = "gelu", "silu", "relu", "identity"

# published layer lists, transcribed by hand
PUBLISHED = {
    ("unit_cell", "encoder"): ((18580, 1024, 512, 128, 32, 16, 4), (G, G, G, G, G, I)),
    ("unit_cell", "decoder"): ((4, 16, 16, 16, 128, 1024, 18580), (S, S, S, S, G, I)),
    ("unit_cell", "regressor"): ((2, 16, 16, 16, 16, 4), (G, G, G, G, I)),
    ("unit_cell", "f_encoder"): ((4676, 128, 32, 16, 4), (G, G, G, I)),
    ("unit_cell", "f_decoder"): ((4, 16, 32, 128, 4676), (S, S, S, I)),
    ("unit_cell", "staggered"): ((4, 8, 16, 32, 64, 128, 256, 512, 1024, 4676), (I, R, R, R, R, R, R, R, I)),
    ("plate", "encoder"): ((4641, 256, 128, 64, 32, 8), (G, G, G, G, I)),
    ("plate", "decoder"): ((8, 32, 64, 128, 256, 512, 4641), (G, G, G, G, G, I)),
    ("plate", "regressor"): ((2, 32, 32, 32, 8), (G, G, G, I)),
    ("plate_morph", "encoder"): ((2871, 256, 128, 64, 32, 2), (G, G, G, G, I)),
    ("plate_morph", "decoder"): ((2, 32, 64, 128, 256, 2871), (G, G, G, G, I)),
    ("plate_morph", "regressor"): ((1, 32, 32, 32, 2), (G, G, G, I)),
    ("thermo", "encoder:u"): ((4641, 1024, 512, 128, 32, 16, 4), (G, G, G, G, G, I)),
    ("thermo", "encoder:T"): ((1497, 1024, 512, 128, 32, 16, 4), (G, G, G, G, G, I)),
    ("thermo", "decoder"): ((8, 16, 32, 64, 128, 1024, 6138), (S, S, S, S, G, I)),
    ("thermo", "regressor:u"): ((3, 32, 32, 32, 4), (G, G, G, I)),
    ("thermo", "regressor:T"): ((3, 32, 32, 32, 4), (G, G, G, I)),
}

PUBLISHED_WIDTHS = {
    "unit_cell": ({"u": 18580}, 4676, 2),
    "plate": ({"u": 4641}, None, 2),
    "plate_morph": ({"X": 2871}, None, 1),
    "thermo": ({"u": 4641, "T": 1497}, None, 3),
}


def published_topology(problem):
    widths, force, pdim = PUBLISHED_WIDTHS[problem]
    return build_topology(problem, widths, force, param_dim=pdim)


@pytest.mark.parametrize("key", sorted(PUBLISHED))
def test_published_topologies(key):
    problem, role = key
    spec = published_topology(problem)[role]
    assert (spec.layer_widths, tuple(a.value for a in spec.activations)) == PUBLISHED[key]


def test_role_sets():
    assert set(published_topology("unit_cell")) == {"encoder", "decoder", "regressor", "f_encoder", "f_decoder",
                                                    "staggered"}
    assert set(published_topology("plate_morph")) == {"encoder", "decoder", "regressor"}
    assert list(published_topology("thermo")) == ["encoder:u", "regressor:u", "encoder:T", "regressor:T", "decoder"]


def test_cap_limits_hidden_layers_only():
    topo = build_topology("unit_cell", {"u": 300}, 40, cap=32)
    assert topo["encoder"].layer_widths == (300, 32, 32, 32, 32, 16, 4)
    assert topo["staggered"].layer_widths == (4, 8, 16, 32, 32, 32, 32, 32, 32, 40)
    assert topo["regressor"].layer_widths == (2, 16, 16, 16, 16, 4)


def test_latent_override_and_errors():
    assert build_topology("plate", {"u": 50}, latent=3)["decoder"].layer_widths[0] == 3
    assert DEFAULT_LATENT["plate"] == 8
    with pytest.raises(ContractError):
        build_topology("beam", {"u": 10})
    with pytest.raises(ContractError):
        build_topology("plate", {"u": 10}, latent=0)
