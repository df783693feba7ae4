"""Network topologies of the benchmark problems.

Templates use symbolic widths that are filled from the data:

* ``"IN"``: width of the field the net reads or writes
* ``"F"``: force block width
* ``"L"``: latent dimension of the net's field
* ``"LSUM"``: concatenated latent width (multi-field decoder)
* ``"SUM"``: concatenated field width (multi-field decoder)
* ``"P"``: number of parameters the regressor consumes

Filled with the full benchmark widths and no cap, the templates reproduce the
published layer lists exactly. ``cap`` limits hidden widths for desk-scale runs.
"""

from __future__ import annotations

from .errors import ContractError
from .neural import NetworkSpec

G, S, R, I = "gelu", "silu", "relu", "identity"

_UC_ENC = (["IN", 1024, 512, 128, 32, 16, "L"], [G, G, G, G, G, I])
_UC_DEC = (["L", 16, 16, 16, 128, 1024, "IN"], [S, S, S, S, G, I])
_UC_REG = (["P", 16, 16, 16, 16, "L"], [G, G, G, G, I])
_F_ENC = (["F", 128, 32, 16, "L"], [G, G, G, I])
_F_DEC = (["L", 16, 32, 128, "F"], [S, S, S, I])
# the first arrow of the published staggered net carries no activation label
_STAGGERED = (["L", 8, 16, 32, 64, 128, 256, 512, 1024, "F"], [I, R, R, R, R, R, R, R, I])

_PLATE_ENC = (["IN", 256, 128, 64, 32, "L"], [G, G, G, G, I])
_PLATE_DEC = (["L", 32, 64, 128, 256, 512, "IN"], [G, G, G, G, G, I])
_PLATE_REG = (["P", 32, 32, 32, "L"], [G, G, G, I])

_MORPH_ENC = (["IN", 256, 128, 64, 32, "L"], [G, G, G, G, I])
_MORPH_DEC = (["L", 32, 64, 128, 256, "IN"], [G, G, G, G, I])
_MORPH_REG = (["P", 32, 32, 32, "L"], [G, G, G, I])

_THERMO_ENC = (["IN", 1024, 512, 128, 32, 16, "L"], [G, G, G, G, G, I])
_THERMO_DEC = (["LSUM", 16, 32, 64, 128, 1024, "SUM"], [S, S, S, S, G, I])
_THERMO_REG = (["P", 32, 32, 32, "L"], [G, G, G, I])

_SINGLE = {"encoder": _UC_ENC, "decoder": _UC_DEC, "regressor": _UC_REG}
_FORCES = {"f_encoder": _F_ENC, "f_decoder": _F_DEC, "staggered": _STAGGERED}

TEMPLATES = {
    "unit_cell": {**_SINGLE, **_FORCES},
    "plate": {"encoder": _PLATE_ENC, "decoder": _PLATE_DEC, "regressor": _PLATE_REG, **_FORCES},
    "plate_morph": {"encoder": _MORPH_ENC, "decoder": _MORPH_DEC, "regressor": _MORPH_REG},
    "thermo": {"encoder": _THERMO_ENC, "decoder": _THERMO_DEC, "regressor": _THERMO_REG},
}

DEFAULT_LATENT = {"unit_cell": 4, "plate": 8, "plate_morph": 2, "thermo": 4}


def _fill(template, symbols: dict, cap: int | None) -> NetworkSpec:
    widths, acts = template
    out = []
    for w in widths:
        if isinstance(w, str):
            if symbols.get(w) is None:
                raise ContractError(f"topology needs a value for {w!r}")
            out.append(int(symbols[w]))
        else:
            out.append(w if cap is None else min(w, cap))
    return NetworkSpec(tuple(out), tuple(acts))


def build_topology(problem: str, field_widths: dict[str, int], force_width: int | None = None,
                   latent: int | None = None, param_dim: int = 2, cap: int | None = None) -> dict[str, NetworkSpec]:
    """Concrete NetworkSpecs for every role of ``problem``.

    Single-field problems return ``encoder``/``decoder``/``regressor`` (plus
    force roles when ``force_width`` is given). Multi-field problems return
    ``encoder:<field>``, ``regressor:<field>`` per field, in the given field
    order, and one shared ``decoder``.
    """
    if problem not in TEMPLATES:
        raise ContractError(f"no topology for problem {problem!r}; known: {sorted(TEMPLATES)}")
    tpl = TEMPLATES[problem]
    k = DEFAULT_LATENT[problem] if latent is None else int(latent)
    if k < 1:
        raise ContractError("latent dimension must be >= 1")
    if problem == "thermo" or len(field_widths) > 1:
        out = {}
        for name, w in field_widths.items():
            out[f"encoder:{name}"] = _fill(tpl["encoder"], {"IN": w, "L": k}, cap)
            out[f"regressor:{name}"] = _fill(tpl["regressor"], {"P": param_dim, "L": k}, cap)
        dec = tpl.get("decoder")
        if "LSUM" not in dec[0]:
            dec = _THERMO_DEC
        out["decoder"] = _fill(dec, {"LSUM": k * len(field_widths), "SUM": sum(field_widths.values())}, cap)
        return out
    (w,) = field_widths.values()
    sym = {"IN": w, "L": k, "P": param_dim, "F": force_width}
    out = {role: _fill(tpl[role], sym, cap) for role in ("encoder", "decoder", "regressor")}
    if force_width is not None:
        for role in ("f_encoder", "f_decoder", "staggered"):
            out[role] = _fill(tpl.get(role, _FORCES[role]), sym, cap)
    return out
