"""Snapshot sets, parameter maps and synthetic parametric problems.

The generators produce smooth, nonlinearly parametrized fields on small nodal
grids (a few hundred DOFs) driven by the exact parameter maps of the three
benchmark problems: a heterogeneous unit cell under prescribed top
displacement, a fibre-reinforced plate with an elliptic hole, and a transient
thermo-mechanical plate that buckles under thermal load.

Reaction forces are linked to the fields through a quadratic pseudo-energy
``E(psi) = 1/2 sum_edges k_e |psi_i - psi_j|^2`` on the grid graph. The force
at a constrained DOF is ``f = -(L psi)`` restricted to that DOF, where ``L`` is
the stiffness-weighted graph Laplacian (``k_e`` depends on the parameters) and
``psi`` is the full field including prescribed values.
"""

from __future__ import annotations

import csv
import inspect
import itertools
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import expit

from .container import SNAPSHOT_MAGIC, as_index, encode, read_container, write_container
from .errors import ContractError, DataError, RangeError, StructureError
from .linalg import make_rng

# ---------------------------------------------------------------------------
# parameter maps


def _check_unit(*values) -> None:
    for v in values:
        if not (0.0 <= v <= 1.0) or not np.isfinite(v):
            raise RangeError(f"natural coordinate {v!r} outside [0, 1]")


def param_map_unit_cell(xi: float, eta: float) -> tuple[float, float, float]:
    """Top displacement components (mm) and inclusion shear modulus (MPa)."""
    _check_unit(xi, eta)
    angle = np.deg2rad(90.0 - 90.0 * xi)
    return 2.0 * np.cos(angle), 2.0 * np.sin(angle), 150.0 + 750.0 * eta**2


def param_map_plate(xi: float, eta: float) -> tuple[float, float, float]:
    """Hole semi-axes ``a``, ``b`` (mm) and fibre angle (degrees)."""
    _check_unit(xi, eta)
    return 3.0 - 1.5 * xi, 1.5 + 1.5 * xi, 30.0 + 120.0 * eta


def param_map_thermo(xi: float, eta: float) -> tuple[float, float]:
    """Heat conductivity and plate thickness (mm)."""
    _check_unit(xi, eta)
    return 20.0 + 10.0 * xi, 0.2 + 0.8 * eta


# ---------------------------------------------------------------------------
# snapshot data model


@dataclass
class Field:
    """One physical field; ``values`` holds only the active DOFs.

    DOFs are numbered node-major: ``dof = node * dofs_per_node + component``.
    ``prescribed`` stores the values at the inactive DOFs, either once for
    all snapshots ``(n_inactive,)`` or per snapshot ``(n_S, n_inactive)``.
    """

    name: str
    values: np.ndarray
    n_nodes: int
    dofs_per_node: int
    active: np.ndarray
    prescribed: np.ndarray | None = None
    coords: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.active = np.asarray(self.active, dtype=np.int64)
        if self.values.ndim != 2:
            raise DataError(f"field {self.name!r}: values must be 2-D")
        if self.values.shape[1] != self.active.size:
            raise DataError(f"field {self.name!r}: {self.values.shape[1]} columns but {self.active.size} active DOFs")
        n_full = self.n_full
        if self.active.size and (np.any(np.diff(self.active) <= 0) or self.active[0] < 0 or self.active[-1] >= n_full):
            raise DataError(f"field {self.name!r}: active indices must be sorted, unique and in [0, {n_full})")
        if self.prescribed is not None:
            self.prescribed = np.asarray(self.prescribed, dtype=np.float64)
            n_in = n_full - self.active.size
            if self.prescribed.shape not in ((n_in,), (self.values.shape[0], n_in)):
                raise DataError(f"field {self.name!r}: prescribed values do not cover the inactive DOFs")
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=np.float64)
            if self.coords.ndim != 2 or self.coords.shape[0] != self.n_nodes:
                raise DataError(f"field {self.name!r}: coords must have one row per node")

    @property
    def width(self) -> int:
        return int(self.active.size)

    @property
    def n_full(self) -> int:
        return int(self.n_nodes * self.dofs_per_node)

    @property
    def inactive(self) -> np.ndarray:
        mask = np.ones(self.n_full, dtype=bool)
        mask[self.active] = False
        return np.flatnonzero(mask)

    @property
    def prescribed_varies(self) -> bool:
        return self.prescribed is not None and self.prescribed.ndim == 2

    def full(self, values=None) -> np.ndarray:
        """Scatter active values into the full DOF vector.

        Inactive DOFs take the prescribed values, or zero when none are stored.
        Per-snapshot prescribed values only apply to the stored snapshots; for
        other ``values`` they are unknown and come out as NaN.
        """
        v = self.values if values is None else np.asarray(values, dtype=np.float64)
        squeeze = v.ndim == 1
        v = np.atleast_2d(v)
        out = np.zeros((v.shape[0], self.n_full))
        out[:, self.active] = v
        if self.prescribed_varies:
            out[:, self.inactive] = self.prescribed if values is None else np.nan
        elif self.prescribed is not None:
            out[:, self.inactive] = self.prescribed
        return out[0] if squeeze else out

    def node_view(self, full) -> np.ndarray:
        full = np.asarray(full)
        return full.reshape(full.shape[:-1] + (self.n_nodes, self.dofs_per_node))


@dataclass
class ForceBlock:
    """Forces at the inactive DOFs of ``field``."""

    field: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


@dataclass
class SnapshotSet:
    params: np.ndarray
    param_names: tuple[str, ...]
    fields: list[Field]
    forces: ForceBlock | None = None
    provenance: dict = field(default_factory=lambda: {"generator": "external"})

    def __post_init__(self):
        self.params = np.atleast_2d(np.asarray(self.params, dtype=np.float64))
        self.param_names = tuple(self.param_names)
        if self.params.shape[1] != len(self.param_names):
            raise DataError(f"{self.params.shape[1]} parameter columns but {len(self.param_names)} names")
        if not self.fields:
            raise DataError("a snapshot set needs at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate field names {names}")
        for f in self.fields:
            if f.values.shape[0] != self.n_snapshots:
                raise DataError(f"field {f.name!r} has {f.values.shape[0]} rows, params have {self.n_snapshots}")
        if self.forces is not None:
            owner = self.field(self.forces.field)
            if self.forces.values.shape != (self.n_snapshots, owner.n_full - owner.width):
                raise DataError(f"force block shape {self.forces.values.shape} does not match the inactive DOFs "
                                f"of field {owner.name!r}")

    @property
    def n_snapshots(self) -> int:
        return int(self.params.shape[0])

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    @property
    def widths(self) -> list[int]:
        return [f.width for f in self.fields]

    def field(self, name: str) -> Field:
        for f in self.fields:
            if f.name == name:
                return f
        raise DataError(f"no field named {name!r}; have {self.field_names}")

    def subset(self, rows) -> "SnapshotSet":
        rows = np.asarray(rows, dtype=np.int64)
        fields = [replace(f, values=f.values[rows],
                          prescribed=f.prescribed[rows] if f.prescribed_varies else f.prescribed)
                  for f in self.fields]
        forces = None if self.forces is None else ForceBlock(self.forces.field, self.forces.values[rows])
        return SnapshotSet(self.params[rows], self.param_names, fields, forces, dict(self.provenance))

    def find(self, theta, atol: float = 1e-9) -> int:
        theta = np.asarray(theta, dtype=np.float64)
        hits = np.flatnonzero(np.all(np.abs(self.params - theta) <= atol, axis=1))
        if hits.size == 0:
            raise DataError(f"parameter point {theta.tolist()} not present in the snapshot set")
        return int(hits[0])

    def write_params_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snapshot", *self.param_names])
            for i, row in enumerate(self.params):
                w.writerow([i, *(f"{v:.17g}" for v in row)])


# ---------------------------------------------------------------------------
# grids and pseudo-energy forces


def graph_laplacian(n_nodes: int, edges: np.ndarray, k: np.ndarray) -> np.ndarray:
    lap = np.zeros((n_nodes, n_nodes))
    i, j = edges[:, 0], edges[:, 1]
    np.add.at(lap, (i, j), -k)
    np.add.at(lap, (j, i), -k)
    np.add.at(lap, (i, i), k)
    np.add.at(lap, (j, j), k)
    return lap


def pseudo_energy_forces(psi_nodes: np.ndarray, lap: np.ndarray, inactive_dofs: np.ndarray) -> np.ndarray:
    """``-(L psi)`` at the inactive DOFs; ``psi_nodes`` is ``(n_nodes, dofs_per_node)``."""
    return -(lap @ psi_nodes).ravel()[inactive_dofs]


def _dofs_of(nodes, n_dof: int, components=None) -> np.ndarray:
    comps = range(n_dof) if components is None else components
    return np.array(sorted(int(n) * n_dof + c for n in nodes for c in comps), dtype=np.int64)


def _complement(idx: np.ndarray, n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[idx] = False
    return np.flatnonzero(mask)


@dataclass(frozen=True)
class RectGrid:
    """Structured rectangle ``[0, lx] x [0, ly]``; node ``j * nx + i``."""

    nx: int = 10
    ny: int = 17
    lx: float = 3.0
    ly: float = 3.0

    def coords(self) -> np.ndarray:
        x, y = np.meshgrid(np.linspace(0, self.lx, self.nx), np.linspace(0, self.ly, self.ny))
        return np.column_stack([x.ravel(), y.ravel()])

    def edges(self) -> np.ndarray:
        e = []
        for j in range(self.ny):
            for i in range(self.nx):
                n = j * self.nx + i
                if i + 1 < self.nx:
                    e.append((n, n + 1))
                if j + 1 < self.ny:
                    e.append((n, n + self.nx))
        return np.array(e, dtype=np.int64)

    def row(self, j: int) -> np.ndarray:
        return np.arange(j * self.nx, (j + 1) * self.nx)


@dataclass(frozen=True)
class OGrid:
    """Ring grid between an elliptic hole and the square ``[-h, h]^2``.

    ``per_side`` perimeter points on each box side (corners included once),
    ``n_rings`` rings from the hole (ring 0) to the box (last ring). Node
    ``ring * n_perimeter + k``.
    """

    per_side: int = 10
    n_rings: int = 5
    half: float = 5.0

    @property
    def n_perimeter(self) -> int:
        return 4 * self.per_side

    @property
    def n_nodes(self) -> int:
        return self.n_perimeter * self.n_rings

    def perimeter(self) -> np.ndarray:
        h, n = self.half, self.per_side
        s = -h + 2 * h * np.arange(n) / n
        bottom = np.column_stack([s, np.full(n, -h)])
        right = np.column_stack([np.full(n, h), s])
        top = np.column_stack([-s, np.full(n, h)])
        left = np.column_stack([np.full(n, -h), -s])
        return np.vstack([bottom, right, top, left])

    def coords(self, a: float, b: float) -> np.ndarray:
        if a <= 0 or b <= 0 or a >= self.half or b >= self.half:
            raise DataError(f"degenerate grid: hole semi-axes ({a}, {b}) must lie inside the box")
        if self.per_side < 1 or self.n_rings < 2:
            raise DataError("degenerate grid: need at least one point per side and two rings")
        p = self.perimeter()
        lam = 1.0 / np.sqrt((p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2)
        hole = p * lam[:, None]
        rho = np.linspace(0.0, 1.0, self.n_rings)
        out = [(1 - r) * hole + r * p for r in rho]
        out[0] = hole
        out[-1] = p
        return np.vstack(out)

    def edges(self) -> np.ndarray:
        m = self.n_perimeter
        e = []
        for ring in range(self.n_rings):
            for k in range(m):
                n = ring * m + k
                e.append((n, ring * m + (k + 1) % m))
                if ring + 1 < self.n_rings:
                    e.append((n, n + m))
        return np.array(e, dtype=np.int64)

    def box_nodes(self) -> np.ndarray:
        return (self.n_rings - 1) * self.n_perimeter + np.arange(self.n_perimeter)

    def side_nodes(self, y_value: float) -> np.ndarray:
        p = self.perimeter()
        return (self.n_rings - 1) * self.n_perimeter + np.flatnonzero(np.isclose(p[:, 1], y_value))


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class ParametricProblem:
    name: str
    param_names: tuple[str, ...]
    default_levels: tuple[tuple[float, ...], ...]
    derived: Callable[[np.ndarray], dict]
    builder: Callable[..., SnapshotSet]
    # parameter columns the latent regressor consumes (None = all)
    regressor_columns: tuple[int, ...] | None = None

    @property
    def param_dim(self) -> int:
        return len(self.param_names)


def sample_grid(levels) -> np.ndarray:
    """Tensor-product sample points; the last coordinate varies fastest."""
    return np.array(list(itertools.product(*[np.asarray(l, dtype=np.float64) for l in levels])))


def _to_points(problem: ParametricProblem, grid) -> np.ndarray:
    if grid is None:
        grid = problem.default_levels
    if isinstance(grid, np.ndarray):
        pts = np.atleast_2d(grid.astype(np.float64))
    else:
        if len(grid) != problem.param_dim:
            raise DataError(f"{problem.name} expects {problem.param_dim} level lists, got {len(grid)}")
        pts = sample_grid(grid)
    if pts.ndim != 2 or pts.shape[1] != problem.param_dim:
        raise DataError(f"{problem.name} expects {problem.param_dim} parameters per sample, got shape {pts.shape}")
    if np.any(pts < 0) or np.any(pts > 1) or not np.all(np.isfinite(pts)):
        raise RangeError(f"{problem.name}: sample points must lie in the unit box")
    return pts


WIDTH_SETS = ("desk", "published")


def generate_synthetic(problem: ParametricProblem, grid=None, seed: int = 0, **options) -> SnapshotSet:
    """Deterministic snapshots of ``problem`` at ``grid``.

    ``grid`` is either a sequence of per-parameter level lists (tensor
    product) or an ``(n, param_dim)`` numpy array of points; ``None`` uses the problem's default
    levels. ``widths="published"`` emits constant fields at full benchmark widths.
    """
    accepted = set(inspect.signature(problem.builder).parameters) - {"pts", "seed"}
    unknown = set(options) - accepted
    if unknown:
        raise ContractError(f"{problem.name}: unknown generator options {sorted(unknown)}; accepted {sorted(accepted)}")
    if options.get("widths", "desk") not in WIDTH_SETS:
        raise ContractError(f"widths must be one of {WIDTH_SETS}, got {options['widths']!r}")
    pts = _to_points(problem, grid)
    s = problem.builder(pts, int(seed), **options)
    s.provenance = {"generator": problem.name, "seed": int(seed), **{k: v for k, v in sorted(options.items())}}
    return s


# unit cell --------------------------------------------------------------------

UNIT_CELL_GRID = RectGrid(10, 17, 3.0, 3.0)
MU_MATRIX = 100.0


def _unit_cell_stiffness(coords: np.ndarray, mu_i: float) -> np.ndarray:
    r = np.hypot(coords[:, 0] - 1.5, coords[:, 1] - 1.5)
    s = expit((1.0 - r) / 0.15)
    return MU_MATRIX * (1.0 + (mu_i / MU_MATRIX - 1.0) * s)


def unit_cell_state(theta, grid: RectGrid = UNIT_CELL_GRID) -> np.ndarray:
    """Full nodal displacement ``(n_nodes, 2)`` for one parameter point."""
    ux, uy, mu_i = param_map_unit_cell(*theta)
    xy = grid.coords()
    compliance = 1.0 / _unit_cell_stiffness(xy, mu_i)
    c = compliance.reshape(grid.ny, grid.nx)
    y = np.linspace(0.0, grid.ly, grid.ny)
    dy = np.diff(y)[:, None]
    cum = np.vstack([np.zeros((1, grid.nx)), np.cumsum(0.5 * (c[1:] + c[:-1]) * dy, axis=0)])
    profile = (cum / cum[-1]).ravel()
    xs = (xy[:, 0] - 0.5 * grid.lx) / (0.5 * grid.lx)
    bump = np.sin(np.pi * xy[:, 1] / grid.ly)
    u = np.empty((xy.shape[0], 2))
    u[:, 0] = ux * profile + 0.15 * uy * xs * bump
    u[:, 1] = uy * profile - 0.05 * ux**2 * bump
    return u


def unit_cell_laplacian(theta, grid: RectGrid = UNIT_CELL_GRID) -> np.ndarray:
    _, _, mu_i = param_map_unit_cell(*theta)
    xy = grid.coords()
    edges = grid.edges()
    k = _unit_cell_stiffness(0.5 * (xy[edges[:, 0]] + xy[edges[:, 1]]), mu_i) / MU_MATRIX
    return graph_laplacian(xy.shape[0], edges, k)


def _build_unit_cell(pts, seed, widths: str = "desk") -> SnapshotSet:
    names = ("xi", "eta")
    if widths == "published":
        return _published_width_set(pts, names, [("u", 7752, 3, 18580)], force_field="u")
    grid = UNIT_CELL_GRID
    fixed = np.concatenate([grid.row(0), grid.row(grid.ny - 1)])
    inactive = _dofs_of(fixed, 2)
    active = _complement(inactive, grid.nx * grid.ny * 2)
    vals, presc, forces = [], [], []
    for theta in pts:
        u = unit_cell_state(theta, grid)
        vals.append(u.ravel()[active])
        presc.append(u.ravel()[inactive])
        forces.append(pseudo_energy_forces(u, unit_cell_laplacian(theta, grid), inactive))
    f = Field("u", np.array(vals), grid.nx * grid.ny, 2, active, prescribed=_prescribed(presc), coords=grid.coords())
    return SnapshotSet(pts, names, [f], ForceBlock("u", np.array(forces)))


def unit_cell_forces_from_field(theta, full_u: np.ndarray, grid: RectGrid = UNIT_CELL_GRID) -> np.ndarray:
    """Closed-form force block of a unit-cell snapshot given its full field."""
    fixed = np.concatenate([grid.row(0), grid.row(grid.ny - 1)])
    return pseudo_energy_forces(np.asarray(full_u).reshape(-1, 2), unit_cell_laplacian(theta, grid),
                                _dofs_of(fixed, 2))


# plate with elliptic hole -------------------------------------------------------

PLATE_GRID = OGrid(10, 5, 5.0)
PLATE_TOP_DISPLACEMENT = 0.5


def generate_ellipse_morph(xi_samples, grid: OGrid = PLATE_GRID) -> SnapshotSet:
    """Nodal coordinates of the ring mesh around the hole for each ``xi``.

    Box nodes stay fixed; only the interior nodes are active.
    """
    xs = np.atleast_1d(np.asarray(xi_samples, dtype=np.float64))
    vals = []
    box = _dofs_of(grid.box_nodes(), 2)
    active = _complement(box, grid.n_nodes * 2)
    for xi in xs:
        a, b, _ = param_map_plate(float(xi), 0.0)
        vals.append(grid.coords(a, b).ravel()[active])
    ref = grid.coords(*param_map_plate(0.0, 0.0)[:2])
    f = Field("X", np.array(vals), grid.n_nodes, 2, active, prescribed=ref.ravel()[box], coords=ref)
    return SnapshotSet(xs[:, None], ("xi",), [f], provenance={"generator": "ellipse_morph"})


def _build_plate_morph(pts, seed, widths: str = "desk") -> SnapshotSet:
    names = ("xi", "eta")
    if widths == "published":
        return _published_width_set(pts, names, [("X", 1647, 3, 2871)])
    m = generate_ellipse_morph(pts[:, 0])
    return SnapshotSet(pts, names, m.fields)


def plate_state(theta, grid: OGrid = PLATE_GRID) -> tuple[np.ndarray, np.ndarray]:
    """Full nodal displacement ``(n_nodes, 2)`` and the reference coordinates."""
    a, b, alpha = param_map_plate(*theta)
    xy = grid.coords(a, b)
    x, y = xy[:, 0], xy[:, 1]
    big_u = PLATE_TOP_DISPLACEMENT
    s = (y + grid.half) / (2 * grid.half)
    bubble = 4.0 * s * (1.0 - s)
    two_alpha = np.deg2rad(2.0 * alpha)
    nu = 0.3 + 0.15 * np.cos(two_alpha)
    rho = np.sqrt((x / a) ** 2 + (y / b) ** 2)
    hole = np.exp(-(rho - 1.0) / 0.6) * bubble
    u = np.empty((xy.shape[0], 2))
    u[:, 0] = (-nu * big_u * x / (2 * grid.half) * bubble + 0.08 * np.sin(two_alpha) * big_u * bubble
               + 0.25 * big_u * hole * x / (a * rho) * (b / a) * (1 + 0.5 * np.cos(two_alpha)))
    u[:, 1] = big_u * s - 0.15 * big_u * hole * y / (b * rho) * (a / b)
    return u, xy


def plate_laplacian(theta, grid: OGrid = PLATE_GRID) -> np.ndarray:
    a, b, alpha = param_map_plate(*theta)
    xy = grid.coords(a, b)
    edges = grid.edges()
    d = xy[edges[:, 1]] - xy[edges[:, 0]]
    k = 1.0 + 0.5 * np.cos(np.arctan2(d[:, 1], d[:, 0]) - np.deg2rad(alpha)) ** 2
    return graph_laplacian(grid.n_nodes, edges, k)


def _build_plate(pts, seed, widths: str = "desk") -> SnapshotSet:
    names = ("xi", "eta")
    if widths == "published":
        return _published_width_set(pts, names, [("u", 1647, 3, 4641)], force_field="u")
    grid = PLATE_GRID
    fixed = np.concatenate([grid.side_nodes(-grid.half), grid.side_nodes(grid.half)])
    inactive = _dofs_of(fixed, 2)
    active = _complement(inactive, grid.n_nodes * 2)
    vals, forces = [], []
    for theta in pts:
        u, _ = plate_state(theta, grid)
        vals.append(u.ravel()[active])
        forces.append(pseudo_energy_forces(u, plate_laplacian(theta, grid), inactive))
    presc = np.zeros((grid.n_nodes, 2))
    presc[grid.side_nodes(grid.half), 1] = PLATE_TOP_DISPLACEMENT
    ref = grid.coords(*param_map_plate(0.0, 0.0)[:2])
    f = Field("u", np.array(vals), grid.n_nodes, 2, active, prescribed=presc.ravel()[inactive], coords=ref)
    return SnapshotSet(pts, names, [f], ForceBlock("u", np.array(forces)))


# thermo-mechanics ---------------------------------------------------------------

THERMO_GRID = OGrid(6, 4, 5.0)
THERMO_STEPS = 100
THERMO_TOP_TEMPERATURE = 50.0
THERMAL_EXPANSION = 0.005
_THERMO_MODES = 40


def _heat_profile(y: np.ndarray, t: float, diffusivity: float, length: float):
    """Temperature and its integral from 0 for a bar with T(0)=0 and a ramped far end.

    ``T(length, t) = T_top * t``; zero initial temperature.
    """
    rate = THERMO_TOP_TEMPERATURE
    temp = rate * t * y / length
    integral = rate * t * y**2 / (2 * length)
    for n in range(1, _THERMO_MODES + 1):
        k = n * np.pi / length
        b = -rate * 2.0 * (-1) ** (n + 1) / (n * np.pi)
        amp = b / (diffusivity * k * k) * (1.0 - np.exp(-diffusivity * k * k * t))
        temp = temp + amp * np.sin(k * y)
        integral = integral + amp * (1.0 - np.cos(k * y)) / k
    return temp, integral


def thermo_state(theta, grid: OGrid = THERMO_GRID, imperfection: bool = True, branch: float = 1.0):
    """Full displacement ``(n_nodes, 3)`` and temperature ``(n_nodes,)``."""
    xi, eta, t = theta
    _check_unit(t)
    conductivity, thickness = param_map_thermo(xi, eta)
    a, b, _ = param_map_plate(0.0, 0.0)
    xy = grid.coords(a, b)
    length = 2 * grid.half
    y = xy[:, 1] + grid.half
    temp, integral = _heat_profile(y, t, 0.4 * conductivity, length)
    temp_mean = _heat_profile(np.array([length]), t, 0.4 * conductivity, length)[1][0] / length
    rho = np.sqrt((xy[:, 0] / a) ** 2 + (xy[:, 1] / b) ** 2)
    temp = temp * (1.0 - 0.1 * np.exp(-(rho - 1.0)))
    s = y / length
    load = THERMAL_EXPANSION * temp_mean / (0.1 * thickness**2)
    excess = load - 1.0
    if imperfection:
        amplitude = 0.5 * np.sqrt(0.5 * (excess + np.sqrt(excess * excess + 4e-2)))
    else:
        amplitude = branch * 0.5 * np.sqrt(max(excess, 0.0))
    u = np.empty((xy.shape[0], 3))
    u[:, 0] = 0.5 * THERMAL_EXPANSION * temp * xy[:, 0]
    u[:, 1] = THERMAL_EXPANSION * (integral - s * temp_mean * length)
    u[:, 2] = amplitude * np.sin(np.pi * s) * (1.0 + 0.1 * xy[:, 0] / grid.half)
    return u, temp


def _prescribed(rows) -> np.ndarray:
    """Inactive values as one shared row when constant, else one row per snapshot."""
    rows = np.array(rows)
    return rows[0].copy() if np.all(rows == rows[:1]) else rows


def _build_thermo(pts, seed, widths: str = "desk", imperfection: bool = True) -> SnapshotSet:
    names = ("xi", "eta", "t")
    if widths == "published":
        return _published_width_set(pts, names, [("u", 1647, 3, 4641), ("T", 1647, 1, 1497)])
    grid = THERMO_GRID
    bottom, top = grid.side_nodes(-grid.half), grid.side_nodes(grid.half)
    u_inactive = np.union1d(_dofs_of(bottom, 3), _dofs_of(top, 3, components=[1]))
    u_active = _complement(u_inactive, grid.n_nodes * 3)
    t_inactive = _dofs_of(np.concatenate([bottom, top]), 1)
    t_active = _complement(t_inactive, grid.n_nodes)
    rng = make_rng(seed)
    branches = {}
    uv, tv, up, tp = [], [], [], []
    for theta in pts:
        key = (round(theta[0], 12), round(theta[1], 12))
        if key not in branches:
            branches[key] = 1.0 if imperfection else float(rng.choice([-1.0, 1.0]))
        u, temp = thermo_state(theta, grid, imperfection, branches[key])
        uv.append(u.ravel()[u_active])
        tv.append(temp[t_active])
        up.append(u.ravel()[u_inactive])
        tp.append(temp[t_inactive])
    ref = grid.coords(*param_map_plate(0.0, 0.0)[:2])
    fu = Field("u", np.array(uv), grid.n_nodes, 3, u_active, prescribed=_prescribed(up), coords=ref)
    ft = Field("T", np.array(tv), grid.n_nodes, 1, t_active, prescribed=_prescribed(tp), coords=ref)
    return SnapshotSet(pts, names, [fu, ft])


def _published_width_set(pts, names, specs, force_field: str | None = None) -> SnapshotSet:
    """Constant-zero fields at the benchmark widths; for shape plumbing only."""
    fields = []
    for name, n_nodes, n_dof, width in specs:
        fields.append(Field(name, np.zeros((len(pts), width)), n_nodes, n_dof, np.arange(width)))
    forces = None
    if force_field is not None:
        f = next(f for f in fields if f.name == force_field)
        forces = ForceBlock(force_field, np.zeros((len(pts), f.n_full - f.width)))
    return SnapshotSet(pts, names, fields, forces)


def _thermo_levels():
    return ((0.0, 1 / 3, 2 / 3, 1.0), (0.0, 1 / 3, 2 / 3, 1.0),
            tuple((np.arange(1, THERMO_STEPS + 1) / THERMO_STEPS).tolist()))


def _derived_unit_cell(theta):
    ux, uy, mu = param_map_unit_cell(theta[0], theta[1])
    return {"u_x": ux, "u_y": uy, "mu_I": mu}


def _derived_plate(theta):
    a, b, alpha = param_map_plate(theta[0], theta[1])
    return {"a": a, "b": b, "alpha": alpha}


def _derived_thermo(theta):
    lam, d = param_map_thermo(theta[0], theta[1])
    return {"Lambda": lam, "d": d, "t": float(theta[2])}


QUARTERS = (0.0, 0.25, 0.5, 0.75, 1.0)
THIRDS = (0.0, 1 / 3, 2 / 3, 1.0)

PRESETS: dict[str, ParametricProblem] = {
    "unit_cell": ParametricProblem("unit_cell", ("xi", "eta"), (QUARTERS, QUARTERS),
                                   _derived_unit_cell, _build_unit_cell),
    "plate": ParametricProblem("plate", ("xi", "eta"), (THIRDS, QUARTERS), _derived_plate, _build_plate),
    "plate_morph": ParametricProblem("plate_morph", ("xi", "eta"), (THIRDS, QUARTERS), _derived_plate,
                                     _build_plate_morph, regressor_columns=(0,)),
    "thermo": ParametricProblem("thermo", ("xi", "eta", "t"), _thermo_levels(), _derived_thermo, _build_thermo),
}


def get_problem(name: str) -> ParametricProblem:
    try:
        return PRESETS[name]
    except KeyError:
        raise ContractError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def subsample_time(s: SnapshotSet, every_k: int, time_name: str = "t") -> SnapshotSet:
    """Keep every ``k``-th time step (the k-th, 2k-th, ...) of each trajectory.

    Trajectories are the groups of snapshots sharing all non-time parameters.
    When ``k`` exceeds the trajectory length only the final step is kept.
    """
    if time_name not in s.param_names:
        raise DataError(f"snapshot set has no time parameter {time_name!r}")
    if int(every_k) < 1:
        raise ContractError("stride must be >= 1")
    k = int(every_k)
    tcol = s.param_names.index(time_name)
    others = [c for c in range(s.params.shape[1]) if c != tcol]
    groups: dict[tuple, list[int]] = {}
    for i, row in enumerate(s.params):
        groups.setdefault(tuple(row[others]), []).append(i)
    keep = []
    for rows in groups.values():
        rows = sorted(rows, key=lambda i: s.params[i, tcol])
        picked = rows[k - 1::k] or rows[-1:]
        keep.extend(picked)
    return s.subset(sorted(keep))


# ---------------------------------------------------------------------------
# snapshot files


def _snapshot_payload(s: SnapshotSet) -> tuple[dict, dict]:
    arrays = {"params": s.params}
    fields = []
    for f in s.fields:
        arrays[f"field/{f.name}/values"] = f.values
        arrays[f"field/{f.name}/active"] = f.active.astype(np.float64)
        if f.prescribed is not None:
            arrays[f"field/{f.name}/prescribed"] = f.prescribed
        if f.coords is not None:
            arrays[f"field/{f.name}/coords"] = f.coords
        fields.append({"name": f.name, "width": f.width, "n_nodes": f.n_nodes, "dofs_per_node": f.dofs_per_node,
                       "prescribed": f.prescribed is not None, "coords": f.coords is not None})
    forces = None
    if s.forces is not None:
        arrays["forces"] = s.forces.values
        forces = {"field": s.forces.field, "width": s.forces.width}
    header = {"kind": "snapshots", "n_snapshots": s.n_snapshots, "param_names": list(s.param_names),
              "fields": fields, "forces": forces, "provenance": s.provenance}
    return header, arrays


def write_snapshots(path, s: SnapshotSet) -> int:
    """Write ``s`` as a MORSNAP1 file; returns the payload CRC-32."""
    header, arrays = _snapshot_payload(s)
    return write_container(path, SNAPSHOT_MAGIC, header, arrays)


def snapshot_crc(s: SnapshotSet) -> int:
    header, arrays = _snapshot_payload(s)
    return int.from_bytes(encode(SNAPSHOT_MAGIC, header, arrays)[-4:], "little")


def read_snapshots(path) -> SnapshotSet:
    header, arrays = read_container(path, SNAPSHOT_MAGIC)
    try:
        if header.get("kind") != "snapshots":
            raise StructureError(f"container holds {header.get('kind')!r}, not snapshots")
        fields = []
        for meta in header["fields"]:
            name = meta["name"]
            fields.append(Field(name, arrays[f"field/{name}/values"], int(meta["n_nodes"]),
                                int(meta["dofs_per_node"]), as_index(arrays[f"field/{name}/active"], "active mask"),
                                arrays.get(f"field/{name}/prescribed"), arrays.get(f"field/{name}/coords")))
        forces = None
        if header["forces"] is not None:
            forces = ForceBlock(header["forces"]["field"], arrays["forces"])
        s = SnapshotSet(arrays["params"], tuple(header["param_names"]), fields, forces, header["provenance"])
    except (KeyError, TypeError, DataError) as exc:
        if isinstance(exc, StructureError):
            raise
        raise StructureError(f"snapshot header does not match payload: {exc}") from None
    if s.n_snapshots != header["n_snapshots"]:
        raise StructureError("declared snapshot count does not match the payload")
    return s
