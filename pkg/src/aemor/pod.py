"""Proper orthogonal decomposition and Galerkin-reduced linear solves.

Three small parametric SPD systems serve as full-order models:

``poisson1d``
    64 interior nodes of a linear-element bar with a conductivity jump and a
    movable Gaussian source.
``elasticity2d``
    Plane-strain Q4 elasticity on a clamped square with a stiff circular
    inclusion (220 DOFs).
``coupled2field``
    Two 1-D diffusion fields on different grids with symmetric coupling
    blocks; ``coupling=0`` decouples them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ContractError
from .linalg import as_matrix, solve_linear, svd_thin


@dataclass
class PODBasis:
    xi: np.ndarray
    singular_values: np.ndarray
    mean: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.xi.shape[1]

    @property
    def n_dim(self) -> int:
        return self.xi.shape[0]

    def project(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=np.float64)
        if self.mean is not None:
            phi = phi - (self.mean if phi.ndim == 1 else self.mean[:, None])
        return self.xi.T @ phi

    def lift(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        out = self.xi @ a
        if self.mean is not None:
            out = out + (self.mean if out.ndim == 1 else self.mean[:, None])
        return out

    def truncate(self, r: int) -> "PODBasis":
        if not 1 <= r <= self.rank:
            raise ContractError(f"cannot truncate a rank-{self.rank} basis to {r}")
        return PODBasis(self.xi[:, :r].copy(), self.singular_values, self.mean)


def pod_basis(snapshots, r: int, center: bool = False) -> PODBasis:
    """First ``r`` left singular vectors of the ``n_dim x n_S`` snapshot matrix.

    Each column is sign-normalized so its largest-magnitude entry is positive.
    ``singular_values`` keeps the full spectrum for error estimates.
    """
    phi = as_matrix(snapshots, "snapshots")
    if not 1 <= r <= min(phi.shape):
        raise ContractError(f"rank r={r} outside [1, {min(phi.shape)}] for a {phi.shape} snapshot matrix")
    mean = None
    if center:
        mean = phi.mean(axis=1)
        phi = phi - mean[:, None]
    u, s, _ = svd_thin(phi)
    xi = u[:, :r].copy()
    idx = np.argmax(np.abs(xi), axis=0)
    signs = np.sign(xi[idx, np.arange(r)])
    signs[signs == 0] = 1.0
    return PODBasis(xi * signs, s, mean)


def projection_error(snapshots, basis: PODBasis) -> float:
    """Frobenius norm of the snapshot residual after orthogonal projection."""
    phi = as_matrix(snapshots, "snapshots")
    return float(np.linalg.norm(phi - basis.lift(basis.project(phi))))


@dataclass
class LinearFullOrderModel:
    name: str
    n_dim: int
    param_dim: int
    assemble_fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    field_slices: list[slice] = field(default_factory=list)
    field_names: tuple[str, ...] = ()

    def assemble(self, theta, load_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=np.float64).ravel()
        if theta.shape != (self.param_dim,):
            raise ContractError(f"{self.name} expects {self.param_dim} parameters, got {theta.shape[0]}")
        k, r = self.assemble_fn(theta)
        return k, load_scale * r

    def solve(self, theta, load_scale: float = 1.0) -> np.ndarray:
        return solve_linear(*self.assemble(theta, load_scale))

    def snapshots(self, thetas) -> np.ndarray:
        """Snapshot matrix, one full solve per column."""
        return np.column_stack([self.solve(t) for t in np.atleast_2d(thetas)])


def reduce_and_solve(fom: LinearFullOrderModel, basis: PODBasis, theta, load_scale: float = 1.0):
    """Galerkin projection ``(Xi^T K Xi) a = Xi^T r``; returns ``(a, Xi a)``."""
    if basis.n_dim != fom.n_dim:
        raise ContractError(f"basis dimension {basis.n_dim} != model dimension {fom.n_dim}")
    k, r = fom.assemble(theta, load_scale)
    rhs = r if basis.mean is None else r - k @ basis.mean
    a = solve_linear(basis.xi.T @ k @ basis.xi, basis.xi.T @ rhs)
    return a, basis.lift(a)


def galerkin_residual(fom: LinearFullOrderModel, basis: PODBasis, theta, a, load_scale: float = 1.0) -> np.ndarray:
    k, r = fom.assemble(theta, load_scale)
    return basis.xi.T @ (k @ basis.lift(a) - r)


@dataclass
class BlockBasis:
    bases: list[PODBasis]
    slices: list[slice]

    def __post_init__(self):
        if len(self.bases) != len(self.slices):
            raise ContractError("one basis per field slice required")
        for b, s in zip(self.bases, self.slices):
            if b.n_dim != s.stop - s.start:
                raise ContractError(f"basis dimension {b.n_dim} does not match field slice {s}")
            if b.mean is not None:
                raise ContractError("block reduction expects uncentered bases")

    def matrix(self) -> np.ndarray:
        return scipy.linalg.block_diag(*(b.xi for b in self.bases))


def block_reduce_and_solve(fom: LinearFullOrderModel, blocks: BlockBasis, theta,
                           load_scale: float = 1.0) -> list[np.ndarray]:
    """Reduce the coupled system with a block-diagonal field-wise basis and back-project per field."""
    expected = fom.field_slices or [slice(0, fom.n_dim)]
    if [(s.start, s.stop) for s in blocks.slices] != [(s.start, s.stop) for s in expected]:
        raise ContractError(f"block partition {blocks.slices} does not match model partition {expected}")
    xi = blocks.matrix()
    k, r = fom.assemble(theta, load_scale)
    a = solve_linear(xi.T @ k @ xi, xi.T @ r)
    phi = xi @ a
    return [phi[s] for s in blocks.slices]


def block_basis_from_snapshots(fom: LinearFullOrderModel, snapshots, ranks) -> BlockBasis:
    phi = as_matrix(snapshots, "snapshots")
    return BlockBasis([pod_basis(phi[s], r) for s, r in zip(fom.field_slices, ranks)], list(fom.field_slices))


# -- built-in full-order models ----------------------------------------------

def _poisson1d(n: int = 64) -> LinearFullOrderModel:
    h = 1.0 / (n + 1)
    x = np.linspace(h, 1.0 - h, n)
    mids = (np.arange(n + 1) + 0.5) * h

    def assemble(theta):
        contrast, source = theta
        kappa = np.where(mids > 0.5, 1.0 + 9.0 * contrast, 1.0)
        ke = kappa / h
        k = np.diag(ke[:-1] + ke[1:]) - np.diag(ke[1:-1], 1) - np.diag(ke[1:-1], -1)
        centre = 0.2 + 0.6 * source
        r = 10.0 * h * np.exp(-(((x - centre) / 0.1) ** 2))
        return k, r

    return LinearFullOrderModel("poisson1d", n, 2, assemble)


def _q4_plane_strain(x0, y0, dx, dy, young, nu=0.3):
    c = young / ((1 + nu) * (1 - 2 * nu)) * np.array(
        [[1 - nu, nu, 0.0], [nu, 1 - nu, 0.0], [0.0, 0.0, (1 - 2 * nu) / 2]])
    ke = np.zeros((8, 8))
    g = 1.0 / np.sqrt(3.0)
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    for s in (-g, g):
        for t in (-g, g):
            dn_ds = np.array([0.25 * cx * (1 + cy * t) for cx, cy in corners])
            dn_dt = np.array([0.25 * cy * (1 + cx * s) for cx, cy in corners])
            dn_dx = dn_ds * 2.0 / dx
            dn_dy = dn_dt * 2.0 / dy
            b = np.zeros((3, 8))
            b[0, 0::2] = dn_dx
            b[1, 1::2] = dn_dy
            b[2, 0::2] = dn_dy
            b[2, 1::2] = dn_dx
            ke += b.T @ c @ b * (dx * dy / 4.0)
    return ke


def _elasticity2d(ne: int = 10) -> LinearFullOrderModel:
    nn = ne + 1
    h = 1.0 / ne
    node = lambda i, j: j * nn + i  # noqa: E731
    free_nodes = [node(i, j) for j in range(1, nn) for i in range(nn)]
    dof_map = -np.ones(2 * nn * nn, dtype=int)
    for k, n in enumerate(free_nodes):
        dof_map[2 * n] = 2 * k
        dof_map[2 * n + 1] = 2 * k + 1
    n_dim = 2 * len(free_nodes)
    elements = []
    for j in range(ne):
        for i in range(ne):
            conn = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]
            dofs = np.array([[2 * n, 2 * n + 1] for n in conn]).ravel()
            inside = (i + 0.5 - ne / 2) ** 2 + (j + 0.5 - ne / 2) ** 2 <= (0.25 * ne) ** 2
            elements.append((dof_map[dofs], inside))
    ke_unit = _q4_plane_strain(0, 0, h, h, 1.0)
    top = [node(i, ne) for i in range(nn)]

    def assemble(theta):
        contrast, angle = theta
        k = np.zeros((n_dim, n_dim))
        for dofs, inside in elements:
            young = 1.0 + 9.0 * contrast if inside else 1.0
            sel = dofs >= 0
            d = dofs[sel]
            k[np.ix_(d, d)] += young * ke_unit[np.ix_(sel, sel)]
        r = np.zeros(n_dim)
        phi = 0.5 * np.pi * angle
        weights = np.full(nn, h)
        weights[[0, -1]] = h / 2
        for n, wgt in zip(top, weights):
            r[dof_map[2 * n]] += 0.1 * np.sin(phi) * wgt
            r[dof_map[2 * n + 1]] += -0.1 * np.cos(phi) * wgt
        return k, r

    return LinearFullOrderModel("elasticity2d", n_dim, 2, assemble)


def _laplacian(n: int, kappa: float) -> np.ndarray:
    h = 1.0 / (n + 1)
    return kappa / h**2 * (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))


def _coupled2field(n1: int = 40, n2: int = 24, coupling: float = 1.0) -> LinearFullOrderModel:
    x1 = np.linspace(1, n1, n1) / (n1 + 1)
    x2 = np.linspace(1, n2, n2) / (n2 + 1)
    # linear interpolation of field-2 nodes onto field-1 nodes, rows normalized
    b = np.maximum(0.0, 1.0 - np.abs(x1[:, None] - x2[None, :]) * (n2 + 1))
    b /= np.linalg.norm(b, 2)
    shift = 10.0
    c = 0.2 * shift * coupling

    def assemble(theta):
        stiff, source = theta
        a = _laplacian(n1, 1.0 + 4.0 * stiff) + shift * np.eye(n1)
        d = _laplacian(n2, 1.0 + 4.0 * (1.0 - stiff)) + shift * np.eye(n2)
        k = np.block([[a, c * b], [c * b.T, d]])
        centre = 0.2 + 0.6 * source
        r1 = np.exp(-(((x1 - centre) / 0.15) ** 2)) * 10.0
        r2 = np.exp(-(((x2 - 0.8 + 0.6 * stiff) / 0.15) ** 2)) * 100.0
        return k, np.concatenate([r1, r2])

    return LinearFullOrderModel("coupled2field", n1 + n2, 2, assemble,
                                [slice(0, n1), slice(n1, n1 + n2)], ("u", "T"))


BUILTIN_FOMS = {"poisson1d": _poisson1d, "elasticity2d": _elasticity2d, "coupled2field": _coupled2field}


def builtin_fom(name: str, **kwargs) -> LinearFullOrderModel:
    try:
        factory = BUILTIN_FOMS[name]
    except KeyError:
        raise ContractError(f"unknown full-order model {name!r}; choose from {sorted(BUILTIN_FOMS)}") from None
    return factory(**kwargs)


def relative_error(approx, exact) -> float:
    exact = np.asarray(exact, dtype=np.float64)
    return float(np.linalg.norm(np.asarray(approx) - exact) / max(np.linalg.norm(exact), 1e-300))


def rank_sweep(fom: LinearFullOrderModel, train_thetas, test_thetas, ranks=None) -> list[tuple[int, float]]:
    """Mean relative Galerkin error at ``test_thetas`` for each basis rank."""
    phi = fom.snapshots(train_thetas)
    full = pod_basis(phi, min(phi.shape))
    ranks = ranks or list(range(1, full.rank + 1))
    exact = [fom.solve(t) for t in np.atleast_2d(test_thetas)]
    out = []
    for r in ranks:
        basis = full.truncate(r)
        errs = [relative_error(reduce_and_solve(fom, basis, t)[1], e) for t, e in zip(np.atleast_2d(test_thetas), exact)]
        out.append((r, float(np.mean(errs))))
    return out


def field_balanced_error(fom: LinearFullOrderModel, approx, exact) -> float:
    """Mean of the per-field relative errors, so small-magnitude fields count equally."""
    slices = fom.field_slices or [slice(0, fom.n_dim)]
    return float(np.mean([relative_error(np.asarray(approx)[s], np.asarray(exact)[s]) for s in slices]))


def block_vs_monolithic(fom: LinearFullOrderModel, train_thetas, test_thetas, total_rank: int) -> tuple[float, float]:
    """Mean field-balanced error of block and monolithic reduction at equal total rank.

    The block ranks split ``total_rank`` evenly between the fields.
    """
    if len(fom.field_slices) < 2:
        raise ContractError(f"{fom.name} has no field partition")
    phi = fom.snapshots(train_thetas)
    nf = len(fom.field_slices)
    ranks = [total_rank // nf + (1 if i < total_rank % nf else 0) for i in range(nf)]
    blocks = block_basis_from_snapshots(fom, phi, ranks)
    mono = pod_basis(phi, total_rank)
    e_block, e_mono = [], []
    for t in np.atleast_2d(test_thetas):
        exact = fom.solve(t)
        e_block.append(field_balanced_error(fom, np.concatenate(block_reduce_and_solve(fom, blocks, t)), exact))
        e_mono.append(field_balanced_error(fom, reduce_and_solve(fom, mono, t)[1], exact))
    return float(np.mean(e_block)), float(np.mean(e_mono))
