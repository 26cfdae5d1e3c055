"""Vectorized assembly of the bilinear forms and load vectors of the coupled problem."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import BARYCENTRIC, WEIGHTS, barycentric_gradients, p2_barycentric_derivatives, p2_values
from .space import CoupledSpace


@dataclass(frozen=True)
class MaterialParams:
    rho_f: float = 1.0
    rho_s: float = 1.0
    mu_f: float = 1.0
    mu_s: float = 1.0
    lambda_s: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        for name in ("rho_f", "rho_s", "mu_f", "mu_s", "lambda_s", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


_PHI = p2_values(BARYCENTRIC)                       # (nq, 6)
_DPHI = p2_barycentric_derivatives(BARYCENTRIC)     # (nq, 6, 3)


@dataclass(frozen=True)
class ElementData:
    """Geometry and basis data at quadrature points for a set of elements."""
    elems: np.ndarray
    area: np.ndarray          # (E,)
    grad: np.ndarray          # (E, nq, 6, 2) physical gradients of scalar P2 basis
    xq: np.ndarray            # (E, nq, 2) physical quadrature points

    @property
    def wq(self) -> np.ndarray:
        return self.area[:, None] * WEIGHTS[None, :]

    def vector_grad(self) -> np.ndarray:
        """(E, nq, 12, 2, 2): row c of grad(phi_i e_c) is grad(phi_i)."""
        E, nq = self.grad.shape[:2]
        G = np.zeros((E, nq, 6, 2, 2, 2))
        G[:, :, :, 0, 0, :] = self.grad
        G[:, :, :, 1, 1, :] = self.grad
        return G.reshape(E, nq, 12, 2, 2)


def element_data(space: CoupledSpace, elems: np.ndarray) -> ElementData:
    mesh = space.mesh
    p = mesh.nodes[mesh.triangles[elems]]
    glam, area = barycentric_gradients(p)
    grad = np.einsum("qik,ekd->eqid", _DPHI, glam)
    xq = np.einsum("qk,ekd->eqd", BARYCENTRIC, p)
    return ElementData(np.asarray(elems), area, grad, xq)


def _scatter(space: CoupledSpace, elems, ke, shape=None) -> sp.csr_matrix:
    dofs = space.element_dofs(elems)
    n = space.n_velocity
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    M = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=shape or (n, n)).tocsr()
    M.sum_duplicates()
    return M


def _symmetrize(M: sp.csr_matrix) -> sp.csr_matrix:
    S = ((M + M.T) * 0.5).tocsr()
    S.sort_indices()
    return S


def _mass_local(ed: ElementData) -> np.ndarray:
    m = np.einsum("q,qi,qj->ij", WEIGHTS, _PHI, _PHI)
    ke = np.zeros((len(ed.area), 6, 2, 6, 2))
    ke[:, :, 0, :, 0] = ed.area[:, None, None] * m
    ke[:, :, 1, :, 1] = ed.area[:, None, None] * m
    return ke.reshape(-1, 12, 12)


def _strain_local(ed: ElementData) -> np.ndarray:
    G = ed.vector_grad()
    eps = 0.5 * (G + G.swapaxes(-1, -2))
    return np.einsum("eq,eqiab,eqjab->eij", ed.wq, eps, eps)


def _divdiv_local(ed: ElementData) -> np.ndarray:
    div = np.trace(ed.vector_grad(), axis1=-2, axis2=-1)
    return np.einsum("eq,eqi,eqj->eij", ed.wq, div, div)


@dataclass(frozen=True, eq=False)
class FormPieces:
    """Parameter-free matrices; a(.,.) is a weighted sum of these."""
    space: CoupledSpace
    mass_f: sp.csr_matrix
    mass_s: sp.csr_matrix
    strain_f: sp.csr_matrix
    strain_s: sp.csr_matrix
    divdiv_s: sp.csr_matrix
    divdiv_f: sp.csr_matrix

    def a(self, params: MaterialParams) -> sp.csr_matrix:
        A = (params.rho_f / params.k) * self.mass_f + (params.rho_s / params.k) * self.mass_s \
            + params.mu_f * self.strain_f \
            + params.k * (params.mu_s * self.strain_s + params.lambda_s * self.divdiv_s)
        return _symmetrize(A.tocsr())


def assemble_pieces(space: CoupledSpace) -> FormPieces:
    mesh = space.mesh
    ef, es = mesh.fluid_triangles, mesh.structure_triangles
    df, ds = element_data(space, ef), element_data(space, es)
    return FormPieces(
        space,
        mass_f=_symmetrize(_scatter(space, ef, _mass_local(df))),
        mass_s=_symmetrize(_scatter(space, es, _mass_local(ds))),
        strain_f=_symmetrize(_scatter(space, ef, _strain_local(df))),
        strain_s=_symmetrize(_scatter(space, es, _strain_local(ds))),
        divdiv_s=_symmetrize(_scatter(space, es, _divdiv_local(ds))),
        divdiv_f=_symmetrize(_scatter(space, ef, _divdiv_local(df))),
    )


def assemble_a(space: CoupledSpace, params: MaterialParams) -> sp.csr_matrix:
    return assemble_pieces(space).a(params)


def assemble_d(space: CoupledSpace) -> sp.csr_matrix:
    ef = space.mesh.fluid_triangles
    return _symmetrize(_scatter(space, ef, _divdiv_local(element_data(space, ef))))


def assemble_b(space: CoupledSpace) -> sp.csr_matrix:
    """Rows: fluid triangles (P0); entries are integrals of div(phi) over each triangle."""
    ef = space.mesh.fluid_triangles
    ed = element_data(space, ef)
    div = np.trace(ed.vector_grad(), axis1=-2, axis2=-1)        # (E, nq, 12)
    vals = np.einsum("eq,eqi->ei", ed.wq, div)
    rows = np.repeat(space.element_pressure[ef], 12)
    cols = space.element_dofs(ef).ravel()
    B = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(space.n_pressure, space.n_velocity)).tocsr()
    B.sum_duplicates()
    return B


def assemble_mp(space: CoupledSpace) -> sp.dia_matrix:
    ef = space.mesh.fluid_triangles
    return sp.diags(space.mesh.signed_areas()[ef]).tocsr()


@dataclass(frozen=True, eq=False)
class AssembledBlocks:
    A: sp.csr_matrix
    B: sp.csr_matrix
    D: sp.csr_matrix
    Mp: sp.csr_matrix

    @cached_property
    def mp_diag(self) -> np.ndarray:
        return self.Mp.diagonal()

    @cached_property
    def DQ(self) -> sp.csr_matrix:
        """Explicit B' Mp^-1 B (sparse for P0 pressure)."""
        return _symmetrize((self.B.T @ sp.diags(1.0 / self.mp_diag) @ self.B).tocsr())

    def dq_operator(self) -> spla.LinearOperator:
        return assemble_dq_apply(self)

    @property
    def n_velocity(self) -> int:
        return self.A.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.B.shape[0]


def assemble_blocks(space: CoupledSpace, params: MaterialParams,
                    pieces: Optional[FormPieces] = None) -> AssembledBlocks:
    pieces = pieces or assemble_pieces(space)
    return AssembledBlocks(A=pieces.a(params), B=assemble_b(space), D=pieces.divdiv_f,
                           Mp=assemble_mp(space))


def assemble_dq_apply(blocks: AssembledBlocks) -> spla.LinearOperator:
    """v -> B'(Mp^-1 (B v)) without forming the product."""
    B, inv = blocks.B, 1.0 / blocks.mp_diag
    n = B.shape[1]
    return spla.LinearOperator((n, n), matvec=lambda v: B.T @ (inv * (B @ np.ravel(v))),
                               dtype=float)


# ---------------------------------------------------------------------------
# load vector


def assemble_rhs(space: CoupledSpace, params: MaterialParams, v_prev=None, u_s_prev=None,
                 mesh_velocity=None, g_f=(0.0, 0.0), g_s=(0.0, 0.0),
                 pieces: Optional[FormPieces] = None) -> np.ndarray:
    """Velocity load vector of one modified-GCE step on the current mesh.

    Fluid part:  rho_f v^n / k + g_f - rho_f ((v^n - w) . grad) v^n
    Structure:   rho_s v^n / k + g_s - P_s(u_s^n)   (J taken as 1)
    ``mesh_velocity`` w is given per mesh vertex (N, 2) and interpolated linearly.
    """
    n = space.n_velocity
    v_prev = np.zeros(n) if v_prev is None else np.asarray(v_prev, dtype=float)
    u_s_prev = np.zeros(n) if u_s_prev is None else np.asarray(u_s_prev, dtype=float)
    mesh = space.mesh
    rhs = np.zeros(n)
    ef, es = mesh.fluid_triangles, mesh.structure_triangles
    pieces = pieces or assemble_pieces(space)

    if np.any(v_prev):
        rhs += (params.rho_f / params.k) * (pieces.mass_f @ v_prev)
        rhs += (params.rho_s / params.k) * (pieces.mass_s @ v_prev)
    rhs += load_vector(space, ef, g_f) + load_vector(space, es, g_s)
    if np.any(u_s_prev):
        rhs -= params.mu_s * (pieces.strain_s @ u_s_prev) + params.lambda_s * (pieces.divdiv_s @ u_s_prev)
    if np.any(v_prev) and len(ef):
        rhs -= params.rho_f * convection_vector(space, v_prev, mesh_velocity)
    return rhs


def load_vector(space: CoupledSpace, elems: np.ndarray, g) -> np.ndarray:
    """Integral of a constant vector ``g`` against the P2 basis on ``elems``."""
    g = np.asarray(g, dtype=float)
    n = space.n_velocity
    if len(elems) == 0 or not np.any(g):
        return np.zeros(n)
    area = space.mesh.signed_areas()[elems]
    w = WEIGHTS @ _PHI                                      # (6,)
    vals = area[:, None, None] * w[None, :, None] * g[None, None, :]
    out = np.zeros(n)
    np.add.at(out, space.element_dofs(elems).ravel(), vals.ravel())
    return out


def convection_vector(space: CoupledSpace, v, w=None) -> np.ndarray:
    """Integral of ((v - w) . grad) v . phi over the fluid elements."""
    ef = space.mesh.fluid_triangles
    ed = element_data(space, ef)
    vloc = v[space.element_dofs(ef)].reshape(len(ef), 6, 2)
    vq = np.einsum("qi,eic->eqc", _PHI, vloc)
    gradv = np.einsum("eqid,eic->eqcd", ed.grad, vloc)          # d v_c / d x_d
    if w is not None:
        w = np.asarray(w, dtype=float)
        wq = np.einsum("qk,ekc->eqc", BARYCENTRIC, w[space.mesh.triangles[ef]])
        adv = vq - wq
    else:
        adv = vq
    conv = np.einsum("eqd,eqcd->eqc", adv, gradv)
    vals = np.einsum("eq,qi,eqc->eic", ed.wq, _PHI, conv)
    out = np.zeros(space.n_velocity)
    np.add.at(out, space.element_dofs(ef).ravel(), vals.ravel())
    return out


# ---------------------------------------------------------------------------
# Dirichlet elimination


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """Blocks restricted to free velocity DOFs plus the data needed to lift back."""
    blocks: AssembledBlocks
    rhs: np.ndarray              # velocity load with the A-lifting applied
    rhs_p: np.ndarray            # -B_D g
    free: np.ndarray
    fixed: np.ndarray
    values: np.ndarray
    n_full: int
    lift_d: np.ndarray           # D_fD g
    lift_dq: np.ndarray          # DQ_fD g

    def expand(self, v_free: np.ndarray) -> np.ndarray:
        v = np.zeros(self.n_full)
        v[self.free] = v_free
        v[self.fixed] = self.values
        return v


def apply_dirichlet(blocks: AssembledBlocks, rhs, dirichlet_dofs, boundary_values=None) -> ReducedProblem:
    """Symmetric elimination of ``dirichlet_dofs``.

    ``boundary_values`` is an array aligned with ``dirichlet_dofs``, a mapping
    ``{dof: value}`` (missing DOFs default to zero), or None for homogeneous data.
    """
    n = blocks.n_velocity
    fixed = np.unique(np.asarray(dirichlet_dofs, dtype=np.int64))
    values = np.zeros(len(fixed))
    if isinstance(boundary_values, Mapping):
        pos = {int(d): i for i, d in enumerate(fixed)}
        for d, val in boundary_values.items():
            if int(d) not in pos:
                raise ValueError(f"boundary value given for non-Dirichlet DOF {d}")
            values[pos[int(d)]] = val
    elif boundary_values is not None:
        values = np.asarray(boundary_values, dtype=float).reshape(len(fixed))
    mask = np.ones(n, bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)

    A, B, D = blocks.A, blocks.B, blocks.D
    Af = A[free][:, free]
    Bf = B[:, free]
    Df = D[free][:, free]
    reduced = AssembledBlocks(A=Af.tocsr(), B=Bf.tocsr(), D=Df.tocsr(), Mp=blocks.Mp)
    rhs = np.asarray(rhs, dtype=float)
    if np.any(values):
        rhs_f = rhs[free] - A[free][:, fixed] @ values
        bd = B[:, fixed] @ values
        rhs_p = -bd
        lift_d = D[free][:, fixed] @ values
        lift_dq = Bf.T @ (bd / blocks.mp_diag)
    else:
        rhs_f = rhs[free].copy()
        rhs_p = np.zeros(blocks.n_pressure)
        lift_d = np.zeros(len(free))
        lift_dq = np.zeros(len(free))
    return ReducedProblem(reduced, rhs_f, rhs_p, free, fixed, values, n, lift_d, lift_dq)


def export_coo(matrix, path) -> None:
    """Write ``row col value`` lines (0-based, 17 significant digits)."""
    M = sp.coo_matrix(matrix)
    order = np.lexsort((M.col, M.row))
    with open(path, "w") as f:
        for i in order:
            f.write(f"{M.row[i]} {M.col[i]} {M.data[i]:.17g}\n")


def read_coo(path, shape=None) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape or (0, 0))
    rows, cols = data[:, 0].astype(np.int64), data[:, 1].astype(np.int64)
    if shape is None:
        shape = (rows.max() + 1, cols.max() + 1)
    return sp.coo_matrix((data[:, 2], (rows, cols)), shape=shape).tocsr()


def assemble_h1_gram(space: CoupledSpace) -> sp.csr_matrix:
    """Gram matrix of the broken H1 norm ||v_f||_1^2 + ||v_s||_1^2."""
    elems = np.arange(space.mesh.n_triangles)
    ed = element_data(space, elems)
    G = ed.vector_grad()
    ke = _mass_local(ed) + np.einsum("eq,eqiab,eqjab->eij", ed.wq, G, G)
    return _symmetrize(_scatter(space, elems, ke))
