"""Block preconditioners M1, M2, M3 and the pressure Schur-complement baseline SC.

All four are applied block upper-triangularly by default: the pressure block is
solved first, then the velocity block with the ``B'`` coupling term removed from
the residual.  ``mode='diagonal'`` drops the coupling (the Riesz-map form).
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .sparse import sparse_lu_factorize, to_csr

log = logging.getLogger(__name__)

KINDS = ("M1", "M2", "M3", "SC")
MODES = ("triangular", "diagonal")
EXPECTED_VARIANT = {"M1": "stabilized", "M2": "plain", "M3": "augmented", "SC": "plain"}


class PreconditionerOp:
    def __init__(self, kind, mode, velocity_matrix, B, pressure_scale=None, schur_matrix=None,
                 variant_mismatch=False):
        self.kind = kind
        self.mode = mode
        self.velocity_matrix = to_csr(velocity_matrix)
        self.velocity_solve = sparse_lu_factorize(self.velocity_matrix)
        self.B = to_csr(B)
        self.n_velocity = self.B.shape[1]
        self.n_pressure = self.B.shape[0]
        self.pressure_scale = pressure_scale          # z_p = pressure_scale * r_p
        self.schur_matrix = None if schur_matrix is None else to_csr(schur_matrix)
        self._schur_solve = None if schur_matrix is None else sparse_lu_factorize(self.schur_matrix)
        self.variant_mismatch = variant_mismatch

    @property
    def shape(self):
        n = self.n_velocity + self.n_pressure
        return (n, n)

    def pressure_solve(self, r_p: np.ndarray) -> np.ndarray:
        if self._schur_solve is not None:
            return self._schur_solve.solve(r_p)
        return self.pressure_scale * r_p

    def apply(self, residual: np.ndarray) -> np.ndarray:
        residual = np.asarray(residual, dtype=float)
        r_v, r_p = residual[: self.n_velocity], residual[self.n_velocity:]
        z_p = self.pressure_solve(r_p)
        if self.mode == "triangular":
            r_v = r_v - self.B.T @ z_p
        z_v = self.velocity_solve.solve(r_v)
        return np.concatenate([z_v, z_p])

    __call__ = apply

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, dtype=float)

    def pressure_block(self) -> sp.csr_matrix:
        """The matrix whose inverse is applied to the pressure residual."""
        if self.schur_matrix is not None:
            return self.schur_matrix
        return sp.diags(1.0 / self.pressure_scale).tocsr()

    def dense_inverse(self) -> np.ndarray:
        """Dense matrix of the block operator whose inverse ``apply`` realizes."""
        V = self.velocity_matrix.toarray()
        P = self.pressure_block().toarray()
        Bt = self.B.T.toarray() if self.mode == "triangular" else np.zeros((self.n_velocity, self.n_pressure))
        return np.block([[V, Bt], [np.zeros((self.n_pressure, self.n_velocity)), P]])


def make_preconditioner(system, kind: str, mode: str = "triangular") -> PreconditionerOp:
    """Factorize the velocity block of ``kind`` once; reusable for many residuals.

    M1: A + rD with pressure block Mp / r.  M2, M3: A + r B'Mp^-1 B with Mp / r.
    SC: A with the approximate Schur complement -B diag(A)^-1 B'.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown preconditioner {kind!r}; expected one of {KINDS}")
    if mode not in MODES:
        raise ValueError(f"unknown application mode {mode!r}")
    blocks, r = system.blocks, system.r
    mismatch = EXPECTED_VARIANT[kind] != system.variant
    if mismatch:
        log.info("preconditioner %s paired with %s system (expected %s)", kind, system.variant,
                 EXPECTED_VARIANT[kind])
    if kind == "M1":
        vel = blocks.A + r * blocks.D
    elif kind in ("M2", "M3"):
        vel = blocks.A + r * blocks.DQ
    else:
        vel = blocks.A
    if kind == "SC":
        dinv = 1.0 / blocks.A.diagonal()
        schur = -(blocks.B @ sp.diags(dinv) @ blocks.B.T)
        return PreconditionerOp(kind, mode, vel, blocks.B, schur_matrix=schur, variant_mismatch=mismatch)
    scale = r / blocks.mp_diag
    return PreconditionerOp(kind, mode, vel, blocks.B, pressure_scale=scale, variant_mismatch=mismatch)


def apply_preconditioner(p: PreconditionerOp, residual) -> np.ndarray:
    return p.apply(residual)
