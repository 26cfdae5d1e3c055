"""Dense numerical checks of the well-posedness theory on small instances.

Everything here forms dense matrices, so a size guard rejects problems above
``DENSE_LIMIT`` unknowns.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .femcore import AssembledBlocks, CoupledSpace, MaterialParams, ReducedProblem, assemble_blocks, assemble_h1_gram
from .krylov import make_preconditioner
from .oracle import norm_pieces

DENSE_LIMIT = 3000
NORM_KINDS = ("V", "V_Q", "H1")
ZERO_EIG_THRESHOLD = 1e-10


class DenseSizeError(ValueError):
    """Problem too large for the dense eigensolvers."""


def _guard(n: int, limit: int = DENSE_LIMIT):
    if n > limit:
        raise DenseSizeError(f"{n} unknowns exceed the dense limit {limit}")


@dataclass
class InfSupReport:
    beta: float
    norm_kind: str
    r: float
    level: Optional[int] = None
    params: Optional[MaterialParams] = None
    zero_modes: int = 0
    eigenvalues: np.ndarray = field(default=None, repr=False)

    def row(self) -> dict:
        out = {"norm": self.norm_kind, "level": self.level, "r": self.r, "beta": self.beta,
               "zero_modes": self.zero_modes}
        out.update(_param_fields(self.params))
        return out


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    condition: float
    kind: str
    mode: str
    variant: str = ""
    r: float = float("nan")
    params: Optional[MaterialParams] = None
    max_imag: float = 0.0
    beta: Optional[float] = None
    brezzi: Optional[dict] = None

    @property
    def within_brezzi(self) -> Optional[bool]:
        return None if self.brezzi is None else bool(self.brezzi["ok"])

    def row(self) -> dict:
        ev = self.eigenvalues
        out = {"kind": self.kind, "mode": self.mode, "variant": self.variant, "r": self.r,
               "condition": self.condition, "min_abs": float(np.abs(ev).min()),
               "max_abs": float(np.abs(ev).max()), "max_imag": self.max_imag,
               "beta": self.beta if self.beta is not None else "",
               "brezzi_ok": "" if self.brezzi is None else int(self.brezzi["ok"])}
        out.update(_param_fields(self.params))
        return out


def _param_fields(params: Optional[MaterialParams]) -> dict:
    if params is None:
        return {}
    return {key: val for key, val in asdict(params).items()}


def _blocks_of(obj) -> AssembledBlocks:
    if isinstance(obj, ReducedProblem):
        return obj.blocks
    if hasattr(obj, "blocks") and isinstance(obj.blocks, AssembledBlocks):
        return obj.blocks
    return obj


def velocity_gram(blocks: AssembledBlocks, r: float, norm_kind: str, gram=None) -> np.ndarray:
    """Dense Gram matrix of the chosen velocity norm."""
    if norm_kind == "V":
        return (blocks.A + r * blocks.D).toarray()
    if norm_kind == "V_Q":
        return (blocks.A + r * blocks.DQ).toarray()
    if norm_kind == "H1":
        if gram is None:
            raise ValueError("the H1 norm needs its Gram matrix (see h1_gram)")
        G = gram.toarray() if sp.issparse(gram) else np.asarray(gram, dtype=float)
        if G.shape != (blocks.n_velocity,) * 2:
            raise ValueError(f"H1 Gram has shape {G.shape}, blocks have {blocks.n_velocity} velocity DOFs")
        return G
    raise ValueError(f"unknown norm {norm_kind!r}; expected one of {NORM_KINDS}")


def h1_gram(space: CoupledSpace, problem: Optional[ReducedProblem] = None) -> sp.csr_matrix:
    """H1 Gram matrix, restricted to the free DOFs of ``problem`` if given."""
    G = assemble_h1_gram(space)
    if problem is not None:
        G = G[problem.free][:, problem.free].tocsr()
    return G


def infsup_constant(blocks, r: float, norm_kind: str = "V", gram=None, level: Optional[int] = None,
                    params: Optional[MaterialParams] = None, limit: int = DENSE_LIMIT) -> InfSupReport:
    """Discrete inf-sup constant of ``b`` in the velocity norm ``norm_kind`` and Q = r^{-1/2} L2.

    beta^2 is the smallest nonzero eigenvalue of
    ``(B N^{-1} B') q = lambda (r^{-1} Mp) q``.  Eigenvalues below
    1e-10 * lambda_max count as the kernel (constant pressures when no
    boundary lets mass out) and are reported in ``zero_modes``.
    """
    blocks = _blocks_of(blocks)
    _guard(blocks.n_velocity + blocks.n_pressure, limit)
    N = velocity_gram(blocks, r, norm_kind, gram)
    try:
        cho = sla.cho_factor(N)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"velocity Gram matrix ({norm_kind}) is not positive definite") from exc
    B = blocks.B.toarray()
    S = B @ sla.cho_solve(cho, B.T)
    S = 0.5 * (S + S.T)
    ev = sla.eigh(S, np.diag(blocks.mp_diag / r), eigvals_only=True)
    zero = ev <= ZERO_EIG_THRESHOLD * max(ev.max(), 0.0)
    nonzero = ev[~zero]
    if len(nonzero) == 0:
        raise ValueError("B has no nonzero singular values")
    return InfSupReport(beta=float(math.sqrt(nonzero.min())), norm_kind=norm_kind, r=float(r), level=level,
                        params=params, zero_modes=int(zero.sum()), eigenvalues=ev)


def brezzi_intervals(beta: float, alpha: float = 1.0, continuity: float = 1.0) -> dict:
    """Eigenvalue intervals of a Riesz-preconditioned saddle operator.

    With coercivity ``alpha`` and continuity 1 of the velocity form and the
    ``b`` bounds ``beta <= |b| <= continuity``, eigenvalues lie in
    ``[(1 - sqrt(1+4c^2))/2, (alpha - sqrt(alpha^2+4 beta^2))/2]`` and
    ``[alpha, (1 + sqrt(1+4c^2))/2]``.
    """
    c2 = continuity ** 2
    return {
        "negative": ((1.0 - math.sqrt(1.0 + 4.0 * c2)) / 2.0, (alpha - math.sqrt(alpha ** 2 + 4.0 * beta ** 2)) / 2.0),
        "positive": (alpha, (1.0 + math.sqrt(1.0 + 4.0 * c2)) / 2.0),
    }


def check_brezzi(eigenvalues: np.ndarray, beta: float, tol: float = 1e-6) -> dict:
    iv = brezzi_intervals(beta)
    ev = np.real(np.asarray(eigenvalues))
    neg, pos = ev[ev < 0], ev[ev >= 0]
    ok_neg = bool(np.all(neg >= iv["negative"][0] - tol) and np.all(neg <= iv["negative"][1] + tol))
    ok_pos = bool(np.all(pos >= iv["positive"][0] - tol) and np.all(pos <= iv["positive"][1] + tol))
    return {"ok": ok_neg and ok_pos, "negative_ok": ok_neg, "positive_ok": ok_pos, "intervals": iv,
            "observed_negative": (float(neg.min()), float(neg.max())) if len(neg) else None,
            "observed_positive": (float(pos.min()), float(pos.max())) if len(pos) else None}


def preconditioned_spectrum(system, kind: str = "M1", mode: str = "diagonal", operator=None,
                            params: Optional[MaterialParams] = None, check_intervals: Optional[bool] = None,
                            tol: float = 1e-6, limit: int = DENSE_LIMIT) -> SpectrumReport:
    """Eigenvalues of ``P^{-1} K`` where ``P`` is the block operator inverted by ``kind``.

    ``operator`` replaces ``K`` (e.g. the preconditioner's own block matrix as a
    self-test).  M1 in diagonal mode on the stabilized system uses the
    symmetric-definite solver and, by default, the Brezzi interval check.
    """
    n = system.blocks.n_velocity + system.blocks.n_pressure
    _guard(n, limit)
    prec = make_preconditioner(system, kind, mode)
    Pmat = prec.dense_inverse()
    K = system.matrix.toarray() if operator is None else (
        operator.toarray() if sp.issparse(operator) else np.asarray(operator, dtype=float))
    symmetric = mode == "diagonal" and kind != "SC" and np.allclose(K, K.T, rtol=0, atol=1e-14 * np.abs(K).max())
    if symmetric:
        ev = sla.eigh(0.5 * (K + K.T), 0.5 * (Pmat + Pmat.T), eigvals_only=True).astype(complex)
    else:
        ev = np.linalg.eigvals(np.linalg.solve(Pmat, K))
    if not np.all(np.isfinite(ev)):
        raise FloatingPointError("non-finite eigenvalue in preconditioned spectrum")
    absev = np.abs(ev)
    report = SpectrumReport(eigenvalues=ev, condition=float(absev.max() / absev.min()), kind=kind, mode=mode,
                            variant=system.variant, r=system.r, params=params,
                            max_imag=float(np.abs(ev.imag).max()))
    if check_intervals is None:
        check_intervals = kind == "M1" and mode == "diagonal" and system.variant == "stabilized" and operator is None
    if check_intervals:
        report.beta = infsup_constant(system.blocks, system.r, "V", limit=limit).beta
        report.brezzi = check_brezzi(ev, report.beta, tol)
    return report


def random_velocity(space: CoupledSpace, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(space.n_velocity)


def norm_identity_check(space: CoupledSpace, params: MaterialParams, r: Optional[float] = None,
                        sample_count: int = 100, seed: int = 0, blocks: Optional[AssembledBlocks] = None,
                        vectors: Optional[Sequence[np.ndarray]] = None) -> float:
    """Worst relative deviation of the two matrix norm identities over random vectors.

    ``u'(A+rD)u`` is compared with ``||u||_V^2 = a(u,u) + r||div u_f||^2`` and
    ``u'(A+rD^Q)u`` with ``a(u,u) + r||P_Q div u_f||^2``, the right-hand sides
    evaluated by the independent quadrature oracle on the full (unreduced) space.
    """
    if r is None:
        from .fsisystem import compute_r
        r = compute_r(params)
    blocks = assemble_blocks(space, params) if blocks is None else blocks
    if vectors is None:
        rng = np.random.default_rng(seed)
        vectors = [random_velocity(space, rng) for _ in range(sample_count)]
    U = np.column_stack(list(vectors))
    a, div2, pdiv2 = norm_pieces(space, params, U)
    lhs_v = np.einsum("im,im->m", U, (blocks.A + r * blocks.D) @ U)
    lhs_q = np.einsum("im,im->m", U, (blocks.A + r * blocks.DQ) @ U)
    worst = 0.0
    for lhs, rhs in ((lhs_v, a + r * div2), (lhs_q, a + r * pdiv2)):
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        dev = np.where(scale > 0, np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0), 0.0)
        worst = max(worst, float(dev.max(initial=0.0)))
    return float(worst)


def reports_to_csv(reports: Sequence, path=None) -> str:
    """Serialize reports (objects with ``row()``) as comma-separated rows, in order."""
    rows = [rep.row() for rep in reports]
    header = []
    for row in rows:
        header.extend(key for key in row if key not in header)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _fmt(row.get(key, "")) for key in header})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _fmt(val):
    if isinstance(val, float):
        return repr(val)
    return val
