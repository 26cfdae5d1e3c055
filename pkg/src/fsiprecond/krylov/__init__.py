from .gmres import SolveReport, gmres
from .preconditioners import (EXPECTED_VARIANT, KINDS, MODES, PreconditionerOp, apply_preconditioner,
                              make_preconditioner)
from .sparse import LUFactorization, SingularMatrixError, sparse_lu_factorize, to_csr

__all__ = [
    "EXPECTED_VARIANT", "KINDS", "LUFactorization", "MODES", "PreconditionerOp", "SingularMatrixError",
    "SolveReport", "apply_preconditioner", "gmres", "make_preconditioner", "sparse_lu_factorize",
    "to_csr",
]
