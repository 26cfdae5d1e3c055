from .assembly import (AssembledBlocks, FormPieces, MaterialParams, ReducedProblem, apply_dirichlet,
                       assemble_a, assemble_b, assemble_blocks, assemble_d, assemble_dq_apply,
                       assemble_h1_gram, assemble_mp, assemble_pieces, assemble_rhs, convection_vector, export_coo,
                       load_vector, read_coo)
from .space import CoupledSpace, build_space, with_mesh

__all__ = [
    "AssembledBlocks", "CoupledSpace", "FormPieces", "MaterialParams", "ReducedProblem",
    "apply_dirichlet", "assemble_a", "assemble_b", "assemble_blocks", "assemble_d",
    "assemble_dq_apply", "assemble_h1_gram", "assemble_mp", "assemble_pieces", "assemble_rhs", "build_space",
    "convection_vector", "export_coo", "load_vector", "read_coo", "with_mesh",
]
