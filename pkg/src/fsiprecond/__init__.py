"""Block preconditioners and well-posedness checks for a modified GCE FSI discretization."""
from .femcore import MaterialParams, build_space
from .fsisystem import StepConfig, build_system, compute_r, gce_time_step, solve_system
from .meshkit import build_two_region_mesh

__version__ = "0.1.0"

__all__ = ["MaterialParams", "StepConfig", "build_space", "build_system", "build_two_region_mesh", "compute_r",
           "gce_time_step", "solve_system"]
