"""Mixed finite elements for quasi-static viscoelastic Timoshenko beams."""

from ._kernels import BACKEND
from .assembly import DiscreteOperators, PrimalOperators, assemble, assemble_primal, build_mixed, build_primal, inf_sup_constant
from .beam import CLAMPED, SIMPLY_SUPPORTED, BeamConfig, Load, scaled_load
from .fe import FeSpace, gauss_rule
from .material import PronyMaterial, sls_material
from .mesh import Mesh1D, uniform_partition
from .stepper import SolutionHistory, VolterraMarcher, solve_primal, solve_quasi_static, trapezoid_weights

__all__ = [
    "BACKEND", "BeamConfig", "CLAMPED", "DiscreteOperators", "FeSpace", "Load", "Mesh1D",
    "PrimalOperators", "PronyMaterial", "SIMPLY_SUPPORTED", "SolutionHistory", "VolterraMarcher",
    "assemble", "assemble_primal", "build_mixed", "build_primal", "gauss_rule", "inf_sup_constant",
    "sls_material", "scaled_load", "solve_primal", "solve_quasi_static", "trapezoid_weights",
    "uniform_partition",
]
