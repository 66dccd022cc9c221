"""Quaternionic operator calculus for instationary flow problems.

Solver library for parabolic Stokes and Navier-Stokes systems built on a
Witt-extended quaternion algebra: closed-form space-time kernels, lattice
periodization onto cylinders and tori, discretized volume/boundary integral
operators, Bergman projections, and a fixed-point iteration with explicit
contraction diagnostics.
"""

from .witt_algebra import (
    WittQuaternion,
    mul,
    scalar_part,
    vector_part,
    coeff_norm,
)
from .kernels import (
    KernelParams,
    SpaceTimePoint,
    fundamental_solution,
    dual_fundamental_solution,
    apply_parabolic_dirac,
    factorization_residual,
)
from .lattice import (
    LatticeSpec,
    LatticeShell,
    shell_points,
    sign_of,
    tail_bound,
    periodized_fundamental_solution,
)
from .domain import (
    SpaceTimeGrid,
    Field,
    BoundaryElement,
    Domain,
    build_box_domain,
    build_quotient_domain,
    discrete_spatial_dirac,
    discrete_div,
    discrete_grad,
    discrete_norm,
)
from .potentials import (
    OperatorContext,
    BoundaryData,
    teodorescu,
    cauchy_transform,
    boundary_trace,
    bergman_projection,
    bergman_complement,
)
from .solver import (
    NavierStokesProblem,
    SolverReport,
    SolverDivergence,
    solve_linear,
    convective_term,
    momentum_defect,
    fixed_point_solve,
    estimate_constants,
    convergence_check,
)
from .verify import (
    StudyResult,
    calibrate_convention,
    borel_pompeiu_study,
    hodge_study,
    lattice_bruteforce_check,
)

__version__ = "0.1.0"

__all__ = [
    "WittQuaternion", "mul", "scalar_part", "vector_part", "coeff_norm",
    "KernelParams", "SpaceTimePoint", "fundamental_solution",
    "dual_fundamental_solution", "apply_parabolic_dirac",
    "factorization_residual",
    "LatticeSpec", "LatticeShell", "shell_points", "sign_of", "tail_bound",
    "periodized_fundamental_solution",
    "SpaceTimeGrid", "Field", "BoundaryElement", "Domain",
    "build_box_domain", "build_quotient_domain", "discrete_spatial_dirac",
    "discrete_div", "discrete_grad", "discrete_norm",
    "OperatorContext", "BoundaryData", "teodorescu", "cauchy_transform",
    "boundary_trace", "bergman_projection", "bergman_complement",
    "NavierStokesProblem", "SolverReport", "SolverDivergence",
    "solve_linear", "convective_term", "momentum_defect",
    "fixed_point_solve", "estimate_constants", "convergence_check",
    "StudyResult", "calibrate_convention", "borel_pompeiu_study",
    "hodge_study", "lattice_bruteforce_check",
]
