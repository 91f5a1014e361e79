"""Data-driven equilibrated stress fields under traction-free boundary conditions.

Piecewise-linear displacements and piecewise-constant stresses on triangulated
rectangles, the Helmholtz-Weyl split of symmetric tensor fields, nearest-state
selection from a finite stress data set, and estimates of the Poincare, Korn
and inf-sup constants.
"""
from .core import (
    InvalidArgument,
    Mesh,
    RigidBasis,
    SolverConfig,
    StressDataset,
    SymTensorField,
    VectorField,
    build_mesh,
    inner_tensor,
    inner_vector,
    lp_norm_tensor,
    lp_norm_vector,
    rigid_basis,
)
from .operators import (
    Decomposition,
    NumericFailure,
    OperatorBundle,
    SizeGuardExceeded,
    build_operators,
    check_balanced,
    green_residual,
    pi,
    project_balanced,
    project_M,
    subspace_diagnostics,
    sym_grad,
    weak_div,
)
from .solver import (
    BalanceViolation,
    DDSolution,
    EquilibriumResult,
    VoronoiLabeling,
    manufactured_sine_load,
    manufactured_sine_stress,
    minimal_norm_probe,
    nearest_select,
    objective,
    solve_ddspn0,
    solve_equilibrium,
    tie_set_measure,
)
from .inequality import (
    ConstantReport,
    infsup_constant,
    korn_constant,
    korn_ratio_explorer,
    korn_ratio_sweep,
    poincare_constant,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "InvalidArgument",
    "Mesh",
    "RigidBasis",
    "SolverConfig",
    "StressDataset",
    "SymTensorField",
    "VectorField",
    "build_mesh",
    "inner_tensor",
    "inner_vector",
    "lp_norm_tensor",
    "lp_norm_vector",
    "rigid_basis",
    "Decomposition",
    "NumericFailure",
    "OperatorBundle",
    "SizeGuardExceeded",
    "build_operators",
    "check_balanced",
    "green_residual",
    "pi",
    "project_balanced",
    "project_M",
    "subspace_diagnostics",
    "sym_grad",
    "weak_div",
    "BalanceViolation",
    "DDSolution",
    "EquilibriumResult",
    "VoronoiLabeling",
    "manufactured_sine_load",
    "manufactured_sine_stress",
    "minimal_norm_probe",
    "nearest_select",
    "objective",
    "solve_ddspn0",
    "solve_equilibrium",
    "tie_set_measure",
    "ConstantReport",
    "infsup_constant",
    "korn_constant",
    "korn_ratio_explorer",
    "korn_ratio_sweep",
    "poincare_constant",
    "sweep",
]
