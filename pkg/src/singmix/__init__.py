"""singmix: mixed local-nonlocal singular elliptic problems at desk scale.

Solves the regularized approximation sweep for problems of the form

    -div(A(x) grad u) + P.V. int (u(x) - u(y)) K(x, y) dy
        = nu / u**delta(x) + mu,    u = 0 outside the domain,

with measure-valued data, and certifies the uniform a priori bounds the
scheme is expected to satisfy.
"""

from .exponents import (
    ExponentField,
    PCondition,
    compute_p_condition,
    eval_delta,
    regularity_exponents,
)
from .grid import DomainSpec, Grid, boundary_strip, build_grid, probe_mask
from .kernels import BACKEND, KernelSpec
from .linsolve import RhsSpec, comparison_check, solve_dense, solve_linear
from .measures import Atom, MeasureData, narrow_gap, pair_weak_limit_check, regularize
from .operators import (
    EllipticCoefficient,
    OperatorPair,
    apply_operator,
    assemble_local,
    assemble_nonlocal,
    assemble_operator,
    seminorm_domination_check,
)
from .solver import (
    ApproxProblem,
    FixedPointOptions,
    SolveReport,
    barrier,
    solve_approximate,
    solve_sequence,
    solve_split,
    theta_map,
    weak_residual,
)
from .truncation import TruncationLevel, excess, power_truncate, truncate

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "ApproxProblem",
    "BACKEND",
    "DomainSpec",
    "EllipticCoefficient",
    "ExponentField",
    "FixedPointOptions",
    "Grid",
    "KernelSpec",
    "MeasureData",
    "OperatorPair",
    "PCondition",
    "RhsSpec",
    "SolveReport",
    "TruncationLevel",
    "apply_operator",
    "assemble_local",
    "assemble_nonlocal",
    "assemble_operator",
    "barrier",
    "boundary_strip",
    "build_grid",
    "comparison_check",
    "compute_p_condition",
    "eval_delta",
    "excess",
    "narrow_gap",
    "pair_weak_limit_check",
    "power_truncate",
    "probe_mask",
    "regularity_exponents",
    "regularize",
    "seminorm_domination_check",
    "solve_approximate",
    "solve_dense",
    "solve_linear",
    "solve_sequence",
    "solve_split",
    "theta_map",
    "truncate",
    "weak_residual",
]
