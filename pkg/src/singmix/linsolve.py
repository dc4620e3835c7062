"""Linear Dirichlet solves: diagonally preconditioned conjugate gradients.

The combined matrix is symmetric positive definite (coercive local part plus
a diagonally dominant nonlocal part with strictly positive extended row
sums), so plain PCG with the matrix diagonal is enough.  A dense direct
solve is kept for small systems as the oracle in tests.

Divergence-form right-hand sides contribute through the discrete pairing
``int G . grad(phi)``: with central differences and zero exterior values
summation by parts is exact, so the contribution is the volumetric field
``-div_h G`` restricted to interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError
from .grid import Grid


def _shift(a, axis, step):
    """Shift a lattice array by one node along an axis, filling with zeros."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step > 0:
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
    else:
        src[axis], dst[axis] = slice(None, -1), slice(1, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def central_diff(grid: Grid, lattice_values, axis):
    """Central difference with zero padding beyond the lattice.

    Zero padding (rather than one-sided edge stencils) keeps the operator
    exactly skew-adjoint, so discrete summation by parts holds with no
    boundary terms for fields vanishing on the exterior collar.
    """
    a = np.asarray(lattice_values, dtype=float).reshape(grid.lattice_shape)
    return (_shift(a, axis, +1) - _shift(a, axis, -1)) / (2 * grid.h)


def grad_h(grid: Grid, lattice_values):
    """Central-difference gradient on the lattice; component axis last."""
    return np.stack([central_diff(grid, lattice_values, d)
                     for d in range(grid.dim)], axis=-1)


def div_h(grid: Grid, vector_lattice):
    """Central-difference divergence of a lattice vector field."""
    vector_lattice = np.asarray(vector_lattice, dtype=float)
    out = np.zeros(grid.lattice_shape)
    for axis in range(grid.dim):
        comp = vector_lattice[..., axis].reshape(grid.lattice_shape)
        out += central_diff(grid, comp, axis)
    return out


@dataclass
class RhsSpec:
    """Volumetric load plus optional divergence-form part.

    ``volumetric`` lives on interior nodes; ``div_part`` is a vector field
    on the full lattice (its values on the exterior collar matter for the
    central-difference stencil).
    """

    volumetric: np.ndarray
    div_part: np.ndarray = None

    def effective(self, grid: Grid):
        rhs = np.asarray(self.volumetric, dtype=float).copy()
        if self.div_part is not None:
            rhs += grid.restrict(-div_h(grid, self.div_part))
        return rhs


@dataclass
class LinearSolveResult:
    w: np.ndarray
    residual: float
    iterations: int
    history: list = field(default_factory=list)


def pcg(apply_op, b, diag, tol, max_iter, x0=None):
    """Jacobi-preconditioned conjugate gradients to relative residual tol."""
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0, [0.0]
    inv_diag = 1.0 / np.asarray(diag, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - apply_op(x) if x0 is not None else b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    history = [np.linalg.norm(r) / bnorm]
    if history[-1] <= tol:
        return x, history[-1], 0, history
    for k in range(1, max_iter + 1):
        Ap = apply_op(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        relres = np.linalg.norm(r) / bnorm
        history.append(relres)
        if relres <= tol:
            return x, relres, k, history
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError(
        f"PCG did not reach {tol:.1e} in {max_iter} iterations "
        f"(residual {history[-1]:.3e})",
        history=history,
    )


def solve_linear(op, rhs: RhsSpec, tol: float = 1e-10, x0=None,
                 max_iter: int = None) -> LinearSolveResult:
    """Solve the assembled mixed operator against a right-hand side."""
    if not 1e-14 < tol < 1e-4:
        raise ValueError("tolerance must lie in (1e-14, 1e-4)")
    b = rhs.effective(op.grid)
    cap = max_iter if max_iter is not None else 10 * op.n
    w, relres, iters, history = pcg(op.apply, b, op.diagonal(), tol, cap, x0=x0)
    return LinearSolveResult(w=w, residual=relres, iterations=iters, history=history)


def solve_dense(op, rhs: RhsSpec, cap: int = 1500) -> LinearSolveResult:
    """Direct dense solve; the small-system oracle used by tests."""
    if op.n > cap:
        raise ValueError(f"dense oracle limited to {cap} dof, got {op.n}")
    b = rhs.effective(op.grid)
    M = op.dense(cap=cap)
    w = np.linalg.solve(M, b)
    res = float(np.linalg.norm(M @ w - b) / max(np.linalg.norm(b), 1e-300))
    return LinearSolveResult(w=w, residual=res, iterations=0, history=[res])


@dataclass
class ComparisonReport:
    ordered_rhs: bool
    holds: bool
    max_violation: float
    scale: float


def comparison_check(op, w1, rhs1: RhsSpec, w2, rhs2: RhsSpec,
                     tol: float = 1e-10) -> ComparisonReport:
    """Monotonicity diagnostic: rhs1 <= rhs2 nodewise should give w1 <= w2.

    The allowance scales with the solution magnitude so solver tolerances do
    not trip the check.
    """
    b1 = rhs1.effective(op.grid)
    b2 = rhs2.effective(op.grid)
    ordered = bool(np.all(b1 <= b2 + 1e-300))
    scale = float(max(np.max(np.abs(w1)), np.max(np.abs(w2)), 1.0))
    violation = float(np.max(w1 - w2)) if ordered else float("nan")
    holds = ordered and violation <= tol * scale
    return ComparisonReport(ordered_rhs=ordered, holds=holds,
                            max_violation=violation, scale=scale)
