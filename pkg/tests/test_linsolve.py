import numpy as np
import numpy.testing as npt
import pytest

from singmix import (
    EllipticCoefficient,
    KernelSpec,
    RhsSpec,
    build_grid,
    comparison_check,
    solve_dense,
    solve_linear,
)
from singmix.errors import NonConvergenceError
from singmix.linsolve import div_h, grad_h
from singmix.operators import assemble_operator

from conftest import UNIT_INTERVAL, UNIT_SQUARE


def small_op(h=1 / 8):
    g = build_grid(UNIT_SQUARE, h)
    return assemble_operator(g, EllipticCoefficient.identity(2),
                             KernelSpec.fractional(0.5))


def test_zero_rhs_gives_zero(mixed_op16):
    result = solve_linear(mixed_op16, RhsSpec(volumetric=np.zeros(mixed_op16.n)))
    npt.assert_array_equal(result.w, 0.0)
    assert result.iterations == 0


def test_manufactured_1d_local_only():
    # purely local mode: nonlocal part disabled
    errs = []
    for h in (1 / 32, 1 / 64):
        g = build_grid(UNIT_INTERVAL, h)
        op = assemble_operator(g, EllipticCoefficient.identity(1), None)
        x = g.interior_points()[:, 0]
        rhs = RhsSpec(volumetric=np.pi**2 * np.sin(np.pi * x))
        result = solve_linear(op, rhs, tol=1e-12)
        errs.append(np.max(np.abs(result.w - np.sin(np.pi * x))))
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_solution_matches_dense_oracle(rng):
    op = small_op()
    b = rng.standard_normal(op.n)
    iterative = solve_linear(op, RhsSpec(volumetric=b), tol=1e-12)
    direct = solve_dense(op, RhsSpec(volumetric=b))
    npt.assert_allclose(iterative.w, direct.w, rtol=1e-8, atol=1e-10)


def test_discrete_maximum_principle(rng):
    op = small_op()
    # matrix-level oracle: the inverse of the assembled M-matrix is nonnegative
    Minv = np.linalg.inv(op.dense(cap=2000))
    assert Minv.min() >= -1e-12
    for _ in range(4):
        b = np.abs(rng.standard_normal(op.n))
        result = solve_linear(op, RhsSpec(volumetric=b), tol=1e-12)
        assert result.w.min() >= -1e-10


def test_comparison_check_equal_and_bump(rng):
    op = small_op()
    b1 = np.abs(rng.standard_normal(op.n))
    bump = np.zeros(op.n)
    bump[op.n // 2] = 1.0
    r1 = solve_linear(op, RhsSpec(volumetric=b1), tol=1e-12)
    r2 = solve_linear(op, RhsSpec(volumetric=b1 + bump), tol=1e-12)
    same = comparison_check(op, r1.w, RhsSpec(b1), r1.w, RhsSpec(b1))
    assert same.holds
    ordered = comparison_check(op, r1.w, RhsSpec(b1), r2.w, RhsSpec(b1 + bump),
                               tol=1e-8)
    assert ordered.ordered_rhs and ordered.holds
    zero = solve_linear(op, RhsSpec(volumetric=np.zeros(op.n)))
    nonneg = comparison_check(op, zero.w, RhsSpec(np.zeros(op.n)),
                              r1.w, RhsSpec(b1))
    assert nonneg.holds


def test_energy_identity_with_div_part(rng):
    op = small_op(1 / 16)
    g = op.grid
    vol = np.abs(rng.standard_normal(op.n))
    G = np.stack([
        np.sin(2 * np.pi * g.nodes[:, 0]).reshape(g.lattice_shape),
        (g.nodes[:, 1] ** 2).reshape(g.lattice_shape),
    ], axis=-1)
    rhs = RhsSpec(volumetric=vol, div_part=G)
    tol = 1e-12
    result = solve_linear(op, rhs, tol=tol)
    w = result.w
    dx = g.cell_measure
    lhs = op.bilinear(w, w)
    grad_w = grad_h(g, g.embed(w))
    pairing = float(vol @ w) * dx + float(np.sum(G * grad_w)) * dx
    scale = abs(lhs) + abs(pairing) + 1.0
    assert abs(lhs - pairing) <= 100 * tol * scale


def test_rhs_decomposition_invariance(rng):
    # moving the divergence part into the volumetric slot explicitly
    # preserves the weak-form functional, hence the solution
    op = small_op(1 / 16)
    g = op.grid
    vol = rng.standard_normal(op.n)
    G = np.stack([np.cos(g.nodes[:, 0]).reshape(g.lattice_shape),
                  np.sin(g.nodes[:, 1]).reshape(g.lattice_shape)], axis=-1)
    rhs_a = RhsSpec(volumetric=vol, div_part=G)
    rhs_b = RhsSpec(volumetric=vol + g.restrict(-div_h(g, G)))
    wa = solve_linear(op, rhs_a, tol=1e-12).w
    wb = solve_linear(op, rhs_b, tol=1e-12).w
    npt.assert_allclose(wa, wb, atol=1e-10)


def test_iteration_cap_raises(rng):
    op = small_op()
    b = rng.standard_normal(op.n)
    with pytest.raises(NonConvergenceError) as err:
        solve_linear(op, RhsSpec(volumetric=b), tol=1e-12, max_iter=3)
    assert len(err.value.history) == 4


def test_tolerance_domain():
    op = small_op()
    with pytest.raises(ValueError):
        solve_linear(op, RhsSpec(volumetric=np.ones(op.n)), tol=1e-3)
    with pytest.raises(ValueError):
        solve_linear(op, RhsSpec(volumetric=np.ones(op.n)), tol=1e-15)


def test_warm_start_converges_faster(rng):
    op = small_op()
    b = rng.standard_normal(op.n)
    cold = solve_linear(op, RhsSpec(volumetric=b), tol=1e-10)
    warm = solve_linear(op, RhsSpec(volumetric=b), tol=1e-10, x0=cold.w)
    assert warm.iterations < cold.iterations
    npt.assert_allclose(warm.w, cold.w, atol=1e-9)
