"""Fixed-point solution of the regularized singular problems.

The inner map solves the linearized problem: given an iterate v, the next
iterate solves  M w = (T_n(f) + h_n) / (|v| + 1/n)^delta(x) + g_n,  with the
divergence-form part of the data entering the right-hand side multiplied by
the same singular weight.  The map is antitone, so its square is monotone;
damped iteration converges in practice and uniqueness pins a single target.
The stop test uses the undamped fixed-point residual ||Theta(u) - u||, so the
residual bound reported at return is tolerance-exact regardless of damping.
Oscillation (successive update vectors pointing against each other) halves
the damping factor down to a floor.

The positivity barrier solves  M w = T_1(f) / (w + 1)^delta(x)  with the
same machinery; every approximant dominates it nodewise, which is the
uniform interior positivity device.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import estimates
from .errors import NonConvergenceError, PositivityViolationError
from .exponents import ExponentField
from .grid import Grid, probe_mask
from .linsolve import RhsSpec, div_h, solve_linear
from .measures import (
    ApproxDatum,
    MeasureData,
    default_test_functions,
    regularize,
)
from .operators import OperatorPair
from .truncation import truncate


@dataclass
class FixedPointOptions:
    damping: float = 0.7
    inner_tol: float = 1e-10
    outer_tol: float = 1e-8
    max_iter: int = 200
    theta_min: float = 0.05

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        for name, tol in (("inner_tol", self.inner_tol), ("outer_tol", self.outer_tol)):
            if not 1e-14 < tol < 1e-2:
                raise ValueError(f"{name} must lie in (1e-14, 1e-2)")
        if self.max_iter <= 0:
            raise ValueError("iteration cap must be positive")


@dataclass
class ApproxProblem:
    op: OperatorPair
    datum: ApproxDatum
    delta: np.ndarray  # delta(x) at interior nodes
    n: int

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        if self.n < 1:
            raise ValueError("approximation step must be >= 1")
        for part in (self.datum.f_n, self.datum.h_n, self.datum.g_n):
            if np.any(part < 0):
                raise ValueError("regularized data parts must be nonnegative")

    def singular_weight(self, v):
        """(|v| + 1/n)^(-delta(x)) nodewise."""
        return (np.abs(v) + 1.0 / self.n) ** (-self.delta)

    def rhs_for(self, v) -> RhsSpec:
        psi = self.singular_weight(v)
        vol = self.datum.numerator * psi + self.datum.g_n
        if self.datum.G is not None:
            vol = vol + self.op.grid.restrict(-div_h(self.op.grid, self.datum.G)) * psi
        return RhsSpec(volumetric=vol)


def theta_map(prob: ApproxProblem, v, tol: float = 1e-10, x0=None):
    """One inner linear solve of the fixed-point map."""
    result = solve_linear(prob.op, prob.rhs_for(v), tol=tol, x0=x0)
    return result.w


@dataclass
class FixedPointStats:
    iterations: int
    residual: float
    converged: bool
    thetas: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    iterate_norms: list = field(default_factory=list)


def _inner_tol(opts: FixedPointOptions, res_prev):
    """Inexact-iteration schedule: loose solves far from the fixed point.

    The relaxed tolerance stays two orders below the current fixed-point
    residual, so the trajectory is unaffected; the final stretch (within
    100x of the outer tolerance) runs at the full inner tolerance.
    """
    if res_prev is None or res_prev <= 100 * opts.outer_tol:
        return opts.inner_tol
    return min(1e-6, max(opts.inner_tol, 0.01 * res_prev))


def _picard(apply_theta, u0, opts: FixedPointOptions):
    u = np.asarray(u0, dtype=float).copy()
    theta = opts.damping
    stats = FixedPointStats(0, np.inf, False)
    d_prev = None
    w = None
    res_prev = None
    for k in range(1, opts.max_iter + 1):
        w = apply_theta(u, w, _inner_tol(opts, res_prev))
        d = w - u
        scale = max(float(np.max(np.abs(u))), 1e-30)
        res = float(np.max(np.abs(d))) / scale
        stats.iterations = k
        stats.residual = res
        stats.residual_history.append(res)
        stats.iterate_norms.append(float(np.max(np.abs(u))))
        stats.thetas.append(theta)
        if res <= opts.outer_tol:
            stats.converged = True
            return u, stats
        if d_prev is not None and float(d @ d_prev) < 0:
            theta = max(theta / 2.0, opts.theta_min)
        u = u + theta * d
        d_prev = d
        res_prev = res
    raise NonConvergenceError(
        f"fixed-point iteration did not reach {opts.outer_tol:.1e} in "
        f"{opts.max_iter} steps (residual {stats.residual:.3e}); "
        f"retry with smaller damping",
        history=stats.residual_history,
    )


def solve_approximate(prob: ApproxProblem, opts: FixedPointOptions = None, u0=None):
    """Damped iteration of the inner map from u0 (default: map applied to 0)."""
    opts = opts or FixedPointOptions()

    def apply_theta(v, w_prev, tol):
        return theta_map(prob, v, tol=tol, x0=w_prev)

    if u0 is None:
        u0 = theta_map(prob, np.zeros(prob.op.n), tol=opts.inner_tol)
    u, stats = _picard(apply_theta, u0, opts)
    return u, stats


def barrier(op: OperatorPair, f, delta, opts: FixedPointOptions = None):
    """Positive lower-barrier solve with unit-shifted denominator.

    ``f`` is the source density on interior nodes; a vanishing source gives
    the degenerate zero barrier, which is flagged rather than rejected.
    """
    opts = opts or FixedPointOptions()
    f = np.asarray(f, dtype=float)
    delta = np.asarray(delta, dtype=float)
    numerator = truncate(1.0, f)
    degenerate = not np.any(numerator > 0)

    def apply_theta(v, w_prev, tol):
        rhs = RhsSpec(volumetric=numerator * (np.abs(v) + 1.0) ** (-delta))
        return solve_linear(op, rhs, tol=tol, x0=w_prev).w

    if degenerate:
        stats = FixedPointStats(iterations=1, residual=0.0, converged=True)
        return np.zeros(op.n), stats, True
    w0 = apply_theta(np.zeros(op.n), None, opts.inner_tol)
    w, stats = _picard(apply_theta, w0, opts)
    return w, stats, False


@dataclass
class SolveReport:
    """Everything a sweep produces: solutions, norms, certificates, flags."""

    n_list: list
    solutions: dict                 # n -> interior vector
    barrier_w: np.ndarray = None
    gaps: list = field(default_factory=list)          # L1 Cauchy gaps
    converged: dict = field(default_factory=dict)     # n -> bool
    declared_limit: bool = False
    positivity: dict = field(default_factory=dict)    # probe -> {n: min, "barrier": min}
    norm_table: dict = field(default_factory=dict)    # n -> {name: value}
    weak_residuals: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    fp_stats: dict = field(default_factory=dict)      # n -> summary dict
    grid_json: str = None
    h: float = None

    def scalar_dict(self):
        return {
            "n_list": list(self.n_list),
            "h": self.h,
            "gaps": self.gaps,
            "converged": {str(k): v for k, v in self.converged.items()},
            "declared_limit": self.declared_limit,
            "positivity": {
                str(k): {str(kk): vv for kk, vv in v.items()}
                for k, v in self.positivity.items()
            },
            "norm_table": {str(k): v for k, v in self.norm_table.items()},
            "weak_residuals": {str(k): v for k, v in self.weak_residuals.items()},
            "flags": self.flags,
            "fp_stats": {str(k): v for k, v in self.fp_stats.items()},
            "grid": self.grid_json,
        }


def solve_sequence(op: OperatorPair, data: MeasureData, delta_field: ExponentField,
                   grid: Grid, n_list, opts: FixedPointOptions = None,
                   probes=(0.5, 0.75), norms: "estimates.NormRequest" = None,
                   rel_gap_threshold: float = 0.01, warm_start: bool = True,
                   compute_residuals: bool = False,
                   width_scale: float = None) -> SolveReport:
    """Solve the whole approximation sweep and collect diagnostics.

    Any per-step failure aborts with the partial report attached to the
    raised error (``error.partial_report``).
    """
    opts = opts or FixedPointOptions()
    n_list = sorted(int(n) for n in n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    delta_values = delta_field.at(grid.interior_points())

    report = SolveReport(n_list=n_list, solutions={}, grid_json=grid.to_json(),
                         h=grid.h)
    if grid.dim == 1:
        report.flags.append("dimension-1-outside-theory")

    f_for_barrier = (data.nu_density(grid.interior_points())
                     if data.nu_density is not None else np.zeros(grid.n_interior))
    w_bar, bar_stats, degenerate = barrier(op, f_for_barrier, delta_values, opts)
    report.barrier_w = w_bar
    if degenerate:
        report.flags.append("zero-source-degenerate-barrier")
    report.fp_stats["barrier"] = {
        "iterations": bar_stats.iterations,
        "residual": bar_stats.residual,
    }

    probe_masks = {scale: probe_mask(grid, scale)[grid.interior_mask]
                   for scale in probes}
    for scale, mask in probe_masks.items():
        entry = {"barrier": float(w_bar[mask].min()) if mask.any() else None}
        report.positivity[scale] = entry

    norms = norms or estimates.NormRequest()
    prev = None
    try:
        for n in n_list:
            datum = regularize(data, n, grid, width_scale=width_scale)
            for flag in datum.flags:
                if flag not in report.flags:
                    report.flags.append(flag)
            prob = ApproxProblem(op=op, datum=datum, delta=delta_values, n=n)
            u0 = prev if (warm_start and prev is not None) else None
            u, stats = solve_approximate(prob, opts, u0=u0)
            report.solutions[n] = u
            report.converged[n] = stats.converged
            report.fp_stats[n] = {
                "iterations": stats.iterations,
                "residual": stats.residual,
                "final_theta": stats.thetas[-1] if stats.thetas else opts.damping,
                "max_iterate_norm": max(stats.iterate_norms, default=0.0),
            }
            if prev is not None:
                gap = float(np.sum(np.abs(u - prev))) * grid.cell_measure
                report.gaps.append(gap)
            report.norm_table[n] = estimates.build_norm_table(
                grid, u, norms, probe_masks=probe_masks)
            for scale, mask in probe_masks.items():
                report.positivity[scale][n] = (
                    float(u[mask].min()) if mask.any() else None)
            if compute_residuals:
                res = weak_residual(op, u, datum, delta_values, grid)
                report.weak_residuals[n] = res["max_relative"]
            prev = u
    except NonConvergenceError as err:
        err.partial_report = report
        raise

    if len(report.gaps) >= 2:
        scale = max(float(np.sum(np.abs(prev))) * grid.cell_measure, 1e-30)
        rel = [g / scale for g in report.gaps]
        report.declared_limit = rel[-1] < rel_gap_threshold and rel[-2] < rel_gap_threshold
    return report


def weak_residual(op: OperatorPair, u, datum: ApproxDatum, delta, grid: Grid,
                  tests=None):
    """Max over tests of the defect in the discrete weak formulation.

    Pairs the operator action and the regularized data against smooth
    interior bumps.  Requires strict positivity of u on every test support.
    Returns absolute and data-scale-relative defects.
    """
    if tests is None:
        tests = default_test_functions(grid)
    delta = np.asarray(delta, dtype=float)
    pts = grid.interior_points()
    psi = (np.abs(u) + 1.0 / datum.n) ** (-delta)
    rhs = datum.numerator * psi + datum.g_n
    if datum.G is not None:
        rhs = rhs + grid.restrict(-div_h(grid, datum.G)) * psi
    action = op.apply(u)
    dx = grid.cell_measure
    defects, scales = [], []
    for phi in tests:
        phi_vals = phi(pts)
        support = phi_vals > 0
        if np.any(u[support] <= 0):
            raise PositivityViolationError(
                "test support touches nodes where the solution is not positive")
        defects.append(abs(float(phi_vals @ (action - rhs))) * dx)
        scales.append(abs(float(np.abs(phi_vals) @ np.abs(rhs))) * dx)
    scale = max(max(scales), 1e-300)
    return {
        "per_test": defects,
        "max_absolute": max(defects),
        "scale": scale,
        "max_relative": max(defects) / scale,
    }


def save_report(report: SolveReport, outdir):
    """Persist a report as JSON scalars, per-field .npy arrays and a norm CSV.

    Raw .npy files (not an archive) keep artifacts byte-identical across
    identical runs.
    """
    import csv
    import json
    import os

    os.makedirs(outdir, exist_ok=True)
    arrays = os.path.join(outdir, "arrays")
    os.makedirs(arrays, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report.scalar_dict(), fh, sort_keys=True, indent=1)
    for n, u in report.solutions.items():
        np.save(os.path.join(arrays, f"u_n{n}.npy"), np.asarray(u, dtype=float))
    if report.barrier_w is not None:
        np.save(os.path.join(arrays, "barrier.npy"),
                np.asarray(report.barrier_w, dtype=float))
    with open(os.path.join(outdir, "norms.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "norm", "value"])
        for n in sorted(report.norm_table):
            for name in sorted(report.norm_table[n]):
                writer.writerow([n, name, f"{report.norm_table[n][name]:.12g}"])


def load_report(outdir):
    """Rebuild (grid, report) from persisted artifacts."""
    import json
    import os

    with open(os.path.join(outdir, "report.json")) as fh:
        scal = json.load(fh)
    grid = Grid.from_json(scal["grid"], min_interior_per_axis=1)
    report = SolveReport(
        n_list=scal["n_list"],
        solutions={},
        gaps=scal["gaps"],
        converged={int(k): v for k, v in scal["converged"].items()},
        declared_limit=scal["declared_limit"],
        positivity={float(k): {(kk if kk == "barrier" else int(kk)): vv
                               for kk, vv in v.items()}
                    for k, v in scal["positivity"].items()},
        norm_table={int(k): v for k, v in scal["norm_table"].items()},
        weak_residuals={int(k): v for k, v in scal["weak_residuals"].items()},
        flags=scal["flags"],
        fp_stats=scal["fp_stats"],
        grid_json=scal["grid"],
        h=scal["h"],
    )
    arrays = os.path.join(outdir, "arrays")
    for n in report.n_list:
        path = os.path.join(arrays, f"u_n{n}.npy")
        if os.path.exists(path):
            report.solutions[int(n)] = np.load(path)
    bar = os.path.join(arrays, "barrier.npy")
    if os.path.exists(bar):
        report.barrier_w = np.load(bar)
    return grid, report


def solve_split(op: OperatorPair, data: MeasureData, delta_field: ExponentField,
                grid: Grid, n: int, opts: FixedPointOptions = None,
                width_scale: float = None):
    """Solutions of the full, source-only and perturbation-only problems.

    The comparison u <= v + w needs a volumetric singular source; a
    divergence-form part would break the sign argument, so it is rejected.
    """
    if data.G is not None:
        raise ValueError("splitting comparison needs volumetric data (no G part)")
    opts = opts or FixedPointOptions()
    delta_values = delta_field.at(grid.interior_points())
    datum = regularize(data, n, grid, width_scale=width_scale)

    prob_full = ApproxProblem(op=op, datum=datum, delta=delta_values, n=n)
    u, _ = solve_approximate(prob_full, opts)

    source_only = ApproxDatum(n=n, f_n=datum.f_n, h_n=datum.h_n,
                              g_n=np.zeros_like(datum.g_n))
    prob_v = ApproxProblem(op=op, datum=source_only, delta=delta_values, n=n)
    v, _ = solve_approximate(prob_v, opts)

    w = solve_linear(op, RhsSpec(volumetric=datum.g_n), tol=opts.inner_tol).w
    return {"u": u, "v": v, "w": w}
