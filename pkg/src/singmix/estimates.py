"""Discrete norms and the diagnostic suite certifying uniform bounds.

Constants in the underlying estimates are never quantified, so "uniformly
bounded in n" is operationalized as bounded relative spread of the computed
sweep (max over the sweep within a configured factor of its median), and
tail-exponent checks are one-sided: fitted decay may be faster than the
predicted rate, never required to match it.

Gradients are central differences of the zero-extended field on the full
lattice (zero padding beyond it); this captures the boundary drop of
Dirichlet fields, and probe masks then restrict where norms are summed, so
local-space claims are tested away from the boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteTableError
from .exponents import regularity_exponents
from .grid import Grid
from .linsolve import grad_h
from .truncation import truncate


def lp_norm(u, p, cell_measure, mask=None):
    """(sum |u_i|^p h^N)^(1/p) over the mask; p = inf gives the max."""
    u = np.asarray(u, dtype=float)
    if mask is not None:
        u = u[mask]
    if u.size == 0:
        return 0.0
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(u)))
    if p < 1:
        raise ValueError("p must be >= 1 or inf")
    return float((np.sum(np.abs(u) ** p) * cell_measure) ** (1.0 / p))


def gradient_field(grid: Grid, u_interior):
    """Interior values of the lattice central-difference gradient."""
    g = grad_h(grid, grid.embed(u_interior))
    flat = g.reshape(-1, grid.dim)
    return flat[grid.interior_mask]


def gradient_magnitude(grid: Grid, u_interior):
    return np.linalg.norm(gradient_field(grid, u_interior), axis=1)


def sobolev_seminorm(grid: Grid, u_interior, q, mask=None):
    """L^q norm of the discrete gradient magnitude over the mask."""
    mags = gradient_magnitude(grid, u_interior)
    if mask is not None:
        mags = mags[mask[grid.interior_mask] if mask.size == grid.n_nodes else mask]
    return lp_norm(mags, q, grid.cell_measure)


def sobolev_norm(grid: Grid, u_interior, q, mask=None):
    """Full W^{1,q} norm: L^q part plus gradient part."""
    m = None
    if mask is not None:
        m = mask[grid.interior_mask] if mask.size == grid.n_nodes else mask
    return lp_norm(u_interior, q, grid.cell_measure, mask=m) + sobolev_seminorm(
        grid, u_interior, q, mask=mask)


def distribution_function(values, ts, cell_measure):
    """lambda(t) = measure of {|values| >= t}; exactly nonincreasing."""
    mags = np.abs(np.asarray(values, dtype=float))
    return np.array([float((mags >= t).sum()) * cell_measure for t in np.atleast_1d(ts)])


def level_set_measure(u, ks, cell_measure):
    """|S(k)| = measure of {u >= k}."""
    u = np.asarray(u, dtype=float)
    return np.array([float((u >= k).sum()) * cell_measure for k in np.atleast_1d(ks)])


@dataclass
class TailFit:
    constant: float
    exponent: float
    residual: float
    t_values: np.ndarray
    lambdas: np.ndarray


def marcinkiewicz_fit(values, cell_measure, window=None, t_values=None,
                      n_points: int = 12, min_points: int = 5) -> TailFit:
    """Log-log least-squares fit lambda(t) ~ C t^(-p) over a t-window."""
    mags = np.abs(np.asarray(values, dtype=float))
    if t_values is None:
        if window is None:
            raise ValueError("give either a window or explicit t values")
        lo, hi = window
        positive = mags[mags > 0]
        if positive.size == 0 or lo >= positive.max():
            raise ValueError("window lies outside the observed range")
        t_values = np.geomspace(lo, min(hi, positive.max()), n_points)
    t_values = np.asarray(t_values, dtype=float)
    lam = distribution_function(mags, t_values, cell_measure)
    keep = lam > 0
    if keep.sum() < min_points:
        raise ValueError(
            f"only {int(keep.sum())} usable window points (need {min_points})")
    logt = np.log(t_values[keep])
    logl = np.log(lam[keep])
    A = np.column_stack([np.ones_like(logt), -logt])
    coef, *_ = np.linalg.lstsq(A, logl, rcond=None)
    fitted = A @ coef
    residual = float(np.sqrt(np.mean((fitted - logl) ** 2)))
    return TailFit(constant=float(np.exp(coef[0])), exponent=float(coef[1]),
                   residual=residual, t_values=t_values[keep], lambdas=lam[keep])


def level_energy(grid: Grid, u_interior, level):
    """Truncated Dirichlet quantity: squared L^2 gradient norm of T_l(u)."""
    return sobolev_seminorm(grid, truncate(level, u_interior), 2) ** 2


@dataclass
class LevelEnergyReport:
    l_list: list
    energies: list
    slope: float
    intercept: float
    ratios: list  # E(l) / (l + 1)


def level_energy_growth(grid: Grid, u_interior, l_list) -> LevelEnergyReport:
    """Energies of truncations with the affine fit E(l) ~ a + b l."""
    l_list = sorted(float(l) for l in l_list)
    if len(l_list) < 4:
        raise ValueError("need at least 4 truncation levels")
    energies = [level_energy(grid, u_interior, l) for l in l_list]
    A = np.column_stack([np.ones(len(l_list)), np.asarray(l_list)])
    coef, *_ = np.linalg.lstsq(A, np.asarray(energies), rcond=None)
    ratios = [e / (l + 1.0) for e, l in zip(energies, l_list)]
    return LevelEnergyReport(l_list=l_list, energies=energies,
                             intercept=float(coef[0]), slope=float(coef[1]),
                             ratios=ratios)


def stampacchia_alpha(N: int, m: float):
    """Super-linear decay exponent 2*(1 - 1/m - 1/2*) of the level ladder."""
    if N <= 2:
        return None  # the Sobolev exponent degenerates; only fits apply
    two_star = 2.0 * N / (N - 2.0)
    return two_star * (1.0 - 1.0 / m - 1.0 / two_star)


@dataclass
class StampacchiaReport:
    k_list: list
    ladder: list                 # |S(k)| for the final sweep member
    alpha_fit: float             # fitted decay exponent, None if too few points
    alpha_formula: float         # None for N = 2
    linf_by_n: dict
    trivial_pass: bool
    m: float


def stampacchia_certificate(solutions_by_n, m, grid: Grid, k_list=None,
                            N_formula: int = None,
                            quantiles=(0.25, 0.4, 0.55, 0.7, 0.85)) -> StampacchiaReport:
    """Level-set decay ladder of the sweep's final member plus sup-norm table.

    The fitted exponent regresses log|S(k_{i+1})| on log|S(k_i)|; a value
    above 1 reproduces the super-linear decay that drives boundedness.
    """
    ns = sorted(solutions_by_n)
    if not ns:
        raise IncompleteTableError("no solutions to certify")
    linf_by_n = {n: float(np.max(np.abs(solutions_by_n[n]))) for n in ns}
    w = np.asarray(solutions_by_n[ns[-1]], dtype=float)
    top = float(w.max(initial=0.0))
    if k_list is None:
        k_list = [q * top for q in quantiles] if top > 0 else [1.0]
    ladder = level_set_measure(w, k_list, grid.cell_measure).tolist()
    trivial = all(s == 0.0 for s in ladder)
    alpha_fit = None
    xs, ys = [], []
    for a, b in zip(ladder, ladder[1:]):
        if a > 0 and b > 0 and a != b:
            xs.append(math.log(a))
            ys.append(math.log(b))
    if len(xs) >= 2:
        A = np.column_stack([np.ones(len(xs)), xs])
        coef, *_ = np.linalg.lstsq(A, np.asarray(ys), rcond=None)
        alpha_fit = float(coef[1])
    return StampacchiaReport(
        k_list=list(k_list), ladder=ladder, alpha_fit=alpha_fit,
        alpha_formula=stampacchia_alpha(N_formula, m) if N_formula else None,
        linf_by_n=linf_by_n, trivial_pass=trivial, m=m)


def embedding_bound_check(fit: TailFit, values, cell_measure, domain_measure,
                          eta: float = 0.1, factor: float = 1.2):
    """Weak-space fit controls nearby Lebesgue norms, up to a slack factor.

    Interpolates: ||u||_{p-eta}^{p-eta} <= |Omega| t0^(p-eta) +
    (p-eta) C t0^(-eta) / eta, with t0 the window start.
    """
    p = fit.exponent - eta
    if p < 1:
        raise ValueError("fitted exponent too small for the embedding check")
    t0 = float(fit.t_values[0])
    bound = domain_measure * t0**p + p * fit.constant * t0**(-eta) / eta
    actual = lp_norm(values, p, cell_measure) ** p
    return {"p": p, "bound": bound, "actual": actual,
            "passed": actual <= factor * bound}


def spread_statistic(values):
    """Max over the sweep relative to its median; 0 for an all-zero sweep."""
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        raise IncompleteTableError("no values to aggregate")
    top = float(np.max(np.abs(vals)))
    if top == 0.0:
        return 0.0, True
    med = float(np.median(np.abs(vals)))
    if med == 0.0:
        return float("inf"), False
    return top / med, False


@dataclass
class NormRequest:
    """Which norms the sweep records per step."""

    p_list: tuple = (1.0, 2.0, np.inf)
    q_list: tuple = (1.2, 2.0)
    k_list: tuple = (1.0, 2.0, 4.0, 8.0)
    power_gamma: float = None  # exponent for the truncated-power energy norm


def build_norm_table(grid: Grid, u, request: NormRequest, probe_masks=None):
    table = {}
    for p in request.p_list:
        label = "inf" if p == np.inf else f"{p:g}"
        table[f"L[{label}]"] = lp_norm(u, p, grid.cell_measure)
    for q in request.q_list:
        table[f"W1[{q:g}]"] = sobolev_norm(grid, u, q)
        for scale, mask in (probe_masks or {}).items():
            table[f"W1[{q:g}]@{scale:g}"] = sobolev_norm(grid, u, q, mask=mask)
    if request.power_gamma is not None:
        for k in request.k_list:
            v = truncate(k, np.maximum(u, 0.0)) ** request.power_gamma
            table[f"TkPow[{k:g}]"] = sobolev_norm(grid, v, 2)
    for k in request.k_list:
        table[f"E[{k:g}]"] = level_energy(grid, u, k)
        table[f"S[{k:g}]"] = float(level_set_measure(u, [k], grid.cell_measure)[0])
    return table


# ---------------------------------------------------------------------------
# conformance claims
# ---------------------------------------------------------------------------

@dataclass
class ConformanceRow:
    claim_id: str
    paper_ref: str
    n_or_h: str
    statistic: str
    value: float
    threshold: float
    passed: bool

    def as_csv_row(self):
        return [self.claim_id, self.paper_ref, self.n_or_h, self.statistic,
                f"{self.value:.10g}", f"{self.threshold:.10g}",
                "pass" if self.passed else "fail"]


@dataclass
class ConformanceTable:
    rows: list = field(default_factory=list)

    @property
    def all_passed(self):
        return all(r.passed for r in self.rows)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["claim_id", "paper_ref", "n_or_h", "statistic",
                             "value", "threshold", "pass"])
            for row in self.rows:
                writer.writerow(row.as_csv_row())


def _sweep_label(bundles):
    hs = sorted({f"{grid.h:g}" for grid, _ in bundles})
    ns = sorted({n for _, rep in bundles for n in rep.solutions})
    return f"h={{{','.join(hs)}}};n={{{','.join(str(n) for n in ns)}}}"


def _per_solution_values(bundles, fn):
    values = []
    for grid, rep in bundles:
        for n in sorted(rep.solutions):
            values.append(fn(grid, np.asarray(rep.solutions[n], dtype=float)))
    return values


def _resolve_probe_mask(grid, probe):
    from .grid import probe_mask  # local import to keep module load light

    return probe_mask(grid, probe) if probe is not None else None


def evaluate_claim(bundles, claim) -> list:
    """Evaluate one claim over (grid, report) bundles into table rows."""
    kind = claim["kind"]
    cid = claim.get("id", kind)
    ref = claim.get("paper_ref", "")
    label = _sweep_label(bundles)
    rows = []

    def spread_row(values, threshold, stat_name):
        stat, trivial = spread_statistic(values)
        passed = trivial or stat <= threshold
        rows.append(ConformanceRow(cid, ref, label, stat_name, stat,
                                   threshold, passed))

    if kind in ("lq_stable", "regularity"):
        offset = claim.get("offset", 0.05)
        threshold = claim.get("threshold", 1.5)
        if "exponents" in claim:
            exp = dict(claim["exponents"])
            report = regularity_exponents(
                exp["N"], exp["r"], exp["m"], delta=exp.get("delta"),
                delta_star=exp.get("delta_star"))
            if not report.prediction:
                raise IncompleteTableError(
                    f"claim {cid}: no prediction for parameters {exp}")
            if report.space == "Linf":
                return _linf_rows(bundles, claim, cid, ref)
            q = report.exponent - offset
        else:
            q = claim["q"] - offset if claim.get("apply_offset") else claim["q"]
        values = _per_solution_values(
            bundles, lambda g, u: lp_norm(u, q, g.cell_measure))
        spread_row(values, threshold, f"spread:L[{q:g}]")
    elif kind == "linf_stable":
        rows.extend(_linf_rows(bundles, claim, cid, ref))
    elif kind == "l1_stable":
        values = _per_solution_values(
            bundles, lambda g, u: lp_norm(u, 1.0, g.cell_measure))
        spread_row(values, claim.get("threshold", 1.5), "spread:L[1]")
    elif kind == "w1q_stable":
        q = claim["q"]
        probe = claim.get("probe")
        values = _per_solution_values(
            bundles,
            lambda g, u: sobolev_norm(g, u, q, mask=_resolve_probe_mask(g, probe)))
        where = f"@{probe:g}" if probe is not None else ""
        spread_row(values, claim.get("threshold", 1.5), f"spread:W1[{q:g}]{where}")
    elif kind == "power_w12":
        k = claim.get("k")
        gamma = claim["gamma"]
        def powered(g, u):
            base = np.maximum(u, 0.0)
            v = truncate(k, base) ** gamma if k is not None else base**gamma
            return sobolev_norm(g, v, 2)
        values = _per_solution_values(bundles, powered)
        tag = f"T{k:g}^" if k is not None else "^"
        spread_row(values, claim.get("threshold", 1.5),
                   f"spread:W1[2]({tag}{gamma:g})")
    elif kind == "level_energy":
        l_list = claim.get("l_list", [1, 2, 4, 8])
        threshold = claim.get("threshold", 2.0)
        ratios = []
        for grid, rep in bundles:
            for n in sorted(rep.solutions):
                u = np.asarray(rep.solutions[n], dtype=float)
                for level in l_list:
                    ratios.append(level_energy(grid, u, level) / (level + 1.0))
        spread_row(ratios, threshold, "spread:E(l)/(l+1)")
    elif kind == "marcinkiewicz_tail":
        grid, rep = bundles[-1]
        n_last = max(rep.solutions)
        u = np.asarray(rep.solutions[n_last], dtype=float)
        fit = marcinkiewicz_fit(gradient_magnitude(grid, u), grid.cell_measure,
                                window=tuple(claim["window"]))
        min_exp = claim["min_exponent"]
        rows.append(ConformanceRow(cid, ref, f"h={grid.h:g};n={n_last}",
                                   "gradient-tail-exponent", fit.exponent,
                                   min_exp, fit.exponent >= min_exp))
    elif kind == "stampacchia":
        grid, rep = bundles[-1]
        cert = stampacchia_certificate(rep.solutions, claim["m"], grid,
                                       k_list=claim.get("k_list"),
                                       N_formula=claim.get("N_formula"))
        alpha_min = claim.get("alpha_min", 1.0)
        ok = cert.trivial_pass or (cert.alpha_fit is not None
                                   and cert.alpha_fit > alpha_min)
        rows.append(ConformanceRow(cid, ref, f"h={grid.h:g}", "level-decay-alpha",
                                   cert.alpha_fit if cert.alpha_fit is not None
                                   else 0.0, alpha_min, ok))
        if len(bundles) >= 2:
            tol = claim.get("linf_h_tol", 0.1)
            sups = []
            for g, r in bundles:
                n_last = max(r.solutions)
                sups.append(float(np.max(np.abs(r.solutions[n_last]))))
            ratio = max(sups) / max(min(sups), 1e-300)
            rows.append(ConformanceRow(cid, ref, label, "linf-h-ratio", ratio,
                                       1.0 + tol, ratio <= 1.0 + tol))
    else:
        raise IncompleteTableError(f"unknown claim kind {kind!r}")
    return rows


def _linf_rows(bundles, claim, cid, ref):
    """Sup-norm stability: spread over n per grid, ratio across grids."""
    rows = []
    threshold_n = claim.get("threshold", claim.get("threshold_n", 1.5))
    per_h_last = []
    for grid, rep in bundles:
        values = [float(np.max(np.abs(np.asarray(rep.solutions[n]))))
                  for n in sorted(rep.solutions)]
        stat, trivial = spread_statistic(values)
        rows.append(ConformanceRow(cid, ref, f"h={grid.h:g}", "spread:L[inf]",
                                   stat, threshold_n,
                                   trivial or stat <= threshold_n))
        per_h_last.append(values[-1])
    if len(bundles) >= 2:
        threshold_h = claim.get("threshold_h", 1.1)
        ratio = max(per_h_last) / max(min(per_h_last), 1e-300)
        rows.append(ConformanceRow(cid, ref, _sweep_label(bundles),
                                   "linf-h-ratio", ratio, threshold_h,
                                   ratio <= threshold_h))
    return rows


def uniform_bound_report(bundles, claims) -> ConformanceTable:
    """Evaluate every claim; bundles are (grid, report) pairs (one per h)."""
    table = ConformanceTable()
    for claim in claims:
        table.rows.extend(evaluate_claim(bundles, claim))
    return table
