"""Variable singular exponents and predicted regularity targets.

The exponent field delta(x) controls how hard the nonlinearity blows up;
what matters for the estimates is only its ceiling ``delta_star`` over a
boundary strip of width ``eps``.  ``compute_p_condition`` extracts that
ceiling from strip nodes (any valid majorant works, so a nodal maximum is
enough; the strip node count is reported so refinement studies can confirm
stability).

``regularity_exponents`` evaluates the prediction tables that map data
integrability (r for the singular source, m for the perturbation) to the
target Lebesgue space of the solution.  Tables are labeled T4 (constant
delta >= 1), T6 (constant delta in (0,1)) and T7 (variable delta with
ceiling delta_star), each with cases i-iv; the companion energy exponent
table is labeled T2.  Case boundaries are evaluated exactly as stated,
including the strict/non-strict distinctions; parameters outside every case
produce an explicit no-prediction result rather than an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .expressions import Field
from .grid import Grid, boundary_strip


@dataclass(frozen=True)
class ExponentField:
    """delta(x): either a constant or a formula evaluated nodewise."""

    kind: str  # "constant" | "nodal"
    value: float = None
    formula: Field = None
    lipschitz_bound: float = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.value is None or not self.value > 0:
                raise ValueError("constant exponent must be positive")
        elif self.kind == "nodal":
            if self.formula is None:
                raise ValueError("nodal exponent needs a formula descriptor")
        else:
            raise ValueError(f"unknown exponent kind {self.kind!r}")

    @classmethod
    def constant(cls, value, lipschitz_bound=None):
        return cls("constant", value=float(value), lipschitz_bound=lipschitz_bound)

    @classmethod
    def from_formula(cls, spec, center=None, lipschitz_bound=None):
        return cls("nodal", formula=Field(spec, center=center),
                   lipschitz_bound=lipschitz_bound)

    def at(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(points.shape[0], self.value)
        values = self.formula(points)
        if np.any(values <= 0):
            raise ValueError("exponent field must be strictly positive")
        return values

    @property
    def constant_value(self):
        return self.value if self.kind == "constant" else None


def eval_delta(field_: ExponentField, x):
    """Evaluate delta at a single point."""
    return float(field_.at(np.atleast_2d(x))[0])


@dataclass(frozen=True)
class PCondition:
    """Ceiling of delta over the boundary strip of width eps."""

    eps: float
    delta_star: float
    strip_node_count: int

    def __post_init__(self):
        if self.delta_star < 1:
            raise ValueError("delta_star must be at least 1")


def compute_p_condition(field_: ExponentField, grid: Grid, eps: float) -> PCondition:
    """delta_star = max(1, max of delta over the eps-strip nodes)."""
    mask = boundary_strip(grid, eps)
    count = int(mask.sum())
    if count == 0:
        raise ValueError(
            f"boundary strip of width {eps} contains no interior node at h={grid.h}"
        )
    values = field_.at(grid.nodes[mask])
    return PCondition(eps=eps, delta_star=max(1.0, float(values.max())),
                      strip_node_count=count)


@dataclass
class ExponentReport:
    """Predicted target space for a parameter combination."""

    table: str                  # "T4" | "T6" | "T7" | none
    case: str = None            # "i".."iv"
    space: str = None           # "Linf" | "Lq"
    exponent: float = None      # finite Lebesgue exponent when space == "Lq"
    sobolev_q: float = None     # energy exponent from table T2 (constant delta)
    sobolev_q_attained: bool = True
    prediction: bool = True
    reason: str = None
    params: dict = field(default_factory=dict)

    @property
    def case_id(self):
        if not self.prediction:
            return "none"
        return f"{self.table}.{self.case}"

    def to_json_dict(self):
        d = asdict(self)
        d["case_id"] = self.case_id
        return d


def sobolev_exponent(N: int, delta: float) -> float:
    """Energy-space exponent for constant delta (table T2)."""
    if delta >= 1:
        return 2.0
    return N * (delta + 1) / (N + delta - 1)


def _two_star(N):
    return 2.0 * N / (N - 2.0) if N > 2 else math.inf


def _conjugate(sigma):
    return sigma / (sigma - 1.0)


def regularity_exponents(N: int, r: float, m: float,
                         delta: float = None, delta_star: float = None) -> ExponentReport:
    """Select the prediction table and case for data exponents (r, m).

    Exactly one of ``delta`` (constant exponent) or ``delta_star`` (ceiling
    of a variable exponent, >= 1) must be given.  ``m`` may be ``inf`` for
    bounded perturbations.  Returns a no-prediction report when (r, m) fall
    outside every case of the selected table.
    """
    if (delta is None) == (delta_star is None):
        raise ValueError("give exactly one of delta or delta_star")
    if N < 2:
        raise ValueError("prediction tables need N >= 2")
    if r < 1 or m < 1:
        raise ValueError("data exponents r, m must be >= 1")

    if delta is not None:
        if not delta > 0:
            raise ValueError("delta must be positive")
        table = "T4" if delta >= 1 else "T6"
        params = {"N": N, "delta": delta, "r": r, "m": m}
        sob_q = sobolev_exponent(N, delta)
        sob_attained = True
    else:
        if delta_star < 1:
            raise ValueError("delta_star must be at least 1")
        table = "T7"
        params = {"N": N, "delta_star": delta_star, "r": r, "m": m}
        # variable exponents only give the open range q < N/(N-1)
        sob_q = N / (N - 1.0)
        sob_attained = False

    def report(**kw):
        return ExponentReport(table=table, sobolev_q=sob_q,
                              sobolev_q_attained=sob_attained, params=params, **kw)

    def no_prediction(reason):
        return report(prediction=False, reason=reason)

    half_N = N / 2.0
    if N == 2:
        # only the bounded-data case survives in two dimensions: the
        # finite-exponent cases need 1 < m < N/2, which is empty
        if r > half_N and m > half_N:
            return report(case="i", space="Linf")
        return no_prediction("N=2 admits only the bounded-data case (i)")

    two_star = _two_star(N)
    m_star2 = N * m / (N - 2 * m) if 1 < m < half_N else None

    if table == "T4":
        low_r_ok = 1 <= r < half_N
        q_sing = N * r * (delta + 1) / (N - 2 * r) if low_r_ok else None
    elif table == "T6":
        threshold = _conjugate(two_star / (1 - delta))
        low_r_ok = threshold <= r < half_N
        q_sing = N * r * (delta + 1) / (N - 2 * r) if low_r_ok else None
    else:
        threshold = N * (delta_star + 1) / (N + 2 * delta_star)
        low_r_ok = threshold <= r < half_N
        q_sing = N * r / (N - 2 * r) if low_r_ok else None

    if r > half_N and m > half_N:
        return report(case="i", space="Linf")
    if r > half_N and 1 < m < half_N:
        return report(case="ii", space="Lq", exponent=m_star2)
    if low_r_ok and m > half_N:
        return report(case="iii", space="Lq", exponent=q_sing)
    if low_r_ok and 1 < m < half_N:
        return report(case="iv", space="Lq", exponent=min(m_star2, q_sing))
    return no_prediction(f"(r={r}, m={m}) outside every case of table {table}")
