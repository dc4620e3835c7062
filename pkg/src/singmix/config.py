"""Experiment configuration: versioned JSON schema -> module inputs.

Validation errors carry the JSON path of the offending entry so the CLI can
point at it precisely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .exponents import ExponentField
from .expressions import ExpressionError, Field
from .grid import DomainSpec, build_grid
from .kernels import KernelSpec
from .measures import MeasureData, max_resolvable_n
from .operators import DENSE_CAP, EllipticCoefficient
from .solver import FixedPointOptions

SCHEMA_VERSION = 1


def _require(cond, path, message):
    if not cond:
        raise ConfigError(path, message)


@dataclass
class ExperimentConfig:
    domain: DomainSpec
    h_list: list
    kernel: KernelSpec            # may be None: purely local mode
    coefficient: EllipticCoefficient
    delta: ExponentField
    data: MeasureData
    n_list: list                  # or the string "auto"
    auto_n_base: list
    fixed_point: FixedPointOptions
    probes: tuple = (0.5, 0.75)
    p_condition_eps: float = None
    norms: dict = field(default_factory=dict)
    claims: list = field(default_factory=list)
    out_dir: str = "out"
    compute_residuals: bool = False
    rel_gap_threshold: float = 0.01
    dense_cap: int = DENSE_CAP
    width_scale: float = None
    min_interior_per_axis: int = 4
    seed: int = 20240
    raw: dict = field(default_factory=dict)

    def grids(self):
        return [build_grid(self.domain, h, self.min_interior_per_axis)
                for h in self.h_list]

    def n_list_for(self, grid):
        if self.n_list != "auto":
            return list(self.n_list)
        has_atoms = bool(self.data.nu_atoms or self.data.mu_atoms)
        if not has_atoms:
            return list(self.auto_n_base)
        cap = max_resolvable_n(grid, self.width_scale)
        chosen = [n for n in self.auto_n_base if n <= cap]
        _require(chosen, "n_list", f"no resolvable steps at h={grid.h} (cap {cap})")
        return chosen


def _parse_domain(d):
    _require(isinstance(d, dict), "domain", "must be an object")
    try:
        return DomainSpec.from_json_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("domain", str(exc)) from None


def _parse_kernel(d):
    if d is None:
        return None
    _require(isinstance(d, dict), "kernel", "must be an object or null")
    preset = d.get("preset", "fractional")
    _require(preset == "fractional", "kernel.preset", f"unknown preset {preset!r}")
    try:
        return KernelSpec.fractional(
            s=d.get("s", 0.5), lam=d.get("lambda", 1.0),
            scale=d.get("scale", 1.0), field=d.get("field"))
    except (ValueError, ExpressionError) as exc:
        raise ConfigError("kernel", str(exc)) from None


def _parse_coefficient(d, dim):
    d = d or {"preset": "identity"}
    try:
        if "diag" in d:
            entries = d["diag"]
            _require(len(entries) == dim, "coefficient.diag",
                     f"needs {dim} entries")
            return EllipticCoefficient.diagonal(entries, alpha=d.get("alpha"),
                                                beta=d.get("beta"))
        if "scale" in d:
            return EllipticCoefficient.scaled(dim, d["scale"])
        _require(d.get("preset") == "identity", "coefficient",
                 "give preset 'identity', 'scale' or 'diag'")
        return EllipticCoefficient.identity(dim)
    except (ValueError, ExpressionError) as exc:
        raise ConfigError("coefficient", str(exc)) from None


def _parse_delta(d, center):
    _require(isinstance(d, dict), "delta", "must be an object")
    try:
        if "constant" in d:
            return ExponentField.constant(d["constant"],
                                          lipschitz_bound=d.get("lipschitz_bound"))
        _require("formula" in d, "delta", "give 'constant' or 'formula'")
        return ExponentField.from_formula(d["formula"], center=center,
                                          lipschitz_bound=d.get("lipschitz_bound"))
    except (ValueError, ExpressionError) as exc:
        raise ConfigError("delta", str(exc)) from None


def _parse_data(d, center):
    _require(isinstance(d, dict), "data", "must be an object")
    try:
        data = MeasureData.from_json_dict(d)
    except (KeyError, ValueError, TypeError, ExpressionError) as exc:
        raise ConfigError("data", str(exc)) from None
    # formulas with an 'r' variable resolve it against the domain center
    for name in ("nu_density", "H", "mu_density"):
        fld = getattr(data, name)
        if fld is not None:
            setattr(data, name, Field(fld, center=center))
    if data.G is not None:
        data.G = tuple(Field(g, center=center) for g in data.G)
    return data


def parse_config(d: dict) -> ExperimentConfig:
    _require(isinstance(d, dict), "$", "top level must be an object")
    version = d.get("version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "version",
             f"unsupported schema version {version}")
    domain = _parse_domain(d.get("domain"))
    center = tuple(domain.center_point())

    if "h_list" in d:
        h_list = d["h_list"]
        _require(isinstance(h_list, list) and h_list, "h_list",
                 "must be a nonempty list")
    else:
        _require("h" in d, "h", "give 'h' or 'h_list'")
        h_list = [d["h"]]
    for h in h_list:
        _require(isinstance(h, (int, float)) and h > 0, "h", "spacings must be > 0")

    kernel = _parse_kernel(d.get("kernel", {"preset": "fractional", "s": 0.5}))
    coeff = _parse_coefficient(d.get("coefficient"), domain.dim)
    delta = _parse_delta(d.get("delta", {"constant": 1.0}), center)
    data = _parse_data(d.get("data", {}), center)

    n_list = d.get("n_list", [1, 2, 4, 8, 16])
    if n_list != "auto":
        _require(isinstance(n_list, list) and n_list, "n_list",
                 "must be a nonempty list or 'auto'")
        ints = []
        for n in n_list:
            _require(isinstance(n, int) and n >= 1, "n_list",
                     "entries must be integers >= 1")
            ints.append(n)
        _require(ints == sorted(set(ints)), "n_list", "must be strictly increasing")
        n_list = ints
    auto_base = d.get("auto_n_base", [4, 8, 16, 32, 64])

    fp = d.get("fixed_point", {})
    try:
        opts = FixedPointOptions(
            damping=fp.get("damping", 0.7),
            inner_tol=fp.get("inner_tol", 1e-10),
            outer_tol=fp.get("outer_tol", 1e-8),
            max_iter=fp.get("max_iter", 200),
            theta_min=fp.get("theta_min", 0.05),
        )
    except ValueError as exc:
        raise ConfigError("fixed_point", str(exc)) from None

    probes = tuple(d.get("probes", [0.5, 0.75]))
    for p in probes:
        _require(0 < p <= 1, "probes", "scales must lie in (0, 1]")

    eps = d.get("p_condition_eps")
    if eps is not None:
        _require(eps > 0, "p_condition_eps", "must be positive")

    claims = d.get("claims", [])
    _require(isinstance(claims, list), "claims", "must be a list")
    for i, claim in enumerate(claims):
        _require(isinstance(claim, dict) and "kind" in claim, f"claims[{i}]",
                 "each claim needs a 'kind'")

    return ExperimentConfig(
        domain=domain, h_list=list(h_list), kernel=kernel, coefficient=coeff,
        delta=delta, data=data, n_list=n_list, auto_n_base=auto_base,
        fixed_point=opts, probes=probes, p_condition_eps=eps,
        norms=d.get("norms", {}), claims=claims,
        out_dir=d.get("out_dir", "out"),
        compute_residuals=d.get("compute_residuals", False),
        rel_gap_threshold=d.get("rel_gap_threshold", 0.01),
        dense_cap=d.get("dense_cap", DENSE_CAP),
        width_scale=d.get("width_scale"),
        min_interior_per_axis=d.get("min_interior_per_axis", 4),
        seed=d.get("seed", 20240), raw=d)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(path, "no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return parse_config(raw)


def norm_request_from(config: ExperimentConfig, delta_star: float = None):
    from .estimates import NormRequest

    norms = config.norms or {}
    p_list = tuple(np.inf if p == "inf" else float(p)
                   for p in norms.get("p_list", [1, 2, "inf"]))
    gamma = norms.get("power_gamma")
    if gamma is None and delta_star is not None and delta_star > 1:
        gamma = (delta_star + 1) / 2
    return NormRequest(
        p_list=p_list,
        q_list=tuple(norms.get("q_list", [1.2, 2.0])),
        k_list=tuple(norms.get("k_list", [1.0, 2.0, 4.0, 8.0])),
        power_gamma=gamma,
    )
