"""Nonlocal interaction kernels and their exterior-tail integrals.

The comparison kernel is the radial power law ``|x-y|**(-(N+2s))``; named
variants multiply it by a constant and/or a positive product field
``c(x)*c(y)``, which keeps the kernel symmetric by construction and realizes
two-sided comparability to the radial law.  The pairwise O(M^2) sums run on
a compiled extension when it was built, with a chunked numpy fallback
selected at import time (``BACKEND`` names the active one).

The exterior tail at a node is the integral of the kernel over the
complement of the grid's cell-cover box.  For the radial kernel the radial
integral collapses to a closed form and only a piecewise-smooth angular
integral remains; it is split at the corner directions and handled by
Gauss-Legendre panels, with a coarse/fine comparison guarding convergence.
Perturbed kernels additionally quadrature the radial direction after the
substitution t = rho**(-2s), which maps the unbounded ray to a finite
interval with a bounded integrand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KernelBoundsError, TailQuadratureError
from .expressions import Field
from .grid import Grid

try:  # compiled hot loops, built by setup.py when a C toolchain is present
    from . import _pairwise as _backend

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _pairwise_np as _backend

    BACKEND = "numpy"

# expose the active implementations (benchmarks compare both explicitly)
radial_offdiag = _backend.radial_offdiag
radial_rowsums = _backend.radial_rowsums
radial_apply = _backend.radial_apply


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric interaction kernel comparable to the radial power law.

    ``K(x, y) = scale * c(x) * c(y) * |x-y|**(-(N+2s))`` with ``c`` the
    optional perturbation field.  The field acts within the grid's cell-cover
    box; beyond it ``c`` takes the constant ``far_value``, so the exterior
    tail stays a closed-form multiple of the radial tail (a genuinely varying
    far field would leave an oscillatory improper integral with no reliable
    tolerance).  ``lam`` is the claimed two-sided comparability constant,
    checked by sampling.
    """

    s: float
    lam: float = 1.0
    scale: float = 1.0
    field: Field = None
    far_value: float = 1.0

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("fractional order s must lie in (0, 1)")
        if self.lam < 1:
            raise ValueError("comparability constant must be >= 1")
        if not self.scale > 0:
            raise ValueError("kernel scale must be positive")
        if not self.far_value > 0:
            raise ValueError("far-field value must be positive")

    @classmethod
    def fractional(cls, s, lam=1.0, scale=1.0, field=None, far_value=1.0):
        if field is not None:
            field = Field(field)
        return cls(s=s, lam=lam, scale=scale, field=field, far_value=far_value)

    def power(self, dim):
        return dim + 2 * self.s

    @property
    def translation_invariant(self):
        return self.field is None

    def field_values(self, points):
        if self.field is None:
            return np.ones(np.atleast_2d(points).shape[0])
        values = self.field(points)
        if np.any(values <= 0):
            raise KernelBoundsError("kernel perturbation field must stay positive")
        return values

    def values(self, px, py):
        """K(x, y) for paired point arrays, used by tests and validation."""
        px = np.atleast_2d(np.asarray(px, dtype=float))
        py = np.atleast_2d(np.asarray(py, dtype=float))
        dist = np.linalg.norm(px - py, axis=1)
        base = self.scale * dist ** (-self.power(px.shape[1]))
        # field product first: commutativity keeps K(x,y) == K(y,x) bitwise
        return base * (self.field_values(px) * self.field_values(py))

    def validate(self, grid: Grid, seed: int = 20240, n_pairs: int = 256):
        """Sample node pairs: two-sided radial bounds and exact symmetry."""
        rng = np.random.default_rng(seed)
        nodes = grid.nodes
        ia = rng.integers(0, nodes.shape[0], size=n_pairs)
        ib = rng.integers(0, nodes.shape[0], size=n_pairs)
        keep = ia != ib
        px, py = nodes[ia[keep]], nodes[ib[keep]]
        kxy = self.values(px, py)
        kyx = self.values(py, px)
        if not np.array_equal(kxy, kyx):
            raise KernelBoundsError("sampled kernel is not exactly symmetric")
        radial = np.linalg.norm(px - py, axis=1) ** (-self.power(grid.dim))
        ratio = kxy / radial
        if ratio.max() > self.lam * (1 + 1e-12) or ratio.min() < 1 / self.lam * (1 - 1e-12):
            raise KernelBoundsError(
                f"sampled kernel/radial ratio in [{ratio.min():.3g}, {ratio.max():.3g}] "
                f"violates the claimed constant {self.lam}"
            )


def _gauss_panels(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _ray_distance_to_box(points, angles, box):
    """Distance along direction ``angles`` from each point to the box boundary.

    ``points``: (M, 2); ``angles``: (M, K).  Returns (M, K).
    """
    (a1, b1), (a2, b2) = box
    c = np.cos(angles)
    s = np.sin(angles)
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    with np.errstate(divide="ignore"):
        tx = np.where(c > 0, (b1 - x) / c, np.where(c < 0, (a1 - x) / c, np.inf))
        ty = np.where(s > 0, (b2 - y) / s, np.where(s < 0, (a2 - y) / s, np.inf))
    return np.minimum(tx, ty)


def _corner_angles(points, box):
    (a1, b1), (a2, b2) = box
    corners = np.array([[a1, a2], [a1, b2], [b1, a2], [b1, b2]])
    rel = corners[None, :, :] - points[:, None, :]
    angles = np.arctan2(rel[:, :, 1], rel[:, :, 0])
    return np.sort(angles, axis=1)


def _tail_radial_2d(points, box, s, scale, n_gauss):
    """scale * int_{R^2 \\ box} |y - x|^(-2-2s) dy via corner-split panels."""
    corners = _corner_angles(points, box)
    starts = np.concatenate([corners, corners[:, :1] + 2 * np.pi], axis=1)
    gx, gw = _gauss_panels(n_gauss)
    total = np.zeros(points.shape[0])
    for seg in range(4):
        lo = starts[:, seg][:, None]
        hi = starts[:, seg + 1][:, None]
        theta = 0.5 * (hi - lo) * gx[None, :] + 0.5 * (hi + lo)
        rho = _ray_distance_to_box(points, theta, box)
        vals = rho ** (-2 * s)
        total += 0.5 * (hi - lo)[:, 0] * (vals * gw[None, :]).sum(axis=1)
    return scale * total / (2 * s)


def exterior_tail(grid: Grid, kernel: KernelSpec, rtol: float = 1e-8):
    """Tail integral over the complement of the cell-cover box, per interior node.

    The radial part is exact in one dimension and a corner-split angular
    quadrature in two; a coarse/fine panel comparison estimates the error and
    raises :class:`TailQuadratureError` naming the worst node on failure.
    Perturbed kernels multiply the radial tail by ``c(x) * far_value``.
    """
    points = grid.interior_points()
    box = grid.cover_box
    s = kernel.s
    if grid.dim == 1:
        (a, b) = box[0]
        x = points[:, 0]
        radial = kernel.scale * ((x - a) ** (-2 * s) + (b - x) ** (-2 * s)) / (2 * s)
    else:
        coarse = _tail_radial_2d(points, box, s, kernel.scale, 16)
        radial = _tail_radial_2d(points, box, s, kernel.scale, 32)
        err = np.abs(radial - coarse) / np.maximum(np.abs(radial), 1e-300)
        worst = int(np.argmax(err))
        if err[worst] > rtol:
            raise TailQuadratureError(
                f"tail quadrature error {err[worst]:.2e} > {rtol:.1e} at node "
                f"{points[worst].tolist()}"
            )
    if kernel.translation_invariant:
        return radial
    return radial * (kernel.field_values(points) * kernel.far_value)
