"""Discrete forms of the mixed operator: local stiffness plus nonlocal part.

Local part: finite-volume face fluxes with the coefficient evaluated at cell
faces.  Only diagonal coefficient tensors are accepted: face-flux stencils
for cross terms would destroy the M-matrix structure that the comparison
principles and the discrete maximum principle rely on.

Nonlocal part: midpoint quadrature of the kernel over lattice cells with the
singular self-cell dropped (its symmetric principal-value pairing cancels at
leading order; the omitted-mass bound, one nearest-neighbor entry, is kept
in the assembly metadata).  The diagonal accumulates the full lattice row
sum plus the analytic exterior tail, so row sums over the extended
interior+exterior system stay nonnegative.  Grids beyond ``dense_cap``
interior nodes get a matrix-free operator with the identical quadrature:
translation-invariant kernels go through an FFT convolution of the same
sums, perturbed kernels through chunked pairwise application.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse

from .errors import CoefficientBoundsError
from .expressions import Field
from .grid import Grid
from .kernels import (
    BACKEND,
    KernelSpec,
    exterior_tail,
    radial_apply,
    radial_offdiag,
    radial_rowsums,
)

DENSE_CAP = 5000


@dataclass(frozen=True)
class EllipticCoefficient:
    """Diagonal coefficient tensor A(x) = diag(a_1(x), ..., a_N(x)).

    ``alpha``/``beta`` are the claimed ellipticity/boundedness constants;
    ``validate`` samples them at every grid node with a few random
    directions before assembly.
    """

    diag: tuple
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha <= self.beta:
            raise ValueError("need 0 < alpha <= beta")
        object.__setattr__(self, "diag", tuple(Field(f) for f in self.diag))

    @classmethod
    def identity(cls, dim):
        return cls(diag=(1.0,) * dim, alpha=1.0, beta=1.0)

    @classmethod
    def scaled(cls, dim, c):
        return cls(diag=(float(c),) * dim, alpha=float(c), beta=float(c))

    @classmethod
    def diagonal(cls, entries, alpha=None, beta=None):
        fields = tuple(Field(e) for e in entries)
        if alpha is None or beta is None:
            consts = []
            for f in fields:
                v = f(np.zeros((1, len(fields))))[0]
                consts.append(v)
            alpha = min(consts) if alpha is None else alpha
            beta = max(consts) if beta is None else beta
        return cls(diag=fields, alpha=alpha, beta=beta)

    def face_values(self, axis, points):
        return self.diag[axis](points)

    def matrix_at(self, points):
        points = np.atleast_2d(points)
        vals = np.stack([f(points) for f in self.diag], axis=1)
        return vals  # diagonal entries, shape (M, N)

    def validate(self, grid: Grid, seed: int = 77001, directions: int = 8):
        """Sampled check of alpha |xi|^2 <= xi^T A xi and |A| <= beta."""
        vals = self.matrix_at(grid.nodes)
        rng = np.random.default_rng(seed)
        xi = rng.standard_normal((directions, grid.dim))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        quad = vals @ (xi.T**2)  # (M, directions)
        if quad.min() < self.alpha * (1 - 1e-12):
            raise CoefficientBoundsError(
                f"sampled xi^T A xi = {quad.min():.6g} below alpha = {self.alpha}"
            )
        spectral = np.abs(vals).max(axis=1)
        if spectral.max() > self.beta * (1 + 1e-12):
            raise CoefficientBoundsError(
                f"sampled |A| = {spectral.max():.6g} above beta = {self.beta}"
            )


def _axis_faces(grid: Grid, axis):
    """Face midpoints and (left, right) lattice neighbors along an axis.

    Faces are enumerated between every lattice node and its successor, plus
    the two virtual faces closing the lattice (missing neighbors are
    Dirichlet zeros).  Returns index arrays into the flat lattice with -1
    for a missing side.
    """
    shape = grid.lattice_shape
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    if grid.dim == 1:
        left = np.concatenate([[-1], idx.ravel()])
        right = np.concatenate([idx.ravel(), [-1]])
    elif axis == 0:
        pad = -np.ones((1, shape[1]), dtype=int)
        left = np.concatenate([pad, idx], axis=0).ravel()
        right = np.concatenate([idx, pad], axis=0).ravel()
    else:
        pad = -np.ones((shape[0], 1), dtype=int)
        left = np.concatenate([pad, idx], axis=1).ravel()
        right = np.concatenate([idx, pad], axis=1).ravel()
    # face midpoint: node + h/2 along axis from the left node (or right - h/2)
    mid = np.zeros((left.size, grid.dim))
    have_left = left >= 0
    mid[have_left] = grid.nodes[left[have_left]]
    mid[have_left, axis] += grid.h / 2
    mid[~have_left] = grid.nodes[right[~have_left]]
    mid[~have_left, axis] -= grid.h / 2
    return left, right, mid


def assemble_local(grid: Grid, coeff: EllipticCoefficient) -> scipy.sparse.csr_matrix:
    """Finite-volume stiffness of -div(A grad u) over interior nodes."""
    coeff.validate(grid)
    n_int = grid.n_interior
    interior_index = -np.ones(grid.n_nodes, dtype=int)
    interior_index[grid.interior_mask] = np.arange(n_int)
    rows, cols, vals = [], [], []
    h2 = grid.h**2
    for axis in range(grid.dim):
        left, right, mid = _axis_faces(grid, axis)
        a_face = coeff.face_values(axis, mid)
        li = np.where(left >= 0, interior_index[left], -1)
        ri = np.where(right >= 0, interior_index[right], -1)
        touching = (li >= 0) | (ri >= 0)
        for side, other in ((li, ri), (ri, li)):
            own = touching & (side >= 0)
            rows.append(side[own])
            cols.append(side[own])
            vals.append(a_face[own] / h2)
            both = own & (other >= 0)
            rows.append(side[both])
            cols.append(other[both])
            vals.append(-a_face[both] / h2)
    L = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_int, n_int),
    )
    return L.tocsr()


class NonlocalDense:
    """Dense nonlocal matrix over interior nodes (diagonal included)."""

    is_dense = True

    def __init__(self, matrix, diag, tail, meta):
        self.matrix = matrix
        self._diag = diag
        self.tail = tail
        self.meta = meta

    @property
    def n(self):
        return self.matrix.shape[0]

    def apply(self, u):
        return self.matrix @ u

    def diagonal(self):
        return self._diag

    def to_dense(self):
        return self.matrix


class NonlocalConvolution:
    """Matrix-free nonlocal action via FFT convolution of the same sums.

    Valid for translation-invariant kernels on the uniform lattice: the
    off-diagonal quadrature is exactly a discrete convolution with the
    kernel stencil, so the matrix-vector product agrees with the dense
    assembly up to roundoff.
    """

    is_dense = False

    def __init__(self, grid: Grid, kernel: KernelSpec, diag, tail, meta, workers=None):
        self.grid = grid
        self.kernel = kernel
        self._diag = diag
        self.tail = tail
        self.meta = meta
        self.workers = workers
        self._prepare()

    def _prepare(self):
        grid = self.grid
        shape = grid.lattice_shape
        power = self.kernel.power(grid.dim)
        offsets = [np.arange(-(m - 1), m) for m in shape]
        mesh = np.meshgrid(*offsets, indexing="ij")
        d2 = sum((grid.h * m) ** 2 for m in mesh)
        with np.errstate(divide="ignore"):
            stencil = self.kernel.scale * d2 ** (-0.5 * power)
        center = tuple(m - 1 for m in shape)
        stencil[center] = 0.0
        self._full_shape = tuple(
            scipy.fft.next_fast_len(m + 2 * m - 2) for m in shape
        )
        self._stencil_fft = scipy.fft.rfftn(
            stencil, s=self._full_shape, workers=self.workers
        )
        self._extract = tuple(slice(m - 1, 2 * m - 1) for m in shape)

    def _convolve(self, lattice_values):
        uf = scipy.fft.rfftn(lattice_values, s=self._full_shape, workers=self.workers)
        conv = scipy.fft.irfftn(
            uf * self._stencil_fft, s=self._full_shape, workers=self.workers
        )
        return conv[self._extract]

    def lattice_rowsums(self):
        """h^N * sum over lattice nodes (self excluded), on interior nodes."""
        ones = np.ones(self.grid.lattice_shape)
        return self.grid.cell_measure * self.grid.restrict(self._convolve(ones))

    @property
    def n(self):
        return self.grid.n_interior

    def apply(self, u):
        lattice = self.grid.embed(u)
        offdiag = self.grid.cell_measure * self.grid.restrict(self._convolve(lattice))
        return self._diag * u - offdiag

    def diagonal(self):
        return self._diag

    def to_dense(self, cap=2000):
        if self.n > cap:
            raise ValueError(f"refusing to densify {self.n} nodes (cap {cap})")
        eye = np.eye(self.n)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.n)])


class NonlocalPairwiseFree:
    """Matrix-free pairwise apply for perturbed kernels beyond the dense cap."""

    is_dense = False

    def __init__(self, grid: Grid, kernel: KernelSpec, diag, tail, meta):
        self.grid = grid
        self.kernel = kernel
        self._diag = diag
        self.tail = tail
        self.meta = meta
        self._pts = np.ascontiguousarray(grid.interior_points())
        self._power = kernel.power(grid.dim)
        self._c = kernel.field_values(self._pts)

    @property
    def n(self):
        return self._pts.shape[0]

    def apply(self, u):
        weighted = np.ascontiguousarray(self._c * u)
        off = self._c * radial_apply(self._pts, self._power, self.kernel.scale, weighted)
        return self._diag * u - self.grid.cell_measure * off

    def diagonal(self):
        return self._diag

    def to_dense(self, cap=2000):
        if self.n > cap:
            raise ValueError(f"refusing to densify {self.n} nodes (cap {cap})")
        eye = np.eye(self.n)
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.n)])


def _nonlocal_diagonal(grid: Grid, kernel: KernelSpec):
    """Full-lattice row sums plus exterior tails, on interior nodes."""
    tail = exterior_tail(grid, kernel)
    pts_int = np.ascontiguousarray(grid.interior_points())
    pts_all = np.ascontiguousarray(grid.nodes)
    power = kernel.power(grid.dim)
    if kernel.translation_invariant:
        rowsums = radial_rowsums(pts_int, pts_all, power, kernel.scale)
    else:
        c_all = np.ascontiguousarray(kernel.field_values(pts_all))
        weighted = radial_apply(pts_all, power, kernel.scale, c_all)
        # lattice order == node order, so interior rows are a plain mask
        rowsums = kernel.field_values(pts_int) * weighted[grid.interior_mask]
    return grid.cell_measure * rowsums + tail, tail


def assemble_nonlocal(grid: Grid, kernel: KernelSpec, dense_cap: int = DENSE_CAP,
                      workers=None, prefer: str = "auto"):
    """Assemble the nonlocal part.

    ``prefer="auto"`` uses the FFT convolution for translation-invariant
    kernels at every size (identical quadrature sums, orders of magnitude
    faster per product); ``prefer="dense"`` materializes the matrix instead,
    up to ``dense_cap`` interior nodes.  Perturbed kernels are dense up to
    the cap and chunked-pairwise beyond it.
    """
    if prefer not in ("auto", "dense"):
        raise ValueError("prefer must be 'auto' or 'dense'")
    kernel.validate(grid)
    meta = {
        "backend": BACKEND,
        # omitted principal-value self-cell mass is bounded by one
        # nearest-neighbor entry of the row
        "self_cell_bound": kernel.scale
        * grid.cell_measure
        * grid.h ** (-kernel.power(grid.dim)),
        "kernel": {
            "s": kernel.s,
            "lam": kernel.lam,
            "scale": kernel.scale,
            "field": None if kernel.field is None else kernel.field.describe(),
        },
    }
    n_int = grid.n_interior
    if kernel.translation_invariant and (prefer == "auto" or n_int > dense_cap):
        tail = exterior_tail(grid, kernel)
        conv = NonlocalConvolution(grid, kernel, None, tail, meta, workers=workers)
        conv._diag = conv.lattice_rowsums() + tail
        meta["mode"] = "fft-convolution"
        return conv
    if n_int <= dense_cap:
        diag, tail = _nonlocal_diagonal(grid, kernel)
        pts = np.ascontiguousarray(grid.interior_points())
        power = kernel.power(grid.dim)
        off = radial_offdiag(pts, power, kernel.scale)
        if not kernel.translation_invariant:
            c = kernel.field_values(pts)
            off *= np.outer(c, c)
        B = -grid.cell_measure * off
        np.fill_diagonal(B, diag)
        meta["mode"] = "dense"
        return NonlocalDense(B, diag, tail, meta)
    meta["mode"] = "pairwise-free"
    diag, tail = _nonlocal_diagonal(grid, kernel)
    return NonlocalPairwiseFree(grid, kernel, diag, tail, meta)


class OperatorPair:
    """Assembled mixed operator: sparse local stiffness + nonlocal part.

    Immutable once assembled; the nonlocal slot may be ``None`` for the
    purely local mode.
    """

    def __init__(self, grid: Grid, local, nonlocal_part, coeff, kernel):
        self.grid = grid
        self.local = local
        self.nonlocal_part = nonlocal_part
        self.coeff = coeff
        self.kernel = kernel

    @property
    def n(self):
        return self.grid.n_interior

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"expected interior vector of length {self.n}")
        out = self.local @ u
        if self.nonlocal_part is not None:
            out = out + self.nonlocal_part.apply(u)
        return out

    def diagonal(self):
        d = np.asarray(self.local.diagonal()).copy()
        if self.nonlocal_part is not None:
            d += self.nonlocal_part.diagonal()
        return d

    def dense(self, cap=2000):
        """Dense system matrix, for the direct-solve oracle on small grids."""
        if self.n > cap:
            raise ValueError(f"refusing to densify {self.n} dof (cap {cap})")
        M = self.local.toarray()
        if self.nonlocal_part is not None:
            if self.nonlocal_part.is_dense:
                M = M + self.nonlocal_part.matrix
            else:
                M = M + self.nonlocal_part.to_dense(cap)
        return M

    def bilinear(self, u, v):
        """Discrete pairing <M u, v> with the cell measure."""
        return float(self.apply(u) @ v) * self.grid.cell_measure


def assemble_operator(grid: Grid, coeff: EllipticCoefficient,
                      kernel: KernelSpec = None, dense_cap: int = DENSE_CAP,
                      workers=None, prefer: str = "auto") -> OperatorPair:
    local = assemble_local(grid, coeff)
    nonlocal_part = None
    if kernel is not None:
        nonlocal_part = assemble_nonlocal(grid, kernel, dense_cap,
                                          workers=workers, prefer=prefer)
    return OperatorPair(grid, local, nonlocal_part, coeff, kernel)


def apply_operator(op: OperatorPair, u):
    return op.apply(u)


def dirichlet_energy(grid: Grid, u_interior, coeff: EllipticCoefficient = None):
    """Face-difference energy sum_faces a_f (du/h)^2 h^N (zero exterior).

    With ``coeff`` omitted this is the plain discrete Dirichlet energy; the
    assembled local form satisfies <L u, u> h^N >= alpha * energy exactly.
    """
    lattice = grid.embed(u_interior)
    h = grid.h
    energy = 0.0
    for axis in range(grid.dim):
        left, right, mid = _axis_faces(grid, axis)
        flat = lattice.ravel()
        ul = np.where(left >= 0, flat[np.maximum(left, 0)], 0.0)
        ur = np.where(right >= 0, flat[np.maximum(right, 0)], 0.0)
        diff = (ur - ul) / h
        a_face = 1.0 if coeff is None else coeff.face_values(axis, mid)
        energy += float(np.sum(a_face * diff**2)) * grid.cell_measure
    return energy


def gagliardo_form(op: OperatorPair, u):
    """Kernel-weighted double-difference quadratic form, <B u, u> h^N."""
    if op.nonlocal_part is None:
        raise ValueError("operator has no nonlocal part")
    return float(op.nonlocal_part.apply(u) @ u) * op.grid.cell_measure


def seminorm_domination_check(grid: Grid, kernel: KernelSpec, samples,
                              dense_cap: int = DENSE_CAP):
    """Empirical constant of the Gagliardo-form-by-Dirichlet-energy bound.

    Returns per-sample ratios and their maximum; samples with zero Dirichlet
    energy are skipped.
    """
    op = assemble_operator(grid, EllipticCoefficient.identity(grid.dim),
                           kernel, dense_cap)
    ratios = []
    for u in samples:
        u = np.asarray(u, dtype=float)
        denom = dirichlet_energy(grid, u)
        if denom <= 0:
            ratios.append(None)
            continue
        ratios.append(gagliardo_form(op, u) / denom)
    finite = [r for r in ratios if r is not None]
    return {
        "ratios": ratios,
        "max_ratio": max(finite) if finite else None,
        "skipped": sum(r is None for r in ratios),
    }
