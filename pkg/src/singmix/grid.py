"""Uniform Cartesian grids over intervals, rectangles and discs.

A grid is the full lattice covering the domain's bounding box: nodes whose
cell center lies inside the open domain are *interior* and carry unknowns,
all other lattice nodes form the exterior collar where fields are pinned to
zero.  Curved boundaries use cell-center inclusion (no cut cells), and each
node owns a cell of measure ``h**dim``, so the union of cells is the
bounding box padded by ``h/2`` on every side.  Everything outside that
padded cover box belongs to the analytic exterior tail handled by the
nonlocal assembly.

Distance to the boundary is always computed from the analytic shape, never
from the mesh, so boundary strips do not depend on the resolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGridError

_SHAPES = ("interval", "rectangle", "disc")


@dataclass(frozen=True)
class DomainSpec:
    """Analytic description of the computational domain.

    ``bounds`` is a per-axis tuple of (lo, hi) intervals for interval and
    rectangle shapes; discs use ``center`` and ``radius``.
    """

    shape: str
    bounds: tuple = None
    center: tuple = None
    radius: float = None

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown domain shape {self.shape!r}")
        if self.shape == "disc":
            if self.center is None or self.radius is None:
                raise ValueError("disc needs center and radius")
            if not self.radius > 0:
                raise ValueError("disc radius must be positive")
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))
            if len(self.center) != 2:
                raise ValueError("disc domains are two-dimensional")
            object.__setattr__(self, "radius", float(self.radius))
        else:
            if self.bounds is None:
                raise ValueError(f"{self.shape} needs bounds")
            bounds = tuple((float(a), float(b)) for a, b in self.bounds)
            object.__setattr__(self, "bounds", bounds)
            expected = 1 if self.shape == "interval" else 2
            if len(bounds) != expected:
                raise ValueError(f"{self.shape} needs {expected} axis bounds")
            for a, b in bounds:
                if not b > a:
                    raise ValueError("every axis must have positive extent")

    @property
    def dim(self):
        return 1 if self.shape == "interval" else 2

    def bounding_box(self):
        if self.shape == "disc":
            cx, cy = self.center
            r = self.radius
            return ((cx - r, cx + r), (cy - r, cy + r))
        return self.bounds

    def measure(self):
        """Analytic |Omega|."""
        if self.shape == "disc":
            return np.pi * self.radius**2
        out = 1.0
        for a, b in self.bounds:
            out *= b - a
        return out

    def inradius(self):
        if self.shape == "disc":
            return self.radius
        return min((b - a) / 2 for a, b in self.bounds)

    def center_point(self):
        if self.shape == "disc":
            return np.array(self.center, dtype=float)
        return np.array([(a + b) / 2 for a, b in self.bounds])

    def contains(self, points):
        """Strict interior test: points exactly on the boundary are outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape == "disc":
            return np.linalg.norm(pts - np.asarray(self.center), axis=1) < self.radius
        mask = np.ones(pts.shape[0], dtype=bool)
        for axis, (a, b) in enumerate(self.bounds):
            mask &= (pts[:, axis] > a) & (pts[:, axis] < b)
        return mask

    def distance_to_boundary(self, points):
        """Signed-free distance to the analytic boundary for interior points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape == "disc":
            return self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=1)
        dist = np.full(pts.shape[0], np.inf)
        for axis, (a, b) in enumerate(self.bounds):
            dist = np.minimum(dist, pts[:, axis] - a)
            dist = np.minimum(dist, b - pts[:, axis])
        return dist

    def scaled(self, factor):
        """Concentric shrinking about the center, used for probe subdomains."""
        if not 0 < factor <= 1:
            raise ValueError("scale factor must lie in (0, 1]")
        if self.shape == "disc":
            return DomainSpec("disc", center=self.center, radius=self.radius * factor)
        c = self.center_point()
        bounds = tuple(
            (c[i] - factor * (b - a) / 2, c[i] + factor * (b - a) / 2)
            for i, (a, b) in enumerate(self.bounds)
        )
        return DomainSpec(self.shape, bounds=bounds)

    def to_json_dict(self):
        if self.shape == "disc":
            return {"shape": "disc", "center": list(self.center), "radius": self.radius}
        return {"shape": self.shape, "bounds": [list(b) for b in self.bounds]}

    @classmethod
    def from_json_dict(cls, d):
        if d["shape"] == "disc":
            return cls("disc", center=tuple(d["center"]), radius=d["radius"])
        return cls(d["shape"], bounds=tuple(tuple(b) for b in d["bounds"]))


class Grid:
    """Lattice of nodes with interior mask and quadrature bookkeeping.

    Nodes are ordered lexicographically by coordinates (axis 0 major), a
    pure function of ``(spec, h)``.  Immutable after construction.
    """

    def __init__(self, spec: DomainSpec, h: float, lattice_shape, origin):
        self.spec = spec
        self.h = float(h)
        self.lattice_shape = tuple(int(m) for m in lattice_shape)
        self.origin = np.asarray(origin, dtype=float)
        axes = [
            self.origin[d] + self.h * np.arange(m)
            for d, m in enumerate(self.lattice_shape)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.nodes = np.stack([m.ravel() for m in mesh], axis=1)
        self.interior_mask = spec.contains(self.nodes)
        self.cell_measure = self.h**self.dim
        # cells of lattice nodes tile the box padded by h/2 on every side
        self.cover_box = tuple(
            (ax[0] - self.h / 2, ax[-1] + self.h / 2) for ax in axes
        )
        self.collar_policy = (
            "cell-center inclusion; exterior lattice nodes pinned to zero; "
            "cells cover the bounding box padded by h/2"
        )
        self.nodes.setflags(write=False)
        self.interior_mask.setflags(write=False)

    @property
    def dim(self):
        return self.spec.dim

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_interior(self):
        return int(self.interior_mask.sum())

    def interior_points(self):
        return self.nodes[self.interior_mask]

    def exterior_points(self):
        return self.nodes[~self.interior_mask]

    def embed(self, u_interior, fill=0.0):
        """Scatter an interior vector onto the full lattice (exterior = fill)."""
        u_interior = np.asarray(u_interior, dtype=float)
        full = np.full(self.n_nodes, fill, dtype=float)
        full[self.interior_mask] = u_interior
        return full.reshape(self.lattice_shape)

    def restrict(self, lattice_values):
        """Gather lattice values back to the interior vector."""
        return np.asarray(lattice_values, dtype=float).ravel()[self.interior_mask]

    def interior_measure(self):
        """Quadrature measure of the interior: count times cell measure."""
        return self.n_interior * self.cell_measure

    def to_json(self):
        return json.dumps(
            {"spec": self.spec.to_json_dict(), "h": self.h}, sort_keys=True
        )

    @classmethod
    def from_json(cls, text, **kwargs):
        d = json.loads(text)
        return build_grid(DomainSpec.from_json_dict(d["spec"]), d["h"], **kwargs)

    def __repr__(self):
        return (
            f"Grid({self.spec.shape}, h={self.h}, lattice={self.lattice_shape}, "
            f"interior={self.n_interior})"
        )


def build_grid(spec: DomainSpec, h: float, min_interior_per_axis: int = 4) -> Grid:
    """Build the uniform grid for a domain.

    When ``(hi - lo)/h`` is not an integer the lattice is centered so the
    overhang is symmetric; the spacing is always exactly ``h``.  A grid with
    fewer than ``min_interior_per_axis`` interior nodes on some lattice line
    raises :class:`DegenerateGridError` (pass a smaller threshold to build
    deliberately tiny grids).
    """
    if not h > 0:
        raise ValueError("h must be positive")
    box = spec.bounding_box()
    smallest_extent = min(b - a for a, b in box)
    if h >= smallest_extent:
        raise ValueError(
            f"h={h} is not smaller than the domain's smallest extent {smallest_extent}"
        )
    shape = []
    origin = []
    for a, b in box:
        m = int(np.floor((b - a) / h + 1e-12)) + 1
        start = a + ((b - a) - (m - 1) * h) / 2
        shape.append(m)
        origin.append(start)
    grid = Grid(spec, h, shape, origin)
    interior_lattice = grid.interior_mask.reshape(grid.lattice_shape)
    if grid.dim == 1:
        per_axis = [int(interior_lattice.sum())]
    else:
        per_axis = [
            int(interior_lattice.sum(axis=1).max()),
            int(interior_lattice.sum(axis=0).max()),
        ]
    if min(per_axis) < min_interior_per_axis:
        raise DegenerateGridError(
            f"grid has only {per_axis} interior nodes per axis "
            f"(need {min_interior_per_axis}); decrease h"
        )
    return grid


def boundary_strip(grid: Grid, eps: float):
    """Mask of interior nodes within analytic distance ``eps`` of the boundary.

    When ``eps`` is at least the inradius the strip swallows the whole
    interior; that is allowed and left for callers to flag.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    dist = grid.spec.distance_to_boundary(grid.nodes)
    return grid.interior_mask & (dist < eps)


def strip_covers_interior(grid: Grid, eps: float) -> bool:
    mask = boundary_strip(grid, eps)
    return bool(np.all(mask[grid.interior_mask]))


def probe_mask(grid: Grid, scale: float):
    """Interior-node mask of the concentric probe subdomain at ``scale``."""
    shrunk = grid.spec.scaled(scale)
    return grid.interior_mask & shrunk.contains(grid.nodes)
