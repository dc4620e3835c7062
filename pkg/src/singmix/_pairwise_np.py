"""Pure-numpy fallback for the pairwise kernel sums.

Same contracts as the compiled extension, evaluated with chunked
broadcasting so memory stays bounded on large node sets.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 512


def _chunk_dist2(chunk, pts):
    diff = chunk[:, None, :] - pts[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def radial_offdiag(pts, power, scale):
    pts = np.ascontiguousarray(pts, dtype=float)
    m = pts.shape[0]
    out = np.empty((m, m), dtype=float)
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        d2 = _chunk_dist2(pts[lo:hi], pts)
        with np.errstate(divide="ignore"):
            block = scale * d2 ** (-0.5 * power)
        for i in range(lo, hi):
            block[i - lo, i] = 0.0
        out[lo:hi] = block
    return out


def radial_rowsums(pa, pb, power, scale):
    pa = np.ascontiguousarray(pa, dtype=float)
    pb = np.ascontiguousarray(pb, dtype=float)
    out = np.empty(pa.shape[0], dtype=float)
    for lo in range(0, pa.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, pa.shape[0])
        d2 = _chunk_dist2(pa[lo:hi], pb)
        with np.errstate(divide="ignore"):
            block = scale * d2 ** (-0.5 * power)
        block[d2 <= 1e-30] = 0.0
        out[lo:hi] = block.sum(axis=1)
    return out


def radial_apply(pts, power, scale, u):
    pts = np.ascontiguousarray(pts, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.empty(pts.shape[0], dtype=float)
    for lo in range(0, pts.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, pts.shape[0])
        d2 = _chunk_dist2(pts[lo:hi], pts)
        with np.errstate(divide="ignore"):
            block = scale * d2 ** (-0.5 * power)
        block[d2 <= 1e-30] = 0.0
        out[lo:hi] = block @ u
    return out
