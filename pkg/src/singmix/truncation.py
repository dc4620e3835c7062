"""Truncation calculus: clamp, excess and power-clamp of nodal fields.

All operations are numpy-vectorized and applied nodewise to grid functions;
the discrete gradient of a truncated field is simply the gradient of the
truncated nodal values.
"""

from __future__ import annotations

import numpy as np


class TruncationLevel(float):
    """A positive truncation level."""

    def __new__(cls, k):
        k = float(k)
        if not k > 0:
            raise ValueError("truncation level must be positive")
        return super().__new__(cls, k)


def truncate(k, s):
    """Clamp ``s`` into the band [-k, k]."""
    k = TruncationLevel(k)
    return np.clip(s, -k, k)


def excess(k, s):
    """Signed excess over the band: (|s| - k)^+ with the sign of s.

    Computed as ``s - truncate(k, s)``, which agrees with the signed-excess
    formula in every rounding and makes the split identity bitwise exact.
    """
    k = TruncationLevel(k)
    s = np.asarray(s, dtype=float)
    out = s - np.clip(s, -k, k)
    return out if out.ndim else float(out)


def power_truncate(k, gamma, s):
    """Power of the clamp, ``truncate(k, s)**gamma``, for nonnegative fields."""
    k = TruncationLevel(k)
    if not gamma > 0:
        raise ValueError("power-truncation exponent must be positive")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("power_truncate only applies to nonnegative fields")
    out = np.minimum(s, k) ** gamma
    return out if out.ndim else float(out)
