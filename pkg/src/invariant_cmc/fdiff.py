"""Finite differences on arbitrary (sorted) grids via Fornberg weights."""

from __future__ import annotations

import numpy as np


def fornberg_weights(z: float, t: np.ndarray, order: int) -> np.ndarray:
    """Weights w with sum(w * f(t)) ~ f^(order)(z) for nodes ``t``."""
    t = np.asarray(t, dtype=float)
    npts = len(t)
    c = np.zeros((npts, order + 1))
    c1, c4 = 1.0, t[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, t[i] - z
        for j in range(i):
            c3 = t[i] - t[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def derivative(t: np.ndarray, f: np.ndarray, order: int = 1, width: int = 5) -> np.ndarray:
    """Derivative of sampled ``f`` with a ``width``-point stencil at every node.

    Stencils are centred where possible and shifted one-sided at the ends;
    with five points this is fourth order for the first derivative and
    third order (fourth on uniform grids) for the second.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    npts = len(t)
    if npts < width:
        raise ValueError(f"need at least {width} samples, got {npts}")
    out = np.empty(npts)
    half = width // 2
    for i in range(npts):
        lo = min(max(i - half, 0), npts - width)
        idx = slice(lo, lo + width)
        out[i] = fornberg_weights(t[i], t[idx], order) @ f[idx]
    return out
