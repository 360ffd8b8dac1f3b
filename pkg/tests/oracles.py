"""Independent reference computations used by the tests.

None of these call into the package's regularization, integrator or
quadrature; they re-derive the quantity from the defining equations.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv


def _sigma_rate(n, m, h, x, y, sg):
    # the non-singular vector field, written out here on purpose
    return (m - 1) * math.cos(sg) * math.cos(y) / math.sin(y) - (n - 1) * math.sin(sg) / x - h


def offset_rate(kind: str, value: float, n: int, m: int, h: float, eps: float) -> float:
    """Self-consistent initial turning rate k at arclength eps off an axis.

    The state at distance eps is written to second order in terms of k
    (sigma = sigma0 + k eps) and k is chosen so that the vector field there
    reproduces it. As eps -> 0 this converges to the axis limit.
    """
    if kind == "y-axis":
        def state(k):
            return eps, value + 0.5 * k * eps * eps, k * eps
    elif kind == "x-axis":
        def state(k):
            return value - 0.5 * k * eps * eps, eps, 0.5 * math.pi + k * eps
    elif kind == "x-axis-north":
        def state(k):
            return value + 0.5 * k * eps * eps, math.pi - eps, -0.5 * math.pi + k * eps
    else:
        raise ValueError(kind)

    def g(k):
        return _sigma_rate(n, m, h, *state(k)) - k

    return brentq(g, -1e3, 1e3, xtol=1e-15, rtol=1e-15)


def graph_offset_rate(A: float, n: int, m: int, h: float, eps: float) -> float:
    """Same limit from the graph form: p(eps) = A + c eps^2 / 2, p'(eps) = c eps."""

    def g(c):
        q = c * eps
        w = 1 + q * q
        p = A + 0.5 * c * eps * eps
        return w * ((m - 1) / math.tan(p) - (n - 1) * q / eps - h * math.sqrt(w)) - c

    return brentq(g, -1e3, 1e3, xtol=1e-15, rtol=1e-15)


def linearized_rk4(n: int, a: float, x_max: float, step: float):
    """Fixed-step classical RK4 for w'' = -a w - (n-1) w'/x, w(0)=1, w'(0)=0.

    The singular start is handled by the two-term series at x0 = step.
    Returns grids x, w.
    """
    x0 = step
    c1 = -a / (2 * n)
    c2 = a * a / (8 * n * (n + 2))
    w = 1 + c1 * x0**2 + c2 * x0**4
    dw = 2 * c1 * x0 + 4 * c2 * x0**3

    def f(x, w, dw):
        return dw, -a * w - (n - 1) * dw / x

    xs, ws = [0.0, x0], [1.0, w]
    x = x0
    nsteps = int(round((x_max - x0) / step))
    for _ in range(nsteps):
        k1 = f(x, w, dw)
        k2 = f(x + step / 2, w + step / 2 * k1[0], dw + step / 2 * k1[1])
        k3 = f(x + step / 2, w + step / 2 * k2[0], dw + step / 2 * k2[1])
        k4 = f(x + step, w + step * k3[0], dw + step * k3[1])
        w += step / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        dw += step / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        x += step
        xs.append(x)
        ws.append(w)
    return np.array(xs), np.array(ws)


def first_zero(xs: np.ndarray, ws: np.ndarray) -> float:
    i = int(np.nonzero(np.sign(ws[:-1]) * np.sign(ws[1:]) < 0)[0][0])
    # cubic through four neighbours, then a root of the local interpolant
    lo = max(i - 1, 0)
    coef = np.polyfit(xs[lo:lo + 4], ws[lo:lo + 4], 3)
    return brentq(lambda t: np.polyval(coef, t), xs[i], xs[i + 1])


def bessel_profile(n: int, a: float, x: np.ndarray) -> np.ndarray:
    """Closed form Gamma(n/2) (2/(sqrt(a) x))^(n/2-1) J_(n/2-1)(sqrt(a) x)."""
    nu = n / 2 - 1
    z = math.sqrt(a) * np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.gamma(n / 2) * (2 / z) ** nu * jv(nu, z)
    return np.where(z == 0, 1.0, out)
