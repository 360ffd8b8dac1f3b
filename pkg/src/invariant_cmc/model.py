"""Geometry of O(n) x O(m)-invariant hypersurfaces in R^n x S^m.

A hypersurface is described by its generating curve in the orbit space
[0, inf) x [0, pi], parametrized by arclength s with tangent angle sigma:

    x' = cos(sigma)
    y' = sin(sigma)
    sigma' = (m-1) cot(y) cos(sigma) - (n-1) sin(sigma) / x - h

Mean curvature is measured against the normal (sin sigma, -cos sigma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union


class DomainError(ValueError):
    """Raised when a state lies on (or outside) the orbit-space boundary."""


@dataclass(frozen=True)
class GeometryParams:
    n: int
    m: int
    h: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m:
            raise ValueError("n and m must be integers")
        if self.n < 2 or self.m < 2:
            raise ValueError(f"need n, m >= 2, got n={self.n}, m={self.m}")
        if not math.isfinite(self.h):
            raise ValueError("h must be finite")
        if self.h < 0:
            raise ValueError("h must be >= 0; use normalize_orientation for h < 0")


@dataclass(frozen=True)
class CurveState:
    s: float
    x: float
    y: float
    sigma: float


@dataclass(frozen=True)
class Derivative:
    dx: float
    dy: float
    dsigma: float


@dataclass(frozen=True)
class YAxis:
    """Start on the y-axis at (0, A), leaving horizontally."""

    A: float


@dataclass(frozen=True)
class XAxisSouth:
    """Start on y = 0 at (r, 0), leaving upward."""

    r: float


@dataclass(frozen=True)
class XAxisNorth:
    """Start on y = pi at (r, pi), leaving downward."""

    r: float


AxisStart = Union[YAxis, XAxisSouth, XAxisNorth]


def normalize_orientation(n: int, m: int, h: float, state: CurveState | None = None):
    """Map a (possibly negative) curvature to h >= 0.

    Reversing the curve flips the normal and hence the sign of h; the
    reversed tangent angle is sigma + pi. Returns ``(params, state)``.
    """
    if h >= 0:
        return GeometryParams(n, m, h), state
    if state is not None:
        state = replace(state, sigma=state.sigma + math.pi)
    return GeometryParams(n, m, -h), state


def slice_height(params: GeometryParams) -> float:
    """The colatitude x_h in (0, pi) with (m-1) cot(x_h) = h."""
    return math.atan2(params.m - 1, params.h)


def cylinder_radius(params: GeometryParams) -> float:
    """Radius (n-1)/h of the constant solution x = const (inf when h = 0)."""
    if params.h == 0:
        return math.inf
    return (params.n - 1) / params.h


def _check_interior(x: float, y: float) -> None:
    if not (x > 0 and 0 < y < math.pi):
        raise DomainError(f"state (x={x!r}, y={y!r}) is not in the open orbit space")


def cot(y: float) -> float:
    return math.cos(y) / math.sin(y)


def vector_field(state: CurveState, params: GeometryParams) -> Derivative:
    _check_interior(state.x, state.y)
    c, s = math.cos(state.sigma), math.sin(state.sigma)
    ds = (params.m - 1) * c * cot(state.y) - (params.n - 1) * s / state.x - params.h
    return Derivative(c, s, ds)


def axis_rate(kind: AxisStart, params: GeometryParams, h: float | None = None) -> float:
    """Limit of sigma' at an axis start (the singular term resolved by L'Hopital).

    ``h`` overrides ``params.h``; reversed branches use -h.
    """
    n, m = params.n, params.m
    h = params.h if h is None else h
    if isinstance(kind, YAxis):
        return ((m - 1) * cot(kind.A) - h) / n
    if isinstance(kind, XAxisSouth):
        return -((n - 1) / kind.r + h) / m
    if isinstance(kind, XAxisNorth):
        return ((n - 1) / kind.r - h) / m
    raise TypeError(f"unknown axis start {kind!r}")


@dataclass(frozen=True)
class RegularizedStart:
    state: CurveState
    derivative: Derivative
    kind: AxisStart

    def predict(self, eps: float) -> CurveState:
        """Quadratic-order state at arclength ``eps`` past the axis.

        sigma = sigma0 + k eps, and the position follows from integrating
        (cos, sin) of that angle to second order.
        """
        st, k = self.state, self.derivative.dsigma
        c, s = math.cos(st.sigma), math.sin(st.sigma)
        half = 0.5 * k * eps * eps
        return CurveState(
            st.s + eps,
            st.x + c * eps - s * half,
            st.y + s * eps + c * half,
            st.sigma + k * eps,
        )


def regularized_start(kind: AxisStart, params: GeometryParams) -> RegularizedStart:
    if isinstance(kind, YAxis):
        if not 0 < kind.A < math.pi:
            raise ValueError(f"y-axis start needs A in (0, pi), got {kind.A!r}")
        state = CurveState(0.0, 0.0, kind.A, 0.0)
    elif isinstance(kind, XAxisSouth):
        if not kind.r > 0:
            raise ValueError(f"x-axis start needs r > 0, got {kind.r!r}")
        state = CurveState(0.0, kind.r, 0.0, math.pi / 2)
    elif isinstance(kind, XAxisNorth):
        if not kind.r > 0:
            raise ValueError(f"x-axis start needs r > 0, got {kind.r!r}")
        state = CurveState(0.0, kind.r, math.pi, -math.pi / 2)
    else:
        raise TypeError(f"unknown axis start {kind!r}")
    k = axis_rate(kind, params)
    return RegularizedStart(state, Derivative(math.cos(state.sigma), math.sin(state.sigma), k), kind)


def pointwise_mean_curvature(state: CurveState, dsigma: float, params: GeometryParams) -> float:
    _check_interior(state.x, state.y)
    return (
        (params.m - 1) * math.cos(state.sigma) * cot(state.y)
        - (params.n - 1) * math.sin(state.sigma) / state.x
        - dsigma
    )


def stability_integrands(state: CurveState, dsigma: float, params: GeometryParams):
    """Return ``(ric, b2, weight)``: Ric(N), |B|^2 and x^(n-1) sin^(m-1)(y).

    The weight omits the unit-sphere volumes (see :func:`sphere_volume`).
    """
    _check_interior(state.x, state.y)
    n, m = params.n, params.m
    c2 = math.cos(state.sigma) ** 2
    ct = cot(state.y)
    ric = (m - 1) * c2
    b2 = dsigma**2 + (m - 1) * ct * ct * c2 + (n - 1) * math.sin(state.sigma) ** 2 / state.x**2
    weight = state.x ** (n - 1) * math.sin(state.y) ** (m - 1)
    return ric, b2, weight


def sphere_volume(k: int) -> float:
    """Volume of the unit k-sphere, 2 pi^((k+1)/2) / Gamma((k+1)/2)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)
