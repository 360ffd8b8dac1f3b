"""Second variation of area for invariant CMC hypersurfaces.

For an invariant test function u(s) along the generating curve, with
weight W = x^(n-1) sin^(m-1)(y) and P = Ric(N) + |B|^2,

    L u = u'' + (W'/W) u' + P u,         W'/W = (n-1) x'/x + (m-1) cot(y) y'
    Q(u) = w * int (u'^2 - P u^2) W ds = -w * int u L u W ds

where w = vol(S^(n-1)) vol(S^(m-1)). Both forms are evaluated; their
agreement is an integration-by-parts check on the quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq

from . import fdiff
from .integrate import EventKind, ProfileCurve, resample
from .model import GeometryParams, slice_height, sphere_volume

WINDOW_SAMPLES = 2001


class ConsistencyError(RuntimeError):
    """The two index-form evaluations disagree beyond quadrature tolerance."""


class CertificateError(ValueError):
    """The curve does not support the two-window certificate construction."""


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A test function sampled on one or more arclength windows.

    Each window carries its own resampled piece of the curve; u vanishes at
    the window ends. ``d2u`` is None when only values and first
    derivatives are known, in which case the Jacobi operator falls back to
    finite differences.
    """

    __test__ = False  # keep pytest from collecting this class

    pieces: tuple[ProfileCurve, ...]
    u: tuple[np.ndarray, ...]
    du: tuple[np.ndarray | None, ...]
    d2u: tuple[np.ndarray | None, ...]

    @property
    def support(self) -> tuple[tuple[float, float], ...]:
        return tuple((float(p.s[0]), float(p.s[-1])) for p in self.pieces)

    def scaled(self, coeffs: Sequence[float]) -> "TestFunction":
        """Multiply window k by ``coeffs[k]``."""
        if len(coeffs) != len(self.pieces):
            raise ValueError("one coefficient per window")

        def mul(arrs):
            return tuple(None if a is None else c * a for c, a in zip(coeffs, arrs))

        return TestFunction(self.pieces, mul(self.u), mul(self.du), mul(self.d2u))

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(
            self.pieces + other.pieces, self.u + other.u, self.du + other.du, self.d2u + other.d2u
        )


def _window(curve: ProfileCurve, s0: float, s1: float, num: int) -> ProfileCurve:
    if num % 2 == 0:
        num += 1  # odd count keeps Simpson on full panels
    if not curve.s[0] <= s0 < s1 <= curve.s[-1]:
        raise ValueError(f"window [{s0}, {s1}] outside the curve")
    piece = resample(curve, s0, s1, num)
    if np.any(piece.x <= 0) or np.any(piece.y <= 0) or np.any(piece.y >= math.pi):
        raise ValueError("test function support touches an axis")
    return piece


def sigma_second_derivative(piece: ProfileCurve, params: GeometryParams) -> np.ndarray:
    """sigma'' along the flow, by differentiating the sigma' equation."""
    n1, m1 = params.n - 1, params.m - 1
    x, y, sg, k = piece.x, piece.y, piece.sigma, piece.dsigma
    c, s = np.cos(sg), np.sin(sg)
    cot = np.cos(y) / np.sin(y)
    csc2 = 1.0 / np.sin(y) ** 2
    return -m1 * csc2 * s * c - m1 * cot * s * k - n1 * c * k / x + n1 * s * c / x**2


def sin_sigma_window(curve: ProfileCurve, s0: float, s1: float, params: GeometryParams | None = None,
                     num: int = WINDOW_SAMPLES) -> TestFunction:
    """u = sin(sigma) on [s0, s1] with analytic first and second derivatives.

    Between consecutive y-extrema sin(sigma) = y' vanishes at both ends,
    so u is an admissible compactly supported test function there.
    """
    params = params or curve.params
    piece = _window(curve, s0, s1, num)
    sg, k = piece.sigma, piece.dsigma
    u = np.sin(sg)
    du = k * np.cos(sg)
    d2u = sigma_second_derivative(piece, params) * np.cos(sg) - k * k * u
    return TestFunction((piece,), (u,), (du,), (d2u,))


def arclength_function(curve: ProfileCurve, s0: float, s1: float,
                       fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray | None, np.ndarray | None]],
                       num: int = WINDOW_SAMPLES) -> TestFunction:
    """Test function given as ``fn(s) -> (u, u', u'')`` on [s0, s1].

    ``fn`` may return None for either derivative; missing derivatives are
    then taken by finite differences.
    """
    piece = _window(curve, s0, s1, num)
    u, du, d2u = fn(piece.s)
    return TestFunction((piece,), (np.asarray(u, float),),
                        (None if du is None else np.asarray(du, float),),
                        (None if d2u is None else np.asarray(d2u, float),))


def _potential(piece: ProfileCurve, params: GeometryParams):
    n1, m1 = params.n - 1, params.m - 1
    x, y, sg, k = piece.x, piece.y, piece.sigma, piece.dsigma
    c2 = np.cos(sg) ** 2
    cot = np.cos(y) / np.sin(y)
    ric = m1 * c2
    b2 = k * k + m1 * cot * cot * c2 + n1 * np.sin(sg) ** 2 / x**2
    drift = n1 * np.cos(sg) / x + m1 * cot * np.sin(sg)
    weight = x**n1 * np.sin(y) ** m1
    return ric + b2, drift, weight


def _derivatives(piece: ProfileCurve, u, du, d2u):
    if du is None:
        du = fdiff.derivative(piece.s, u, 1)
    if d2u is None:
        d2u = fdiff.derivative(piece.s, du, 1)
    return du, d2u


def jacobi_apply(curve: ProfileCurve, u: TestFunction, params: GeometryParams | None = None) -> tuple[np.ndarray, ...]:
    """L u on each window of ``u`` (the ``curve`` argument fixes the geometry).

    Analytic derivatives are used when the test function carries them,
    otherwise five-point finite differences on the window grid.
    """
    params = params or curve.params
    out = []
    for piece, uu, du, d2u in zip(u.pieces, u.u, u.du, u.d2u):
        du, d2u = _derivatives(piece, uu, du, d2u)
        pot, drift, _ = _potential(piece, params)
        out.append(d2u + drift * du + pot * uu)
    return tuple(out)


def jacobi_identity_residual(curve: ProfileCurve, params: GeometryParams | None = None) -> np.ndarray:
    """Relative residual of u L u = (n-1) y'^2 / x^2 for u = sin(sigma).

    Evaluated at every interior sample of ``curve`` with analytic
    derivatives. L u is a cancellation of O(1) terms down to O(u), so the
    residual is measured against the size of those terms times |u|.
    """
    params = params or curve.params
    keep = (curve.x > 0) & (curve.y > 0) & (curve.y < math.pi)
    piece = replace(curve, s=curve.s[keep], x=curve.x[keep], y=curve.y[keep],
                    sigma=curve.sigma[keep], dsigma=curve.dsigma[keep], events=())
    sg, k = piece.sigma, piece.dsigma
    u = np.sin(sg)
    du = k * np.cos(sg)
    d2u = sigma_second_derivative(piece, params) * np.cos(sg) - k * k * u
    pot, drift, _ = _potential(piece, params)
    lu = d2u + drift * du + pot * u
    target = (params.n - 1) * u * u / piece.x**2
    scale = np.abs(u) * (np.abs(d2u) + np.abs(drift * du) + np.abs(pot * u)) + np.abs(target)
    scale = np.where(scale > 0, scale, 1.0)
    return np.abs(u * lu - target) / scale


@dataclass(frozen=True)
class IndexFormReport:
    Q: float
    mass: float
    segments: tuple[tuple[float, float], ...]
    constants_included: bool
    Q_dirichlet: float
    Q_jacobi: float
    quadrature_error: float
    richardson_error: float  # Simpson vs half-resolution Simpson
    abs_mass: float  # integral of |u|, the scale for the mass
    weighted_length: float
    coefficients: tuple[float, ...] = ()
    window_Q: tuple[float, ...] = ()
    notes: tuple[str, ...] = field(default=())

    @property
    def relative_mass(self) -> float:
        return abs(self.mass) / self.abs_mass if self.abs_mass else 0.0

    @property
    def relative_disagreement(self) -> float:
        scale = max(abs(self.Q_dirichlet), abs(self.Q_jacobi))
        return abs(self.Q_dirichlet - self.Q_jacobi) / scale if scale else 0.0

    def to_dict(self) -> dict:
        return {
            "Q": self.Q,
            "Q_dirichlet": self.Q_dirichlet,
            "Q_jacobi": self.Q_jacobi,
            "mass": self.mass,
            "relative_mass": self.relative_mass,
            "relative_disagreement": self.relative_disagreement,
            "quadrature_error": self.quadrature_error,
            "richardson_error": self.richardson_error,
            "weighted_length": self.weighted_length,
            "segments": [list(s) for s in self.segments],
            "coefficients": list(self.coefficients),
            "window_Q": list(self.window_Q),
            "constants_included": self.constants_included,
        }


def _simpson_with_error(f: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Simpson integral and the gap to the half-resolution rule."""
    full = float(simpson(f, x=s))
    if len(s) >= 5 and len(s) % 4 == 1:
        half = float(simpson(f[::2], x=s[::2]))
        return full, abs(full - half) / 15.0
    return full, 0.0


def index_form(curve: ProfileCurve, u: TestFunction, params: GeometryParams | None = None,
               include_constants: bool = True, rtol: float | None = None) -> IndexFormReport:
    """Q(u) by composite Simpson, evaluated in Dirichlet and in -u L u form.

    Raises ConsistencyError when the two disagree by more than 100 times
    the quadrature tolerance, max(Richardson error estimate, rtol * scale).
    """
    params = params or curve.params
    rtol = curve.controls.rtol if rtol is None else rtol
    omega = sphere_volume(params.n - 1) * sphere_volume(params.m - 1) if include_constants else 1.0
    qd = qj = mass = amass = wlen = err = scale = 0.0
    for piece, uu, du, d2u in zip(u.pieces, u.u, u.du, u.d2u):
        du, d2u = _derivatives(piece, uu, du, d2u)
        pot, drift, w = _potential(piece, params)
        lu = d2u + drift * du + pot * uu
        s = piece.s
        a, ea = _simpson_with_error((du * du - pot * uu * uu) * w, s)
        b, eb = _simpson_with_error(-uu * lu * w, s)
        c, _ = _simpson_with_error(uu * w, s)
        d, _ = _simpson_with_error(np.abs(uu) * w, s)
        e, _ = _simpson_with_error(w, s)
        qd, qj, mass, amass, wlen = qd + a, qj + b, mass + c, amass + d, wlen + e
        err += ea + eb
        scale += float(simpson(np.abs(du * du * w), x=s) + simpson(np.abs(pot * uu * uu * w), x=s))
    tol = max(err, rtol * scale)
    if abs(qd - qj) > 100.0 * tol:
        raise ConsistencyError(
            f"index form mismatch: Dirichlet {qd!r} vs Jacobi {qj!r} (tolerance {tol!r})"
        )
    return IndexFormReport(
        Q=omega * qd, mass=omega * mass, segments=u.support, constants_included=include_constants,
        Q_dirichlet=omega * qd, Q_jacobi=omega * qj, quadrature_error=omega * tol,
        richardson_error=omega * err,
        abs_mass=omega * amass, weighted_length=omega * wlen,
    )


def extremum_arclengths(curve: ProfileCurve) -> list[float]:
    return [e.s for e in curve.events_of(EventKind.Y_MAX, EventKind.Y_MIN)]


def instability_certificate(curve: ProfileCurve, params: GeometryParams | None = None,
                            include_constants: bool = True, num: int = WINDOW_SAMPLES,
                            max_tries: int = 8, target: float = 1e-10,
                            max_samples: int = 64001) -> IndexFormReport:
    """Mean-zero test function with Q < 0 built from sin(sigma) on two windows.

    With u1, u2 = sin(sigma) on consecutive inter-extrema windows, the
    combination C1 u1 + C2 u2 with C1 = int u2, C2 = -int u1 has zero mean
    and Q = C1^2 Q(u1) + C2^2 Q(u2), negative since u L u >= 0 pointwise.
    Window grids are doubled until the Richardson estimate of the
    quadrature error drops below ``target * |Q|`` (or ``max_samples``).
    """
    params = params or curve.params
    ext = extremum_arclengths(curve)
    if len(ext) < 3:
        raise CertificateError(f"need at least 3 y-extrema, found {len(ext)}")
    last = None
    for k in range(min(max_tries, len(ext) - 2)):
        rep = _two_window_certificate(curve, params, ext[k:k + 3], include_constants, num,
                                      target, max_samples)
        rep = IndexFormReport(**{**rep.__dict__, "notes": (f"windows start at extremum {k}",)})
        last = rep
        if rep.Q < -rep.quadrature_error:
            return rep
    raise CertificateError(f"no window pair gave a non-degenerate negative Q (last report {last!r})")


def _two_window_certificate(curve, params, ends, include_constants, num, target, max_samples):
    a, b, c = ends
    while True:
        u1 = sin_sigma_window(curve, a, b, params, num)
        u2 = sin_sigma_window(curve, b, c, params, num)
        r1 = index_form(curve, u1, params, include_constants)
        r2 = index_form(curve, u2, params, include_constants)
        c1, c2 = r2.mass, -r1.mass
        rep = index_form(curve, u1.scaled([c1]) + u2.scaled([c2]), params, include_constants)
        if rep.richardson_error <= target * abs(rep.Q) or 2 * num - 1 > max_samples:
            return IndexFormReport(**{**rep.__dict__, "coefficients": (c1, c2), "window_Q": (r1.Q, r2.Q)})
        num = 2 * num - 1


@dataclass(frozen=True)
class CriteriaReport:
    n: int
    m: int
    h: float
    slice: str
    cylinder: str
    threshold: float  # sqrt(m(n-1))
    radius: float  # (n-1)/h, inf at h = 0
    radius_threshold: float  # sqrt(n-1)/sqrt(m)
    h_form_unstable: bool
    r_form_unstable: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "h": self.h,
            "slice": self.slice, "cylinder": self.cylinder,
            "threshold": self.threshold,
            "radius": None if math.isinf(self.radius) else self.radius,
            "radius_threshold": self.radius_threshold,
            "h_form_unstable": self.h_form_unstable, "r_form_unstable": self.r_form_unstable,
        }


def cylinder_slice_criteria(params: GeometryParams) -> CriteriaReport:
    """Closed-form instability verdicts for the slice and cylinder solutions.

    The slice R^n x S^(m-1) is always unstable. The cylinder
    S^(n-1)(r) x S^m, r = (n-1)/h, is unstable iff h > sqrt(m(n-1)),
    i.e. r < sqrt(n-1)/sqrt(m). "not unstable" means no destabilizing
    invariant variation exists; it is not a claim about all variations.
    """
    n, m, h = params.n, params.m, params.h
    thr = math.sqrt(m * (n - 1))
    r_thr = math.sqrt(n - 1) / math.sqrt(m)
    if h == 0:
        # no cylinder solution of this type for h = 0
        return CriteriaReport(n, m, h, "unstable", "none", thr, math.inf, r_thr, False, False)
    r = (n - 1) / h
    by_h = h > thr
    by_r = r < r_thr
    verdict = "unstable" if by_h else "not unstable"
    return CriteriaReport(n, m, h, "unstable", verdict, thr, r, r_thr, by_h, by_r)


def cylinder_unstable_by_radius(n: int, m: int, r: float) -> bool:
    if not r > 0:
        raise ValueError("radius must be positive")
    return r < math.sqrt(n - 1) / math.sqrt(m)


@dataclass(frozen=True, eq=False)
class LinearizedSolution:
    x: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    zeros: tuple[float, ...]
    derivative_zeros: tuple[float, ...]
    interlaced: bool
    required_zeros: int  # lower bound from the oscillation estimate
    half_period: float  # pi sin(x_h) / sqrt(m-1)

    def to_dict(self) -> dict:
        return {
            "zeros": list(self.zeros),
            "derivative_zeros": list(self.derivative_zeros),
            "interlaced": self.interlaced,
            "required_zeros": self.required_zeros,
            "half_period": self.half_period,
        }


def linearized_coefficient(params: GeometryParams) -> float:
    """a = (m-1)/sin^2(x_h) in w'' + (n-1) w'/x + a w = 0."""
    return (params.m - 1) / math.sin(slice_height(params)) ** 2


def _series(x: float, a: float, n: int, terms: int = 12) -> tuple[float, float]:
    # w = sum c_k x^(2k), c_k = -a c_(k-1) / (2k (2k + n - 2))
    w, dw, c = 1.0, 0.0, 1.0
    for k in range(1, terms):
        c *= -a / (2 * k * (2 * k + n - 2))
        w += c * x ** (2 * k)
        dw += 2 * k * c * x ** (2 * k - 1)
    return w, dw


def _interlaced(z: Sequence[float], dz: Sequence[float]) -> bool:
    # strictly between two consecutive zeros of w there is exactly one zero of w'
    for a, b in zip(z, z[1:]):
        if sum(1 for d in dz if a < d < b) != 1:
            return False
    return True


def linearized_solution(params: GeometryParams, x_max: float, num: int = 2001,
                        rtol: float = 1e-12, atol: float = 1e-14) -> LinearizedSolution:
    """Solve the linearization about the slice, w(0) = 1, w'(0) = 0.

    The start is taken off the singular point with the power series at a
    small x0; zeros of w and w' are bracketed on the dense output and
    refined by Brent's method.
    """
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    a, n = linearized_coefficient(params), params.n
    x0 = min(1e-2, 0.5 * x_max) / math.sqrt(max(a, 1.0))
    w0, dw0 = _series(x0, a, n)

    def rhs(x, z):
        return [z[1], -a * z[0] - (n - 1) * z[1] / x]

    sol = solve_ivp(rhs, (x0, x_max), [w0, dw0], method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"linearized integration failed: {sol.message}")
    xs = np.linspace(0.0, x_max, num)
    ws, dws = np.empty(num), np.empty(num)
    for i, xi in enumerate(xs):
        if xi <= x0:
            ws[i], dws[i] = _series(float(xi), a, n)
        else:
            ws[i], dws[i] = sol.sol(xi)

    def comp(j):
        def g(x):
            return _series(x, a, n)[j] if x <= x0 else float(sol.sol(x)[j])
        return g

    def roots(vals, g):
        out = []
        for i in range(num - 1):
            if i == 0 and vals[0] == 0.0:
                continue  # w'(0) = 0 is the initial condition, not an oscillation
            if vals[i] == 0.0:
                out.append(float(xs[i]))
            elif vals[i] * vals[i + 1] < 0:
                out.append(brentq(g, xs[i], xs[i + 1], xtol=1e-14, rtol=1e-14))
        return tuple(out)

    zeros = roots(ws, comp(0))
    dzeros = roots(dws, comp(1))
    half = math.pi * math.sin(slice_height(params)) / math.sqrt(params.m - 1)
    required = max(0, math.floor(x_max / half) - 1)
    return LinearizedSolution(xs, ws, dws, zeros, dzeros, _interlaced(zeros, dzeros), required, half)
