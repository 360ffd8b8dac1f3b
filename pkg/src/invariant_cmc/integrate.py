"""Adaptive integration of the generating-curve ODE with event detection.

The stepper is the Dormand-Prince 5(4) pair with a PI step-size controller.
Every accepted step is recorded. Sign changes of sin(sigma) (extrema of y)
and cos(sigma) (vertical tangents) are localized by bisection, re-stepping
from the start of the step, and the refined states are inserted into the
sample list. Approaching an orbit-space boundary is terminal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    AxisStart,
    CurveState,
    Derivative,
    GeometryParams,
    XAxisNorth,
    XAxisSouth,
    YAxis,
    axis_rate,
    regularized_start,
)

HALF_PI = 0.5 * math.pi

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_ORDER = 5
_SAFETY = 0.9
_ALPHA = 0.7 / _ORDER
_BETA = 0.4 / _ORDER
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# sign flips of sin/cos(sigma) below this size are round-off on a constant solution
EVENT_FLOOR = 1e-13


class StepFailure(RuntimeError):
    """The step controller underflowed the minimum step size."""


class EventKind(str, enum.Enum):
    Y_MAX = "YMax"
    Y_MIN = "YMin"
    VERTICAL_TANGENT = "VerticalTangent"
    X_AXIS_CONTACT = "XAxisContact"
    Y_AXIS_CONTACT = "YAxisContact"
    NORTH_CONTACT = "NorthContact"


CONTACT_KINDS = frozenset(
    {EventKind.X_AXIS_CONTACT, EventKind.Y_AXIS_CONTACT, EventKind.NORTH_CONTACT}
)


class Termination(str, enum.Enum):
    BUDGET_EXHAUSTED = "BudgetExhausted"
    AXIS_CONTACT = "AxisContact"
    STEP_FAILURE = "StepFailure"
    TERMINAL_EVENT = "TerminalEvent"


@dataclass(frozen=True)
class IntegrationControls:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_arclength: float = 100.0
    max_steps: int = 10**7
    axis_margin: float = 1e-8
    event_refine_tol: float = 1e-12
    angle_tol: float = 1e-6

    def __post_init__(self):
        for name in ("rtol", "atol", "max_arclength", "max_steps", "axis_margin",
                     "event_refine_tol", "angle_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Event:
    s: float
    kind: EventKind
    state: CurveState
    index: int  # position of the event state in the sample arrays
    orthogonal: bool | None = None  # contact events only
    contact_angle: float | None = None  # extrapolated sigma at the boundary


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    params: GeometryParams
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    dsigma: np.ndarray
    events: tuple[Event, ...]
    termination: Termination
    start: AxisStart | CurveState
    controls: IntegrationControls = field(default_factory=IntegrationControls)
    message: str = ""
    # -1 marks a branch traversed against the chosen normal (curvature -h)
    orientation: int = 1

    def __len__(self) -> int:
        return len(self.s)

    def state(self, i: int) -> CurveState:
        return CurveState(float(self.s[i]), float(self.x[i]), float(self.y[i]), float(self.sigma[i]))

    def derivative(self, i: int) -> Derivative:
        sg = float(self.sigma[i])
        return Derivative(math.cos(sg), math.sin(sg), float(self.dsigma[i]))

    @property
    def samples(self) -> list[tuple[CurveState, Derivative]]:
        return [(self.state(i), self.derivative(i)) for i in range(len(self))]

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])

    def events_of(self, *kinds: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind in kinds]

    @property
    def contact(self) -> Event | None:
        """The terminal boundary contact, if the curve ended on an axis."""
        if self.termination is Termination.AXIS_CONTACT and self.events:
            last = self.events[-1]
            if last.kind in CONTACT_KINDS:
                return last
        return None

    @property
    def starts_on_axis(self) -> bool:
        return isinstance(self.start, (YAxis, XAxisSouth, XAxisNorth))


class _Rhs:
    """Scalar vector field with the axis limit substituted at an axis start."""

    __slots__ = ("n1", "m1", "h", "axis_point", "axis_rate")

    def __init__(self, params: GeometryParams, axis_point=None, axis_rate=0.0, orientation=1):
        self.n1 = params.n - 1
        self.m1 = params.m - 1
        self.h = orientation * params.h
        self.axis_point = axis_point
        self.axis_rate = axis_rate

    def __call__(self, x, y, sg):
        if self.axis_point is not None and (x, y, sg) == self.axis_point:
            return self.axis_rate
        if not (x > 0.0 and 0.0 < y < math.pi):
            return math.nan
        return self.m1 * math.cos(sg) * math.cos(y) / math.sin(y) - self.n1 * math.sin(sg) / x - self.h


def _rk_step(f, x, y, sg, k1, hstep):
    """One Dormand-Prince step. Returns (x, y, sigma, k7, error_vector)."""
    kx = [math.cos(sg)]
    ky = [math.sin(sg)]
    ks = [k1]
    for i in range(1, 7):
        a = _A[i]
        xi = x + hstep * sum(a[j] * kx[j] for j in range(i))
        yi = y + hstep * sum(a[j] * ky[j] for j in range(i))
        si = sg + hstep * sum(a[j] * ks[j] for j in range(i))
        kx.append(math.cos(si))
        ky.append(math.sin(si))
        ks.append(f(xi, yi, si))
    # the last stage is evaluated at the 5th-order solution (FSAL)
    ex = hstep * sum(_E[j] * kx[j] for j in range(7))
    ey = hstep * sum(_E[j] * ky[j] for j in range(7))
    es = hstep * sum(_E[j] * ks[j] for j in range(7))
    return xi, yi, si, ks[6], (ex, ey, es)


def _error_norm(err, old, new, rtol, atol):
    total = 0.0
    for e, a, b in zip(err, old, new):
        sc = atol + rtol * max(abs(a), abs(b))
        total += (e / sc) ** 2
    return math.sqrt(total / 3.0)


def _axis_distance(x, y):
    """Distance to the nearest boundary piece and that piece's event kind."""
    d, kind = x, EventKind.Y_AXIS_CONTACT
    if y < d:
        d, kind = y, EventKind.X_AXIS_CONTACT
    if math.pi - y < d:
        d, kind = math.pi - y, EventKind.NORTH_CONTACT
    return d, kind


def perpendicular_angle(kind: EventKind, sigma: float) -> float:
    """The orthogonal arrival angle at a boundary piece, nearest to ``sigma``.

    Perpendicular to x = 0 means sigma = 0 mod pi; to y = 0 or y = pi it
    means sigma = pi/2 mod pi.
    """
    offset = 0.0 if kind is EventKind.Y_AXIS_CONTACT else HALF_PI
    return offset + math.pi * round((sigma - offset) / math.pi)


def extrapolate_to_axis(dist, sig) -> float:
    """Polynomial (Richardson-type) extrapolation of sigma to distance zero.

    ``dist`` and ``sig`` are the last few samples of the approach, nearest
    last. Uses up to three points (quadratic in the distance).
    """
    d = [float(v) for v in dist[-3:]]
    s = [float(v) for v in sig[-3:]]
    if len(set(d)) != len(d):
        return s[-1]
    total = 0.0
    for i in range(len(d)):
        w = 1.0
        for j in range(len(d)):
            if j != i:
                w *= (0.0 - d[j]) / (d[i] - d[j])
        total += w * s[i]
    return total


def integrate(
    start: AxisStart | CurveState,
    params: GeometryParams,
    controls: IntegrationControls | None = None,
    terminal: frozenset[EventKind] | set[EventKind] = frozenset(),
) -> ProfileCurve:
    """Integrate a generating curve forward in arclength.

    ``start`` is either an interior :class:`CurveState` or an axis-start
    descriptor (``YAxis``, ``XAxisSouth``, ``XAxisNorth``). Events listed in
    ``terminal`` stop the integration right after they are localized.
    """
    return _integrate(start, params, controls or IntegrationControls(), frozenset(terminal), 1)


def integrate_reversed(
    start: AxisStart | CurveState,
    params: GeometryParams,
    controls: IntegrationControls | None = None,
    terminal: frozenset[EventKind] | set[EventKind] = frozenset(),
) -> ProfileCurve:
    """Integrate with the opposite normal, i.e. mean curvature -h.

    Used to trace the other branch of a curve through an interior point
    (start at sigma + pi) and to run a sphere curve back from its x-axis
    contact.
    """
    return _integrate(start, params, controls or IntegrationControls(), frozenset(terminal), -1)


def make_rhs(curve: ProfileCurve) -> _Rhs:
    return _Rhs(curve.params, orientation=curve.orientation)


def _integrate(start, params, ctl, terminal, orientation) -> ProfileCurve:
    if isinstance(start, CurveState):
        if not (start.x > 0 and 0 < start.y < math.pi):
            raise ValueError("interior start must satisfy x > 0 and 0 < y < pi")
        s, x, y, sg = start.s, start.x, start.y, start.sigma
        f = _Rhs(params, orientation=orientation)
        k = f(x, y, sg)
        on_axis = False
    else:
        reg = regularized_start(start, replace(params, h=0.0) if orientation < 0 else params)
        st = reg.state
        s, x, y, sg = st.s, st.x, st.y, st.sigma
        k = axis_rate(start, params, orientation * params.h)
        f = _Rhs(params, (x, y, sg), k, orientation)
        on_axis = True

    S, X, Y, SG, DS = [s], [x], [y], [sg], [k]
    events: list[Event] = []
    s_end = s + ctl.max_arclength
    rtol, atol = ctl.rtol, ctl.atol

    # initial step: a fraction of the local length scale
    hstep = min(0.01, ctl.max_arclength, 0.1 * (rtol ** (1 / _ORDER)) / max(abs(k), 1e-3) + 1e-6)
    if not on_axis:
        d0, _ = _axis_distance(x, y)
        hstep = min(hstep, 0.5 * d0)
    err_prev = 1e-4
    termination = Termination.BUDGET_EXHAUSTED
    message = ""
    steps = 0

    while True:
        if s >= s_end - 1e-15 * max(1.0, abs(s_end)):
            message = "arclength budget exhausted"
            break
        if steps >= ctl.max_steps:
            message = "step budget exhausted"
            break
        hmin = 16 * np.finfo(float).eps * max(1.0, abs(s))
        hstep = min(hstep, s_end - s)
        if hstep < hmin:
            termination = Termination.STEP_FAILURE
            message = f"step size underflow at s={s!r}"
            break

        xn, yn, sn, kn, err = _rk_step(f, x, y, sg, k, hstep)
        en = _error_norm(err, (x, y, sg), (xn, yn, sn), rtol, atol)
        if not math.isfinite(en) or not math.isfinite(kn):
            hstep *= 0.25
            continue
        if en > 1.0:
            hstep *= max(_MIN_FACTOR, _SAFETY * en ** (-1 / _ORDER))
            continue

        steps += 1
        s_new = s + hstep
        found = _locate_events(f, s, x, y, sg, k, hstep, xn, yn, sn, ctl.event_refine_tol)
        stop = False
        for ev_s, kind, (ex, ey, esg, ek) in found:
            S.append(ev_s); X.append(ex); Y.append(ey); SG.append(esg); DS.append(ek)
            events.append(Event(ev_s, kind, CurveState(ev_s, ex, ey, esg), len(S) - 1))
            if kind in terminal:
                stop = True
                break
        if stop:
            termination = Termination.TERMINAL_EVENT
            message = f"terminal event {events[-1].kind.value}"
            break

        dn, contact_kind = _axis_distance(xn, yn)
        if dn < ctl.axis_margin:
            ev = _localize_contact(f, s, x, y, sg, k, hstep, ctl, contact_kind, S, X, Y, SG, DS)
            events.append(ev)
            termination = Termination.AXIS_CONTACT
            message = ("orthogonal" if ev.orthogonal else "non-orthogonal") + f" {ev.kind.value}"
            break

        s, x, y, sg, k = s_new, xn, yn, sn, kn
        S.append(s); X.append(x); Y.append(y); SG.append(sg); DS.append(k)

        factor = _SAFETY * max(en, 1e-10) ** (-_ALPHA) * err_prev**_BETA
        hstep *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        err_prev = max(en, 1e-4)
        # never step across more than half the distance to the boundary
        hstep = min(hstep, max(0.5 * dn, 0.5 * ctl.axis_margin))

    return ProfileCurve(
        params=params,
        s=np.asarray(S), x=np.asarray(X), y=np.asarray(Y),
        sigma=np.asarray(SG), dsigma=np.asarray(DS),
        events=tuple(events),
        termination=termination,
        start=start,
        controls=ctl,
        message=message,
        orientation=orientation,
    )


def _substep(f, s, x, y, sg, k, theta_h):
    xn, yn, sn, kn, _ = _rk_step(f, x, y, sg, k, theta_h)
    return xn, yn, sn, kn


def _bisect(pred, f, s, x, y, sg, k, lo, hi, plo, tol):
    """Bisect ``pred`` on substep lengths [lo, hi] with pred(lo) == plo."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        st = _substep(f, s, x, y, sg, k, mid)
        if (pred(st) > 0) == plo:
            lo = mid
        else:
            hi = mid
    return hi, _substep(f, s, x, y, sg, k, hi)


def _locate_events(f, s, x, y, sg, k, hstep, xn, yn, sn, tol):
    found = []
    for fn in (math.sin, math.cos):
        a, b = fn(sg), fn(sn)
        if abs(a) < EVENT_FLOOR:
            continue  # already sitting on the event (e.g. at the start)
        if not (a * b < 0.0 or b == 0.0):
            continue
        pred = (lambda st, fn=fn: fn(st[2]))
        ds, st = _bisect(pred, f, s, x, y, sg, k, 0.0, hstep, a > 0, tol)
        if fn is math.sin:
            kind = EventKind.Y_MAX if a > 0 else EventKind.Y_MIN
        else:
            kind = EventKind.VERTICAL_TANGENT
        found.append((s + ds, kind, st))
    found.sort(key=lambda t: t[0])
    return found


def _localize_contact(f, s, x, y, sg, k, hstep, ctl, kind, S, X, Y, SG, DS):
    """Find where the band around the boundary is entered and certify the angle."""
    margin = ctl.axis_margin

    def pred(st):
        return _axis_distance(st[0], st[1])[0] - margin

    ds, st = _bisect(pred, f, s, x, y, sg, k, 0.0, hstep, True, ctl.event_refine_tol)
    xs, ys, sgs, ks = st
    S.append(s + ds); X.append(xs); Y.append(ys); SG.append(sgs); DS.append(ks)

    if kind is EventKind.Y_AXIS_CONTACT:
        dist = np.asarray(X[-3:])
    elif kind is EventKind.X_AXIS_CONTACT:
        dist = np.asarray(Y[-3:])
    else:
        dist = math.pi - np.asarray(Y[-3:])
    sig_axis = extrapolate_to_axis(dist, SG[-3:])
    perp = perpendicular_angle(kind, sig_axis)
    orthogonal = abs(sig_axis - perp) < ctl.angle_tol
    state = CurveState(s + ds, xs, ys, sgs)
    return Event(s + ds, kind, state, len(S) - 1, orthogonal, sig_axis)


def point_at(curve: ProfileCurve, s: float, rhs: _Rhs | None = None) -> tuple[float, float, float, float]:
    """State ``(x, y, sigma, sigma')`` at arclength ``s`` by local re-integration.

    Steps from the nearest sample at or before ``s`` with one Dormand-Prince
    step, so the result carries the integrator's local accuracy.
    """
    S = curve.s
    if not S[0] <= s <= S[-1]:
        raise ValueError(f"s={s!r} outside the curve's range [{S[0]}, {S[-1]}]")
    i = int(np.searchsorted(S, s, side="right")) - 1
    i = min(max(i, 0), len(S) - 1)
    ds = s - S[i]
    x, y, sg, k = float(curve.x[i]), float(curve.y[i]), float(curve.sigma[i]), float(curve.dsigma[i])
    if ds == 0.0:
        return x, y, sg, k
    f = rhs or make_rhs(curve)
    return _substep(f, float(S[i]), x, y, sg, k, ds)


def resample(curve: ProfileCurve, s0: float, s1: float, num: int) -> ProfileCurve:
    """Uniform arclength resampling of ``[s0, s1]`` (endpoints included).

    Points come from local re-integration, not interpolation. Events of the
    source curve are dropped; the result is a plain sample carrier.
    """
    if num < 2 or not s1 > s0:
        raise ValueError("need num >= 2 and s1 > s0")
    f = make_rhs(curve)
    grid = np.linspace(s0, s1, num)
    out = np.array([point_at(curve, float(si), f) for si in grid])
    return replace(
        curve, s=grid, x=out[:, 0], y=out[:, 1], sigma=out[:, 2], dsigma=out[:, 3],
        events=(), message=f"resampled [{s0}, {s1}]",
    )


@dataclass(frozen=True, eq=False)
class GraphSegment:
    """A curve segment written as y = p(x), ordered by increasing x.

    ``h_graph`` is the curvature seen by the graph parametrization: it is
    -h when the curve runs toward decreasing x, since reordering reverses
    the orientation.
    """

    x: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    d2p: np.ndarray  # sigma' / cos^3 sigma, exact along the flow
    h_graph: float


def graph_extract(curve: ProfileCurve, between: tuple[int | None, int | None],
                  num: int = 2001) -> GraphSegment:
    """Resample the stretch between two events (``None`` = curve end) as a graph.

    Raises ValueError if a vertical tangent lies strictly inside the stretch.
    """
    i, j = between
    s0 = float(curve.s[0]) if i is None else curve.events[i].s
    s1 = float(curve.s[-1]) if j is None else curve.events[j].s
    if not s1 > s0:
        raise ValueError("events must be given in increasing arclength")
    if any(s0 < e.s < s1 for e in curve.events_of(EventKind.VERTICAL_TANGENT)):
        raise ValueError("segment contains a vertical tangent; not a graph over x")
    seg = resample(curve, s0, s1, num)
    c = np.cos(seg.sigma)
    interior = c[1:-1] if num > 2 else c
    if not (np.all(interior > 0) or np.all(interior < 0)):
        raise ValueError("cos(sigma) changes sign inside the segment")
    sign = 1.0 if interior[0] > 0 else -1.0
    x, p, sg, ds = seg.x, seg.y, seg.sigma, seg.dsigma
    dp = np.tan(sg)
    d2p = ds / c**3
    if sign < 0:
        x, p, dp, d2p = x[::-1], p[::-1], dp[::-1], d2p[::-1]
    h = curve.params.h * curve.orientation * sign
    return GraphSegment(x.copy(), p.copy(), dp, d2p, h)


def graph_residual(graph: GraphSegment, params: GeometryParams, d2p: np.ndarray | None = None) -> np.ndarray:
    """Residual of the graph-form curvature equation at the regular samples.

    Samples on the boundary (x = 0, p in {0, pi}) or with a vertical tangent
    are skipped; the result covers the remaining points in order.
    """
    mask = (graph.x > 0) & (graph.p > 0) & (graph.p < math.pi) & np.isfinite(graph.dp) & (np.abs(graph.dp) < 1e8)
    x, p, q = graph.x[mask], graph.p[mask], graph.dp[mask]
    lhs = (graph.d2p if d2p is None else d2p)[mask]
    w = 1.0 + q * q
    rhs = w * ((params.m - 1) / np.tan(p) - (params.n - 1) * q / x - graph.h_graph * np.sqrt(w))
    return lhs - rhs
