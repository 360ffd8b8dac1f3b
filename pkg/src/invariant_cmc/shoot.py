"""Shooting on the initial height A for embedded CMC hyperspheres.

A curve leaving the y-axis at (0, A) with A > x_h descends. It either turns
back up (sigma returns to 0: undershoot), develops a vertical tangent above
the x-axis (sigma reaches -pi/2: overshoot), or meets the x-axis
perpendicularly, which closes the hypersurface into a sphere. The event that
happens first is the shooting functional; bisection on it locates the sphere.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .classify import ClassificationResult, classify
from .integrate import (
    EventKind,
    IntegrationControls,
    ProfileCurve,
    Termination,
    integrate,
    integrate_reversed,
)
from .model import GeometryParams, XAxisSouth, YAxis, slice_height

log = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi
_TERMINAL = frozenset({EventKind.Y_MIN, EventKind.VERTICAL_TANGENT})


class Inconclusive(RuntimeError):
    """No shooting outcome within the arclength budget."""


class InvalidBracket(ValueError):
    pass


class Outcome(str, enum.Enum):
    UNDERSHOOT = "Undershoot"
    OVERSHOOT = "Overshoot"
    SPHERE = "Sphere"


@dataclass(frozen=True)
class ShootOutcome:
    tag: Outcome
    s_terminal: float
    state_terminal: object
    curve: ProfileCurve = field(repr=False, compare=False)


def shoot_once(A: float, params: GeometryParams, controls: IntegrationControls | None = None) -> ShootOutcome:
    """Integrate from (0, A) to the first of: sigma = 0, sigma = -pi/2, x-axis contact."""
    if not params.h > 0:
        raise ValueError("shooting needs h > 0")
    xh = slice_height(params)
    if not xh < A < math.pi:
        raise ValueError(f"A must lie in (x_h, pi) = ({xh!r}, pi), got {A!r}")
    ctl = controls or IntegrationControls()
    curve = integrate(YAxis(A), params, ctl, _TERMINAL)
    if curve.termination is Termination.STEP_FAILURE:
        raise Inconclusive(f"A={A!r}: {curve.message}")
    if curve.termination is Termination.BUDGET_EXHAUSTED:
        raise Inconclusive(f"A={A!r}: no terminal event within arclength {ctl.max_arclength}")
    ev = curve.events[-1]
    if curve.termination is Termination.TERMINAL_EVENT:
        tag = Outcome.UNDERSHOOT if ev.kind is EventKind.Y_MIN else Outcome.OVERSHOOT
    elif ev.kind is not EventKind.X_AXIS_CONTACT:
        raise Inconclusive(f"A={A!r}: unexpected {ev.kind.value}")
    elif ev.orthogonal:
        tag = Outcome.SPHERE
    else:
        # the singular mode decides which way the curve would have turned
        tag = Outcome.UNDERSHOOT if ev.state.sigma > -HALF_PI else Outcome.OVERSHOOT
    return ShootOutcome(tag, ev.s, ev.state, curve)


@dataclass(frozen=True)
class SphereResult:
    A_star: float
    curve: ProfileCurve = field(repr=False)
    bracket: tuple[float, float]
    certified: bool  # terminal contact certified orthogonal
    iterations: int
    history: tuple[tuple[float, str], ...] = field(repr=False, default=())
    monotone: bool = True

    @property
    def contact(self):
        return self.curve.contact


def _check_monotone(history) -> bool:
    under = [a for a, t in history if t == Outcome.UNDERSHOOT.value]
    over = [a for a, t in history if t == Outcome.OVERSHOOT.value]
    return not under or not over or max(under) < min(over)


def find_sphere_height(
    params: GeometryParams,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-4,
    controls: IntegrationControls | None = None,
    max_iter: int = 200,
) -> SphereResult:
    """Bisect the undershoot/overshoot dichotomy for the sphere height A*.

    The bracket is first narrowed below ``tol``; bisection then continues
    (the bracket only gets tighter) until a shot certifies an orthogonal
    x-axis contact or the bracket cannot be split further. The returned
    curve is that sphere shot, or the last near-critical shot if no
    certificate was reached.
    """
    ctl = controls or IntegrationControls()
    if bracket is None:
        bracket = find_bracket(params, ctl)
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise InvalidBracket(f"bracket must satisfy A_lo < A_hi, got {bracket!r}")
    out_lo, out_hi = shoot_once(lo, params, ctl), shoot_once(hi, params, ctl)
    history = [(lo, out_lo.tag.value), (hi, out_hi.tag.value)]
    if out_lo.tag is not Outcome.UNDERSHOOT or out_hi.tag is not Outcome.OVERSHOOT:
        raise InvalidBracket(
            f"need Undershoot at {lo!r} and Overshoot at {hi!r}, got {out_lo.tag.value}/{out_hi.tag.value}"
        )

    best = out_lo
    A_star = None
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        out = shoot_once(mid, params, ctl)
        history.append((mid, out.tag.value))
        best = out
        if out.tag is Outcome.SPHERE:
            A_star = mid
            break
        if out.tag is Outcome.UNDERSHOOT:
            lo = mid
        else:
            hi = mid
    else:
        log.warning("bisection hit max_iter=%d", max_iter)

    if A_star is None:
        A_star = 0.5 * (lo + hi)
        if hi - lo >= tol:
            raise Inconclusive(f"bracket [{lo!r}, {hi!r}] did not shrink below tol={tol!r}")
    monotone = _check_monotone(history)
    if not monotone:
        log.warning("non-monotone shooting outcomes in %r", history)
    certified = best.tag is Outcome.SPHERE
    return SphereResult(A_star, best.curve, (lo, hi), certified, it, tuple(history), monotone)


def find_bracket(params: GeometryParams, controls: IntegrationControls | None = None,
                 delta: float = 1e-3, step: float = 0.05) -> tuple[float, float]:
    """Scan A upward from x_h + delta until the first overshoot."""
    ctl = controls or IntegrationControls()
    A = slice_height(params) + delta
    prev = None
    while A < math.pi:
        out = shoot_once(A, params, ctl)
        if out.tag is Outcome.OVERSHOOT:
            if prev is None:
                raise InvalidBracket(f"first scanned height {A!r} already overshoots")
            return prev, A
        if out.tag is Outcome.UNDERSHOOT:
            prev = A
        A += step
    raise InvalidBracket("no overshoot found below pi")


def closure_check(result: SphereResult, params: GeometryParams, fraction: float = 0.5) -> float:
    """Run the sphere curve back from its x-axis contact and compare.

    Integrates from XAxisSouth(r_contact) with the opposite orientation over
    ``fraction`` of the curve length and returns the largest distance between
    the two traces at matching arclength.
    """
    from .integrate import point_at

    curve = result.curve
    contact = curve.contact
    if contact is None or contact.kind is not EventKind.X_AXIS_CONTACT:
        raise ValueError("curve does not end on the x-axis")
    total = contact.s
    ctl = replace(curve.controls, max_arclength=fraction * total)
    back = integrate_reversed(XAxisSouth(contact.state.x), params, ctl)
    err = 0.0
    for t, xb, yb in zip(back.s, back.x, back.y):
        s_fwd = total - t
        if s_fwd < curve.s[0]:
            break
        xf, yf, _, _ = point_at(curve, float(s_fwd))
        err = max(err, math.hypot(xf - xb, yf - yb))
    return err


@dataclass(frozen=True)
class SweepItem:
    A: float
    curve: ProfileCurve | None = field(repr=False)
    classification: ClassificationResult | None
    error: str | None = None


def _sweep_one(args) -> SweepItem:
    A, params, ctl = args
    try:
        if not 0 < A < math.pi:
            raise ValueError(f"A must lie in (0, pi), got {A!r}")
        curve = integrate(YAxis(A), params, ctl)
        return SweepItem(A, curve, classify(curve, params))
    except Exception as exc:  # collected per item, the sweep goes on
        return SweepItem(A, None, None, f"{type(exc).__name__}: {exc}")


def sweep_family(params: GeometryParams, A_values, controls: IntegrationControls | None = None,
                 workers: int = 1) -> list[SweepItem]:
    """Integrate and classify the y-axis starts at each height in ``A_values``."""
    ctl = controls or IntegrationControls()
    jobs = [(float(A), params, ctl) for A in A_values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, jobs))
    return [_sweep_one(j) for j in jobs]


def phase_table(items: list[SweepItem]) -> list[dict]:
    """Rows (A, topology, case, embedded, error) sorted by A."""
    rows = []
    for it in sorted(items, key=lambda t: t.A):
        c = it.classification
        rows.append({
            "A": it.A,
            "topology": c.topology.value if c else None,
            "case": c.case if c else None,
            "embedded": c.embedded if c else None,
            "error": it.error,
        })
    return rows


__all__ = [
    "Inconclusive", "InvalidBracket", "Outcome", "ShootOutcome", "SphereResult", "SweepItem",
    "shoot_once", "find_sphere_height", "find_bracket", "closure_check", "sweep_family",
    "phase_table",
]
