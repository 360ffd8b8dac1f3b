"""Topological classification of integrated generating curves.

The taxonomy follows the three ways a complete curve can sit relative to the
y-axis, keyed on the infimum of x along the curve:

* P1: the curve reaches x = 0 (the hypersurface closes over the R^n origin);
* P2: inf x is attained at an interior point (a vertical tangent);
* P3: inf x is attained on y = 0 or y = pi.

Every verdict carries the evidence it rests on. Nothing beyond the integrated
horizon is asserted: if the finite computation does not witness the pattern
the result is ``Undetermined``.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .integrate import (
    EventKind,
    ProfileCurve,
    Termination,
    integrate_reversed,
    make_rhs,
    point_at,
)
from .model import (
    CurveState,
    GeometryParams,
    XAxisNorth,
    XAxisSouth,
    YAxis,
    cylinder_radius,
    slice_height,
)


class Topology(str, enum.Enum):
    SLICE_PRODUCT = "SliceProduct"  # R^n x S^(m-1)
    TUBE_PRODUCT = "TubeProduct"  # S^(n-1) x R^m
    IMMERSED_CYLINDER = "ImmersedCylinder"  # S^(n-1) x S^(m-1) x R, self-intersecting
    HYPERSPHERE = "HyperSphere"  # S^(n+m-1)
    CONSTANT_SLICE = "ConstantSlice"
    CONSTANT_CYLINDER = "ConstantCylinder"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Extremum:
    s: float
    x: float
    y: float
    kind: EventKind


@dataclass(frozen=True)
class SelfIntersection:
    s1: float
    s2: float
    point: tuple[float, float]
    angle: float  # crossing angle in [0, pi/2]
    branches: tuple[int, int] = (0, 0)
    degenerate: bool = False


@dataclass(frozen=True)
class Contact:
    kind: EventKind
    s: float
    x: float
    y: float
    orthogonal: bool
    at_start: bool


@dataclass(frozen=True)
class ClassificationResult:
    topology: Topology
    embedded: bool
    case: str | None  # "P1" | "P2" | "P3"
    extrema: tuple[Extremum, ...] = ()
    self_intersection: SelfIntersection | None = None
    contacts: tuple[Contact, ...] = ()
    evidence_horizon: float = 0.0
    reasons: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)


def extract_extrema(curve: ProfileCurve) -> list[Extremum]:
    return [
        Extremum(e.s, e.state.x, e.state.y, e.kind)
        for e in curve.events
        if e.kind in (EventKind.Y_MAX, EventKind.Y_MIN)
    ]


def oscillation_report(extrema: Sequence[Extremum], centre: float) -> tuple[bool, list[str]]:
    """Check the finite oscillation pattern: >= 3 alternating extrema, maxima
    above and minima below ``centre``, maxima decreasing and minima increasing."""
    notes = []
    if len(extrema) < 3:
        return False, [f"only {len(extrema)} extrema within the horizon"]
    kinds = [e.kind for e in extrema]
    if any(a == b for a, b in zip(kinds, kinds[1:])):
        notes.append("extrema do not alternate")
    maxima = [e.y for e in extrema if e.kind is EventKind.Y_MAX]
    minima = [e.y for e in extrema if e.kind is EventKind.Y_MIN]
    if any(v <= centre for v in maxima) or any(v >= centre for v in minima):
        notes.append("extrema do not straddle the constant solution")
    if any(b >= a for a, b in zip(maxima, maxima[1:])):
        notes.append("maxima not strictly decreasing")
    if any(b <= a for a, b in zip(minima, minima[1:])):
        notes.append("minima not strictly increasing")
    return not notes, notes


# --------------------------------------------------------------------------
# self-intersection
# --------------------------------------------------------------------------

def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _seg_distance(p1, p2, q1, q2):
    def pt_seg(p, a, b):
        abx, aby = b[0] - a[0], b[1] - a[1]
        L = abx * abx + aby * aby
        t = 0.0 if L == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / L))
        return math.hypot(p[0] - a[0] - t * abx, p[1] - a[1] - t * aby)

    return min(pt_seg(p1, q1, q2), pt_seg(p2, q1, q2), pt_seg(q1, p1, p2), pt_seg(q2, p1, p2))


def _segment_hits(P, Q, tol):
    """Return 'cross', 'near' (within tol, degenerate) or None."""
    (ax, ay), (bx, by) = P
    (cx, cy), (dx, dy) = Q
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return "cross"
    if _seg_distance(P[0], P[1], Q[0], Q[1]) < tol:
        return "near"
    return None


# segments closer than this in arclength are neighbours, not a self-approach
_NEIGHBOUR_GAP = 1e-6


def _candidate_pairs(segs: list[tuple[int, int, tuple, tuple]]):
    """Spatial-hash broad phase over (branch, index, p, q) segments."""
    lengths = [math.hypot(q[0] - p[0], q[1] - p[1]) for _, _, p, q in segs]
    cell = max(max(lengths, default=1.0), 1e-12)
    grid = defaultdict(list)
    for k, (_, _, p, q) in enumerate(segs):
        i0, i1 = sorted((math.floor(p[0] / cell), math.floor(q[0] / cell)))
        j0, j1 = sorted((math.floor(p[1] / cell), math.floor(q[1] / cell)))
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                grid[(i, j)].append(k)
    seen = set()
    for bucket in grid.values():
        for a in range(len(bucket)):
            for b in range(a + 1, len(bucket)):
                pair = (bucket[a], bucket[b])
                if pair not in seen:
                    seen.add(pair)
                    yield pair


def _refine(branches, b1, s1, b2, s2, tol, max_iter=50):
    """Newton on P(s1) = Q(s2) with points from local re-integration."""
    c1, c2 = branches[b1], branches[b2]
    f1, f2 = make_rhs(c1), make_rhs(c2)
    for _ in range(max_iter):
        s1 = min(max(s1, c1.s[0]), c1.s[-1])
        s2 = min(max(s2, c2.s[0]), c2.s[-1])
        x1, y1, g1, _ = point_at(c1, s1, f1)
        x2, y2, g2, _ = point_at(c2, s2, f2)
        t1 = (math.cos(g1), math.sin(g1))
        t2 = (math.cos(g2), math.sin(g2))
        rx, ry = x1 - x2, y1 - y2
        det = -t1[0] * t2[1] + t1[1] * t2[0]
        if det == 0.0:
            break
        # [t1, -t2] (d1, d2)^T = -(r)
        d1 = (-rx * -t2[1] - -t2[0] * -ry) / det
        d2 = (t1[0] * -ry - t1[1] * -rx) / det
        s1 += d1
        s2 += d2
        if abs(d1) < tol and abs(d2) < tol:
            break
    x1, y1, g1, _ = point_at(c1, min(max(s1, c1.s[0]), c1.s[-1]), f1)
    _, _, g2, _ = point_at(c2, min(max(s2, c2.s[0]), c2.s[-1]), f2)
    ang = abs(math.sin(g1 - g2))
    return s1, s2, (x1, y1), math.asin(min(1.0, ang))


def detect_self_intersection(
    curve: ProfileCurve | Sequence[ProfileCurve], tol: float = 1e-9
) -> SelfIntersection | None:
    """Earliest transversal crossing of the sampled curve, refined to ``tol``.

    ``curve`` may be a sequence of branches (e.g. the two halves of a curve
    through an interior point); crossings between branches count. Arclength
    ``s`` on every branch is measured from the shared start, so "earliest"
    minimises max(s1, s2). A near-tangential near miss within ``tol`` is
    reported with ``degenerate=True``.
    """
    branches = [curve] if isinstance(curve, ProfileCurve) else list(curve)
    segs = []
    for b, c in enumerate(branches):
        xs, ys = c.x.tolist(), c.y.tolist()
        for i in range(len(xs) - 1):
            segs.append((b, i, (xs[i], ys[i]), (xs[i + 1], ys[i + 1])))

    best = None
    degenerate = None
    for ka, kb in _candidate_pairs(segs):
        ba, ia, pa, qa = segs[ka]
        bb, ib, pb, qb = segs[kb]
        ca, cb = branches[ba], branches[bb]
        if ba == bb:
            lo, hi = sorted((ia, ib))
            gap = ca.s[hi] - ca.s[lo + 1]
        else:
            # branches meet only at their shared start
            gap = (ca.s[ia] - ca.s[0]) + (cb.s[ib] - cb.s[0])
        if gap <= _NEIGHBOUR_GAP:
            continue
        hit = _segment_hits((pa, qa), (pb, qb), tol)
        if hit is None:
            continue
        key = max(branches[ba].s[ia + 1] - branches[ba].s[0], branches[bb].s[ib + 1] - branches[bb].s[0])
        if hit == "near":
            if degenerate is None or key < degenerate[0]:
                degenerate = (key, ba, ia, bb, ib)
            continue
        if best is None or key < best[0]:
            best = (key, ba, ia, bb, ib, pa, qa, pb, qb)

    if best is None and degenerate is None:
        return None
    if best is None or (degenerate is not None and degenerate[0] < best[0]):
        _, ba, ia, bb, ib = degenerate
        ca, cb = branches[ba], branches[bb]
        return SelfIntersection(float(ca.s[ia]), float(cb.s[ib]),
                                (float(ca.x[ia]), float(ca.y[ia])), 0.0, (ba, bb), True)

    _, ba, ia, bb, ib, pa, qa, pb, qb = best
    # polyline intersection as the Newton seed
    rx, ry = qa[0] - pa[0], qa[1] - pa[1]
    sx, sy = qb[0] - pb[0], qb[1] - pb[1]
    den = rx * sy - ry * sx
    ta = ((pb[0] - pa[0]) * sy - (pb[1] - pa[1]) * sx) / den
    tb = ((pb[0] - pa[0]) * ry - (pb[1] - pa[1]) * rx) / den
    ca, cb = branches[ba], branches[bb]
    s1 = ca.s[ia] + ta * (ca.s[ia + 1] - ca.s[ia])
    s2 = cb.s[ib] + tb * (cb.s[ib + 1] - cb.s[ib])
    s1, s2, point, angle = _refine(branches, ba, float(s1), bb, float(s2), tol)
    degenerate_angle = angle < math.sqrt(tol)
    return SelfIntersection(s1, s2, point, angle, (ba, bb), degenerate_angle)


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

def _is_constant(curve: ProfileCurve, params: GeometryParams, tol: float):
    sg = curve.sigma
    if np.ptp(sg) > tol:
        return None
    s0 = float(sg[0])
    if abs(math.sin(s0)) < tol and abs(curve.y - slice_height(params)).max() < tol:
        return Topology.CONSTANT_SLICE
    if params.h > 0 and abs(math.cos(s0)) < tol:
        r = cylinder_radius(params)
        # sigma = -pi/2 under the forward normal; reversed branches flip it
        if abs(curve.x - r).max() < tol and math.sin(s0) * curve.orientation < 0:
            return Topology.CONSTANT_CYLINDER
    return None


def _branch_contacts(curve: ProfileCurve, at_start: bool) -> list[Contact]:
    out = []
    st = curve.start
    if at_start:
        if isinstance(st, YAxis):
            out.append(Contact(EventKind.Y_AXIS_CONTACT, 0.0, 0.0, st.A, True, True))
        elif isinstance(st, XAxisSouth):
            out.append(Contact(EventKind.X_AXIS_CONTACT, 0.0, st.r, 0.0, True, True))
        elif isinstance(st, XAxisNorth):
            out.append(Contact(EventKind.NORTH_CONTACT, 0.0, st.r, math.pi, True, True))
    c = curve.contact
    if c is not None:
        out.append(Contact(c.kind, c.s, c.state.x, c.state.y, bool(c.orthogonal), False))
    return out


def _reverse_branch(curve: ProfileCurve) -> ProfileCurve:
    st = curve.start
    back = CurveState(0.0, st.x, st.y, st.sigma + math.pi)
    return integrate_reversed(back, curve.params, curve.controls)


def classify(
    curve: ProfileCurve,
    params: GeometryParams | None = None,
    tol: float = 1e-9,
    backward: ProfileCurve | None = None,
) -> ClassificationResult:
    """Tag ``curve`` with its hypersurface topology.

    For an interior start the other half of the curve is traced too (the
    orientation-reversed branch), unless ``backward`` supplies it.
    """
    params = params or curve.params
    reasons: list[str] = []
    extrema = extract_extrema(curve)
    horizon = curve.length
    centre = slice_height(params)

    if curve.termination is Termination.STEP_FAILURE:
        return ClassificationResult(Topology.UNDETERMINED, False, None, tuple(extrema),
                                    evidence_horizon=horizon, reasons=("step failure: " + curve.message,))

    branches = [curve]
    if isinstance(curve.start, CurveState):
        branches.append(backward if backward is not None else _reverse_branch(curve))

    const = [_is_constant(b, params, 1e-12) for b in branches]
    if all(c is not None for c in const) and len(set(const)) == 1:
        contacts = tuple(c for b in branches for c in _branch_contacts(b, b is curve))
        return ClassificationResult(const[0], True, None, (), None, contacts, horizon,
                                    ("constant solution",))

    contacts = [c for i, b in enumerate(branches) for c in _branch_contacts(b, i == 0)]
    all_extrema = [extract_extrema(b) for b in branches]

    def result(topology, embedded, case, si=None, extra=None):
        return ClassificationResult(topology, embedded, case, tuple(extrema), si, tuple(contacts),
                                    horizon, tuple(reasons), extra or {})

    bad = [c for c in contacts if not c.orthogonal]
    if bad:
        reasons.append(f"non-orthogonal {bad[0].kind.value} at s={bad[0].s:.6g}: singular hypersurface")
        return result(Topology.UNDETERMINED, False, None)

    si = detect_self_intersection(branches, tol)
    if si is not None and si.degenerate:
        reasons.append("near-tangential self-approach within tolerance")
        return result(Topology.UNDETERMINED, False, None, si)

    # case from inf x
    case = None
    cases = set()
    if any(c.kind is EventKind.Y_AXIS_CONTACT for c in contacts):
        cases.add("P1")
    else:
        xmin = min(float(b.x.min()) for b in branches)
        at_boundary = [c for c in contacts if abs(c.x - xmin) <= 1e-9 * max(1.0, xmin)]
        if at_boundary:
            cases.add("P3")
        for b in branches:
            i = int(np.argmin(b.x))
            if abs(b.x[i] - xmin) > 1e-9 * max(1.0, xmin):
                continue
            interior = 0 < b.y[i] < math.pi and not (i == len(b) - 1 and b.contact is not None)
            if not interior:
                continue
            if i == len(b) - 1:
                reasons.append("x still decreasing at the end of the horizon")
            elif i == 0 and len(branches) == 2:
                cases.add("P2")  # minimum exactly at the shared start point
            elif any(e.kind is EventKind.VERTICAL_TANGENT and abs(e.index - i) <= 1 for e in b.events):
                cases.add("P2")
            elif i == 0 and len(branches) == 1:
                reasons.append("interior start without the reversed branch")
    if len(cases) > 1:
        reasons.append(f"cases overlap: {sorted(cases)}")
        return result(Topology.UNDETERMINED, False, None, si)
    case = next(iter(cases), None)
    if case is None:
        reasons.append("inf x not witnessed within the horizon")
        return result(Topology.UNDETERMINED, False, None, si)

    if si is not None:
        reasons.append(f"self-intersection at s=({si.s1:.6g}, {si.s2:.6g})")
        return result(Topology.IMMERSED_CYLINDER, False, case, si)

    terminal = [c for c in contacts if not c.at_start]
    orth = [c for c in contacts if c.orthogonal]
    on_y_axis = [c for c in orth if c.kind is EventKind.Y_AXIS_CONTACT]
    on_x_axis = [c for c in orth if c.kind is not EventKind.Y_AXIS_CONTACT]
    if len(contacts) == 2 and len(on_y_axis) == 1 and len(on_x_axis) == 1:
        if params.h == 0:
            reasons.append("closed curve for h = 0 contradicts the minimal classification")
            return result(Topology.UNDETERMINED, False, case)
        reasons.append("orthogonal contacts on both axes, no self-intersection")
        return result(Topology.HYPERSPHERE, True, case)
    if terminal:
        reasons.append(f"terminal contact {terminal[0].kind.value} without a sphere pattern")
        return result(Topology.UNDETERMINED, False, case)

    ok = True
    for b, ex in zip(branches, all_extrema):
        good, notes = oscillation_report(ex, centre)
        if not good:
            ok = False
            reasons.extend(notes)
    if not ok:
        reasons.append("oscillation not certified within the horizon")
        return result(Topology.UNDETERMINED, False, case)

    reasons.append(f"oscillation certified up to s={horizon:.6g}; tail asserted by theory")
    if case == "P1":
        return result(Topology.SLICE_PRODUCT, True, case)
    if case == "P3":
        return result(Topology.TUBE_PRODUCT, True, case)
    reasons.append("P2 without a witnessed self-intersection")
    return result(Topology.UNDETERMINED, False, case)


def reflect(curve: ProfileCurve) -> ProfileCurve:
    """Mirror image y -> pi - y, sigma -> -sigma (a symmetry when h = 0)."""
    st = curve.start
    if isinstance(st, YAxis):
        start = YAxis(math.pi - st.A)
    elif isinstance(st, XAxisSouth):
        start = XAxisNorth(st.r)
    elif isinstance(st, XAxisNorth):
        start = XAxisSouth(st.r)
    else:
        start = CurveState(st.s, st.x, math.pi - st.y, -st.sigma)
    kinds = {EventKind.Y_MAX: EventKind.Y_MIN, EventKind.Y_MIN: EventKind.Y_MAX,
             EventKind.X_AXIS_CONTACT: EventKind.NORTH_CONTACT,
             EventKind.NORTH_CONTACT: EventKind.X_AXIS_CONTACT}
    events = tuple(
        replace(e, kind=kinds.get(e.kind, e.kind),
                state=CurveState(e.state.s, e.state.x, math.pi - e.state.y, -e.state.sigma),
                contact_angle=None if e.contact_angle is None else -e.contact_angle)
        for e in curve.events
    )
    return replace(curve, y=math.pi - curve.y, sigma=-curve.sigma, dsigma=-curve.dsigma,
                   events=events, start=start)
