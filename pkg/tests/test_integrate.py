import math

import numpy as np
import pytest

from invariant_cmc.fdiff import derivative, fornberg_weights
from invariant_cmc.integrate import (
    EventKind,
    IntegrationControls,
    Termination,
    extrapolate_to_axis,
    graph_extract,
    graph_residual,
    integrate,
    integrate_reversed,
    point_at,
    resample,
)
from invariant_cmc.model import (
    CurveState,
    GeometryParams,
    XAxisSouth,
    YAxis,
    pointwise_mean_curvature,
)

P22 = GeometryParams(2, 2, 0.0)


@pytest.fixture(scope="module")
def oscillating():
    return integrate(YAxis(3.0), P22, IntegrationControls(max_arclength=40))


def test_controls_validation():
    with pytest.raises(ValueError):
        IntegrationControls(rtol=0.0)
    with pytest.raises(ValueError):
        IntegrationControls(max_arclength=-1)


def test_constant_slice_has_no_events():
    c = integrate(YAxis(math.pi / 2), P22, IntegrationControls(max_arclength=10))
    assert c.events == ()
    assert c.termination is Termination.BUDGET_EXHAUSTED
    assert np.abs(c.y - math.pi / 2).max() < 1e-14
    assert c.s[-1] == pytest.approx(10.0)


def test_oscillating_oscillates(oscillating):
    kinds = [e.kind for e in oscillating.events]
    assert len(kinds) >= 8
    assert all(k in (EventKind.Y_MAX, EventKind.Y_MIN) for k in kinds)
    assert all(a != b for a, b in zip(kinds, kinds[1:]))
    assert np.all((oscillating.y > 0) & (oscillating.y < math.pi))


def test_x_axis_start_never_returns():
    c = integrate(XAxisSouth(1.0), P22, IntegrationControls(max_arclength=40))
    assert c.termination is Termination.BUDGET_EXHAUSTED
    assert c.y[1:].min() > 0
    ext = c.events_of(EventKind.Y_MAX, EventKind.Y_MIN)
    assert len(ext) >= 4


def test_events_sit_on_their_predicate(oscillating):
    for e in oscillating.events:
        assert abs(math.sin(e.state.sigma)) < 1e-10
        assert oscillating.s[e.index] == e.s


def test_y_monotone_between_extrema(oscillating):
    idx = [e.index for e in oscillating.events_of(EventKind.Y_MAX, EventKind.Y_MIN)]
    for a, b in zip(idx, idx[1:]):
        dy = np.diff(oscillating.y[a:b + 1])
        assert np.all(dy > 0) or np.all(dy < 0)


@pytest.mark.parametrize("A,h", [(3.0, 0.0), (1.0, 1.8), (0.4, 0.7)])
def test_extremum_sign_rule(A, h):
    p = GeometryParams(2, 2, h)
    c = integrate(YAxis(A), p, IntegrationControls(max_arclength=40))
    for e in c.events_of(EventKind.Y_MIN):
        assert (p.m - 1) / math.tan(e.state.y) - h > 0
    for e in c.events_of(EventKind.Y_MAX):
        assert (p.m - 1) / math.tan(e.state.y) - h < 0


def test_h_recovery_stored_rate(oscillating):
    p = GeometryParams(3, 2, 1.3)
    c = integrate(YAxis(1.0), p, IntegrationControls(max_arclength=30))
    for i in range(1, len(c)):
        assert abs(pointwise_mean_curvature(c.state(i), float(c.dsigma[i]), p) - p.h) < 10 * c.controls.rtol


def test_h_recovery_independent_rate():
    # sigma' from finite differences of the resampled sigma, not from the field
    p = GeometryParams(2, 2, 1.8)
    c = integrate(YAxis(1.2), p, IntegrationControls(max_arclength=20))
    seg = resample(c, 2.0, 12.0, 4001)
    ds = derivative(seg.s, seg.sigma)
    res = [abs(pointwise_mean_curvature(seg.state(i), float(ds[i]), p) - p.h) for i in range(len(seg))]
    assert max(res) < 1e-7


def test_convergence_with_tolerance():
    p = GeometryParams(2, 2, 0.0)
    ends = []
    for rtol in (1e-6, 1e-8, 1e-10, 1e-12):
        c = integrate(YAxis(2.0), p, IntegrationControls(rtol=rtol, atol=rtol * 1e-2, max_arclength=20))
        ends.append(np.array([c.x[-1], c.y[-1], c.sigma[-1]]))
    diffs = [np.abs(a - ends[-1]).max() for a in ends[:-1]]
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < 1e-8


def test_point_at_reproduces_samples(oscillating):
    for i in (5, 50, 500):
        s = float(oscillating.s[i])
        assert point_at(oscillating, s)[:3] == pytest.approx((oscillating.x[i], oscillating.y[i], oscillating.sigma[i]), abs=0)
    mid = 0.5 * (oscillating.s[100] + oscillating.s[101])
    x, y, sg, k = point_at(oscillating, float(mid))
    assert oscillating.x[100] < x < oscillating.x[101]
    with pytest.raises(ValueError):
        point_at(oscillating, -1.0)


def test_resample_uniform(oscillating):
    seg = resample(oscillating, 1.0, 5.0, 101)
    assert len(seg) == 101
    assert np.allclose(np.diff(seg.s), 0.04)
    assert seg.events == ()


def test_terminal_events_stop():
    p = GeometryParams(2, 2, 1.8)
    c = integrate(YAxis(1.0), p, IntegrationControls(), {EventKind.Y_MIN})
    assert c.termination is Termination.TERMINAL_EVENT
    assert c.events[-1].kind is EventKind.Y_MIN


def test_non_orthogonal_contact_is_reported():
    # a start a hair off the sphere height still reaches the band, but not at a right angle
    p = GeometryParams(2, 2, 1.8)
    c = integrate(YAxis(1.5916026684), p, IntegrationControls(max_arclength=10))
    assert c.contact is not None and c.contact.kind is EventKind.X_AXIS_CONTACT
    assert not c.contact.orthogonal
    assert c.termination is Termination.AXIS_CONTACT


def test_step_budget_failure_is_reported():
    c = integrate(YAxis(3.0), P22, IntegrationControls(max_arclength=40, max_steps=5))
    assert c.termination is Termination.BUDGET_EXHAUSTED
    assert c.s[-1] < 40


def test_reversed_branch_flips_curvature():
    p = GeometryParams(2, 2, 1.0)
    c = integrate_reversed(CurveState(0.0, 1.0, 1.5, 0.3), p, IntegrationControls(max_arclength=5))
    assert c.orientation == -1
    for i in range(len(c)):
        assert pointwise_mean_curvature(c.state(i), float(c.dsigma[i]), p) == pytest.approx(-1.0, abs=1e-9)


def test_extrapolation_is_exact_for_quadratics():
    d = [4e-8, 2e-8, 1e-8]
    s = [1 + 2 * v + 3 * v * v for v in d]
    assert extrapolate_to_axis(d, s) == pytest.approx(1.0, abs=1e-14)


def test_graph_constant_solution():
    c = integrate(YAxis(math.pi / 2), P22, IntegrationControls(max_arclength=5))
    g = graph_extract(c, (None, None), 101)
    assert np.allclose(g.p, math.pi / 2, atol=1e-14)
    assert np.allclose(g.dp, 0, atol=1e-14)


def test_graph_first_descent_is_decreasing(oscillating):
    g = graph_extract(oscillating, (None, 0))
    assert np.all(np.diff(g.x) > 0)
    assert np.all(np.diff(g.p) < 0)


def test_graph_residual_analytic(oscillating):
    for between in [(None, 0), (0, 1), (3, 4)]:
        g = graph_extract(oscillating, between)
        assert np.abs(graph_residual(g, P22)).max() < 10 * oscillating.controls.rtol


@pytest.mark.parametrize("A,h", [(3.0, 0.0), (1.0, 1.8)])
def test_graph_residual_finite_difference(A, h):
    p = GeometryParams(2, 2, h)
    c = integrate(YAxis(A), p, IntegrationControls(max_arclength=20))
    for between in [(0, 1), (1, 2), (2, 3)]:
        g = graph_extract(c, between)
        fd = derivative(g.x, g.dp)  # p'' by differencing p' on the resampled graph
        assert np.abs(graph_residual(g, p, fd)).max() < 10 * c.controls.rtol


def test_graph_rejects_vertical_tangent():
    c = integrate(CurveState(0.0, 1.0, 2.0, 2.0), P22, IntegrationControls(max_arclength=10))
    vt = [i for i, e in enumerate(c.events) if e.kind is EventKind.VERTICAL_TANGENT]
    assert vt
    with pytest.raises(ValueError):
        graph_extract(c, (None, None))


def test_fornberg_exact_on_polynomials():
    t = np.array([0.0, 0.3, 0.7, 1.2, 2.0])
    f = 1 + 2 * t - t**3 + 0.5 * t**4
    for z in (0.0, 0.5, 2.0):
        assert fornberg_weights(z, t, 1) @ f == pytest.approx(2 - 3 * z**2 + 2 * z**3, abs=1e-10)
        assert fornberg_weights(z, t, 2) @ f == pytest.approx(-6 * z + 6 * z**2, abs=1e-9)
    with pytest.raises(ValueError):
        derivative(t[:3], f[:3])
