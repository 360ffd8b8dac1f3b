"""Acceptance criteria, one check per criterion at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is added to the terminal
summary) or directly: ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from invariant_cmc.classify import Topology, classify, extract_extrema, oscillation_report  # noqa: E402
from invariant_cmc.integrate import IntegrationControls, integrate  # noqa: E402
from invariant_cmc.model import CurveState, GeometryParams, XAxisSouth, YAxis, pointwise_mean_curvature  # noqa: E402
from invariant_cmc.shoot import find_sphere_height  # noqa: E402
from invariant_cmc.stability import (  # noqa: E402
    cylinder_slice_criteria,
    instability_certificate,
    jacobi_identity_residual,
    linearized_solution,
)
from oracles import first_zero, linearized_rk4  # noqa: E402

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

H18 = GeometryParams(2, 2, 1.8)
H3 = GeometryParams(2, 2, 3.0)
P22 = GeometryParams(2, 2, 0.0)
MINIMAL_SEED = 20240601
CMC_HEIGHTS = (1.0, 1.2, 1.4, 1.55)


@lru_cache(maxsize=None)
def sphere(h: float, halved: bool = False):
    params = GeometryParams(2, 2, h)
    bracket = (1.0, 2.0) if h == 1.8 else (0.6, 1.3)
    ctl = IntegrationControls(rtol=5e-11, atol=5e-13) if halved else IntegrationControls()
    t0 = time.perf_counter()
    res = find_sphere_height(params, bracket, 1e-4, ctl)
    return res, time.perf_counter() - t0


@lru_cache(maxsize=None)
def minimal_heights() -> tuple[float, ...]:
    rng = np.random.default_rng(MINIMAL_SEED)
    out = []
    while len(out) < 20:
        A = float(rng.uniform(0.2, math.pi - 0.2))
        if A != math.pi / 2:
            out.append(A)
    return tuple(out)


@lru_cache(maxsize=None)
def minimal_curves():
    ctl = IntegrationControls(max_arclength=60)
    return tuple(integrate(YAxis(A), P22, ctl) for A in minimal_heights())


@lru_cache(maxsize=None)
def cmc_curves():
    ctl = IntegrationControls(max_arclength=60)
    return tuple(integrate(YAxis(A), H18, ctl) for A in CMC_HEIGHTS)


@lru_cache(maxsize=None)
def taxonomy_curves():
    ctl = IntegrationControls(max_arclength=40)
    starts = {
        "(0,3,0)": YAxis(3.0),
        "(1,0,pi/2)": XAxisSouth(1.0),
        "(1,2,pi/2)": CurveState(0.0, 1.0, 2.0, math.pi / 2),
        "(1,pi/2,pi/2)": CurveState(0.0, 1.0, math.pi / 2, math.pi / 2),
    }
    return {k: integrate(s, P22, ctl) for k, s in starts.items()}


@lru_cache(maxsize=None)
def certificates():
    return tuple(instability_certificate(c) for c in minimal_curves() + cmc_curves())


def _record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def criterion_1():
    res, dt = sphere(1.8)
    ok = abs(res.A_star - 1.592) <= 0.01 and dt < 10.0
    return ok, f"A*={res.A_star:.10f} (target 1.592 +/- 0.01), runtime {dt:.2f}s (< 10s)"


def criterion_2():
    res, _ = sphere(3.0)
    top = classify(res.curve, H3).topology
    c = res.contact
    ok = abs(res.A_star - 0.98) <= 0.01 and top is Topology.HYPERSPHERE and bool(c and c.orthogonal)
    return ok, f"A*={res.A_star:.10f} (target 0.98 +/- 0.01), {top.value}, orthogonal={c.orthogonal if c else None}"


def criterion_3():
    expected = {
        "(0,3,0)": Topology.SLICE_PRODUCT,
        "(1,0,pi/2)": Topology.TUBE_PRODUCT,
        "(1,2,pi/2)": Topology.IMMERSED_CYLINDER,
        "(1,pi/2,pi/2)": Topology.IMMERSED_CYLINDER,
    }
    got, ok = {}, True
    for key, curve in taxonomy_curves().items():
        r = classify(curve, P22)
        got[key] = r.topology.value
        ok &= r.topology is expected[key]
        if expected[key] is Topology.IMMERSED_CYLINDER:
            ok &= r.self_intersection is not None and not r.self_intersection.degenerate
    return ok, ", ".join(f"{k}->{v}" for k, v in got.items())


def criterion_4():
    worst = None
    ok = True
    for A, c in zip(minimal_heights(), minimal_curves()):
        ex = [e for e in extract_extrema(c) if e.s <= 60.0]
        good, notes = oscillation_report(ex, math.pi / 2)
        good &= len(ex) >= 4 and bool(np.all((c.y > 0) & (c.y < math.pi)))
        if not good:
            ok = False
            worst = f"A={A:.6f}: {notes or 'fewer than 4 extrema'}"
    fewest = min(len(extract_extrema(c)) for c in minimal_curves())
    return ok, f"20 minimal curves, fewest extrema {fewest}" + (f"; failing {worst}" if worst else "")


def criterion_5():
    ok, tops = True, []
    for c in cmc_curves():
        r = classify(c, H18)
        good, _ = oscillation_report(extract_extrema(c), math.atan2(1, 1.8))
        tops.append(r.topology.value)
        ok &= r.topology is Topology.SLICE_PRODUCT and good
    return ok, f"A={list(CMC_HEIGHTS)} -> {tops}"


def criterion_6():
    certs = certificates()
    q_max = max(r.Q for r in certs)
    mass_max = max(r.relative_mass for r in certs)
    ident = max(float(jacobi_identity_residual(c).max()) for c in minimal_curves() + cmc_curves())
    ok = q_max < 0 and mass_max < 1e-8 and ident < 1e-8
    return ok, (f"{len(certs)} certificates, max Q={q_max:.4g} (< 0), max relative mass={mass_max:.2e} "
                f"(< 1e-8), max identity residual={ident:.2e} (< 1e-8)")


def criterion_7():
    ok, flips = True, 0
    for n in (2, 3, 4):
        for m in (2, 3, 4):
            thr = math.sqrt(m * (n - 1))
            hi = cylinder_slice_criteria(GeometryParams(n, m, thr + 1e-9))
            lo = cylinder_slice_criteria(GeometryParams(n, m, thr - 1e-9))
            good = hi.cylinder == "unstable" and lo.cylinder == "not unstable"
            good &= hi.slice == lo.slice == "unstable"
            good &= hi.h_form_unstable == hi.r_form_unstable and lo.h_form_unstable == lo.r_form_unstable
            flips += good
            ok &= good
    return ok, f"{flips}/9 (n, m) pairs flip at sqrt(m(n-1)) +/- 1e-9 with slice unstable and r-form consistent"


def criterion_8():
    sol = linearized_solution(P22, 20.0)
    xs, ws = linearized_rk4(2, 1.0, 5.0, 1e-3)
    oracle = first_zero(xs, ws)
    z = sol.zeros[0]
    ok = abs(z - 2.4048) <= 1e-3 and abs(z - oracle) <= 1e-3 and len(sol.zeros) >= 5
    return ok, f"first zero {z:.10f} (oracle {oracle:.10f}), {len(sol.zeros)} zeros on [0, 20]"


def criterion_9():
    curves = list(minimal_curves()) + list(cmc_curves()) + list(taxonomy_curves().values())
    curves += [sphere(1.8)[0].curve, sphere(3.0)[0].curve]
    h_res = 0.0
    for c in curves:
        h = c.params.h * c.orientation
        for i in range(len(c)):
            st = c.state(i)
            if st.x > 0 and 0 < st.y < math.pi:
                h_res = max(h_res, abs(pointwise_mean_curvature(st, float(c.dsigma[i]), c.params) - h))
    shifts = [abs(sphere(h)[0].A_star - sphere(h, True)[0].A_star) for h in (1.8, 3.0)]
    agree = max(r.relative_disagreement for r in certificates())
    ok = h_res < 1e-8 and max(shifts) < 1e-6 and agree < 1e-8
    return ok, (f"h-recovery {h_res:.2e} (< 1e-8), A* shift under halved tolerances "
                f"{max(shifts):.2e} (< 1e-6), Dirichlet vs -uLu agreement {agree:.2e} (< 1e-8)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("index", range(1, len(CRITERIA) + 1))
def test_criterion(index):
    ok, detail = CRITERIA[index - 1]()
    _record(index, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        _record(i, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
