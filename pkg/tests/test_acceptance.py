"""Acceptance suite.  Each test records one PASS/FAIL line per criterion,
printed at the end of the run, and asserts the criterion."""
import math
import time

import numpy as np
import pytest
from numpy.polynomial import polynomial as npoly

from cells import deformed_square, half_disk, random_cell, sine_cell
from conftest import record
from curvem.geometry import CellGeometry, fan_quadrature
from curvem.local_vem import Element
from curvem.mesh import square_mesh
from curvem.solver import Problem, assemble, conservation_defect, evaluate, inf_sup_monitor, run
from curvem.verification import get_case, run_convergence

SIZES = (8, 16, 32, 64)
_reports: dict = {}
_conservation: dict = {}


def report(case: str, k: int, mode: str):
    key = (case, k, mode)
    if key not in _reports:
        rep = run_convergence(case, k, mode, SIZES)
        _reports[key] = rep
        _conservation[key] = max(r.conservation for r in rep.rows)
    return _reports[key]


def seconds(*reps) -> float:
    return sum(r.seconds for rep in reps for r in rep.rows)


def fmt_rates(rep) -> str:
    return f"{rep.mode} k={rep.k} q {rep.rate_q[-1]:.3f} p {rep.rate_p[-1]:.3f}"


# -- 1: patch test -------------------------------------------------------------

def random_poly(deg: int, rng) -> np.ndarray:
    """Coefficients c[i, j] of x^i y^j, total degree exactly deg."""
    c = np.zeros((deg + 1, deg + 1))
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            c[i, j] = rng.uniform(-1, 1)
    c[deg, 0] = 1.0
    return c


def patch_problem(c):
    p = lambda P, r=0: npoly.polyval2d(P[..., 0], P[..., 1], c)
    cx, cy = npoly.polyder(c, axis=0), npoly.polyder(c, axis=1)
    lap = npoly.polyder(c, 2, axis=0), npoly.polyder(c, 2, axis=1)
    q = lambda P, r=0: -np.stack([npoly.polyval2d(P[..., 0], P[..., 1], cx),
                                  npoly.polyval2d(P[..., 0], P[..., 1], cy)], axis=-1)
    f = lambda P, r=0: sum(npoly.polyval2d(P[..., 0], P[..., 1], d) for d in lap)
    return Problem(f=f, pbar=p, mu=1.0, kappa=1.0), p, q


@pytest.fixture(scope="module")
def patch_results():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    rows = []
    for k in range(4):
        c = random_poly(k + 1, rng)
        prob, p, q = patch_problem(c)
        for n in (4, 8):
            mesh = square_mesh(n)
            sol = run(mesh, prob, k)
            fields = evaluate(sol)
            eq2 = ep2 = proj = 0.0
            for cell, E in enumerate(fields.elements):
                pts, w = E.geom.fan(k + 4)
                eq2 += w @ ((q(pts) - fields.eval_velocity(cell, pts)) ** 2).sum(-1)
                ep2 += w @ (p(pts) - fields.eval_pressure(cell, pts)) ** 2
                V = E.basis.values(pts)
                pk = np.linalg.solve((V * w[:, None]).T @ V, (w * p(pts)) @ V)
                proj = max(proj, float(np.abs(pk - fields.pressure[cell]).max()))
            cons = float(np.abs(conservation_defect(sol)).max())
            rows.append((k, n, math.sqrt(eq2), math.sqrt(ep2), proj, cons))
    _conservation[("patch",)] = max(r[5] for r in rows)
    return rows, time.perf_counter() - t0


def test_criterion_1_patch(patch_results):
    rows, secs = patch_results
    e_q = max(r[2] for r in rows)
    e_p = max(r[3] for r in rows)
    proj = max(r[4] for r in rows)
    ok = e_q <= 1e-8 and e_p <= 1e-8 and secs < 10
    record(1, "patch test, p of degree k+1, k=0..3, 4x4 and 8x8", ok,
           f"max e_q {e_q:.2e}, max e_p {e_p:.2e} (p_h has degree k, so e_p >= |p - Pi_k p| > 0; "
           f"|p_h - Pi_k p| {proj:.2e}), {secs:.1f} s")
    assert e_q <= 1e-8
    assert e_p <= 1e-8


def test_patch_velocity_exact(patch_results):
    rows, secs = patch_results
    assert max(r[2] for r in rows) <= 1e-8
    assert secs < 10


def test_patch_pressure_is_projection(patch_results):
    rows, _ = patch_results
    assert max(r[4] for r in rows) <= 1e-8


# -- 2-4: convergence ----------------------------------------------------------

def test_criterion_2_curved_boundary():
    lines, ok = [], True
    for k in range(4):
        with_geo = report("curved-boundary", k, "withgeo")
        reps = [with_geo]
        good = min(with_geo.rate_q[-1], with_geo.rate_p[-1]) >= k + 0.7
        if k >= 2:
            no_geo = report("curved-boundary", k, "nogeo")
            reps.append(no_geo)
            good = good and max(no_geo.rate_q[-1], no_geo.rate_p[-1]) <= 2.4
        good = good and seconds(*reps) < 300
        ok = ok and good
        lines.extend(fmt_rates(r) for r in reps)
    record(2, "curved boundary rates (withgeo >= k+0.7, nogeo k>=2 <= 2.4)", ok, "; ".join(lines))
    assert ok


def rate_check(case: str, k: int):
    rep = report(case, k, "withgeo")
    target = k + 0.7
    if k == 3:
        # one pre-asymptotic pair allowed
        slow = sum(min(a, b) < target for a, b in zip(rep.rate_q, rep.rate_p))
        good = slow <= 1 and min(rep.rate_q[-1], rep.rate_p[-1]) >= target - 0.7
    else:
        good = min(rep.rate_q[-1], rep.rate_p[-1]) >= target
    return good and seconds(rep) < 600, fmt_rates(rep)


def test_criterion_3_circle_inclusion():
    results = [rate_check("circle-inclusion", k) for k in range(4)]
    ok = all(g for g, _ in results)
    record(3, "circle inclusion withgeo rates (k=3 one plateau allowed)", ok,
           "; ".join(s for _, s in results))
    assert ok


def test_criterion_4_double_interface():
    results = [rate_check("double-interface", k) for k in range(3)]
    ok = all(g for g, _ in results)
    record(4, "double interface withgeo rates >= k+0.7", ok, "; ".join(s for _, s in results))
    assert ok


@pytest.mark.parametrize("k", [2, 3])
def test_circle_inclusion_nogeo_saturates(k):
    rep = report("circle-inclusion", k, "nogeo")
    assert max(rep.rate_q[-1], rep.rate_p[-1]) <= 2.4


@pytest.mark.parametrize("case,ks", [("curved-boundary", range(4)), ("circle-inclusion", range(4)),
                                     ("double-interface", range(3))])
def test_withgeo_errors_monotone(case, ks):
    for k in ks:
        rep = report(case, k, "withgeo")
        drops = [b.e_q <= a.e_q and b.e_p <= a.e_p for a, b in zip(rep.rows[:-1], rep.rows[1:])]
        assert drops.count(False) <= (1 if k >= 3 else 0)


# -- 5: commuting diagram ------------------------------------------------------

def smooth_field(rng):
    a = rng.normal(size=6)
    w = lambda p: np.stack([np.sin(a[0] * p[:, 0] + a[1] * p[:, 1]) + a[4] * p[:, 1] ** 2,
                            np.cos(a[2] * p[:, 0] - a[3] * p[:, 1]) + a[5] * p[:, 0] * p[:, 1]], axis=-1)
    dw = lambda p: (a[0] * np.cos(a[0] * p[:, 0] + a[1] * p[:, 1])
                    + a[3] * np.sin(a[2] * p[:, 0] - a[3] * p[:, 1]) + a[5] * p[:, 0])
    return w, dw


def bulk_projection(E, g, order=16):
    pts, wt = E.geom.fan(order)
    V = E.basis.values(pts)
    return np.linalg.solve((V * wt[:, None]).T @ V, (wt * g(pts)) @ V)


def test_criterion_5_commuting_diagram():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    cells = [random_cell(rng, i % 2 == 1) for i in range(50)]
    fields = [smooth_field(rng) for _ in range(10)]
    worst = 0.0
    for bd in cells:
        for k in range(4):
            E = Element(bd, k)
            for w, dw in fields:
                lhs = E.divergence_coeffs(E.fortin(w, dw))
                rhs = bulk_projection(E, dw)
                worst = max(worst, float(np.abs(lhs - rhs).max() / np.abs(rhs).max()))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and secs < 30
    record(5, "commuting diagram, 50 cells x 10 fields x k=0..3", ok,
           f"worst relative coefficient error {worst:.2e}, {secs:.1f} s")
    assert ok


# -- 6: geometry oracle --------------------------------------------------------

def test_criterion_6_geometry():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    cells = [half_disk(), deformed_square(), sine_cell()] + [random_cell(rng, True) for _ in range(47)]
    worst = 0.0
    for bd in cells:
        g = CellGeometry(bd)
        mom = g.moments(8)
        pts, w = fan_quadrature(bd, g.star_point, 14, strict=False)
        Xs = (pts[:, 0] - g.centroid[0]) / g.diameter
        Ys = (pts[:, 1] - g.centroid[1]) / g.diameter
        for a in range(9):
            for b in range(9 - a):
                worst = max(worst, abs(w @ (Xs**a * Ys**b) - mom[a, b]) / np.abs(mom).max())
    R = 0.45
    area_err = max(abs(CellGeometry(half_disk()).area - math.pi * R * R / 2) / (math.pi * R * R / 2),
                   abs(CellGeometry(deformed_square()).area - 1.0))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-11 and area_err <= 1e-10 and secs < 30
    record(6, "geometry oracle, 50 curved cells, moments to degree 8", ok,
           f"moments {worst:.2e} (relative to table), analytic areas {area_err:.2e}, {secs:.1f} s")
    assert ok


# -- 7: inf-sup ----------------------------------------------------------------

def test_criterion_7_inf_sup():
    t0 = time.perf_counter()
    case = get_case("curved-boundary")
    lines, ok = [], True
    for k in range(3):
        betas = [inf_sup_monitor(assemble(case.build_mesh(n), case.problem(), k)) for n in SIZES]
        ok = ok and betas[0] / betas[-1] < 2 and min(betas) > 0
        lines.append(f"k={k} beta " + " ".join(f"{b:.4f}" for b in betas))
    secs = time.perf_counter() - t0
    ok = ok and secs < 120
    record(7, "inf-sup monitor over n=8..64", ok, "; ".join(lines) + f"; {secs:.1f} s")
    assert ok


# -- 8: conservation -----------------------------------------------------------

def test_criterion_8_conservation():
    for case, ks in (("curved-boundary", range(4)), ("circle-inclusion", range(4)),
                     ("double-interface", range(3))):
        for k in ks:
            report(case, k, "withgeo")
    for case in ("curved-boundary", "circle-inclusion"):
        for k in (2, 3):
            report(case, k, "nogeo")
    worst = max(_conservation.values())
    ok = worst <= 1e-9
    record(8, "local conservation on every solved case", ok,
           f"max per-cell defect {worst:.2e} over {len(_conservation)} runs")
    assert ok
