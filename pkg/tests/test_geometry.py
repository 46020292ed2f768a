import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from curvem.geometry import (
    AffineSegment,
    CellGeometry,
    CircleArc,
    CurvedEdge,
    DegenerateEdge,
    NegativeArea,
    OpenLoop,
    PolyGraph,
    SineGraph,
    StarPointInvalid,
    StraightEdge,
    edge_frame,
    edge_integral,
    edge_length,
    element_bulk_integral,
    element_measures,
    element_monomial_integral,
    fan_quadrature,
    gauss_legendre,
    monomial_moments,
)

from cells import R, deformed_square, full_disk, half_disk, polygon, random_cell, sine_cell


# -- quadrature ---------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_gauss_weights_and_exactness(n):
    rule = gauss_legendre(n)
    assert abs(rule.weights.sum() - 2.0) < 1e-14
    assert np.all(rule.weights > 0)
    for p in range(2 * n):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        assert abs(rule.weights @ rule.nodes**p - exact) < 1e-14


# -- curves --------------------------------------------------------------------

CURVES = [
    CircleArc("c", (0.1, -0.2), 0.45),
    PolyGraph("g", (1.0, 0.0, -0.5, 0.5)),
    SineGraph("s", 0.2, math.pi, 0.31),
    AffineSegment("a", (0.0, 1.0), (2.0, -1.0)),
]


@pytest.mark.parametrize("curve", CURVES, ids=lambda c: c.kind)
def test_deriv_matches_finite_differences(curve):
    rng = np.random.default_rng(3)
    a, b = curve.interval
    t = a + (b - a) * rng.random(10)
    h = 1e-6
    fd = (curve.eval(t + h) - curve.eval(t - h)) / (2 * h)
    d = curve.deriv(t)
    assert np.allclose(fd, d, rtol=1e-6, atol=1e-8)
    assert np.all(np.linalg.norm(d, axis=1) > 0)


def test_edge_frame_straight():
    e = StraightEdge((0.0, 0.0), (2.0, 0.0))
    p, t, n, speed = edge_frame(e, 1.0)
    assert np.allclose(p, [1, 0]) and np.allclose(t, [1, 0])
    assert np.allclose(n, [0, -1]) and speed == pytest.approx(1.0)


def test_edge_frame_circle():
    e = CurvedEdge(CircleArc("c", (0.0, 0.0), R), 0.0, math.pi / 2)
    p, t, n, speed = edge_frame(e, 0.0)
    assert np.allclose(p, [R, 0]) and np.allclose(t, [0, 1])
    assert np.allclose(n, [1, 0]) and speed == pytest.approx(R)


def test_edge_frame_graph():
    e = CurvedEdge(PolyGraph("g1", (1.0, 0.0, -0.5, 0.5)), 0.0, 1.0)
    assert edge_frame(e, 0.0)[3] == pytest.approx(1.0)


def test_degenerate_edge():
    e = CurvedEdge(CircleArc("dot", (0.0, 0.0), 0.0), 0.0, 1.0)
    with pytest.raises(DegenerateEdge):
        edge_frame(e, 0.0)


def test_edge_integrals():
    assert edge_integral(StraightEdge((0, 0), (0.3, 0)), lambda p: np.ones(len(p))) == pytest.approx(0.3)
    quarter = CurvedEdge(CircleArc("c", (0.0, 0.0), R), 0.0, math.pi / 2)
    assert edge_integral(quarter, lambda p: np.ones(len(p))) == pytest.approx(R * math.pi / 2, rel=1e-13)
    assert edge_integral(StraightEdge((0, 0), (1, 0)), lambda p: p[:, 0]) == pytest.approx(0.5)


def test_graph_arc_length_against_scipy():
    g = SineGraph("s", 0.2, math.pi, 0.31)
    e = CurvedEdge(g, -0.4, 0.7)
    ref, _ = integrate.quad(lambda x: math.hypot(1.0, 0.2 * math.pi * math.cos(math.pi * x)), -0.4, 0.7,
                            epsabs=1e-14)
    assert edge_length(e) == pytest.approx(ref, rel=1e-12)


def test_reversed_orientation_same_points():
    c = CircleArc("c", (0.0, 0.0), 1.0)
    fwd = CurvedEdge(c, 0.2, 1.1, 1)
    bwd = CurvedEdge(c, 0.2, 1.1, -1)
    assert np.allclose(fwd.endpoints(), bwd.endpoints()[::-1])


# -- cell integrals ------------------------------------------------------------

def test_unit_square_moments():
    sq = polygon((0, 0), (1, 0), (1, 1), (0, 1))
    assert element_monomial_integral(sq, (0.5, 0.5), math.sqrt(2), (0, 0)) == pytest.approx(1.0)
    assert abs(element_monomial_integral(sq, (0.5, 0.5), math.sqrt(2), (1, 0))) < 1e-15


def test_half_disk_area():
    a = element_monomial_integral(half_disk(), (0.0, 0.0), 1.0, (0, 0))
    assert a == pytest.approx(math.pi * R**2 / 2, rel=1e-12)


def test_open_loop():
    bd = polygon((0, 0), (1, 0), (1, 1))[:2]
    with pytest.raises(OpenLoop):
        element_monomial_integral(bd, (0, 0), 1.0, (0, 0))


def test_measures():
    area, c, h = element_measures(polygon((0, 0), (1, 0), (1, 1), (0, 1)))
    assert area == pytest.approx(1.0) and np.allclose(c, 0.5) and h == pytest.approx(math.sqrt(2))
    area, c, h = element_measures(polygon((0, 0), (1, 0), (0, 1)))
    assert area == pytest.approx(0.5) and np.allclose(c, 1 / 3) and h == pytest.approx(math.sqrt(2))
    area, c, h = element_measures(full_disk())
    assert area == pytest.approx(math.pi * R**2, rel=1e-12)
    assert np.allclose(c, 0.0, atol=1e-14)
    assert h == pytest.approx(2 * R, rel=1e-3)


def test_clockwise_loop_is_rejected():
    with pytest.raises(NegativeArea):
        element_measures(polygon((0, 0), (0, 1), (1, 1), (1, 0)))


def test_bulk_integrals():
    sq = polygon((0, 0), (1, 0), (1, 1), (0, 1))
    assert element_bulk_integral(sq, lambda p: np.ones(len(p))) == pytest.approx(1.0)
    assert element_bulk_integral(sq, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2) == pytest.approx(2 / 3)
    hd = half_disk()
    bulk = element_bulk_integral(hd, lambda p: np.ones(len(p)))
    assert bulk == pytest.approx(element_monomial_integral(hd, (0, 0), 1.0, (0, 0)), rel=1e-12)


def test_star_point_invalid():
    # an L-shaped cell is not star-shaped w.r.t. a point in one arm's tip
    L = polygon((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2))
    with pytest.raises(StarPointInvalid):
        fan_quadrature(L, (1.9, 0.1), 4)


def _dblquad_moment(cell, a, b, center, h):
    """Independent oracle by nested adaptive quadrature over x-simple regions."""
    f = lambda y, x: ((x - center[0]) / h) ** a * ((y - center[1]) / h) ** b
    if cell == "half":
        val, _ = integrate.dblquad(f, -R, R, 0.0, lambda x: math.sqrt(max(R * R - x * x, 0.0)),
                                   epsabs=1e-14, epsrel=1e-13)
    elif cell == "deformed":
        val, _ = integrate.dblquad(f, 0.0, 1.0, lambda x: 0.5 * x * x * (x - 1),
                                   lambda x: 0.5 * x * x * (x - 1) + 1.0, epsabs=1e-14, epsrel=1e-13)
    else:
        val, _ = integrate.dblquad(f, -0.3, 0.2, -0.2, lambda x: 0.2 * math.sin(math.pi * x) + 0.31,
                                   epsabs=1e-14, epsrel=1e-13)
    return val


@pytest.mark.parametrize("name,bd", [("half", half_disk()), ("deformed", deformed_square()),
                                     ("sine", sine_cell())])
def test_curved_moments_against_dblquad(name, bd):
    g = CellGeometry(bd, n_gauss=8)
    mom = g.moments(4)
    for a in range(5):
        for b in range(5 - a):
            ref = _dblquad_moment(name, a, b, g.centroid, g.diameter)
            assert abs(mom[a, b] - ref) <= 1e-10 * max(abs(ref), g.area * 1e-2), (a, b)


def test_analytic_areas():
    assert CellGeometry(half_disk()).area == pytest.approx(math.pi * R**2 / 2, rel=1e-10)
    assert CellGeometry(deformed_square()).area == pytest.approx(1.0, rel=1e-10)
    assert CellGeometry(full_disk(0.7)).area == pytest.approx(math.pi * 0.49, rel=1e-10)


@pytest.mark.parametrize("bd", [half_disk(), deformed_square(), sine_cell(),
                                polygon((0, 0), (1, 0.2), (0.8, 1), (-0.1, 0.7))])
def test_primitive_independence_and_closed_flux(bd):
    g = CellGeometry(bd)
    mx = monomial_moments(bd, g.centroid, g.diameter, 8, 10, primitive="x")
    my = monomial_moments(bd, g.centroid, g.diameter, 8, 10, primitive="y")
    assert np.allclose(mx, my, rtol=0, atol=1e-12 * np.abs(mx).max())
    flux = np.zeros(2)
    from curvem.geometry import edge_quadrature
    for edge, sigma in bd:
        q = edge_quadrature(edge, 8)
        flux += sigma * (q.weights[:, None] * q.normals).sum(0)
    assert np.abs(flux).max() < 1e-12 * g.diameter


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), curved=st.booleans())
def test_cross_oracle_fan_vs_boundary(seed, curved):
    bd = random_cell(np.random.default_rng(seed), curved)
    g = CellGeometry(bd)
    deg = 8
    mom = g.moments(deg)
    pts, w = fan_quadrature(bd, g.star_point, 12, strict=False)
    X = (pts[:, 0] - g.centroid[0]) / g.diameter
    Y = (pts[:, 1] - g.centroid[1]) / g.diameter
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            fan = w @ (X**a * Y**b)
            # relative to the table: tiny high-degree moments come out of
            # boundary sums much larger than themselves
            assert abs(fan - mom[a, b]) <= 1e-11 * np.abs(mom).max()
