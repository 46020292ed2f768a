"""Cell builders shared by the tests."""
import math

import numpy as np

from curvem.geometry import CircleArc, CurvedEdge, PolyGraph, SineGraph, StraightEdge

R = 0.45


def polygon(*pts):
    n = len(pts)
    return [(StraightEdge(pts[i], pts[(i + 1) % n]), 1) for i in range(n)]


def half_disk(r=R):
    arc = CurvedEdge(CircleArc("c", (0.0, 0.0), r), 0.0, math.pi, 1)
    return [(StraightEdge((-r, 0.0), (r, 0.0)), 1), (arc, 1)]


def full_disk(r=R):
    c = CircleArc("c", (0.0, 0.0), r)
    return [(CurvedEdge(c, 0.0, math.pi, 1), 1), (CurvedEdge(c, math.pi, 2 * math.pi, 1), 1)]


def deformed_square():
    g1 = PolyGraph("g1", (1.0, 0.0, -0.5, 0.5))
    g2 = PolyGraph("g2", (0.0, 0.0, -0.5, 0.5))
    return [
        (CurvedEdge(g2, 0.0, 1.0, 1), 1),
        (StraightEdge((1.0, 0.0), (1.0, 1.0)), 1),
        (CurvedEdge(g1, 0.0, 1.0, 1), -1),
        (StraightEdge((0.0, 0.0), (0.0, 1.0)), -1),
    ]


def sine_cell():
    # cell under a sine graph, straight elsewhere
    g = SineGraph("s", 0.2, math.pi, 0.31)
    top = CurvedEdge(g, -0.3, 0.2, 1)
    y0, y1 = top.endpoints()[:, 1]
    return [
        (StraightEdge((-0.3, -0.2), (0.2, -0.2)), 1),
        (StraightEdge((0.2, -0.2), (0.2, y1)), 1),
        (top, -1),
        (StraightEdge((-0.3, -0.2), (-0.3, y0)), -1),
    ]


def _bulged_edge(p0, p1, bulge):
    """Circular arc from p0 to p1 whose midpoint sits ``bulge`` to the right
    of the chord (outward for a counterclockwise cell)."""
    mid = 0.5 * (p0 + p1)
    d = p1 - p0
    half = 0.5 * np.linalg.norm(d)
    normal = np.array([d[1], -d[0]]) / (2 * half)
    s = bulge if abs(bulge) > 1e-3 * half else 1e-3 * half
    rad = (half**2 + s**2) / (2 * abs(s))
    center = mid + normal * (s - np.sign(s) * rad)
    t0 = math.atan2(*(p0 - center)[::-1])
    t1 = math.atan2(*(p1 - center)[::-1])
    dt = (t1 - t0 + math.pi) % (2 * math.pi) - math.pi
    lo, hi, orient = (t0, t0 + dt, 1) if dt > 0 else (t0 + dt, t0, -1)
    edge = CurvedEdge(CircleArc("r", tuple(center), rad), lo, hi, orient)
    assert np.allclose(edge.endpoints(), [p0, p1], atol=1e-12)
    return edge


def random_cell(rng, curved, n_vertices=None):
    """Random convex-ish polygon with 3 to 6 vertices; with ``curved`` the
    first edge (and maybe a second) bulges in or out along a circular arc."""
    n = n_vertices or int(rng.integers(3, 7))
    ang = np.sort(rng.random(n) * 2 * math.pi)
    ang = np.linspace(0, 2 * math.pi, n, endpoint=False) + 0.3 * (ang - ang.mean()) / n
    rad = 1.0 + 0.2 * (rng.random(n) - 0.5)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    pts = pts * (0.05 + 0.5 * rng.random()) + rng.random(2)
    bd = polygon(*map(tuple, pts))
    if curved:
        for i in range(1 + int(rng.random() < 0.5 and n > 3)):
            j = 2 * i
            p0, p1 = pts[j], pts[(j + 1) % n]
            half = 0.5 * np.linalg.norm(p1 - p0)
            bd[j] = (_bulged_edge(p0, p1, (rng.random() - 0.5) * 0.5 * half), 1)
    return bd
