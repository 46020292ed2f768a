"""Parametric curves, edge maps and quadrature on curved polygons.

Every edge is handled through a reference coordinate ``s`` in [-1, 1] that
runs from the edge's first vertex to its second.  Straight edges use the
affine map, curved edges a sub-interval of a registered curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class GeometryError(ValueError):
    pass


class DegenerateEdge(GeometryError):
    pass


class OpenLoop(GeometryError):
    pass


class NegativeArea(GeometryError):
    pass


class StarPointInvalid(GeometryError):
    pass


SPEED_TOL = 1e-14


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.nodes)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


# ---------------------------------------------------------------------------
# curves


def _rot_minus(v):
    """Rotate vectors (..., 2) by -pi/2."""
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


class ParametricCurve:
    """Base class for regular parametrized curves t -> (x, y)."""

    name: str
    interval: tuple[float, float]
    kind = ""
    file_kind = ""
    periodic = False

    def eval(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def params(self) -> tuple[float, ...]:
        raise NotImplementedError

    def side(self, points) -> np.ndarray:
        """+1 for points left of the curve's direction of travel, -1 right."""
        raise NotImplementedError

    def contains_param(self, t, tol=1e-12):
        a, b = self.interval
        if self.periodic:
            return True
        scale = max(1.0, abs(a), abs(b))
        return a - tol * scale <= t <= b + tol * scale


@dataclass(frozen=True, eq=True)
class CircleArc(ParametricCurve):
    name: str
    center: tuple[float, float]
    radius: float
    interval: tuple[float, float] = (0.0, 2.0 * math.pi)

    kind = "circle-arc"
    file_kind = "circle-arc"

    @property
    def periodic(self):
        a, b = self.interval
        return abs((b - a) - 2.0 * math.pi) < 1e-14

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)],
            axis=-1,
        )

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.radius * np.sin(t), self.radius * np.cos(t)], axis=-1)

    def params(self):
        return (self.center[0], self.center[1], self.radius)

    def side(self, points):
        p = np.asarray(points, dtype=float)
        d2 = (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2
        return np.where(d2 < self.radius**2, 1, -1)


@dataclass(frozen=True, eq=True)
class PolyGraph(ParametricCurve):
    """Graph y = sum c_i x^i parametrized by x."""

    name: str
    coeffs: tuple[float, ...]
    interval: tuple[float, float] = (0.0, 1.0)

    kind = "analytic-graph"
    file_kind = "poly-graph"

    def g(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def dg(self, x):
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(self.coeffs))

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, self.g(t)], axis=-1)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.ones_like(t), self.dg(t)], axis=-1)

    def params(self):
        return (len(self.coeffs), *self.coeffs)

    def side(self, points):
        p = np.asarray(points, dtype=float)
        return np.where(p[..., 1] > self.g(p[..., 0]), 1, -1)


@dataclass(frozen=True, eq=True)
class SineGraph(ParametricCurve):
    """Graph y = amplitude * sin(frequency * x) + offset parametrized by x."""

    name: str
    amplitude: float
    frequency: float
    offset: float
    interval: tuple[float, float] = (-1.0, 1.0)

    kind = "analytic-graph"
    file_kind = "sine-graph"

    def g(self, x):
        return self.amplitude * np.sin(self.frequency * x) + self.offset

    def dg(self, x):
        return self.amplitude * self.frequency * np.cos(self.frequency * x)

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, self.g(t)], axis=-1)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.ones_like(t), self.dg(t)], axis=-1)

    def params(self):
        return (self.amplitude, self.frequency, self.offset)

    def side(self, points):
        p = np.asarray(points, dtype=float)
        return np.where(p[..., 1] > self.g(p[..., 0]), 1, -1)


@dataclass(frozen=True, eq=True)
class AffineSegment(ParametricCurve):
    name: str
    p0: tuple[float, float]
    p1: tuple[float, float]
    interval: tuple[float, float] = (0.0, 1.0)

    kind = "affine-segment"
    file_kind = "affine-segment"

    def eval(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.asarray(self.p0) + t * (np.asarray(self.p1) - np.asarray(self.p0))

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        d = np.asarray(self.p1, dtype=float) - np.asarray(self.p0, dtype=float)
        return np.broadcast_to(d, t.shape + (2,)).copy()

    def params(self):
        return (*self.p0, *self.p1)

    def side(self, points):
        p = np.asarray(points, dtype=float)
        d = np.asarray(self.p1) - np.asarray(self.p0)
        c = d[0] * (p[..., 1] - self.p0[1]) - d[1] * (p[..., 0] - self.p0[0])
        return np.where(c > 0, 1, -1)


@dataclass(frozen=True, eq=True)
class CompositeCurve(ParametricCurve):
    """Pieces joined end to end; t in [i, i+1] runs over piece i."""

    name: str
    pieces: tuple[ParametricCurve, ...]

    kind = "composite"
    file_kind = "composite"

    def __post_init__(self):
        if not self.pieces:
            raise GeometryError("composite curve needs at least one piece")
        ends = [(pc.eval(pc.interval[0]), pc.eval(pc.interval[1])) for pc in self.pieces]
        scale = max(1.0, max(float(np.abs(e).max()) for pair in ends for e in pair))
        for i in range(len(ends) - 1):
            if np.abs(ends[i][1] - ends[i + 1][0]).max() > 1e-12 * scale:
                raise GeometryError(f"{self.name}: piece {i + 1} does not start where piece {i} ends")

    @property
    def interval(self):
        return (0.0, float(len(self.pieces)))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(i) for i in range(1, len(self.pieces)))

    @property
    def periodic(self):
        a, b = self.interval
        p, q = self.eval(np.array([a, b]))
        return bool(np.abs(p - q).max() <= 1e-12 * max(1.0, float(np.abs(p).max())))

    def _split(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.floor(t), 0, len(self.pieces) - 1).astype(int)
        return t, i, t - i

    def _apply(self, t, deriv: bool):
        t, idx, loc = self._split(t)
        out = np.zeros(t.shape + (2,))
        for i, pc in enumerate(self.pieces):
            mask = idx == i
            if not np.any(mask):
                continue
            a, b = pc.interval
            tp = a + loc[mask] * (b - a)
            out[mask] = pc.deriv(tp) * (b - a) if deriv else pc.eval(tp)
        return out

    def eval(self, t):
        return self._apply(t, False)

    def deriv(self, t):
        return self._apply(t, True)

    def params(self):
        return tuple(pc.name for pc in self.pieces)

    def side(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        a, b = self.interval
        poly = self.eval(np.linspace(a, b, 256 * len(self.pieces) + 1))
        if self.periodic:
            seg0, seg1 = poly[:-1], poly[1:]
            ang = np.arctan2(
                (seg0[None, :, 0] - p[:, None, 0]) * (seg1[None, :, 1] - p[:, None, 1])
                - (seg0[None, :, 1] - p[:, None, 1]) * (seg1[None, :, 0] - p[:, None, 0]),
                (seg0[None, :, 0] - p[:, None, 0]) * (seg1[None, :, 0] - p[:, None, 0])
                + (seg0[None, :, 1] - p[:, None, 1]) * (seg1[None, :, 1] - p[:, None, 1]),
            ).sum(1) / (2 * math.pi)
            area = 0.5 * np.sum(seg0[:, 0] * seg1[:, 1] - seg1[:, 0] * seg0[:, 1])
            inside = np.abs(ang) > 0.5
            return np.where(inside == (area > 0), 1, -1)
        # open curve: sign of the cross product at the nearest sample
        j = np.argmin(((poly[None, :, :] - p[:, None, :]) ** 2).sum(-1), axis=1)
        j = np.minimum(j, len(poly) - 2)
        d = poly[j + 1] - poly[j]
        c = d[:, 0] * (p[:, 1] - poly[j, 1]) - d[:, 1] * (p[:, 0] - poly[j, 0])
        return np.where(c > 0, 1, -1)


def curve_family(curve: ParametricCurve) -> list[ParametricCurve]:
    """The curve preceded by its pieces (recursively), pieces first."""
    out = []
    for pc in getattr(curve, "pieces", ()):
        out.extend(curve_family(pc))
    out.append(curve)
    return out


CURVE_KINDS = {
    "circle-arc": lambda name, p, iv: CircleArc(name, (p[0], p[1]), p[2], iv),
    "poly-graph": lambda name, p, iv: PolyGraph(name, tuple(p[1 : 1 + int(p[0])]), iv),
    "sine-graph": lambda name, p, iv: SineGraph(name, p[0], p[1], p[2], iv),
    "affine-segment": lambda name, p, iv: AffineSegment(name, (p[0], p[1]), (p[2], p[3]), iv),
}
CURVE_PARAM_COUNT = {"circle-arc": 3, "sine-graph": 3, "affine-segment": 4}


# ---------------------------------------------------------------------------
# edges


@dataclass(frozen=True)
class CurvedEdge:
    """Piece of ``curve`` over [t0, t1]; orientation -1 runs from t1 to t0."""

    curve: ParametricCurve
    t0: float
    t1: float
    orientation: int = 1

    curved = True

    @property
    def half(self):
        return 0.5 * (self.t1 - self.t0)

    @property
    def mid(self):
        return 0.5 * (self.t0 + self.t1)

    @property
    def param_interval(self):
        return (self.t0, self.t1)

    def t_of_s(self, s):
        return self.mid + self.orientation * self.half * np.asarray(s, dtype=float)

    def s_of_t(self, t):
        return (np.asarray(t, dtype=float) - self.mid) / (self.orientation * self.half)

    def map(self, s):
        return self.curve.eval(self.t_of_s(s))

    def jac(self, s):
        """d(point)/ds."""
        return self.curve.deriv(self.t_of_s(s)) * (self.orientation * self.half)

    def endpoints(self):
        return self.map(np.array([-1.0, 1.0]))


@dataclass(frozen=True)
class StraightEdge:
    """Segment p0 -> p1 with the affine map t -> p0 + t/h (p1 - p0) on [0, h].

    ``chord_of`` records the curved edge this segment replaced, if any; data
    defined on the physical curve is sampled through it.
    """

    p0: tuple[float, float]
    p1: tuple[float, float]
    chord_of: CurvedEdge | None = None

    curved = False
    orientation = 1

    @property
    def length(self):
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def param_interval(self):
        return (0.0, self.length)

    def t_of_s(self, s):
        return 0.5 * self.length * (1.0 + np.asarray(s, dtype=float))

    def s_of_t(self, t):
        return 2.0 * np.asarray(t, dtype=float) / self.length - 1.0

    def map(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        p0 = np.asarray(self.p0)
        p1 = np.asarray(self.p1)
        return p0 + 0.5 * (1.0 + s) * (p1 - p0)

    def jac(self, s):
        s = np.asarray(s, dtype=float)
        d = 0.5 * (np.asarray(self.p1) - np.asarray(self.p0))
        return np.broadcast_to(d, s.shape + (2,)).copy()

    def endpoints(self):
        return np.array([self.p0, self.p1], dtype=float)


EdgeGeom = StraightEdge | CurvedEdge


def edge_frame(edge: EdgeGeom, t: float):
    """Point, unit tangent, unit normal and speed at curve parameter ``t``.

    The normal is the tangent rotated by -pi/2, so it points outward for a
    counterclockwise loop traversing the edge in its stored direction.
    """
    if edge.curved:
        point = edge.curve.eval(t)
        d = edge.curve.deriv(t)
        direction = edge.orientation * d
    else:
        if not edge.length > SPEED_TOL:
            raise DegenerateEdge("zero-length edge")
        point = edge.map(edge.s_of_t(t))
        d = (np.asarray(edge.p1, dtype=float) - np.asarray(edge.p0, dtype=float)) / edge.length
        direction = d
    speed = float(np.hypot(d[0], d[1]))
    if not speed > SPEED_TOL:
        raise DegenerateEdge(f"speed {speed:g} at t={t}")
    tangent = direction / speed
    return point, tangent, _rot_minus(tangent), speed


@dataclass(frozen=True)
class EdgeQuadrature:
    """Gauss points on one edge: the curve-oriented coordinate ``u`` (equal to
    s, or -s when the edge runs against its curve), points, arc-length
    weights, unit normals (intrinsic to the edge) and d(point)/ds."""

    u: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    jac: np.ndarray
    length: float

    @property
    def xi(self):
        """Scaled edge-monomial coordinate (t - t_mid) / |interval|."""
        return 0.5 * self.u


MAX_PANEL_TURN = 0.5  # radians of tangent turning per Gauss panel
MIN_CURVED_NODES = 10  # integrands on curved edges are never polynomial


@lru_cache(maxsize=4096)
def _panel_count(edge: CurvedEdge) -> int:
    d = edge.jac(np.linspace(-1.0, 1.0, 65))
    ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    turn = float(np.abs(np.diff(ang)).sum())
    return max(1, math.ceil(turn / MAX_PANEL_TURN))


@lru_cache(maxsize=256)
def _composite(n: int, panels: int) -> QuadratureRule:
    base = gauss_legendre(n)
    if panels == 1:
        return base
    edges = np.linspace(-1.0, 1.0, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * base.nodes[None, :]).ravel()
    w = (half[:, None] * base.weights[None, :]).ravel()
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


@lru_cache(maxsize=4096)
def _edge_breaks(edge: CurvedEdge) -> tuple[float, ...]:
    """Joints of a composite curve strictly inside the edge, in s."""
    ts = [t for t in getattr(edge.curve, "breakpoints", ()) if edge.t0 < t < edge.t1]
    return tuple(sorted(float(edge.s_of_t(t)) for t in ts))


def _split_rule(n: int, panels: int, breaks: tuple[float, ...]) -> QuadratureRule:
    bounds = np.array([-1.0, *breaks, 1.0])
    xs, ws = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        sub = _composite(n, max(1, math.ceil(panels * (hi - lo) / 2.0)))
        half = 0.5 * (hi - lo)
        xs.append(0.5 * (lo + hi) + half * sub.nodes)
        ws.append(half * sub.weights)
    return QuadratureRule(np.concatenate(xs), np.concatenate(ws))


def edge_rule(edge: EdgeGeom, n_gauss: int) -> QuadratureRule:
    """Gauss rule in s for the edge.  Strongly turning curved edges are split
    into equal panels, each with at least MIN_CURVED_NODES nodes; composite
    curves are split at their joints."""
    if not edge.curved:
        return gauss_legendre(n_gauss)
    n = max(n_gauss, MIN_CURVED_NODES)
    breaks = _edge_breaks(edge)
    if breaks:
        return _split_rule(n, _panel_count(edge), breaks)
    return _composite(n, _panel_count(edge))


def edge_quadrature(edge: EdgeGeom, n_gauss: int) -> EdgeQuadrature:
    rule = edge_rule(edge, n_gauss)
    s = rule.nodes
    pts = edge.map(s)
    jac = edge.jac(s)
    speed = np.hypot(jac[:, 0], jac[:, 1])
    if np.any(speed < SPEED_TOL):
        raise DegenerateEdge("zero speed on edge")
    w = rule.weights * speed
    normals = _rot_minus(jac) / speed[:, None]
    u = s if edge.orientation == 1 else -s
    return EdgeQuadrature(u, pts, w, normals, jac, float(w.sum()))


def edge_integral(edge: EdgeGeom, f: Callable, n_gauss: int = 8) -> float:
    """Arc-length integral of ``f(points)`` over the edge."""
    q = edge_quadrature(edge, n_gauss)
    return float(np.dot(q.weights, f(q.points)))


def edge_length(edge: EdgeGeom, n_gauss: int = 12) -> float:
    if not edge.curved:
        return edge.length
    return edge_quadrature(edge, n_gauss).length


# ---------------------------------------------------------------------------
# cells


Boundary = Sequence[tuple[EdgeGeom, int]]


def _loop_points(boundary: Boundary):
    starts, ends = [], []
    for edge, sigma in boundary:
        a, b = edge.endpoints()
        if sigma < 0:
            a, b = b, a
        starts.append(a)
        ends.append(b)
    return np.array(starts), np.array(ends)


def check_closed(boundary: Boundary, scale: float | None = None):
    starts, ends = _loop_points(boundary)
    if scale is None:
        span = np.ptp(np.vstack([starts, ends]), axis=0)
        scale = float(max(span.max(), np.abs(starts).max(), 1e-300))
    # a loop may consist of several closed chains (cells with holes)
    tol = 1e-12 * scale
    chain = starts[0]
    n = len(starts)
    for i in range(n):
        nxt = starts[(i + 1) % n]
        if np.abs(ends[i] - nxt).max() <= tol and i + 1 < n:
            continue
        gap = np.abs(ends[i] - chain).max()
        if gap > tol:
            raise OpenLoop(f"boundary loop does not close (gap {gap:.3e})")
        chain = nxt


def _boundary_nodes(boundary: Boundary, n_gauss: int):
    """Concatenated boundary quadrature: points, Gauss weights, and the loop
    velocity sigma * d(point)/ds."""
    pts, vel, w = [], [], []
    for edge, sigma in boundary:
        rule = edge_rule(edge, n_gauss)
        s = rule.nodes
        pts.append(edge.map(s))
        vel.append(sigma * edge.jac(s))
        w.append(rule.weights)
    return np.concatenate(pts), np.concatenate(w), np.concatenate(vel)


def monomial_moments(
    boundary: Boundary, center, scale: float, degree: int, n_gauss: int, primitive: str = "x"
) -> np.ndarray:
    """Table I[a, b] = int_E ((x-xc)/h)^a ((y-yc)/h)^b dE for a + b <= degree.

    Uses the divergence theorem with the primitive in x (or y); the result
    is exact up to the edge quadrature error.
    """
    pts, w, vel = _boundary_nodes(boundary, n_gauss)
    X = (pts[:, 0] - center[0]) / scale
    Y = (pts[:, 1] - center[1]) / scale
    d = degree + 2
    Xp = X[None, :] ** np.arange(d)[:, None]
    Yp = Y[None, :] ** np.arange(d)[:, None]
    table = np.zeros((degree + 1, degree + 1))
    if primitive == "x":
        # int m dE = oint P dy,  P = h X^(a+1) Y^b / (a+1)
        M = (Xp[1:] * (w * vel[:, 1])) @ Yp[: degree + 1].T
        a = np.arange(degree + 1)[:, None]
        table = scale * M[: degree + 1] / (a + 1)
    elif primitive == "y":
        # int m dE = -oint Q dx,  Q = h X^a Y^(b+1) / (b+1)
        M = (Xp[: degree + 1] * (w * vel[:, 0])) @ Yp[1:].T
        b = np.arange(degree + 1)[None, :]
        table = -scale * M[:, : degree + 1] / (b + 1)
    else:
        raise ValueError(primitive)
    a, b = np.indices(table.shape)
    table[a + b > degree] = 0.0
    return table


def element_monomial_integral(
    boundary: Boundary, center, scale: float, exps: tuple[int, int], n_gauss: int = 8,
    primitive: str = "x",
) -> float:
    check_closed(boundary)
    a, b = exps
    return float(monomial_moments(boundary, center, scale, a + b, n_gauss, primitive)[a, b])


def _diameter(boundary: Boundary) -> float:
    pts = [edge.endpoints()[0] for edge, _ in boundary]
    for edge, _ in boundary:
        if edge.curved:
            pts.extend(edge.map(edge_rule(edge, 5).nodes))
    p = np.asarray(pts)
    diff = p[:, None, :] - p[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def element_measures(boundary: Boundary, n_gauss: int = 8):
    """(area, centroid, diameter) of the curved polygon."""
    check_closed(boundary)
    ref = np.mean([edge.endpoints()[0] for edge, _ in boundary], axis=0)
    diam = _diameter(boundary)
    m = monomial_moments(boundary, ref, diam, 1, n_gauss)
    area = m[0, 0]
    if area <= 0:
        raise NegativeArea(f"signed area {area:.3e}; loop is clockwise")
    centroid = ref + diam * np.array([m[1, 0], m[0, 1]]) / area
    return float(area), centroid, diam


def fan_quadrature(boundary: Boundary, star_point, order: int, strict: bool = True):
    """Points and weights of a fan of curved triangles (star_point, edge).

    The signed Jacobian is kept, so the rule stays exact for polynomials even
    when ``strict`` is off and the cell is not star-shaped w.r.t. the point.
    """
    rule = gauss_legendre(order)
    tau = 0.5 * (1.0 + rule.nodes)
    wt = 0.5 * rule.weights
    c = np.asarray(star_point, dtype=float)
    pts, wts = [], []
    for edge, sigma in boundary:
        erule = edge_rule(edge, order)
        s = erule.nodes
        g = edge.map(s) - c
        dg = sigma * edge.jac(s)
        cross = g[:, 0] * dg[:, 1] - g[:, 1] * dg[:, 0]
        if strict and np.any(cross < -1e-13 * np.abs(cross).max()):
            raise StarPointInvalid("fan Jacobian changes sign")
        # points: c + tau_i * g_j ; weights: wt_i * tau_i * w_j * cross_j
        pts.append((c + tau[:, None, None] * g[None, :, :]).reshape(-1, 2))
        wts.append(((wt * tau)[:, None] * (erule.weights * cross)[None, :]).ravel())
    return np.concatenate(pts), np.concatenate(wts)


def is_star_point(boundary: Boundary, point, n_gauss: int = 8) -> bool:
    crosses = []
    for edge, sigma in boundary:
        nodes = edge_rule(edge, n_gauss).nodes
        g = edge.map(nodes) - np.asarray(point)
        dg = sigma * edge.jac(nodes)
        crosses.append(g[:, 0] * dg[:, 1] - g[:, 1] * dg[:, 0])
    c = np.concatenate(crosses)
    return bool(np.all(c > -1e-13 * np.abs(c).max()))


def element_bulk_integral(
    boundary: Boundary, f: Callable, order: int = 8, star_point=None, strict: bool = True
) -> float:
    """Integrate ``f(points)`` over the cell with a fan rule from the star point
    (the centroid unless given)."""
    if star_point is None:
        _, star_point, _ = element_measures(boundary)
    pts, w = fan_quadrature(boundary, star_point, order, strict=strict)
    return float(np.dot(w, f(pts)))


class CellGeometry:
    """Cached geometric data of one curved polygon.

    ``boundary`` is the counterclockwise loop of (edge, sigma) pairs.  Scaled
    moments use the centroid and diameter of the cell.
    """

    def __init__(self, boundary: Boundary, n_gauss: int = 8):
        self.boundary = list(boundary)
        self.n_gauss = n_gauss
        self.area, self.centroid, self.diameter = element_measures(self.boundary, n_gauss)
        self._moments = None
        self._fans = {}
        self._star = None

    @property
    def n_edges(self):
        return len(self.boundary)

    def moments(self, degree: int) -> np.ndarray:
        if self._moments is None or self._moments.shape[0] <= degree:
            self._moments = monomial_moments(
                self.boundary, self.centroid, self.diameter, degree, self.n_gauss
            )
        return self._moments[: degree + 1, : degree + 1]

    @property
    def star_point(self):
        """Centroid when the cell is star-shaped with respect to it, else the
        first valid candidate; falls back to the centroid (signed fan)."""
        if self._star is None:
            self._star = (self.centroid, True)
            if not is_star_point(self.boundary, self.centroid):
                self._star = (self.centroid, False)
                for c in self._star_candidates():
                    if is_star_point(self.boundary, c):
                        self._star = (c, True)
                        break
        return self._star[0]

    @property
    def star_ok(self) -> bool:
        self.star_point
        return self._star[1]

    def _star_candidates(self):
        verts = np.array([edge.endpoints()[0] if s > 0 else edge.endpoints()[1]
                          for edge, s in self.boundary])
        yield verts.mean(axis=0)
        for edge, _ in self.boundary:
            mid = edge.map(np.array(0.0))
            for w in (0.25, 0.5, 0.75):
                yield (1 - w) * self.centroid + w * mid
        for v in verts:
            for w in (0.1, 0.3):
                yield (1 - w) * v + w * self.centroid

    def fan(self, order: int):
        if order not in self._fans:
            self._fans[order] = fan_quadrature(self.boundary, self.star_point, order, strict=False)
        return self._fans[order]

    def integrate(self, f: Callable, order: int) -> float:
        pts, w = self.fan(order)
        return float(np.dot(w, f(pts)))
