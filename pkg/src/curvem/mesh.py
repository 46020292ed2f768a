"""Curved polygonal meshes: data model, builders, cutting, straightening,
validation and the text file format."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .geometry import (
    CURVE_KINDS,
    CURVE_PARAM_COUNT,
    CellGeometry,
    CompositeCurve,
    CurvedEdge,
    GeometryError,
    ParametricCurve,
    curve_family,
    StraightEdge,
    edge_length,
    monomial_moments,
)

TAGS = ("interior", "essential", "natural")


class MeshError(ValueError):
    pass


class InvertedCell(MeshError):
    pass


class TangentialIntersection(MeshError):
    pass


class TooManyCrossings(MeshError):
    pass


class TopologyError(MeshError):
    pass


class ParseError(MeshError):
    pass


@dataclass(frozen=True)
class Edge:
    v0: int
    v1: int
    tag: str = "interior"
    curved: CurvedEdge | None = None
    chord_of: CurvedEdge | None = None


@dataclass(frozen=True)
class Cell:
    loop: tuple[tuple[int, int], ...]  # (edge index, sigma)
    region: int = 0


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray
    edges: tuple[Edge, ...]
    cells: tuple[Cell, ...]
    curves: dict[str, ParametricCurve] = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=float).reshape(-1, 2)
        self.vertices.setflags(write=False)
        self.edges = tuple(self.edges)
        self.cells = tuple(self.cells)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and np.array_equal(self.vertices, other.vertices)
            and self.edges == other.edges
            and self.cells == other.cells
            and self.curves == other.curves
        )

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_geom(self, i: int):
        e = self.edges[i]
        if e.curved is not None:
            return e.curved
        return StraightEdge(tuple(self.vertices[e.v0]), tuple(self.vertices[e.v1]), e.chord_of)

    def cell_boundary(self, c: int):
        return [(self.edge_geom(e), s) for e, s in self.cells[c].loop]

    def cell_geometry(self, c: int, n_gauss: int = 8) -> CellGeometry:
        return CellGeometry(self.cell_boundary(c), n_gauss)

    def cell_vertices(self, c: int) -> list[int]:
        out = []
        for e, s in self.cells[c].loop:
            ed = self.edges[e]
            out.append(ed.v0 if s > 0 else ed.v1)
        return out

    def edge_cells(self) -> list[list[tuple[int, int]]]:
        inc = [[] for _ in self.edges]
        for c, cell in enumerate(self.cells):
            for e, s in cell.loop:
                inc[e].append((c, s))
        return inc

    @property
    def has_curved_edges(self):
        return any(e.curved is not None for e in self.edges)


@dataclass
class MeshQualityReport:
    h: float
    h_max: float
    min_edge_ratio: float
    star_ok: list[bool]
    cell_count: int
    edge_count: int
    areas: np.ndarray

    @property
    def all_star(self):
        return all(self.star_ok)


# ---------------------------------------------------------------------------
# builders


def _normalize_orientation(vertices, edges, cells):
    """Store every edge from its lower to its higher vertex index."""
    flip = [e.v0 > e.v1 for e in edges]
    new_edges = []
    for e, f in zip(edges, flip):
        if f:
            curved = e.curved
            if curved is not None:
                curved = replace(curved, orientation=-curved.orientation)
            chord = e.chord_of
            if chord is not None:
                chord = replace(chord, orientation=-chord.orientation)
            e = Edge(e.v1, e.v0, e.tag, curved, chord)
        new_edges.append(e)
    new_cells = [
        Cell(tuple((i, -s if flip[i] else s) for i, s in c.loop), c.region) for c in cells
    ]
    return new_edges, new_cells


def square_mesh(n: int, lo=(0.0, 0.0), hi=(1.0, 1.0), essential: Iterable[str] = (),
                ny: int | None = None) -> Mesh:
    """Uniform n x ny grid of squares on the box [lo, hi].  Boundary sides
    listed in ``essential`` ("bottom", "right", "top", "left") get the
    essential tag, the rest natural."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ny = ny or n
    essential = set(essential)
    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    def tag(side):
        return "essential" if side in essential else "natural"

    edges = []
    hidx = {}
    for j in range(ny + 1):
        for i in range(n):
            t = tag("bottom") if j == 0 else tag("top") if j == ny else "interior"
            hidx[i, j] = len(edges)
            edges.append(Edge(vid(i, j), vid(i + 1, j), t))
    vidx = {}
    for j in range(ny):
        for i in range(n + 1):
            t = tag("left") if i == 0 else tag("right") if i == n else "interior"
            vidx[i, j] = len(edges)
            edges.append(Edge(vid(i, j), vid(i, j + 1), t))
    cells = []
    for j in range(ny):
        for i in range(n):
            cells.append(Cell(((hidx[i, j], 1), (vidx[i + 1, j], 1), (hidx[i, j + 1], -1), (vidx[i, j], -1))))
    return Mesh(vertices, edges, cells, {})


def register_curves(registry: dict, *curves: ParametricCurve) -> dict:
    """Add curves (and the pieces of composite ones) to a name registry."""
    for curve in curves:
        for c in curve_family(curve):
            old = registry.get(c.name)
            if old is not None and old != c:
                raise MeshError(f"two different curves named {c.name!r}")
            registry[c.name] = c
    return registry


def deform_point(x, y, g1: Callable, g2: Callable):
    """Vertex map onto the domain between the graphs of g2 (bottom) and g1 (top)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    low = y + g2(x) * (1.0 - 2.0 * y)
    high = 1.0 - y + g1(x) * (2.0 * y - 1.0)
    return x, np.where(y <= 0.5, low, high)


def build_deformed_quad_mesh(n: int, g1: ParametricCurve, g2: ParametricCurve,
                             essential: Iterable[str] = ()) -> Mesh:
    """n x n squares on (0,1)^2 pushed onto the region between the graph
    curves g2 (bottom) and g1 (top); top and bottom edges follow the curves."""
    base = square_mesh(n, essential=essential)
    gy1 = lambda x: g1.eval(x)[..., 1]
    gy2 = lambda x: g2.eval(x)[..., 1]
    x, y = deform_point(base.vertices[:, 0], base.vertices[:, 1], gy1, gy2)
    # boundary vertices sit exactly on the curves
    top = base.vertices[:, 1] == 1.0
    bot = base.vertices[:, 1] == 0.0
    y = np.where(top, gy1(x), np.where(bot, gy2(x), y))
    vertices = np.column_stack([x, y])
    edges = []
    for e in base.edges:
        y0, y1 = base.vertices[e.v0, 1], base.vertices[e.v1, 1]
        if e.tag != "interior" and y0 == y1 and y0 in (0.0, 1.0):
            curve = g1 if y0 == 1.0 else g2
            e = replace(e, curved=CurvedEdge(curve, float(x[e.v0]), float(x[e.v1]), 1))
        edges.append(e)
    mesh = Mesh(vertices, edges, base.cells, register_curves({}, g1, g2))
    for c in range(mesh.n_cells):
        v = vertices[mesh.cell_vertices(c)]
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area <= 0:
            raise InvertedCell(f"cell {c} inverted by the deformation")
    return mesh


def straighten(mesh: Mesh) -> Mesh:
    """Replace each curved edge by the chord between its endpoints, keeping
    the curved edge as ``chord_of`` so boundary data can be sampled on it."""
    if not mesh.has_curved_edges:
        return mesh
    for i, e in enumerate(mesh.edges):
        if e.curved is not None and e.v0 == e.v1:
            raise MeshError(f"edge {i} is a closed curve; it has no chord")
    edges = [
        Edge(e.v0, e.v1, e.tag, None, e.curved) if e.curved is not None else e
        for e in mesh.edges
    ]
    return Mesh(mesh.vertices, edges, mesh.cells, dict(mesh.curves))


# ---------------------------------------------------------------------------
# cutting


def _cell_polygon(mesh: Mesh, c: int, samples: int = 16) -> np.ndarray:
    pts = []
    s = np.linspace(-1.0, 1.0, samples + 1)[:-1]
    for e, sigma in mesh.cells[c].loop:
        g = mesh.edge_geom(e)
        if g.curved:
            ss = s if sigma > 0 else -s
            pts.append(g.map(ss))
        else:
            ed = mesh.edges[e]
            pts.append(mesh.vertices[[ed.v0 if sigma > 0 else ed.v1]])
    return np.concatenate(pts)


def _winding(poly: np.ndarray, p) -> float:
    d = poly - np.asarray(p)
    ang = np.arctan2(d[:, 1], d[:, 0])
    diff = np.diff(np.append(ang, ang[0]))
    diff = (diff + np.pi) % (2 * np.pi) - np.pi
    return diff.sum() / (2 * np.pi)


def _check_touching(phi, d, q0, gam, tol):
    """Raise if the curve touches an edge without crossing it: a local minimum
    of |phi| with no sign change whose parabolic estimate is below tol."""
    y0, y1, y2 = phi[:, :-2], phi[:, 1:-1], phi[:, 2:]
    same = (y0 * y1 > 0) & (y1 * y2 > 0)
    amin = (np.abs(y1) <= np.abs(y0)) & (np.abs(y1) <= np.abs(y2))
    ei, ji = np.nonzero(same & amin)
    if len(ei) == 0:
        return
    a, b, c = y0[ei, ji], y1[ei, ji], y2[ei, ji]
    curv = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        vmin = np.where(curv != 0, b - (c - a) ** 2 / (8 * curv), b)
    dn = np.linalg.norm(d[ei], axis=1)
    g = gam[ji + 1]
    lam = np.einsum("ij,ij->i", g - q0[ei], d[ei]) / dn**2
    hit = (np.abs(vmin) / dn <= tol * dn) & (lam > 0) & (lam < 1)
    if np.any(hit):
        raise TangentialIntersection("curve touches an edge without crossing it")


def _curve_crossings(mesh: Mesh, curve: ParametricCurve, samples: int | None,
                     tangent_tol: float = 1e-9):
    """Roots t of the curve against every straight edge, with the fraction
    lam along the edge.  Returns a list of (edge, t, lam)."""
    a, b = curve.interval
    V = mesh.vertices
    straight = [i for i, e in enumerate(mesh.edges) if e.curved is None]
    if not straight:
        return []
    lens = np.array([np.linalg.norm(V[mesh.edges[i].v1] - V[mesh.edges[i].v0]) for i in straight])
    if samples is None:
        tt = np.linspace(a, b, 2001)
        pts = curve.eval(tt)
        L = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
        samples = int(max(2000, 16 * L / np.median(lens)))
    tt = np.linspace(a, b, samples + 1)
    gam = curve.eval(tt)
    lo_c = gam.min(0)
    hi_c = gam.max(0)
    out = []
    p0 = np.array([V[mesh.edges[i].v0] for i in straight])
    p1 = np.array([V[mesh.edges[i].v1] for i in straight])
    elo = np.minimum(p0, p1)
    ehi = np.maximum(p0, p1)
    # sampled extremes of the curve may fall short by up to a sample step
    pad = 1e-9 * max(1.0, np.abs(V).max()) + np.linalg.norm(np.diff(gam, axis=0), axis=1).max()
    near = np.all((elo <= hi_c + pad) & (ehi >= lo_c - pad), axis=1)
    idx = np.nonzero(near)[0]
    for chunk in np.array_split(idx, max(1, len(idx) // 256)):
        if len(chunk) == 0:
            continue
        q0 = p0[chunk]
        d = p1[chunk] - q0
        phi = d[:, None, 0] * (gam[None, :, 1] - q0[:, None, 1]) - d[:, None, 1] * (gam[None, :, 0] - q0[:, None, 0])
        scale = np.abs(phi).max(axis=1, keepdims=True) + 1e-300
        zero = np.abs(phi) <= 1e-15 * scale
        prod = phi[:, :-1] * phi[:, 1:]
        _check_touching(phi, d, q0, gam, tangent_tol)
        ei, ji = np.nonzero((prod < 0) & ~zero[:, :-1] & ~zero[:, 1:])
        tl, tr = tt[ji], tt[ji + 1]
        dd, qq = d[ei], q0[ei]

        def f(t):
            g = curve.eval(t)
            return dd[:, 0] * (g[:, 1] - qq[:, 1]) - dd[:, 1] * (g[:, 0] - qq[:, 0])

        fl = f(tl)
        for _ in range(60):
            tm = 0.5 * (tl + tr)
            fm = f(tm)
            left = np.sign(fm) == np.sign(fl)
            tl = np.where(left, tm, tl)
            fl = np.where(left, fm, fl)
            tr = np.where(left, tr, tm)
        t = 0.5 * (tl + tr)
        for _ in range(3):
            gp = curve.deriv(t)
            dphi = dd[:, 0] * gp[:, 1] - dd[:, 1] * gp[:, 0]
            ok = np.abs(dphi) > 0
            step = np.where(ok, f(t) / np.where(ok, dphi, 1.0), 0.0)
            tn = t - step
            t = np.where((tn >= tt[ji]) & (tn <= tt[ji + 1]), tn, t)
        roots = [(ei, t)]
        ez, jz = np.nonzero(zero)
        roots.append((ez, tt[jz]))
        for e_loc, ts in roots:
            g = curve.eval(ts)
            dd2 = d[e_loc]
            lam = np.einsum("ij,ij->i", g - q0[e_loc], dd2) / np.einsum("ij,ij->i", dd2, dd2)
            gp = curve.deriv(ts)
            sin_angle = np.abs(dd2[:, 0] * gp[:, 1] - dd2[:, 1] * gp[:, 0]) / (
                np.linalg.norm(dd2, axis=1) * np.linalg.norm(gp, axis=1))
            bad = (sin_angle < 1e-6) & (lam > -1e-9) & (lam < 1 + 1e-9)
            if np.any(bad):
                raise TangentialIntersection(
                    f"curve {curve.name} grazes an edge at t = {ts[bad][0]:.6g}")
            for el, tv, lv in zip(e_loc, ts, lam):
                out.append((straight[chunk[el]], float(tv), float(lv)))
    # merge duplicate roots (zero samples next to brackets, t = a vs t = b)
    period = b - a
    tol = 1e-9 * max(1.0, abs(a), abs(b))
    merged: list[tuple[int, float, float]] = []
    for e, t, lam in sorted(out):
        if curve.periodic and t >= b - tol:
            t -= period
        dup = False
        for e2, t2, _ in merged:
            if e2 == e and (abs(t - t2) < tol or (curve.periodic and abs(abs(t - t2) - period) < tol)):
                dup = True
                break
        if not dup:
            merged.append((e, t, lam))
    return merged


def cut_mesh_with_curve(mesh: Mesh, curve: ParametricCurve, left_region: int | None = None,
                        right_region: int | None = None, only: Iterable[int] | None = None,
                        samples: int | None = None, snap: float = 1e-9) -> Mesh:
    """Split every cell crossed by ``curve`` into two cells sharing a new
    curved edge.

    Cells on the left of the curve (inside, for a counterclockwise circle)
    get ``left_region`` and cells on the right ``right_region``; None keeps
    the current label.  With ``only`` given, just cells currently in one of
    those regions are relabelled.  ``left_region`` defaults to a fresh id.
    """
    V = mesh.vertices.copy()
    raw = _curve_crossings(mesh, curve, samples)
    if left_region is None:
        left_region = max((c.region for c in mesh.cells), default=0) + 1
    if only is not None:
        only = set(only)

    edge_len = {}
    for e, t, lam in raw:
        ed = mesh.edges[e]
        edge_len.setdefault(e, np.linalg.norm(V[ed.v1] - V[ed.v0]))
    # classify: at a vertex or inside an edge
    vertex_hits: dict[int, float] = {}
    interior: dict[int, list[tuple[float, float]]] = {}
    for e, t, lam in raw:
        ed = mesh.edges[e]
        L = edge_len[e]
        if lam < -snap or lam > 1 + snap:
            continue
        if lam * L <= snap * L or (1 - lam) * L <= snap * L:
            v = ed.v0 if lam < 0.5 else ed.v1
            vertex_hits.setdefault(v, t)
            continue
        lst = interior.setdefault(e, [])
        if all(abs(t - t2) > 1e-12 * max(1.0, abs(t)) for t2, _ in lst):
            lst.append((t, lam))
    if not vertex_hits and not interior:
        if curve.periodic:
            return _embed_closed_curve(mesh, curve, left_region, right_region, only)
        return mesh

    crossings: list[tuple[float, int]] = []
    for v, t in vertex_hits.items():
        V[v] = curve.eval(t)
        crossings.append((t, v))

    edges = list(mesh.edges)
    cells = [list(c.loop) for c in mesh.cells]
    regions = [c.region for c in mesh.cells]
    verts = [tuple(p) for p in V]
    split_map: dict[int, list[int]] = {}
    for e, hits in interior.items():
        ed = edges[e]
        if ed.chord_of is not None:
            raise MeshError("cannot cut a straightened mesh")
        hits.sort(key=lambda x: x[1])
        chain = [ed.v0]
        for t, _ in hits:
            verts.append(tuple(curve.eval(t)))
            chain.append(len(verts) - 1)
            crossings.append((t, len(verts) - 1))
        chain.append(ed.v1)
        pieces = [e]
        edges[e] = Edge(chain[0], chain[1], ed.tag)
        for i in range(1, len(chain) - 1):
            edges.append(Edge(chain[i], chain[i + 1], ed.tag))
            pieces.append(len(edges) - 1)
        split_map[e] = pieces
    for c, loop in enumerate(cells):
        new = []
        for e, s in loop:
            if e in split_map:
                ps = split_map[e]
                new.extend((p, s) for p in (ps if s > 0 else reversed(ps)))
            else:
                new.append((e, s))
        cells[c] = new

    V = np.array(verts)

    crossings.sort()
    pieces = list(zip(crossings[:-1], crossings[1:]))
    if curve.periodic and len(crossings) > 1:
        a, b = curve.interval
        pieces.append((crossings[-1], (crossings[0][0] + (b - a), crossings[0][1])))

    def start_vertices(loop):
        return [edges[e].v0 if s > 0 else edges[e].v1 for e, s in loop]

    vert_cells: dict[int, set[int]] = {}
    for c, loop in enumerate(cells):
        for v in start_vertices(loop):
            vert_cells.setdefault(v, set()).add(c)

    tmp = Mesh(V, edges, [Cell(tuple(l)) for l in cells], mesh.curves)
    assigned: dict[int, tuple] = {}
    for (ta, va), (tb, vb) in pieces:
        if va == vb:
            raise TangentialIntersection(f"curve leaves and re-enters vertex {va}")
        cand = vert_cells.get(va, set()) & vert_cells.get(vb, set())
        pm = curve.eval(0.5 * (ta + tb))
        owner = None
        for c in sorted(cand):
            if abs(_winding(_cell_polygon(tmp, c), pm)) > 0.5:
                owner = c
                break
        if owner is None:
            # piece outside the mesh, or through a cell without a crossing
            inside = any(abs(_winding(_cell_polygon(tmp, c), pm)) > 0.5
                         for c in range(len(cells)))
            if inside:
                raise TooManyCrossings("curve piece spans several cells; refine the grid")
            continue
        if owner in assigned:
            raise TooManyCrossings(f"cell {owner} crossed more than twice; refine the grid")
        assigned[owner] = (ta, va, tb, vb)

    new_cells = list(cells)
    cell_side: dict[int, int] = {}
    curves = register_curves(dict(mesh.curves), curve)
    for c, (ta, va, tb, vb) in sorted(assigned.items()):
        loop = cells[c]
        sv = start_vertices(loop)
        ia, ib = sv.index(va), sv.index(vb)
        lo_t, hi_t = (ta, tb) if ta < tb else (tb, ta)
        orient = 1 if ta < tb else -1
        edges.append(Edge(va, vb, "interior", CurvedEdge(curve, float(lo_t), float(hi_t), orient)))
        ne = len(edges) - 1
        m = len(loop)
        first = [loop[(ia + i) % m] for i in range((ib - ia) % m)] + [(ne, -1)]
        second = [loop[(ib + i) % m] for i in range((ia - ib) % m)] + [(ne, 1)]
        new_cells[c] = first
        new_cells.append(second)
        regions.append(regions[c])
        # traversing along increasing t means the cell is left of the curve
        cell_side[c] = -orient
        cell_side[len(new_cells) - 1] = orient

    out_cells = []
    for c, loop in enumerate(new_cells):
        side = cell_side.get(c)
        if side is None:
            pv = V[start_vertices(loop)].mean(axis=0)
            side = int(curve.side(pv[None, :])[0])
        target = left_region if side > 0 else right_region
        region = regions[c]
        if target is not None and (only is None or region in only):
            region = target
        out_cells.append(Cell(tuple(loop), region))
    edges, out_cells = _normalize_orientation(V, edges, out_cells)
    return Mesh(V, edges, out_cells, curves)


def _embed_closed_curve(mesh, curve, left_region, right_region, only):
    """A closed curve inside a single cell: the cell splits into the enclosed
    region and the cell with a hole."""
    a, b = curve.interval
    p = curve.eval(a)
    host = None
    for c in range(mesh.n_cells):
        if abs(_winding(_cell_polygon(mesh, c), p)) > 0.5:
            host = c
            break
    if host is None:
        return mesh
    V = np.vstack([mesh.vertices, p[None, :]])
    v = len(V) - 1
    edges = list(mesh.edges) + [Edge(v, v, "interior", CurvedEdge(curve, float(a), float(b), 1))]
    ne = len(edges) - 1
    cells = list(mesh.cells)
    old = cells[host]

    def label(region, side):
        target = left_region if side > 0 else right_region
        if target is not None and (only is None or region in only):
            return target
        return region

    cells[host] = Cell(old.loop + ((ne, -1),), label(old.region, -1))
    cells.append(Cell(((ne, 1),), label(old.region, 1)))
    curves = register_curves(dict(mesh.curves), curve)
    return Mesh(V, edges, cells, curves)


# ---------------------------------------------------------------------------
# validation


def check_topology(mesh: Mesh):
    inc = mesh.edge_cells()
    for i, lst in enumerate(inc):
        tag = mesh.edges[i].tag
        if tag not in TAGS:
            raise TopologyError(f"edge {i}: unknown tag {tag!r}")
        if len(lst) == 0 or len(lst) > 2:
            raise TopologyError(f"edge {i}: {len(lst)} incident cells")
        if len(lst) == 2:
            if lst[0][1] != -lst[1][1]:
                raise TopologyError(f"edge {i}: both cells use the same orientation")
            if tag != "interior":
                raise TopologyError(f"edge {i}: interior edge tagged {tag}")
        elif tag == "interior":
            raise TopologyError(f"edge {i}: boundary edge tagged interior")
    for c, cell in enumerate(mesh.cells):
        ends = [(mesh.edges[e].v0, mesh.edges[e].v1)[:: 1 if s > 0 else -1] for e, s in cell.loop]
        chain = ends[0][0]
        for j, (a, b) in enumerate(ends):
            if j + 1 < len(ends) and b == ends[j + 1][0]:
                continue
            if b != chain:
                raise TopologyError(f"cell {c}: open loop at edge {cell.loop[j][0]}")
            if j + 1 < len(ends):
                chain = ends[j + 1][0]
    for i, ed in enumerate(mesh.edges):
        if ed.curved is not None:
            ends = ed.curved.endpoints()
            ref = mesh.vertices[[ed.v0, ed.v1]]
            scale = max(1.0, float(np.abs(mesh.vertices).max()))
            if np.abs(ends - ref).max() > 1e-12 * scale:
                raise TopologyError(f"edge {i}: curve endpoints off the vertices")


def validate(mesh: Mesh, n_gauss: int = 8) -> MeshQualityReport:
    check_topology(mesh)
    hs, ratios, star, areas = [], [], [], []
    for c in range(mesh.n_cells):
        bd = mesh.cell_boundary(c)
        g = CellGeometry(bd, n_gauss)
        hs.append(g.diameter)
        areas.append(g.area)
        ratios.append(min(edge_length(e) for e, _ in bd) / g.diameter)
        star.append(g.star_ok)
    return MeshQualityReport(
        h=float(np.mean(hs)),
        h_max=float(np.max(hs)),
        min_edge_ratio=float(np.min(ratios)),
        star_ok=star,
        cell_count=mesh.n_cells,
        edge_count=mesh.n_edges,
        areas=np.array(areas),
    )


def mesh_size(mesh: Mesh, n_gauss: int = 8) -> float:
    """Mean cell diameter."""
    return float(np.mean([mesh.cell_geometry(c, n_gauss).diameter for c in range(mesh.n_cells)]))


# ---------------------------------------------------------------------------
# file format


def _f(x) -> str:
    return format(float(x), ".17g")


def _curved_fields(ce: CurvedEdge) -> str:
    return f"{ce.curve.name} {_f(ce.t0)} {_f(ce.t1)} {ce.orientation}"


def dumps(mesh: Mesh) -> str:
    lines = ["# curvem mesh"]
    ordered = register_curves({}, *mesh.curves.values())  # pieces before composites
    lines.append(f"CURVES {len(ordered)}")
    for name, cv in ordered.items():
        if isinstance(cv, CompositeCurve):
            params = " ".join(cv.params())
        else:
            params = " ".join(_f(p) for p in cv.params())
        lines.append(f"{name} {cv.file_kind} {params} {_f(cv.interval[0])} {_f(cv.interval[1])}")
    lines.append(f"VERTICES {len(mesh.vertices)}")
    for i, (x, y) in enumerate(mesh.vertices):
        lines.append(f"{i} {_f(x)} {_f(y)}")
    lines.append(f"EDGES {mesh.n_edges}")
    for i, e in enumerate(mesh.edges):
        if e.curved is not None:
            geom = "C " + _curved_fields(e.curved)
        elif e.chord_of is not None:
            geom = "S chord " + _curved_fields(e.chord_of)
        else:
            geom = "S"
        lines.append(f"{i} {e.v0} {e.v1} {e.tag} {geom}")
    lines.append(f"CELLS {mesh.n_cells}")
    for c in mesh.cells:
        lines.append(" ".join([str(c.region)] + [str(s * (e + 1)) for e, s in c.loop]))
    return "\n".join(lines) + "\n"


def save(mesh: Mesh, path) -> None:
    Path(path).write_text(dumps(mesh), encoding="utf-8")


def loads(text: str) -> Mesh:
    lines = [(n + 1, ln.split()) for n, ln in enumerate(text.splitlines())]
    lines = [(n, tok) for n, tok in lines if tok and not tok[0].startswith("#")]
    pos = 0

    def section(name):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"missing section {name}")
        n, tok = lines[pos]
        if tok[0] != name or len(tok) != 2:
            raise ParseError(f"line {n}: expected '{name} <count>'")
        pos += 1
        try:
            return int(tok[1])
        except ValueError:
            raise ParseError(f"line {n}: bad count {tok[1]!r}") from None

    def rows(count, name):
        nonlocal pos
        out = lines[pos : pos + count]
        if len(out) != count:
            raise ParseError(f"section {name}: expected {count} rows, got {len(out)}")
        pos += count
        return out

    curves = {}
    for n, tok in rows(section("CURVES"), "CURVES"):
        try:
            name, kind = tok[0], tok[1]
            if kind == "composite":
                curves[name] = _load_composite(n, name, tok[2:], curves)
                continue
            vals = [float(x) for x in tok[2:]]
            if kind not in CURVE_KINDS:
                raise ParseError(f"line {n}: unknown curve kind {kind!r}")
            need = CURVE_PARAM_COUNT.get(kind, int(vals[0]) + 1 if vals else 1)
            if len(vals) != need + 2:
                raise ParseError(f"line {n}: curve {name} expects {need} parameters and an interval")
            curves[name] = CURVE_KINDS[kind](name, vals[:-2], (vals[-2], vals[-1]))
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(f"line {n}: malformed curve entry") from None

    nv = section("VERTICES")
    vertices = np.zeros((nv, 2))
    for n, tok in rows(nv, "VERTICES"):
        try:
            i = int(tok[0])
            vertices[i] = float(tok[1]), float(tok[2])
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(f"line {n}: malformed vertex") from None

    def curved_ref(n, tok):
        name = tok[0]
        if name not in curves:
            raise ParseError(f"line {n}: undefined curve {name!r}")
        return CurvedEdge(curves[name], float(tok[1]), float(tok[2]), int(tok[3]))

    ne = section("EDGES")
    edges: list[Edge | None] = [None] * ne
    for n, tok in rows(ne, "EDGES"):
        try:
            i, v0, v1, tag, kind = int(tok[0]), int(tok[1]), int(tok[2]), tok[3], tok[4]
            if tag not in TAGS:
                raise ParseError(f"line {n}: unknown tag {tag!r}")
            if not (0 <= v0 < nv and 0 <= v1 < nv):
                raise ParseError(f"line {n}: vertex index out of range")
            if kind == "C":
                edges[i] = Edge(v0, v1, tag, curved_ref(n, tok[5:9]))
            elif kind == "S" and len(tok) == 5:
                edges[i] = Edge(v0, v1, tag)
            elif kind == "S" and len(tok) == 10 and tok[5] == "chord":
                edges[i] = Edge(v0, v1, tag, None, curved_ref(n, tok[6:10]))
            else:
                raise ParseError(f"line {n}: bad edge geometry")
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(f"line {n}: malformed edge") from None
    if any(e is None for e in edges):
        raise ParseError("EDGES: missing indices")

    cells = []
    for n, tok in rows(section("CELLS"), "CELLS"):
        try:
            region = int(tok[0])
            loop = []
            for x in tok[1:]:
                v = int(x)
                if v == 0 or abs(v) > ne:
                    raise ParseError(f"line {n}: edge reference {v} out of range")
                loop.append((abs(v) - 1, 1 if v > 0 else -1))
        except ValueError:
            raise ParseError(f"line {n}: malformed cell") from None
        cells.append(Cell(tuple(loop), region))
    mesh = Mesh(vertices, edges, cells, curves)

    # clockwise loops are reversed
    fixed = []
    for c, cell in enumerate(mesh.cells):
        bd = mesh.cell_boundary(c)
        a = monomial_moments(bd, mesh.vertices[mesh.cell_vertices(c)[0]], 1.0, 0, 8)[0, 0]
        if a < 0:
            cell = Cell(tuple((e, -s) for e, s in reversed(cell.loop)), cell.region)
        fixed.append(cell)
    return Mesh(vertices, edges, fixed, curves)


def _load_composite(n: int, name: str, tok: list[str], curves: dict) -> CompositeCurve:
    names = tok[:-2]
    missing = [m for m in names if m not in curves]
    if not names or missing:
        raise ParseError(f"line {n}: composite {name} needs earlier pieces, missing {missing}")
    try:
        cv = CompositeCurve(name, tuple(curves[m] for m in names))
    except GeometryError as exc:
        raise ParseError(f"line {n}: {exc}") from None
    if (float(tok[-2]), float(tok[-1])) != cv.interval:
        raise ParseError(f"line {n}: composite {name} must span [0, {len(names)}]")
    return cv


def load(path) -> Mesh:
    return loads(Path(path).read_text(encoding="utf-8"))
