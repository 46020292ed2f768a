"""Manufactured cases, L2 error indicators and convergence studies."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import CircleArc, PolyGraph, SineGraph
from .mesh import Mesh, build_deformed_quad_mesh, cut_mesh_with_curve, square_mesh, straighten
from .solver import Fields, Problem, Solution, assemble, conservation_defect, evaluate, solve

PI = math.pi
DEFAULT_SIZES = (8, 16, 32, 64)


@dataclass
class ManufacturedCase:
    name: str
    build_mesh: Callable[[int], Mesh]
    p: Callable  # p(points, region)
    q: Callable  # q(points, region) -> (n, 2)
    f: Callable  # f(points, region), f = -div q
    region_of: Callable  # region id of points in the exact geometry
    mu: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=dict)
    interfaces: list = field(default_factory=list)  # (curve, left region, right region)
    domain: tuple = ((0.0, 0.0), (1.0, 1.0))

    def problem(self) -> Problem:
        return Problem(f=self.f, pbar=self.p, mu=self.mu, kappa=self.kappa)


def _by_region(funcs: dict):
    """Evaluate the region's formula; scalar or vector output."""
    def fn(points, region):
        return funcs[region](np.asarray(points, dtype=float))
    return fn


# -- curved boundary -------------------------------------------------------

G1 = PolyGraph("g1", (1.0, 0.0, -0.5, 0.5))
G2 = PolyGraph("g2", (0.0, 0.0, -0.5, 0.5))


def _cb_p(P):
    return np.sin(PI * P[..., 0]) * np.cos(PI * P[..., 1])


def _cb_q(P):
    x, y = P[..., 0], P[..., 1]
    return -PI * np.stack([np.cos(PI * x) * np.cos(PI * y), -np.sin(PI * x) * np.sin(PI * y)], axis=-1)


def _cb_f(P):
    return -2.0 * PI**2 * _cb_p(P)


def curved_boundary_case() -> ManufacturedCase:
    return ManufacturedCase(
        name="curved-boundary",
        build_mesh=lambda n: build_deformed_quad_mesh(n, G1, G2),
        p=_by_region({0: _cb_p}),
        q=_by_region({0: _cb_q}),
        f=_by_region({0: _cb_f}),
        region_of=lambda P: np.zeros(np.shape(P)[:-1], dtype=int),
        mu={0: 1.0},
        kappa={0: 1.0},
        domain=((0.0, -0.25), (1.0, 1.0)),
    )


# -- circular inclusion ----------------------------------------------------

R_INC = 0.45
K_OUT, K_IN = 1.0, 0.1


def _radius(P):
    return np.hypot(P[..., 0], P[..., 1])


def _ci_p_out(P):
    r = _radius(P)
    return K_IN * np.cos(r) + math.cos(R_INC) * (1.0 - K_IN)


def _ci_p_in(P):
    return np.cos(_radius(P))


def _ci_q(P):
    # -k grad p is the same field on both sides: k_in sin(r) x / r
    r = _radius(P)
    s = np.sinc(r / PI)
    return K_IN * s[..., None] * P


def _ci_f(P):
    r = _radius(P)
    return -K_IN * (np.cos(r) + np.sinc(r / PI))


def circle_inclusion_case() -> ManufacturedCase:
    curve = CircleArc("interface", (0.0, 0.0), R_INC)

    def build(n):
        return cut_mesh_with_curve(square_mesh(n, (-1.0, -1.0), (1.0, 1.0)), curve,
                                   left_region=2, right_region=1)

    return ManufacturedCase(
        name="circle-inclusion",
        build_mesh=build,
        p=_by_region({1: _ci_p_out, 2: _ci_p_in}),
        q=_by_region({1: _ci_q, 2: _ci_q}),
        f=_by_region({1: _ci_f, 2: _ci_f}),
        region_of=lambda P: np.where(_radius(np.asarray(P)) < R_INC, 2, 1),
        mu={1: 1.0, 2: 1.0},
        kappa={1: K_OUT, 2: K_IN},
        interfaces=[(curve, 2, 1)],
        domain=((-1.0, -1.0), (1.0, 1.0)),
    )


# -- double interface ------------------------------------------------------

A_DI, B_DI = 0.2, 0.31
C_DI = PI / (2.0 * B_DI)


def _di_u(P):
    return C_DI * (P[..., 1] - A_DI * np.sin(PI * P[..., 0]))


def _di_p1(P):
    return A_DI * np.sin(PI * P[..., 0])


def _di_p2(P):
    return A_DI * np.sin(_di_u(P)) * np.sin(PI * P[..., 0])


def _di_p3(P):
    return -A_DI * np.sin(PI * P[..., 0])


def _di_q1(P):
    x = P[..., 0]
    return -np.stack([A_DI * PI * np.cos(PI * x), 0.0 * x], axis=-1)


def _di_q2(P):
    x = P[..., 0]
    u = _di_u(P)
    ux = -C_DI * A_DI * PI * np.cos(PI * x)
    sx, cx = np.sin(PI * x), np.cos(PI * x)
    px = A_DI * (np.cos(u) * ux * sx + np.sin(u) * PI * cx)
    py = A_DI * np.cos(u) * C_DI * sx
    return -np.stack([px, py], axis=-1)


def _di_q3(P):
    return -_di_q1(P)


def _di_f1(P):
    return -A_DI * PI**2 * np.sin(PI * P[..., 0])


def _di_f2(P):
    x = P[..., 0]
    u = _di_u(P)
    sx, cx = np.sin(PI * x), np.cos(PI * x)
    ux = -C_DI * A_DI * PI * cx
    uxx = C_DI * A_DI * PI**2 * sx
    return A_DI * (-np.sin(u) * sx * (ux**2 + C_DI**2 + PI**2)
                   + np.cos(u) * (uxx * sx + 2.0 * PI * ux * cx))


def _di_f3(P):
    return -_di_f1(P)


def double_interface_case() -> ManufacturedCase:
    upper = SineGraph("gamma1", A_DI, PI, B_DI)
    lower = SineGraph("gamma2", A_DI, PI, -B_DI)

    def build(n):
        m = square_mesh(n, (-1.0, -1.0), (1.0, 1.0))
        m = Mesh(m.vertices, m.edges, [type(c)(c.loop, 3) for c in m.cells], m.curves)
        m = cut_mesh_with_curve(m, lower, left_region=2)
        return cut_mesh_with_curve(m, upper, left_region=1, only={2})

    def region_of(P):
        P = np.asarray(P)
        y = P[..., 1]
        s = A_DI * np.sin(PI * P[..., 0])
        return np.where(y > s + B_DI, 1, np.where(y > s - B_DI, 2, 3))

    return ManufacturedCase(
        name="double-interface",
        build_mesh=build,
        p=_by_region({1: _di_p1, 2: _di_p2, 3: _di_p3}),
        q=_by_region({1: _di_q1, 2: _di_q2, 3: _di_q3}),
        f=_by_region({1: _di_f1, 2: _di_f2, 3: _di_f3}),
        region_of=region_of,
        mu={1: 1.0, 2: 1.0, 3: 1.0},
        kappa={1: 1.0, 2: 1.0, 3: 1.0},
        interfaces=[(upper, 1, 2), (lower, 2, 3)],
        domain=((-1.0, -1.0), (1.0, 1.0)),
    )


CASES = {
    "curved-boundary": curved_boundary_case,
    "circle-inclusion": circle_inclusion_case,
    "double-interface": double_interface_case,
}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


# -- self-consistency ------------------------------------------------------

def _grad(fn, P, h=1e-3):
    """Fourth-order central differences of a scalar field."""
    out = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        out.append((-fn(P + 2 * e) + 8 * fn(P + e) - 8 * fn(P - e) + fn(P - 2 * e)) / (12 * h))
    return np.stack(out, axis=-1)


def _div(fn, P, h=1e-3):
    out = 0.0
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        g = lambda Q: fn(Q)[..., d]
        out = out + (-g(P + 2 * e) + 8 * g(P + e) - 8 * g(P - e) + g(P - 2 * e)) / (12 * h)
    return out


def check_case(case: ManufacturedCase, n_samples: int = 400, seed: int = 0) -> dict:
    """Largest residuals of mu q + kappa grad p, div q + f, and the interface
    jumps of p and q.n, over random samples."""
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(v) for v in case.domain)
    P = lo + (hi - lo) * rng.random((n_samples, 2))
    regions = case.region_of(P)
    darcy = mass = 0.0
    for r in np.unique(regions):
        Q = P[regions == r]
        K = float(np.asarray(case.kappa[r]))
        res = case.mu[r] * case.q(Q, r) + K * _grad(lambda X: case.p(X, r), Q)
        darcy = max(darcy, float(np.abs(res).max()))
        res = _div(lambda X: case.q(X, r), Q) + case.f(Q, r)
        mass = max(mass, float(np.abs(res).max()))
    jump_p = jump_q = 0.0
    for curve, left, right in case.interfaces:
        a, b = curve.interval
        t = np.linspace(a, b, 97)
        X = curve.eval(t)
        d = curve.deriv(t)
        n = np.stack([d[:, 1], -d[:, 0]], axis=-1)
        jump_p = max(jump_p, float(np.abs(case.p(X, left) - case.p(X, right)).max()))
        qn = np.einsum("ij,ij->i", case.q(X, left) - case.q(X, right), n)
        jump_q = max(jump_q, float(np.abs(qn).max()))
    return {"darcy": darcy, "mass": mass, "jump_p": jump_p, "jump_q": jump_q}


# -- errors ----------------------------------------------------------------

def compute_errors(fields: Fields, case: ManufacturedCase, mesh: Mesh, order: int | None = None):
    """(e_q, e_p): L2 distances of the projected velocity and the pressure
    to the exact fields, each cell using its region's formulas."""
    eq2 = ep2 = 0.0
    for c, E in enumerate(fields.elements):
        r = mesh.cells[c].region
        pts, w = E.geom.fan(order or E.k + 5)
        dq = case.q(pts, r) - fields.eval_velocity(c, pts)
        dp = case.p(pts, r) - fields.eval_pressure(c, pts)
        eq2 += float(w @ (dq**2).sum(-1))
        ep2 += float(w @ dp**2)
    return math.sqrt(max(eq2, 0.0)), math.sqrt(max(ep2, 0.0))


@dataclass
class ConvergenceRow:
    n: int
    h: float
    e_q: float
    e_p: float
    ndof: int
    seconds: float
    residual: float
    conservation: float


@dataclass
class ConvergenceReport:
    case: str
    k: int
    mode: str
    rows: list[ConvergenceRow]

    def rates(self, attr: str) -> list[float]:
        out = []
        for a, b in zip(self.rows[:-1], self.rows[1:]):
            ea, eb = getattr(a, attr), getattr(b, attr)
            if ea > 0 and eb > 0:
                out.append(math.log(ea / eb) / math.log(a.h / b.h))
            else:
                out.append(float("nan"))
        return out

    @property
    def rate_q(self):
        return self.rates("e_q")

    @property
    def rate_p(self):
        return self.rates("e_p")

    def to_csv(self, timings: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "k", "h", "e_q", "e_p", "rate_q", "rate_p", "ndof", "seconds"])
        rq, rp = [None] + self.rate_q, [None] + self.rate_p
        f = lambda v: "" if v is None else format(v, ".17g")
        for row, a, b in zip(self.rows, rq, rp):
            w.writerow([self.mode, self.k, f(row.h), f(row.e_q), f(row.e_p), f(a), f(b), row.ndof,
                        f(row.seconds) if timings else ""])
        return buf.getvalue()


def prepare_mesh(case: ManufacturedCase, n: int, mode: str) -> Mesh:
    mesh = case.build_mesh(n)
    if mode == "nogeo":
        mesh = straighten(mesh)
    elif mode != "withgeo":
        raise ValueError(f"mode must be withgeo or nogeo, not {mode!r}")
    return mesh


def solve_case(case: ManufacturedCase, n: int, k: int, mode: str = "withgeo",
               mesh: Mesh | None = None) -> tuple[Solution, Fields, Mesh]:
    mesh = mesh if mesh is not None else prepare_mesh(case, n, mode)
    sol = solve(assemble(mesh, case.problem(), k))
    return sol, evaluate(sol), mesh


def _one_row(args) -> ConvergenceRow:
    case_name, n, k, mode = args
    case = get_case(case_name)
    t0 = time.perf_counter()
    sol, fields, mesh = solve_case(case, n, k, mode)
    e_q, e_p = compute_errors(fields, case, mesh)
    h = float(np.mean([E.diameter for E in fields.elements]))
    cons = float(np.abs(conservation_defect(sol)).max())
    return ConvergenceRow(n, h, e_q, e_p, sol.ndof, time.perf_counter() - t0, sol.residual, cons)


def run_convergence(case_name: str, k: int, mode: str = "withgeo",
                    sizes: Sequence[int] = DEFAULT_SIZES, jobs: int = 1) -> ConvergenceReport:
    if any(b <= a for a, b in zip(sizes[:-1], sizes[1:])):
        raise ValueError("mesh sizes must be strictly increasing")
    tasks = [(case_name, n, k, mode) for n in sizes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_one_row, tasks))
    else:
        rows = [_one_row(t) for t in tasks]
    hs = [r.h for r in rows]
    if any(b >= a for a, b in zip(hs[:-1], hs[1:])):
        raise ValueError("mesh sizes must give strictly decreasing h")
    return ConvergenceReport(case_name, k, mode, rows)
