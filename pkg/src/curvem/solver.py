"""Global numbering, saddle-point assembly, direct solve and field evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .local_vem import Element, local_a_matrix, local_b_matrix, nu_scaling
from .mesh import Mesh
from .poly import dim

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class EmptyNaturalBoundary(SolverError):
    pass


class SingularSystem(SolverError):
    pass


def _per_region(value, region: int):
    if isinstance(value, dict):
        return value[region]
    if callable(value):
        return value(region)
    return value


@dataclass
class Problem:
    """Darcy data.  ``mu`` and ``kappa`` are constants, or dicts keyed by
    region id; ``f(points, region)`` is the source and ``pbar(points,
    region)`` the boundary pressure on natural edges."""

    f: Callable
    pbar: Callable | None = None
    mu: float | dict = 1.0
    kappa: float | np.ndarray | dict = 1.0

    def mu_of(self, region: int) -> float:
        return float(_per_region(self.mu, region))

    def kappa_of(self, region: int) -> np.ndarray:
        K = np.asarray(_per_region(self.kappa, region), dtype=float)
        return K * np.eye(2) if K.ndim == 0 else K


@dataclass
class DofMap:
    k: int
    edge_start: np.ndarray  # first global dof of each edge, -1 if essential
    cell_start: np.ndarray  # first global D2/D3 dof of each cell
    p_start: np.ndarray  # first pressure unknown of each cell (offset by n_vel)
    sigmas: list[np.ndarray]
    n_vel: int
    n_p: int

    @property
    def size(self):
        return self.n_vel + self.n_p

    def cell_dofs(self, mesh: Mesh, c: int) -> np.ndarray:
        """Global velocity index of each local DoF (-1 for omitted ones)."""
        k = self.k
        out = []
        for e, _ in mesh.cells[c].loop:
            s = self.edge_start[e]
            out.append(np.arange(s, s + k + 1) if s >= 0 else -np.ones(k + 1, dtype=int))
        n_in = dim(k) - 1 + dim(k - 1)
        out.append(np.arange(self.cell_start[c], self.cell_start[c] + n_in))
        return np.concatenate(out).astype(int)

    def cell_pressure(self, c: int) -> np.ndarray:
        return self.n_vel + np.arange(self.p_start[c], self.p_start[c] + dim(self.k))


def build_dofmap(mesh: Mesh, k: int) -> DofMap:
    ne = mesh.n_edges
    edge_start = -np.ones(ne, dtype=int)
    nxt = 0
    for i, e in enumerate(mesh.edges):
        if e.tag != "essential":
            edge_start[i] = nxt
            nxt += k + 1
    n_in = dim(k) - 1 + dim(k - 1)
    cell_start = nxt + n_in * np.arange(mesh.n_cells)
    n_vel = nxt + n_in * mesh.n_cells
    p_start = dim(k) * np.arange(mesh.n_cells)
    sigmas = [np.array([s for _, s in c.loop]) for c in mesh.cells]
    return DofMap(k, edge_start, cell_start, p_start, sigmas, n_vel, dim(k) * mesh.n_cells)


@dataclass
class System:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    dofmap: DofMap
    elements: list[Element]
    mesh: Mesh
    k: int
    local_f: list[np.ndarray] = field(default_factory=list)


@dataclass
class Solution:
    velocity: np.ndarray
    pressure: np.ndarray  # (n_cells, dim(k)) monomial coefficients
    residual: float
    diagnostics: dict
    system: System

    @property
    def ndof(self):
        return self.system.dofmap.size


def assemble(mesh: Mesh, problem: Problem, k: int, n_gauss: int | None = None,
             bulk_order: int | None = None) -> System:
    if not any(e.tag == "natural" for e in mesh.edges):
        raise EmptyNaturalBoundary("no natural boundary edge; pressure is not determined")
    dm = build_dofmap(mesh, k)
    rows, cols, vals = [], [], []
    rhs = np.zeros(dm.size)
    elements, local_f = [], []
    for c, cell in enumerate(mesh.cells):
        E = Element(mesh.cell_boundary(c), k, n_gauss, bulk_order)
        mu, K = problem.mu_of(cell.region), problem.kappa_of(cell.region)
        Kinv = np.linalg.inv(K)
        A = local_a_matrix(E, nu_scaling(mu, K), C=E.weighted_mass(mu * Kinv))
        B = local_b_matrix(E)
        gv = dm.cell_dofs(mesh, c)
        gp = dm.cell_pressure(c)
        keep = gv >= 0
        gk = gv[keep]
        Ak = A[np.ix_(keep, keep)]
        Bk = B[:, keep]
        rows.append(np.repeat(gk, len(gk)))
        cols.append(np.tile(gk, len(gk)))
        vals.append(Ak.ravel())
        for r_, c_, M in ((gp, gk, Bk), (gk, gp, Bk.T)):
            rows.append(np.repeat(r_, len(c_)))
            cols.append(np.tile(c_, len(r_)))
            vals.append(M.ravel())

        fm = E.load_moments(lambda p, r=cell.region: problem.f(p, r))
        rhs[gp] += fm
        local_f.append(fm)
        if problem.pbar is not None:
            g = np.zeros(E.layout.size)
            for j, (e, _) in enumerate(cell.loop):
                if mesh.edges[e].tag == "natural":
                    g[E.layout.edge(j)] += E.boundary_load(j, lambda p, r=cell.region: problem.pbar(p, r))
            np.add.at(rhs, gk, g[keep])
        elements.append(E)
    M = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dm.size, dm.size),
    )
    M.sum_duplicates()
    return System(M, rhs, dm, elements, mesh, k, local_f)


def solve(system: System, tol: float = 1e-10, refine_steps: int = 3) -> Solution:
    M, b = system.matrix, system.rhs
    try:
        lu = spla.splu(M, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystem(f"factorization failed: {exc}") from exc
    x = lu.solve(b)
    bnorm = max(np.linalg.norm(b), 1e-300)
    res = np.linalg.norm(b - M @ x) / bnorm
    steps = 0
    while res > tol and steps < refine_steps:
        x += lu.solve(b - M @ x)
        res = np.linalg.norm(b - M @ x) / bnorm
        steps += 1
    if not np.all(np.isfinite(x)) or res > tol:
        raise SingularSystem(f"relative residual {res:.3e} after {steps} refinement steps")
    dm = system.dofmap
    diag = {
        "residual": float(res),
        "refinement_steps": steps,
        "nnz_L": int(lu.L.nnz),
        "nnz_U": int(lu.U.nnz),
        "n_vel": dm.n_vel,
        "n_p": dm.n_p,
    }
    log.debug("solve: %s", diag)
    p = x[dm.n_vel:].reshape(-1, dim(system.k))
    return Solution(x[: dm.n_vel].copy(), p, float(res), diag, system)


@dataclass
class Fields:
    """Per-cell polynomial fields: projected velocity (n_cells, 2 dim(k)) and
    pressure (n_cells, dim(k)), on each cell's scaled basis."""

    velocity: np.ndarray
    pressure: np.ndarray
    elements: list[Element]

    def eval_pressure(self, c: int, points) -> np.ndarray:
        return self.elements[c].basis.values(points) @ self.pressure[c]

    def eval_velocity(self, c: int, points) -> np.ndarray:
        V = self.elements[c].basis.values(points)
        n = V.shape[-1]
        return np.stack([V @ self.velocity[c, :n], V @ self.velocity[c, n:]], axis=-1)


def local_dofs(solution: Solution, c: int) -> np.ndarray:
    sysm = solution.system
    gv = sysm.dofmap.cell_dofs(sysm.mesh, c)
    out = np.zeros(len(gv))
    keep = gv >= 0
    out[keep] = solution.velocity[gv[keep]]
    return out


def evaluate(solution: Solution) -> Fields:
    sysm = solution.system
    vel = np.array([E.P @ local_dofs(solution, c) for c, E in enumerate(sysm.elements)])
    return Fields(vel, solution.pressure.copy(), sysm.elements)


def conservation_defect(solution: Solution) -> np.ndarray:
    """Per cell: int_E div q_h + int_E Pi f (the load moment against 1)."""
    sysm = solution.system
    out = np.zeros(len(sysm.elements))
    for c, E in enumerate(sysm.elements):
        div_int = (E.R @ local_dofs(solution, c))[0]
        out[c] = div_int + sysm.local_f[c][0]
    return out


def run(mesh: Mesh, problem: Problem, k: int, **kw) -> Solution:
    return solve(assemble(mesh, problem, k, **kw))


def inf_sup_monitor(system: System, tol: float = 1e-8) -> float:
    """Discrete inf-sup constant: sqrt of the smallest eigenvalue of
    B V^-1 B^T against the pressure mass matrix, where V = A + B^T M^-1 B is
    the discrete H(div) inner product."""
    nv = system.dofmap.n_vel
    M = system.matrix
    A = M[:nv, :nv].tocsc()
    B = M[nv:, :nv].tocsr()
    Linv_blocks, Minv_blocks = [], []
    for E in system.elements:
        L = np.linalg.cholesky(E.H)
        Li = np.linalg.inv(L)
        Linv_blocks.append(Li)
        Minv_blocks.append(Li.T @ Li)
    Linv = sp.block_diag(Linv_blocks, format="csr")
    Minv = sp.block_diag(Minv_blocks, format="csr")
    V = (A + B.T @ Minv @ B).tocsc()
    lu = spla.splu(V)
    BL = (Linv @ B).tocsr()
    BLt = BL.T.tocsr()
    n = B.shape[0]
    op = spla.LinearOperator((n, n), matvec=lambda y: BL @ lu.solve(BLt @ y), dtype=float)
    # the spectrum lies in (0, 1]; the largest eigenvalue of I - S converges fastest
    shifted = spla.LinearOperator((n, n), matvec=lambda y: y - op.matvec(y), dtype=float)
    v0 = np.ones(n)
    top = spla.eigsh(shifted, k=1, which="LA", tol=tol, v0=v0, return_eigenvectors=False)[0]
    return float(np.sqrt(max(1.0 - top, 0.0)))
