"""Local mixed virtual element matrices on one (possibly curved) polygon.

Local degrees of freedom, in order:

* per edge of the loop, k+1 normal moments (1/h_e) int_e w.n^e m~_i,
* pi_k - 1 divergence moments (h_E/|E|) int_E div(w) m_j, j >= 1,
* pi_{k-1} moments (1/|E|) int_E w.m_perp m_l.

n^e is the edge's intrinsic normal, so a shared edge carries the same values
seen from both cells; sigma = +-1 only enters inside the local operators.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .geometry import Boundary, CellGeometry, EdgeGeom, edge_quadrature
from .poly import (
    ScaledBasis,
    check_spd,
    decomposition_matrices,
    derivative_matrices,
    dim,
    edge_monomials,
    mass_from_moments,
    _product_index,
)

log = logging.getLogger(__name__)


class LocalError(ValueError):
    pass


class SingularGram(LocalError):
    pass


class RankDeficientB(LocalError):
    pass


@dataclass(frozen=True)
class DofLayout:
    k: int
    n_edges: int

    @property
    def per_edge(self):
        return self.k + 1

    @property
    def n_div(self):
        return dim(self.k) - 1

    @property
    def n_int(self):
        return dim(self.k - 1)

    @property
    def size(self):
        return self.n_edges * self.per_edge + self.n_div + self.n_int

    def edge(self, e: int) -> slice:
        return slice(e * self.per_edge, (e + 1) * self.per_edge)

    @property
    def div(self) -> slice:
        start = self.n_edges * self.per_edge
        return slice(start, start + self.n_div)

    @property
    def interior(self) -> slice:
        start = self.n_edges * self.per_edge + self.n_div
        return slice(start, start + self.n_int)


def _warn_cond(M, what):
    c = np.linalg.cond(M)
    if c > 1e12:
        log.warning("%s has condition number %.2e", what, c)


class Element:
    """All computable operators of V_k(E) on one cell.

    Attributes built on construction:

    ``P``   (2 pi_k, N)  DoFs -> coefficients of the L2 projection,
    ``Dv``  (pi_k, N)    DoFs -> coefficients of div w,
    ``R``   (pi_k, N)    DoFs -> int_E div(w) m_j,
    ``D``   (N, 2 pi_k)  polynomial coefficients -> DoF values,
    ``H``   (pi_k, pi_k) scalar mass matrix.
    """

    def __init__(self, boundary: Boundary, k: int, n_gauss: int | None = None,
                 bulk_order: int | None = None, geom: CellGeometry | None = None):
        if k < 0:
            raise ValueError("k must be >= 0")
        self.k = k
        self.n_gauss = n_gauss or k + 4
        self.bulk_order = bulk_order or k + 4
        self.geom = geom if geom is not None else CellGeometry(boundary, self.n_gauss)
        self.boundary = self.geom.boundary
        self.layout = DofLayout(k, len(self.boundary))
        self.basis = ScaledBasis(tuple(self.geom.centroid), self.geom.diameter, k)
        self._build()

    @property
    def area(self):
        return self.geom.area

    @property
    def diameter(self):
        return self.geom.diameter

    @property
    def centroid(self):
        return self.geom.centroid

    def _build(self):
        k, lay, g = self.k, self.layout, self.geom
        nk, nkm = dim(k), dim(k - 1)
        N = lay.size
        h, area = g.diameter, g.area
        mom = g.moments(2 * k + 2)
        H = mass_from_moments(mom, k)
        check_spd(H, "element mass matrix")
        Hk1 = mass_from_moments(mom, k, k + 1)
        A_dec, G_dec = decomposition_matrices(k, h)
        basis1 = ScaledBasis(self.basis.center, h, k + 1)

        R = np.zeros((nk, N))
        RHS = np.zeros((2 * nk, N))
        D = np.zeros((N, 2 * nk))
        self.edge_quads = []
        self.edge_lengths = np.zeros(lay.n_edges)
        self.sigmas = np.array([s for _, s in self.boundary], dtype=float)
        self.edge_mass = []
        self.flux_maps = []  # c = flux_map @ d1 gives w.n^e coefficients
        for e, (edge, sigma) in enumerate(self.boundary):
            q = edge_quadrature(edge, self.n_gauss)
            V = edge_monomials(q.xi, k)
            Vw = V * q.weights[:, None]
            Mt = Vw.T @ V
            he = q.length
            Ce = he * np.linalg.inv(Mt)
            mvals = basis1.values(q.points)
            Qe = Vw.T @ mvals
            cols = lay.edge(e)
            RHS[:, cols] += sigma * (A_dec @ Qe.T) @ Ce
            R[0, cols.start] = sigma * he
            mk = mvals[:, :nk]
            D[cols, :nk] = (Vw / he).T @ (mk * q.normals[:, :1])
            D[cols, nk:] = (Vw / he).T @ (mk * q.normals[:, 1:])
            self.edge_quads.append(q)
            self.edge_lengths[e] = he
            self.edge_mass.append(Mt)
            self.flux_maps.append(Ce)

        div = lay.div
        R[np.arange(1, nk), np.arange(div.start, div.stop)] = area / h
        Dv = np.linalg.solve(H, R)
        RHS -= (A_dec @ Hk1.T) @ Dv
        RHS[:, lay.interior] += area * G_dec

        G = np.zeros((2 * nk, 2 * nk))
        G[:nk, :nk] = H
        G[nk:, nk:] = H
        try:
            cho = sla.cho_factor(G)
        except np.linalg.LinAlgError as exc:
            raise SingularGram("vector mass matrix is singular") from exc
        P = sla.cho_solve(cho, RHS)

        # divergence moments of polynomials (exact)
        Dx, Dy = derivative_matrices(k)
        Hkm = mass_from_moments(mom, k, k - 1)
        D[div, :nk] = Hkm[1:] @ Dx / area
        D[div, nk:] = Hkm[1:] @ Dy / area
        # m_perp moments of polynomials: (m_r, 0).m_perp m_l = Y m_r m_l
        if nkm:
            a, b = _product_index(k - 1, k)
            D[lay.interior, :nk] = mom[a, b + 1] / area
            D[lay.interior, nk:] = -mom[a + 1, b] / area

        self.H = H
        self.R = R
        self.Dv = Dv
        self.P = P
        self.D = D
        self.G = G

    # ----------------------------------------------------------------- maps

    def normal_flux_coeffs(self, e: int, d1) -> np.ndarray:
        return self.flux_maps[e] @ np.asarray(d1, dtype=float)

    def divergence_coeffs(self, dofs) -> np.ndarray:
        return self.Dv @ np.asarray(dofs, dtype=float)

    def weighted_mass(self, kappa_inv_mu) -> np.ndarray:
        """C = int_E (mu kappa^-1) m_xi . m_eta for the vector monomials.

        ``kappa_inv_mu`` is a constant 2x2 matrix (or scalar), or a callable
        returning (n, 2, 2) arrays at points."""
        nk = dim(self.k)
        if callable(kappa_inv_mu):
            pts, w = self.geom.fan(self.bulk_order)
            K = kappa_inv_mu(pts)
            V = self.basis.values(pts)
            C = np.zeros((2 * nk, 2 * nk))
            for i in range(2):
                for j in range(2):
                    C[i * nk:(i + 1) * nk, j * nk:(j + 1) * nk] = (V * (w * K[:, i, j])[:, None]).T @ V
            return C
        K = np.asarray(kappa_inv_mu, dtype=float)
        if K.ndim == 0:
            K = K * np.eye(2)
        return np.kron(K, self.H)

    def fortin(self, w: Callable, divw: Callable, order: int | None = None) -> np.ndarray:
        """DoF values of a vector field ``w(points) -> (n, 2)`` with divergence
        ``divw(points) -> (n,)``.

        These are integrals of general smooth data, so they use a richer rule
        than the polynomial integrands of the method (``order``, default k+12).
        """
        lay, k = self.layout, self.k
        order = order or k + 12
        dofs = np.zeros(lay.size)
        for e, (edge, _) in enumerate(self.boundary):
            q = edge_quadrature(edge, order)
            wn = np.einsum("ij,ij->i", w(q.points), q.normals)
            V = edge_monomials(q.xi, k)
            dofs[lay.edge(e)] = (V * (q.weights * wn)[:, None]).sum(0) / q.length
        pts, wt = self.geom.fan(order)
        h, area = self.diameter, self.area
        vals = self.basis.values(pts)
        if lay.n_div:
            dofs[lay.div] = (h / area) * ((wt * divw(pts)) @ vals[:, 1:])
        if lay.n_int:
            X = (pts[:, 0] - self.centroid[0]) / h
            Y = (pts[:, 1] - self.centroid[1]) / h
            wv = w(pts)
            wperp = wv[:, 0] * Y - wv[:, 1] * X
            dofs[lay.interior] = ((wt * wperp) @ vals[:, : lay.n_int]) / area
        return dofs

    def load_moments(self, f: Callable) -> np.ndarray:
        """int_E f m_j for j < pi_k."""
        pts, w = self.geom.fan(self.bulk_order)
        return (w * f(pts)) @ self.basis.values(pts)

    def boundary_load(self, e: int, pbar: Callable) -> np.ndarray:
        """Contribution -(pbar, phi.n_E)_e for the edge-e DoFs.  If the edge
        is a chord of a curve, pbar is sampled on that curve."""
        edge, sigma = self.boundary[e]
        q = self.edge_quads[e]
        pts = q.points
        if not edge.curved and edge.chord_of is not None:
            pts = edge.chord_of.map(2.0 * q.xi)
        V = edge_monomials(q.xi, self.k)
        g = (V * (q.weights * pbar(pts))[:, None]).sum(0)
        return -sigma * (self.flux_maps[e].T @ g)


# --------------------------------------------------------------------------
# function-style entry points


def edge_normal_poly_from_dofs(edge: EdgeGeom, d1, n_gauss: int | None = None) -> np.ndarray:
    """Coefficients c of w.n^e = sum c_r m~_r from the edge moments d1."""
    d1 = np.asarray(d1, dtype=float)
    k = len(d1) - 1
    q = edge_quadrature(edge, n_gauss or k + 4)
    V = edge_monomials(q.xi, k)
    Mt = (V * q.weights[:, None]).T @ V
    check_spd(Mt, "edge mass matrix")
    return np.linalg.solve(Mt, q.length * d1)


def edge_l2_project(edge: EdgeGeom, g: Callable, k: int, n_gauss: int | None = None) -> np.ndarray:
    """Coefficients of the L2(e) projection of g onto mapped polynomials."""
    q = edge_quadrature(edge, n_gauss or k + 4)
    V = edge_monomials(q.xi, k)
    Mt = (V * q.weights[:, None]).T @ V
    check_spd(Mt, "edge mass matrix")
    return np.linalg.solve(Mt, (V * (q.weights * g(q.points))[:, None]).sum(0))


def divergence_poly_from_dofs(element: Element, dofs) -> np.ndarray:
    return element.divergence_coeffs(dofs)


def projector_matrix(element: Element) -> np.ndarray:
    return element.P


def stabilization_matrix(element: Element) -> np.ndarray:
    return element.area * np.eye(element.layout.size)


def local_a_matrix(element: Element, nu: float, C: np.ndarray | None = None,
                   S: np.ndarray | None = None) -> np.ndarray:
    """A = P^T C P + nu (I - D P)^T S (I - D P)."""
    P, D = element.P, element.D
    if C is None:
        C = element.weighted_mass(1.0)
    N = element.layout.size
    Z = np.eye(N) - D @ P
    if S is None:
        stab = element.area * (Z.T @ Z)
    else:
        stab = Z.T @ S @ Z
    A = P.T @ C @ P + nu * stab
    return 0.5 * (A + A.T)


def local_b_matrix(element: Element) -> np.ndarray:
    """B_js = -int_E div(phi_s) m_j."""
    B = -element.R
    if np.linalg.matrix_rank(B) < B.shape[0]:
        raise RankDeficientB("divergence coupling lost rank")
    return B


def local_rhs(element: Element, f: Callable, pbar: Callable | None = None,
              natural_edges=()) -> tuple[np.ndarray, np.ndarray]:
    rhs_f = element.load_moments(f)
    rhs_g = np.zeros(element.layout.size)
    if pbar is not None:
        for e in natural_edges:
            rhs_g[element.layout.edge(e)] += element.boundary_load(e, pbar)
    return rhs_f, rhs_g


def fortin_interpolate(element: Element, w: Callable, divw: Callable,
                       order: int | None = None) -> np.ndarray:
    return element.fortin(w, divw, order)


def nu_scaling(mu: float, kappa) -> float:
    """mu * trace(kappa^-1) / 2 at the centroid."""
    K = np.asarray(kappa, dtype=float)
    if K.ndim == 0:
        return float(mu / K)
    return float(mu * 0.5 * np.trace(np.linalg.inv(K)))
