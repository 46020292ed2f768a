"""Scaled monomial bases, the gradient / x-perp decomposition, mass matrices.

Monomials on a cell are ``((x - xE)/hE)^a ((y - yE)/hE)^b`` in graded
lexicographic order with x first: 1, X, Y, X^2, XY, Y^2, ...  Vector
polynomials stack an x-block and a y-block of the same scalar basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import EdgeGeom, edge_quadrature


class PolyError(ValueError):
    pass


class IndexOutOfRange(PolyError, IndexError):
    pass


class SingularBasis(PolyError):
    pass


class NotSPD(PolyError):
    pass


def dim(n: int) -> int:
    """Number of monomials of degree <= n (zero for n < 0)."""
    if n < 0:
        return 0
    return (n + 1) * (n + 2) // 2


@lru_cache(maxsize=None)
def exponents(n: int) -> np.ndarray:
    out = [(d - j, j) for d in range(n + 1) for j in range(d + 1)]
    arr = np.array(out, dtype=int).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


def index_of(a: int, b: int) -> int:
    d = a + b
    return dim(d - 1) + b


@lru_cache(maxsize=None)
def derivative_matrices(n: int):
    """Dx, Dy of shape (dim(n-1), dim(n)) acting on coefficient vectors, for
    unit scale (divide by hE for the physical derivative)."""
    ex = exponents(n)
    Dx = np.zeros((dim(n - 1), dim(n)))
    Dy = np.zeros((dim(n - 1), dim(n)))
    for j, (a, b) in enumerate(ex):
        if a > 0:
            Dx[index_of(a - 1, b), j] = a
        if b > 0:
            Dy[index_of(a, b - 1), j] = b
    for M in (Dx, Dy):
        M.setflags(write=False)
    return Dx, Dy


@lru_cache(maxsize=None)
def _product_index(n1: int, n2: int):
    """(a, b) exponent of m_i * m_j for i < dim(n1), j < dim(n2)."""
    e1, e2 = exponents(n1), exponents(n2)
    s = e1[:, None, :] + e2[None, :, :]
    return s[..., 0], s[..., 1]


@dataclass(frozen=True)
class ScaledBasis:
    center: tuple[float, float]
    scale: float
    degree: int

    @property
    def size(self):
        return dim(self.degree)

    def _check(self, index):
        if not 0 <= index < self.size:
            raise IndexOutOfRange(f"monomial index {index} outside [0, {self.size})")

    def values(self, points) -> np.ndarray:
        """Matrix (n_points, size) of all basis values."""
        p = np.asarray(points, dtype=float)
        X = (p[..., 0] - self.center[0]) / self.scale
        Y = (p[..., 1] - self.center[1]) / self.scale
        ex = exponents(self.degree)
        n = self.degree + 1
        Xp = X[..., None] ** np.arange(n)
        Yp = Y[..., None] ** np.arange(n)
        return Xp[..., ex[:, 0]] * Yp[..., ex[:, 1]]

    def eval(self, index: int, point) -> float:
        self._check(index)
        return self.values(point)[..., index]

    def grad_coeffs(self, index: int) -> np.ndarray:
        """Exact gradient of m_index as stacked coefficients of degree n-1."""
        self._check(index)
        Dx, Dy = derivative_matrices(self.degree)
        return np.concatenate([Dx[:, index], Dy[:, index]]) / self.scale

    def grad(self, index: int, point) -> np.ndarray:
        g = self.grad_coeffs(index)
        m = dim(self.degree - 1)
        if m == 0:
            return np.zeros(np.shape(point))
        vals = ScaledBasis(self.center, self.scale, self.degree - 1).values(point)
        return np.stack([vals @ g[:m], vals @ g[m:]], axis=-1)


monomial_eval = ScaledBasis.eval
monomial_grad = ScaledBasis.grad


@dataclass(frozen=True)
class Decomposition:
    grad_part: np.ndarray  # coefficients of p in M_{n+1}; constant entry is 0
    perp_part: np.ndarray  # coefficients g_l against m_perp * m_l, l < dim(n-1)


@lru_cache(maxsize=None)
def _decomposition_inverse(n: int) -> np.ndarray:
    """Inverse of the change of basis from {grad(m_a) : 0 < |a| <= n+1} and
    {m_perp m_l : |l| <= n-1} to the vector monomials of degree n, at unit
    scale."""
    N = dim(n)
    T = np.zeros((2 * N, 2 * N))
    Dx, Dy = derivative_matrices(n + 1)
    ng = dim(n + 1) - 1
    T[:N, :ng] = Dx[:, 1:]
    T[N:, :ng] = Dy[:, 1:]
    ex = exponents(n)
    for l, (a, b) in enumerate(exponents(n - 1)):
        # m_perp m_l = (Y m_l, -X m_l)
        T[index_of(a, b + 1), ng + l] = 1.0
        T[N + index_of(a + 1, b), ng + l] = -1.0
    assert len(ex) == N
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularBasis(f"change of basis for degree {n} has condition {cond:.2e}")
    Tinv = np.linalg.inv(T)
    Tinv.setflags(write=False)
    return Tinv


def decomposition_matrices(n: int, scale: float):
    """Matrices (A, G) whose row s holds the decomposition of the s-th vector
    monomial: A (2 dim(n), dim(n+1)) the coefficients of p, G the g_l."""
    Tinv = _decomposition_inverse(n)
    ng = dim(n + 1) - 1
    A = np.zeros((2 * dim(n), dim(n + 1)))
    A[:, 1:] = scale * Tinv[:ng].T
    G = Tinv[ng:].T.copy()
    return A, G


def decompose_vector_poly(v, n: int, scale: float = 1.0) -> Decomposition:
    """Write v in [P_n]^2 as grad(p) + sum_l g_l m_perp m_l."""
    v = np.asarray(v, dtype=float)
    if v.shape != (2 * dim(n),):
        raise PolyError(f"expected {2 * dim(n)} coefficients, got {v.shape}")
    A, G = decomposition_matrices(n, scale)
    return Decomposition(v @ A, v @ G)


def reassemble(dec: Decomposition, n: int, scale: float = 1.0) -> np.ndarray:
    """Inverse of decompose_vector_poly, returned as stacked coefficients."""
    Dx, Dy = derivative_matrices(n + 1)
    p = dec.grad_part / scale
    out = np.concatenate([Dx @ p, Dy @ p])
    N = dim(n)
    for l, (a, b) in enumerate(exponents(n - 1)):
        out[index_of(a, b + 1)] += dec.perp_part[l]
        out[N + index_of(a + 1, b)] -= dec.perp_part[l]
    return out


def mass_from_moments(moments: np.ndarray, n1: int, n2: int | None = None) -> np.ndarray:
    """H[i, j] = int m_i m_j from a moment table I[a, b]."""
    if n2 is None:
        n2 = n1
    a, b = _product_index(n1, n2)
    return moments[a, b]


def check_spd(M: np.ndarray, what: str = "matrix"):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"{what} is not positive definite") from exc


def mass_matrix_element(basis: ScaledBasis, cell) -> np.ndarray:
    """H_ij = int_E m_i m_j for a cell object exposing ``moments(degree)`` at
    the basis' center and scale."""
    H = mass_from_moments(cell.moments(2 * basis.degree), basis.degree)
    check_spd(H, "element mass matrix")
    return H


def edge_monomials(xi: np.ndarray, k: int) -> np.ndarray:
    """Values (n_points, k+1) of the scaled edge monomials."""
    return xi[:, None] ** np.arange(k + 1)


def mass_matrix_edge(edge: EdgeGeom, k: int, n_gauss: int | None = None) -> np.ndarray:
    q = edge_quadrature(edge, n_gauss or k + 4)
    V = edge_monomials(q.xi, k)
    M = (V * q.weights[:, None]).T @ V
    check_spd(M, "edge mass matrix")
    return M
