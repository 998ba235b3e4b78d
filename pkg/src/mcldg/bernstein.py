"""Bernstein bases on lines, quadrilaterals and triangles, and the element
operators built from them.

Nodes are numbered lexicographically.  On box elements the first reference
coordinate runs fastest, ``i = i_1 + (p+1) i_2``.  On triangles the numbering
follows the multi-index maps of :func:`build_multiindex_maps`, which visit the
lattice row by row in the second barycentric index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional
from fractions import Fraction
from math import comb, factorial

import numpy as np
import scipy.linalg
from scipy.special import roots_jacobi

KINDS = ("line", "quad", "tri")


# ---------------------------------------------------------------------------
# 1D building blocks
# ---------------------------------------------------------------------------

def bernstein_1d(p: int, x) -> np.ndarray:
    """Values of all degree-``p`` Bernstein polynomials on [0, 1].

    Returns an array of shape ``x.shape + (p+1,)``.
    """
    x = np.asarray(x, dtype=float)[..., None]
    i = np.arange(p + 1)
    binom = np.array([comb(p, k) for k in range(p + 1)], dtype=float)
    return binom * (1.0 - x) ** (p - i) * x ** i


def bernstein_1d_deriv(p: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (p + 1,))
    if p == 0:
        return out
    low = bernstein_1d(p - 1, x)
    out[..., 1:] += p * low
    out[..., :-1] -= p * low
    return out


def mass_1d(p: int) -> np.ndarray:
    """Exact reference mass matrix of the 1D Bernstein basis on [0, 1]."""
    return np.array(
        [[comb(p, i) * comb(p, j) / ((2 * p + 1) * comb(2 * p, i + j))
          for j in range(p + 1)] for i in range(p + 1)])


def precond_grad_1d(p: int) -> np.ndarray:
    """Closed-form ``inv(M_C) C`` for the 1D Bernstein basis on [0, 1].

    The matrix is tridiagonal with zero row sums; it is never obtained by
    inverting the (ill-conditioned) mass matrix.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    G = np.zeros((p + 1, p + 1))
    for j in range(1, p + 2):  # 1-based column index
        if j >= 2:
            G[j - 2, j - 1] = p + 2 - j
        G[j - 1, j - 1] = 2 * (j - 1) - p
        if j <= p:
            G[j, j - 1] = -j
    return G


def gauss_legendre_01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def collapsed_triangle_rule(n: int):
    """Conical product rule on the reference triangle, exact for total degree 2n-2."""
    xi, wj = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (1.0 + xi)
    ws = 0.25 * wj
    t, wt = gauss_legendre_01(n)
    S, T = np.meshgrid(s, t, indexing="ij")
    pts = np.stack([S.ravel(), (T * (1.0 - S)).ravel()], axis=-1)
    w = np.outer(ws, wt).ravel()
    return pts, w


# ---------------------------------------------------------------------------
# Triangle multi-indices
# ---------------------------------------------------------------------------

def build_multiindex_maps(p: int):
    """Lexicographic numbering of the barycentric multi-indices of degree ``p``.

    Returns ``(table, alpha_to_index)`` where ``table[i]`` is the multi-index
    of local node ``i`` (0-based) and ``alpha_to_index`` inverts it.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    table = []
    a = [p, 0, 0]
    for j in range(p + 1):
        for _ in range(p - j + 1):
            table.append(tuple(a))
            a[0] -= 1
            a[1] += 1
        a = [p - 1 - j, 0, a[2] + 1]
    table = np.array(table, dtype=int)

    def alpha_to_index(alpha) -> int:
        a1, a2, a3 = (int(v) for v in alpha)
        if min(a1, a2, a3) < 0 or a1 + a2 + a3 != p:
            raise ValueError(f"multi-index {tuple(alpha)} is not of degree {p}")
        return (p + 1) * a3 - a3 * (a3 - 1) // 2 + a2

    return table, alpha_to_index


def _tri_bernstein(p: int, alphas: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    bary = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=-1)
    coef = np.array([factorial(p) / np.prod([factorial(k) for k in a]) for a in alphas])
    vals = np.ones((pts.shape[0], len(alphas)))
    for c in range(3):
        vals *= bary[:, c:c + 1] ** alphas[None, :, c]
    return vals * coef


_GRAD_BARY_REF = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _tri_bernstein_grad(p: int, alphas: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    out = np.zeros((pts.shape[0], len(alphas), 2))
    if p == 0:
        return out
    low_table, low_index = build_multiindex_maps(p - 1) if p > 1 else (np.array([[0, 0, 0]]), None)
    low = _tri_bernstein(p - 1, low_table, pts)
    for n, a in enumerate(alphas):
        for k in range(3):
            if a[k] == 0:
                continue
            b = list(a)
            b[k] -= 1
            col = low_index(b) if p > 1 else 0
            out[:, n, :] += p * low[:, col, None] * _GRAD_BARY_REF[k]
    return out


def precond_grad_simplex(p: int, grad_bary: np.ndarray, volume: float) -> np.ndarray:
    """Preconditioned gradient matrices ``M_L inv(M_C) C`` on a triangle.

    Uses the degree-elevation coefficients of the Bernstein gradient, so no
    mass matrix is inverted.  ``grad_bary`` holds the gradients of the three
    barycentric coordinates (shape ``(3, 2)``); the result has shape
    ``(2, N, N)``.
    """
    table, to_index = build_multiindex_maps(p)
    N = len(table)
    Ct = np.zeros((2, N, N))
    for j, alpha in enumerate(table):
        for k in range(3):
            for l in range(3):
                beta = alpha.copy()
                beta[k] -= 1
                beta[l] += 1
                if beta[l] > p or beta[k] < 0:
                    continue
                i = to_index(beta)
                Ct[:, i, j] += grad_bary[k] * (alpha[l] - (l == k) + 1)
    return (volume / N) * Ct


def _multinomial(n: int, alpha) -> int:
    out = factorial(int(n))
    for k in alpha:
        out //= factorial(int(k))
    return out


def tri_mass(p: int) -> np.ndarray:
    """Exact mass matrix of the degree-``p`` Bernstein basis on the reference triangle."""
    table, _ = build_multiindex_maps(p)

    N = len(table)
    M = np.empty((N, N))
    for i, a in enumerate(table):
        for j, b in enumerate(table):
            # exact integers: the factorials overflow fixed-width types beyond p ~ 10
            M[i, j] = Fraction(_multinomial(p, a) * _multinomial(p, b), _multinomial(2 * p, a + b))
    return M * 0.5 / comb(2 * p + 2, 2)


# ---------------------------------------------------------------------------
# Reference elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """Bernstein node layout, stencils, faces and quadrature of a reference cell."""

    kind: str
    p: int
    dim: int
    N: int
    nodes: np.ndarray           # (N, d) reference coordinates
    index: np.ndarray           # (N, d) tensor indices or (N, 3) multi-indices
    faces: tuple                # per face: local node ids ordered along the face
    face_vertices: np.ndarray   # (nf, 2, d) start/end of each face (1D: point twice)
    face_normals: np.ndarray    # (nf, d) outward unit normals
    pairs: np.ndarray           # (P, 2) stencil pairs i < j
    volume: float
    quad_points: np.ndarray
    quad_weights: np.ndarray
    face_quad_points: np.ndarray  # parameter values on [0, 1]
    face_quad_weights: np.ndarray

    @property
    def nf(self) -> int:
        return len(self.faces)

    @property
    def nfn(self) -> int:
        return len(self.faces[0])

    def eval(self, pts) -> np.ndarray:
        """Basis values at reference points, shape ``(npts, N)``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.kind == "tri":
            return _tri_bernstein(self.p, self.index, pts)
        vals = np.ones((pts.shape[0], self.N))
        for a in range(self.dim):
            b = bernstein_1d(self.p, pts[:, a])
            vals *= b[:, self.index[:, a]]
        return vals

    def grad(self, pts) -> np.ndarray:
        """Reference gradients at points, shape ``(npts, N, d)``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.kind == "tri":
            return _tri_bernstein_grad(self.p, self.index, pts)
        vals = [bernstein_1d(self.p, pts[:, a])[:, self.index[:, a]] for a in range(self.dim)]
        ders = [bernstein_1d_deriv(self.p, pts[:, a])[:, self.index[:, a]] for a in range(self.dim)]
        out = np.empty((pts.shape[0], self.N, self.dim))
        for k in range(self.dim):
            g = ders[k].copy()
            for a in range(self.dim):
                if a != k:
                    g *= vals[a]
            out[:, :, k] = g
        return out

    def face_point(self, k: int, t) -> np.ndarray:
        """Reference coordinates of face parameter values ``t``."""
        a, b = self.face_vertices[k]
        t = np.asarray(t, dtype=float)[..., None]
        return a + t * (b - a)

    def neighbors(self, i: int) -> np.ndarray:
        """Stencil of node ``i`` including ``i`` itself."""
        mask = (self.pairs[:, 0] == i) | (self.pairs[:, 1] == i)
        return np.unique(np.concatenate([[i], self.pairs[mask].ravel()]))


@lru_cache(maxsize=None)
def reference_element(kind: str, p: int) -> ReferenceElement:
    if kind not in KINDS:
        raise ValueError(f"unknown element kind {kind!r}")
    if p < 1:
        raise ValueError("polynomial degree must be >= 1")
    fx, fw = gauss_legendre_01(p + 1)
    if kind == "line":
        index = np.arange(p + 1)[:, None]
        nodes = index / p
        faces = ((0,), (p,))
        fverts = np.array([[[0.0], [0.0]], [[1.0], [1.0]]])
        normals = np.array([[-1.0], [1.0]])
        pairs = np.array([[i, i + 1] for i in range(p)])
        qx, qw = gauss_legendre_01(p + 2)
        qp = qx[:, None]
        vol = 1.0
        fx, fw = np.array([0.0]), np.array([1.0])
    elif kind == "quad":
        n1 = p + 1
        i1, i2 = np.meshgrid(np.arange(n1), np.arange(n1), indexing="xy")
        index = np.stack([i1.ravel(), i2.ravel()], axis=-1)
        nodes = index / p
        lin = lambda a, b: a + n1 * b  # noqa: E731
        r = range(n1)
        faces = (
            tuple(lin(a, 0) for a in r),
            tuple(lin(p, b) for b in r),
            tuple(lin(p - a, p) for a in r),
            tuple(lin(0, p - b) for b in r),
        )
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        fverts = np.stack([corners, np.roll(corners, -1, axis=0)], axis=1)
        normals = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        pairs = []
        for n in range(len(index)):
            for m in range(n + 1, len(index)):
                if np.abs(index[n] - index[m]).sum() == 1:
                    pairs.append((n, m))
        pairs = np.array(pairs)
        gx, gw = gauss_legendre_01(p + 2)
        X, Y = np.meshgrid(gx, gx, indexing="xy")
        qp = np.stack([X.ravel(), Y.ravel()], axis=-1)
        qw = np.outer(gw, gw).ravel()
        vol = 1.0
    else:
        table, to_index = build_multiindex_maps(p)
        index = table
        nodes = table[:, 1:] / p
        faces = (
            tuple(to_index((p - a, a, 0)) for a in range(p + 1)),
            tuple(to_index((0, p - a, a)) for a in range(p + 1)),
            tuple(to_index((a, 0, p - a)) for a in range(p + 1)),
        )
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        fverts = np.stack([corners, np.roll(corners, -1, axis=0)], axis=1)
        normals = np.array([[0.0, -1.0], [1.0, 1.0], [-1.0, 0.0]])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        pairs = []
        for n in range(len(table)):
            for m in range(n + 1, len(table)):
                diff = table[n] - table[m]
                if np.abs(diff).sum() == 2:
                    pairs.append((n, m))
        pairs = np.array(pairs)
        qp, qw = collapsed_triangle_rule(p + 2)
        vol = 0.5
    return ReferenceElement(
        kind=kind, p=p, dim=nodes.shape[1], N=len(nodes), nodes=np.asarray(nodes, float),
        index=index, faces=faces, face_vertices=fverts, face_normals=normals,
        pairs=pairs.reshape(-1, 2), volume=vol, quad_points=qp, quad_weights=qw,
        face_quad_points=fx, face_quad_weights=fw,
    )


def bernstein_eval(ref: ReferenceElement, i: int, point) -> float:
    """Value of basis function ``i`` of ``ref`` at a single reference point."""
    if not 0 <= i < ref.N:
        raise IndexError(f"basis index {i} out of range for N={ref.N}")
    return float(ref.eval(np.asarray(point, dtype=float).reshape(1, ref.dim))[0, i])


# ---------------------------------------------------------------------------
# Reference operators
# ---------------------------------------------------------------------------

def reference_mass(ref: ReferenceElement) -> np.ndarray:
    if ref.kind == "line":
        return mass_1d(ref.p)
    if ref.kind == "quad":
        m = mass_1d(ref.p)
        return np.kron(m, m)
    return tri_mass(ref.p)


def reference_precond_grad(ref: ReferenceElement) -> np.ndarray:
    """``M_L inv(M_C) C_l`` on the reference element, shape ``(d, N, N)``.

    Box elements use the 1D closed form and Kronecker products; triangles use
    :func:`precond_grad_simplex` with the reference barycentric gradients.
    """
    if ref.kind == "tri":
        return precond_grad_simplex(ref.p, _GRAD_BARY_REF, ref.volume)
    G = precond_grad_1d(ref.p)
    n1 = ref.p + 1
    if ref.kind == "line":
        return (G / n1)[None]
    eye = np.eye(n1)
    return np.stack([np.kron(eye, G), np.kron(G, eye)]) / n1 ** 2


def precond_grad_box(ref: ReferenceElement, adj) -> np.ndarray:
    """Physical preconditioned gradients ``C~_k = sum_l adj(J)_{lk} C~hat_l``."""
    R = reference_precond_grad(ref)
    adj = np.asarray(adj, dtype=float).reshape(ref.dim, ref.dim)
    return np.einsum("lk,lij->kij", adj, R)


def dense_precond_grad(ref: ReferenceElement) -> np.ndarray:
    """Oracle ``M_L inv(M_C) C`` by quadrature and an explicit dense inverse."""
    B = ref.eval(ref.quad_points)
    dB = ref.grad(ref.quad_points)
    C = np.einsum("q,qi,qjk->kij", ref.quad_weights, B, dB)
    M = reference_mass(ref)
    ML = ref.volume / ref.N
    return ML * np.einsum("ij,kjl->kil", np.linalg.inv(M), C)


def subcell_cells(ref: ReferenceElement) -> list:
    """Local node ids of the Bezier subcells (lines, quads as 4-cycles, triangles)."""
    p = ref.p
    if ref.kind == "line":
        return [(i, i + 1) for i in range(p)]
    if ref.kind == "quad":
        n1 = p + 1
        return [(a + n1 * b, a + 1 + n1 * b, a + 1 + n1 * (b + 1), a + n1 * (b + 1))
                for b in range(p) for a in range(p)]
    _, idx = build_multiindex_maps(p)
    cells = []
    for a3 in range(p):
        for a2 in range(p - a3):
            a1 = p - a2 - a3
            cells.append((idx((a1, a2, a3)), idx((a1 - 1, a2 + 1, a3)), idx((a1 - 1, a2, a3 + 1))))
            if a2 + a3 < p - 1:
                cells.append((idx((a1 - 1, a2 + 1, a3)), idx((a1 - 2, a2 + 1, a3 + 1)),
                              idx((a1 - 1, a2, a3 + 1))))
    return cells


@dataclass(frozen=True)
class SubcellMatrices:
    mass: np.ndarray        # partially lumped subcell consistent mass M~_C
    lumped: np.ndarray      # diagonal of M~_L
    poisson_inv: np.ndarray  # inverse of (M~_L - M~_C) with last row set to ones


@lru_cache(maxsize=None)
def subcell_mass(ref: ReferenceElement) -> SubcellMatrices:
    """Reference-element subcell mass matrices and the stored Poisson inverse.

    On box elements entries coupling diagonal neighbours are moved onto the
    diagonal so that the induced fluxes vanish exactly where ``d_ij = 0``.
    """
    N, p = ref.N, ref.p
    Mt = np.zeros((N, N))
    cells = subcell_cells(ref)
    if ref.kind == "line":
        h = 1.0 / p
        loc = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    elif ref.kind == "quad":
        h2 = 1.0 / p ** 2
        m1 = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        # counterclockwise cycle -> tensor positions
        pos = [(0, 0), (1, 0), (1, 1), (0, 1)]
        loc = h2 * np.array([[m1[a[0], b[0]] * m1[a[1], b[1]] for b in pos] for a in pos])
    else:
        area = 0.5 / p ** 2
        loc = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    for cell in cells:
        ids = np.array(cell)
        Mt[np.ix_(ids, ids)] += loc
    if ref.kind == "quad":
        allowed = np.zeros((N, N), dtype=bool)
        allowed[ref.pairs[:, 0], ref.pairs[:, 1]] = True
        allowed |= allowed.T
        np.fill_diagonal(allowed, True)
        moved = np.where(allowed, 0.0, Mt)
        Mt = np.where(allowed, Mt, 0.0)
        Mt[np.diag_indices(N)] += moved.sum(axis=1)
    ML = Mt.sum(axis=1)
    A = np.diag(ML) - Mt
    A[-1, :] = 1.0
    Ainv = np.linalg.inv(A)
    return SubcellMatrices(mass=Mt, lumped=ML, poisson_inv=Ainv)


def exact_reference_mass(ref: ReferenceElement) -> np.ndarray:
    """Reference mass matrix from rational arithmetic, rounded to ``longdouble``."""
    p = ref.p
    if ref.kind == "tri":
        table, _ = build_multiindex_maps(p)
        scale = Fraction(1, 2 * comb(2 * p + 2, 2))
        rows = [[scale * _multinomial(p, a) * _multinomial(p, b) / _multinomial(2 * p, a + b)
                 for b in table] for a in table]
    else:
        m1 = [[Fraction(comb(p, i) * comb(p, j), (2 * p + 1) * comb(2 * p, i + j)) for j in range(p + 1)]
              for i in range(p + 1)]
        if ref.kind == "line":
            rows = m1
        else:
            idx = ref.index
            rows = [[m1[a[0]][b[0]] * m1[a[1]][b[1]] for b in idx] for a in idx]
    num = np.array([[np.longdouble(f.numerator) / np.longdouble(f.denominator) for f in r] for r in rows])
    return num.astype(np.longdouble)


def _cholesky_longdouble(M: np.ndarray) -> np.ndarray:
    n = len(M)
    L = np.zeros((n, n), dtype=np.longdouble)
    for j in range(n):
        s = M[j, j] - np.dot(L[j, :j], L[j, :j])
        if not s > 0:
            raise np.linalg.LinAlgError("reference mass matrix is not numerically positive definite")
        L[j, j] = np.sqrt(s)
        L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


# degrees above this solve the mass system in extended precision
HIGH_DEGREE = 8


@dataclass
class ReferenceOperators:
    """Reference tables shared by every element of one kind and degree."""

    ref: ReferenceElement
    mass: np.ndarray            # consistent reference mass
    chol: tuple                 # Cholesky factor of ``mass``
    precond_grad: np.ndarray    # (d, N, N)
    pair_grad: np.ndarray       # (P, 2, d): reference C~ entries (ij) and (ji)
    subcell: SubcellMatrices
    pair_subcell_mass: np.ndarray  # (P,) m~_ij per stencil pair
    quad_basis: np.ndarray      # (nq, N)
    quad_grad: np.ndarray       # (nq, N, d)
    face_basis: np.ndarray      # (nf, nqf, N) traces at face quadrature points
    face_weights_ref: np.ndarray  # (nfn,) int of along-face Bernstein over [0,1]
    mass_ld: Optional[np.ndarray] = None   # exact mass in extended precision (high p)
    chol_ld: Optional[np.ndarray] = None   # its lower Cholesky factor

    def _solve_ld(self, b: np.ndarray) -> np.ndarray:
        L = self.chol_ld
        y = np.empty_like(b)
        for i in range(len(L)):
            y[i] = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
        x = np.empty_like(y)
        for i in reversed(range(len(L))):
            x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
        return x

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``M_hat x = rhs`` along axis 1 of ``rhs`` (shape (E, N, ...)).

        Low degrees use a double-precision Cholesky factor.  Above
        ``HIGH_DEGREE`` the factor is built from the rational mass matrix in
        extended precision (a double-precision factorization breaks down near
        p = 26) and one refinement step follows.
        """
        E, N = rhs.shape[:2]
        flat = np.moveaxis(rhs, 1, 0).reshape(N, -1)
        if self.chol_ld is None:
            x = scipy.linalg.cho_solve(self.chol, flat)
        else:
            b = flat.astype(np.longdouble)
            xl = self._solve_ld(b)
            xl = xl + self._solve_ld(b - self.mass_ld @ xl)
            x = np.asarray(xl, dtype=float)
        return np.moveaxis(x.reshape((N, E) + rhs.shape[2:]), 0, 1)


@lru_cache(maxsize=None)
def reference_operators(kind: str, p: int) -> ReferenceOperators:
    ref = reference_element(kind, p)
    M = reference_mass(ref)
    high = p > HIGH_DEGREE
    M_ld = exact_reference_mass(ref) if high else None
    R = reference_precond_grad(ref)
    i, j = ref.pairs[:, 0], ref.pairs[:, 1]
    pair_grad = np.stack([R[:, i, j].T, R[:, j, i].T], axis=1)
    sub = subcell_mass(ref)
    fb = np.stack([ref.eval(ref.face_point(k, ref.face_quad_points)) for k in range(ref.nf)])
    if ref.dim == 1:
        fw = np.ones(1)
    else:
        fw = np.full(p + 1, 1.0 / (p + 1))
    return ReferenceOperators(
        ref=ref, mass=M, chol=None if high else scipy.linalg.cho_factor(M), precond_grad=R,
        pair_grad=pair_grad, subcell=sub, pair_subcell_mass=sub.mass[i, j],
        quad_basis=ref.eval(ref.quad_points), quad_grad=ref.grad(ref.quad_points),
        face_basis=fb, face_weights_ref=fw, mass_ld=M_ld,
        chol_ld=None if M_ld is None else _cholesky_longdouble(M_ld),
    )


def face_basis_integrals(ref: ReferenceElement, mesh, e: int, k: int) -> dict:
    """``{i: int_{face k} phi_i ds}`` for the nodes of face ``k`` of element ``e``."""
    ops = reference_operators(ref.kind, ref.p)
    meas = mesh.face_measure[e, k]
    return {i: float(meas * w) for i, w in zip(ref.faces[k], ops.face_weights_ref)}
