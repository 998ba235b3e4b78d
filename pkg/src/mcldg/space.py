"""Broken Bernstein space on a mesh: per-element operators and face connectivity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .bernstein import ReferenceOperators, reference_operators
from .mesh import Mesh


@dataclass
class BoundaryFaces:
    """Flat description of boundary faces, used to build ghost states."""

    elem: np.ndarray     # (nb,)
    face: np.ndarray     # (nb,)
    tag: np.ndarray      # (nb,)
    normal: np.ndarray   # (nb, d)


class DGSpace:
    """All geometric and algebraic data needed by the three spatial schemes.

    Arrays indexed by face node use the layout ``(E, nf, nfn)`` where
    ``nfn`` follows the node order of the reference face lists.
    """

    def __init__(self, mesh: Mesh, p: int):
        self.mesh = mesh
        self.p = p
        self.ops: ReferenceOperators = reference_operators(mesh.kind, p)
        ref = self.ref = self.ops.ref
        E, N, d = mesh.n_elements, ref.N, mesh.dim
        self.E, self.N, self.dim = E, N, d
        self.nf, self.nfn = ref.nf, ref.nfn
        self.nqf = len(ref.face_quad_points)

        self.det = mesh.det
        self.adj = mesh.adj
        self.volume = mesh.det * ref.volume
        self.lumped = self.volume / N                         # m_i, same for all i
        # physical preconditioned gradients on stencil pairs: (E, P, 2, d)
        self.pair_i, self.pair_j = ref.pairs[:, 0], ref.pairs[:, 1]
        self.pair_c = np.einsum("elk,pol->epok", mesh.adj, self.ops.pair_grad)
        self.pair_mass = self.ops.pair_subcell_mass           # reference m~_ij
        P = len(self.pair_i)
        self.inc_i = np.zeros((N, P))
        self.inc_i[self.pair_i, np.arange(P)] = 1.0
        self.inc_j = np.zeros((N, P))
        self.inc_j[self.pair_j, np.arange(P)] = 1.0
        self.face_nodes = np.array(ref.faces, dtype=int)     # (nf, nfn)
        self.face_w = mesh.face_measure[:, :, None] * self.ops.face_weights_ref  # (E, nf, nfn)
        self.normal = mesh.normal                             # (E, nf, d)
        self.node_x = mesh.to_physical(ref.nodes)             # (E, N, d)
        fq = np.stack([ref.face_point(k, ref.face_quad_points) for k in range(self.nf)])
        self.face_quad_x = mesh.to_physical(fq.reshape(-1, d)).reshape(E, self.nf, self.nqf, d)
        self.face_node_x = self.node_x[:, self.face_nodes]    # (E, nf, nfn, d)
        self.quad_x = mesh.to_physical(ref.quad_points)       # (E, nq, d)
        self._build_connectivity()

    # ------------------------------------------------------------------
    def _build_connectivity(self):
        mesh, E, nf, nfn, nqf, N = self.mesh, self.E, self.nf, self.nfn, self.nqf, self.N
        nb = mesh.neighbor
        interior = nb >= 0
        self.interior = interior
        e_idx = np.arange(E)[:, None]
        k_idx = np.arange(nf)[None, :]
        e2 = np.where(interior, nb, e_idx)
        k2 = np.where(interior, mesh.neighbor_face, k_idx)
        flip = mesh.flip
        a = np.arange(nfn)
        a2 = np.where(flip[:, :, None], nfn - 1 - a, a)       # (E, nf, nfn)
        partner = (e2[:, :, None] * nf + k2[:, :, None]) * nfn + a2
        self.fnode_partner = np.where(interior[:, :, None], partner, -1)
        q = np.arange(nqf)
        q2 = np.where(flip[:, :, None], nqf - 1 - q, q)
        tpartner = (e2[:, :, None] * nf + k2[:, :, None]) * nqf + q2
        self.trace_partner = np.where(interior[:, :, None], tpartner, -1)
        # element node ids of the partner node, flat into (E*N)
        pnode = e2[:, :, None] * N + self.face_nodes[k2[:, :, None], a2]
        self.fnode_partner_node = np.where(interior[:, :, None], pnode, -1)

        # global node ids via connected components of co-located node pairs
        own = e_idx[:, :, None] * N + self.face_nodes[None, :, :]
        mask = interior[:, :, None] & np.ones(nfn, dtype=bool)
        rows, cols = own[mask], pnode[mask]
        graph = scipy.sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(E * N, E * N))
        ncomp, labels = connected_components(graph, directed=False)
        self.n_global = ncomp
        self.gid = labels.reshape(E, N)
        order = np.argsort(labels, kind="stable")
        self._gorder = order
        sorted_labels = labels[order]
        self._gstarts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])

        bmask = ~interior
        be, bk = np.nonzero(bmask)
        self.boundary = BoundaryFaces(elem=be, face=bk, tag=mesh.tag[be, bk],
                                      normal=mesh.normal[be, bk])
        self.has_boundary = len(be) > 0
        # gather indices with boundary entries pointing at themselves
        self._fn_idx = np.where(self.fnode_partner >= 0, self.fnode_partner,
                                np.arange(E * nf * nfn).reshape(E, nf, nfn))
        self._tr_idx = np.where(self.trace_partner >= 0, self.trace_partner,
                                np.arange(E * nf * nqf).reshape(E, nf, nqf))

    # ------------------------------------------------------------------
    def glue_min(self, local: np.ndarray) -> np.ndarray:
        """Minimum over co-located nodes; ``local`` has shape ``(E, N, ...)``."""
        return self._glue(local, np.minimum)

    def glue_max(self, local: np.ndarray) -> np.ndarray:
        return self._glue(local, np.maximum)

    def _glue(self, local, ufunc):
        E, N = local.shape[:2]
        flat = local.reshape((E * N,) + local.shape[2:])
        red = ufunc.reduceat(flat[self._gorder], self._gstarts, axis=0)
        out = np.empty_like(flat)
        counts = np.diff(np.r_[self._gstarts, E * N])
        out[self._gorder] = np.repeat(red, counts, axis=0)
        return out.reshape(local.shape)

    def face_values(self, U: np.ndarray) -> np.ndarray:
        """Nodal coefficients on faces, ``(E, nf, nfn, m)``."""
        return U[:, self.face_nodes]

    def partner_face_values(self, Uf: np.ndarray) -> np.ndarray:
        """Partner values of face-node arrays; boundary entries are left as own values."""
        return Uf.reshape((-1,) + Uf.shape[3:])[self._fn_idx]

    def traces(self, U: np.ndarray) -> np.ndarray:
        """Polynomial traces at face quadrature points, ``(E, nf, nqf, m)``."""
        fb = self.ops.face_basis
        out = np.matmul(fb.reshape(-1, fb.shape[-1]), U)
        return out.reshape((U.shape[0], self.nf, self.nqf) + U.shape[2:])

    def partner_traces(self, T: np.ndarray) -> np.ndarray:
        return T.reshape((-1,) + T.shape[3:])[self._tr_idx]

    def evaluate(self, U: np.ndarray, xhat: np.ndarray) -> np.ndarray:
        """Values of the DG field at reference points in every element."""
        B = self.ref.eval(xhat)
        return np.einsum("qi,ei...->eq...", B, U)

    def sample(self, fn, m: int) -> np.ndarray:
        """Nodal sampling of ``fn(x) -> (..., m)`` used as Bernstein coefficients."""
        vals = np.asarray(fn(self.node_x), dtype=float)
        return vals.reshape(self.E, self.N, m)

    def integrate(self, values_at_quad: np.ndarray) -> np.ndarray:
        """Element-wise quadrature of values given at ``quad_x``; sums over elements."""
        w = self.ops.ref.quad_weights
        return np.einsum("q,e,eq...->...", w, self.det, values_at_quad)

    def total(self, U: np.ndarray) -> np.ndarray:
        """Integral of the field per component (lumped and consistent agree)."""
        return np.einsum("e,eim->m", self.lumped, U)

    @property
    def n_dofs(self) -> int:
        return self.E * self.N
