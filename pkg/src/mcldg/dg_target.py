"""Unlimited high-order DG target scheme with local Lax-Friedrichs fluxes."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .law import ConservationLaw, boundary_ghost_state
from .space import DGSpace


def fill_boundary(space: DGSpace, law: ConservationLaw, own: np.ndarray, partner: np.ndarray,
                  x: np.ndarray, t: float, inflow: Optional[Callable]) -> np.ndarray:
    """Replace exterior values on boundary faces by ghost states.

    ``own`` and ``partner`` have shape ``(E, nf, npts, m)``; ``x`` holds the
    matching physical points ``(E, nf, npts, d)``.
    """
    if not space.has_boundary:
        return partner
    b = space.boundary
    inner = own[b.elem, b.face]
    npts = inner.shape[1]
    tag = np.repeat(b.tag[:, None], npts, axis=1)
    n = np.repeat(b.normal[:, None, :], npts, axis=1)
    partner = partner.copy()
    partner[b.elem, b.face] = boundary_ghost_state(law, tag, inner, n, x[b.elem, b.face], t, inflow)
    return partner


def volume_term(space: DGSpace, law: ConservationLaw, U: np.ndarray) -> np.ndarray:
    """``int_K F(U_h) : grad(phi_i) dx`` by quadrature, shape ``(E, N, m)``."""
    ops = space.ops
    UQ = np.matmul(ops.quad_basis, U)                        # (E, nq, m)
    FQ = law.flux(UQ)                                        # (E, nq, m, d)
    FA = np.matmul(FQ, space.adj.transpose(0, 2, 1)[:, None])  # F adj^T per point
    E, nq, m, d = FA.shape
    W = _weighted_grad(space)                                # (nq * d, N)
    return np.matmul(FA.transpose(0, 2, 1, 3).reshape(E, m, nq * d), W).transpose(0, 2, 1)


def _weighted_grad(space: DGSpace) -> np.ndarray:
    W = getattr(space, "_weighted_grad", None)
    if W is None:
        G = space.ops.quad_grad                              # (nq, N, d)
        W = (space.ref.quad_weights[:, None, None] * G).transpose(0, 2, 1).reshape(-1, G.shape[1])
        space._weighted_grad = W
    return W


def face_flux_integrals(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float,
                        inflow: Optional[Callable] = None) -> np.ndarray:
    """``int_{Gamma_k} phi_i H(U_h, U_h^+; n) ds`` for face nodes: ``(E, nf, nfn, m)``."""
    T = space.traces(U)
    TP = fill_boundary(space, law, T, space.partner_traces(T), space.face_quad_x, t, inflow)
    H = law.lax_friedrichs(T, TP, space.normal[:, :, None, :])
    fbw = _weighted_face_basis(space)                        # (nf, nfn, nqf)
    return np.matmul(fbw, H) * space.mesh.face_measure[:, :, None, None]


def _weighted_face_basis(space: DGSpace) -> np.ndarray:
    fbw = getattr(space, "_weighted_face_basis", None)
    if fbw is None:
        fb = face_basis_on_face_nodes(space)
        fbw = (fb * space.ref.face_quad_weights[None, :, None]).transpose(0, 2, 1).copy()
        space._weighted_face_basis = fbw
    return fbw


def face_basis_on_face_nodes(space: DGSpace) -> np.ndarray:
    fb = space.ops.face_basis
    return np.stack([fb[k][:, space.face_nodes[k]] for k in range(space.nf)])


def scatter_face_nodes(space: DGSpace, values: np.ndarray) -> np.ndarray:
    """Sum per-face-node values ``(E, nf, nfn, ...)`` into element nodes."""
    out = np.zeros((space.E, space.N) + values.shape[3:])
    for k in range(space.nf):
        out[:, space.face_nodes[k]] += values[:, k]
    return out


def target_rhs(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
               inflow: Optional[Callable] = None) -> np.ndarray:
    """Weak residual ``int phi_i dU/dt`` of the target scheme, shape ``(E, N, m)``."""
    vol = volume_term(space, law, U)
    return vol - scatter_face_nodes(space, face_flux_integrals(space, law, U, t, inflow))


def nodal_time_derivatives(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
                           inflow: Optional[Callable] = None, residual: Optional[np.ndarray] = None):
    """Solve ``M_C u_dot = r`` element by element."""
    r = target_rhs(space, law, U, t, inflow) if residual is None else residual
    return solve_consistent_mass(space, r)


def solve_consistent_mass(space: DGSpace, r: np.ndarray) -> np.ndarray:
    x = space.ops.solve_mass(r)
    return x / space.det.reshape((-1,) + (1,) * (r.ndim - 1))
