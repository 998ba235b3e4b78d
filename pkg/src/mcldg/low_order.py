"""Invariant-domain-preserving low-order scheme and its bar-state form."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dg_target import fill_boundary, scatter_face_nodes
from .law import ConservationLaw
from .space import DGSpace

# wave speeds below this multiple of the reference speed are treated as zero
LAMBDA_EPS = 1e-14


@dataclass
class BarStateBuffer:
    """Low-order coefficients and denominator-free bar states of one stage.

    Volume arrays run over stencil pairs ``(E, P, ...)``: ``P_ij = 2 d_ij ubar_ij``
    and ``P_ji = 2 d_ij ubar_ji``.  Face arrays run over face nodes
    ``(E, nf, nfn, ...)`` with ``P_face = 2 d_ik ubar_ik``.
    """

    d: np.ndarray
    P_ij: np.ndarray
    P_ji: np.ndarray
    lam_ij: np.ndarray
    lam_ji: np.ndarray
    d_face: np.ndarray
    P_face: np.ndarray
    lam_face: np.ndarray
    u_face: np.ndarray       # own face-node coefficients
    u_hat: np.ndarray        # exterior coefficients (partner or ghost)
    flux_face: np.ndarray    # F(u_i) n on faces
    flux_hat: np.ndarray     # F(u_hat) n on faces
    nodal_flux: np.ndarray   # F(u_i), shape (E, N, m, d)


def _pair_values(space: DGSpace, U: np.ndarray):
    return U[:, space.pair_i], U[:, space.pair_j]


def dissipation_matrix(space: DGSpace, law: ConservationLaw, U: np.ndarray):
    """``d_ij = max(|c_ij| lam_ij, |c_ji| lam_ji)`` on stencil pairs.

    Returns ``(d, lam_ij, lam_ji)``, each of shape ``(E, P)``.
    """
    ui, uj = _pair_values(space, U)
    c_ij, c_ji = space.pair_c[:, :, 0], space.pair_c[:, :, 1]
    a_ij = np.linalg.norm(c_ij, axis=-1)
    a_ji = np.linalg.norm(c_ji, axis=-1)
    n_ij = np.divide(c_ij, a_ij[..., None], out=np.zeros_like(c_ij), where=a_ij[..., None] > 0)
    n_ji = np.divide(c_ji, a_ji[..., None], out=np.zeros_like(c_ji), where=a_ji[..., None] > 0)
    # pairs with one vanishing direction borrow the partner's
    n_ij = np.where(a_ij[..., None] > 0, n_ij, -n_ji)
    n_ji = np.where(a_ji[..., None] > 0, n_ji, -n_ij)
    lam_ij = law.max_wave_speed(ui, uj, n_ij)
    lam_ji = law.max_wave_speed(uj, ui, n_ji)
    d = np.maximum(a_ij * lam_ij, a_ji * lam_ji)
    return d, lam_ij, lam_ji


def bar_states(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
               inflow: Optional[Callable] = None) -> BarStateBuffer:
    """Dissipation coefficients and bar-state products for one stage."""
    d, lam_ij, lam_ji = dissipation_matrix(space, law, U)
    FN = law.flux(U)                                        # (E, N, m, d)
    ui, uj = _pair_values(space, U)
    dF = FN[:, space.pair_j] - FN[:, space.pair_i]
    c_ij, c_ji = space.pair_c[:, :, 0], space.pair_c[:, :, 1]
    s = d[..., None] * (ui + uj)
    P_ij = s - np.matmul(dF, c_ij[..., None])[..., 0]
    P_ji = s + np.matmul(dF, c_ji[..., None])[..., 0]

    uf = space.face_values(U)
    uh = fill_boundary(space, law, uf, space.partner_face_values(uf), space.face_node_x, t, inflow)
    n = space.normal[:, :, None, :]
    lam_f = law.max_wave_speed(uf, uh, n)
    ref_speed = max(float(np.max(lam_f, initial=0.0)), 1.0)
    lam_f = np.where(lam_f < LAMBDA_EPS * ref_speed, 0.0, lam_f)
    w = space.face_w
    d_f = 0.5 * lam_f * w
    Fo = law.flux_normal(uf, n)
    Fh = law.flux_normal(uh, n)
    P_f = d_f[..., None] * (uf + uh) - 0.5 * w[..., None] * (Fh - Fo)
    P_f = np.where(d_f[..., None] > 0, P_f, 0.0)
    return BarStateBuffer(d=d, P_ij=P_ij, P_ji=P_ji, lam_ij=lam_ij, lam_ji=lam_ji,
                          d_face=d_f, P_face=P_f, lam_face=lam_f, u_face=uf, u_hat=uh,
                          flux_face=Fo, flux_hat=Fh, nodal_flux=FN)


def scatter_pairs(space: DGSpace, to_i: np.ndarray, to_j: np.ndarray) -> np.ndarray:
    """Sum per-pair contributions into their two end nodes."""
    if to_i.ndim == 2:
        return (space.inc_i @ to_i[..., None] + space.inc_j @ to_j[..., None])[..., 0]
    return space.inc_i @ to_i + space.inc_j @ to_j


def low_order_volume(space: DGSpace, U: np.ndarray, bs: BarStateBuffer) -> np.ndarray:
    """``sum_j 2 d_ij (ubar_ij - u_i)`` per node."""
    ui, uj = _pair_values(space, U)
    two_d = 2.0 * bs.d[..., None]
    return scatter_pairs(space, bs.P_ij - two_d * ui, bs.P_ji - two_d * uj)


def low_order_face(space: DGSpace, bs: BarStateBuffer) -> np.ndarray:
    """Per face node: ``(w/2) [(F_i - F_hat) n + lam (u_hat - u_i)]``."""
    w = space.face_w[..., None]
    return 0.5 * w * ((bs.flux_face - bs.flux_hat) + bs.lam_face[..., None] * (bs.u_hat - bs.u_face))


def low_order_rhs(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
                  inflow: Optional[Callable] = None, bs: Optional[BarStateBuffer] = None) -> np.ndarray:
    """``m_i du_i/dt`` of the low-order scheme in its algebraic form."""
    if bs is None:
        bs = bar_states(space, law, U, t, inflow)
    ui, uj = _pair_values(space, U)
    c_ij, c_ji = space.pair_c[:, :, 0], space.pair_c[:, :, 1]
    FN = bs.nodal_flux
    dF = FN[:, space.pair_j] - FN[:, space.pair_i]
    diff = bs.d[..., None] * (uj - ui)
    to_i = diff - np.matmul(dF, c_ij[..., None])[..., 0]
    to_j = -diff + np.matmul(dF, c_ji[..., None])[..., 0]
    return scatter_pairs(space, to_i, to_j) + scatter_face_nodes(space, low_order_face(space, bs))


def low_order_rhs_bar_form(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
                           inflow: Optional[Callable] = None,
                           bs: Optional[BarStateBuffer] = None) -> np.ndarray:
    """The same right-hand side written through the bar states."""
    if bs is None:
        bs = bar_states(space, law, U, t, inflow)
    face = bs.P_face - 2.0 * bs.d_face[..., None] * bs.u_face
    return low_order_volume(space, U, bs) + scatter_face_nodes(space, face)


def node_dissipation(space: DGSpace, bs: BarStateBuffer) -> np.ndarray:
    """``sum_j d_ij + sum_k d_ik`` per node, shape ``(E, N)``."""
    return scatter_pairs(space, bs.d, bs.d) + scatter_face_nodes(space, bs.d_face)


def max_idp_timestep(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
                     inflow: Optional[Callable] = None,
                     bs: Optional[BarStateBuffer] = None) -> float:
    """Largest forward Euler step keeping every update a convex combination.

    Returns ``inf`` when no node carries dissipation.
    """
    if bs is None:
        bs = bar_states(space, law, U, t, inflow)
    total = node_dissipation(space, bs)
    m = np.broadcast_to(space.lumped[:, None], total.shape)
    with np.errstate(divide="ignore"):
        ratio = np.where(total > 0, m / (2.0 * total), np.inf)
    return float(ratio.min())
