"""Monolithic convex limiting of antidiffusive element and face fluxes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dg_target
from .dg_target import scatter_face_nodes
from .law import ConservationLaw, InvariantViolation
from .low_order import BarStateBuffer, bar_states, low_order_face, low_order_volume, scatter_pairs
from .space import DGSpace

SCHEMES = ("dg", "lo", "mcl")
# relative threshold below which limited main-variable bar states count as zero
DEGENERATE = 1e-12


@dataclass
class AntidiffusiveFluxes:
    f_elem: np.ndarray        # (E, N, m)
    f_face: np.ndarray        # (E, nf, nfn, m)
    f_pair: np.ndarray        # (E, P, m)
    q: np.ndarray             # (E, N, m)
    v: np.ndarray             # (E, N, m)
    udot: np.ndarray          # (E, N, m)


@dataclass
class NodalBounds:
    umin: np.ndarray          # (E, N, m), glued over co-located nodes
    umax: np.ndarray
    phimin: Optional[np.ndarray] = None       # (E, N, n_products)
    phimax: Optional[np.ndarray] = None
    face_phimin: Optional[np.ndarray] = None  # (E, nf, n_products)
    face_phimax: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Raw fluxes
# ---------------------------------------------------------------------------

def _left_apply(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``A @ x`` along axis 1 of ``x``."""
    if x.ndim == 2:
        return x @ A.T
    return np.matmul(A, x)


def consistent_mass_apply(space: DGSpace, x: np.ndarray) -> np.ndarray:
    return _left_apply(space.ops.mass, x) * space.det.reshape((-1,) + (1,) * (x.ndim - 1))


def raw_element_fluxes(space: DGSpace, U: np.ndarray, udot: np.ndarray, volume: np.ndarray,
                       bs: BarStateBuffer) -> np.ndarray:
    """``f_i = sum_j (m_i delta_ij - m_ij) udot_j - low_i + vol_i - sum_k w_ik F_i n``.

    ``low_i`` is the low-order volume term.  The mass difference is applied
    explicitly, so the fluxes sum to zero however accurate ``udot`` is.
    """
    ml = space.lumped[:, None, None] * udot
    mc = consistent_mass_apply(space, udot)
    wFn = space.face_w[..., None] * bs.flux_face
    return (ml - mc) - low_order_volume(space, U, bs) + volume - scatter_face_nodes(space, wFn)


def raw_face_fluxes(space: DGSpace, law: ConservationLaw, bs: BarStateBuffer,
                    face_integrals: np.ndarray) -> np.ndarray:
    """``f_ik = w_ik H(u_i, u_hat_i) - int phi_i H(U_h, U_h^+) ds``; zero in 1D."""
    if space.dim == 1:
        return np.zeros_like(face_integrals)
    H = 0.5 * (bs.flux_face + bs.flux_hat) + 0.5 * bs.lam_face[..., None] * (bs.u_face - bs.u_hat)
    return space.face_w[..., None] * H - face_integrals


def decompose_element_fluxes(space: DGSpace, f: np.ndarray, U: np.ndarray, d: np.ndarray,
                             check: bool = True):
    """Split ``f_i`` into antisymmetric pair fluxes on the compact stencil.

    Returns ``(f_pair, q, v)`` with ``f_ij = m~_ij (v_i - v_j) + d_ij (u_i - u_j)``.
    """
    ui, uj = U[:, space.pair_i], U[:, space.pair_j]
    du = d[..., None] * (ui - uj)
    q = f - scatter_pairs(space, du, -du)
    if check:
        # d |u| has flux units and keeps the check meaningful when f vanishes
        scale = (np.abs(f).max(initial=0.0) + np.abs(q).max(initial=0.0)
                 + np.abs(d).max(initial=0.0) * np.abs(U).max(initial=0.0))
        defect = np.abs(q.sum(axis=1)).max(initial=0.0)
        if defect > 1e-9 * space.N * max(scale, np.finfo(float).tiny):
            raise ValueError(f"element fluxes do not sum to zero (defect {defect:.3e})")
    Ainv = space.ops.subcell.poisson_inv
    v = _left_apply(Ainv[:, :-1], q[:, :-1])
    mt = space.pair_mass[None, :, None]
    f_pair = mt * (v[:, space.pair_i] - v[:, space.pair_j]) + du
    return f_pair, q, v


def antidiffusive_fluxes(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float,
                         inflow: Optional[Callable], bs: BarStateBuffer):
    """All raw fluxes of one stage plus the target time derivative."""
    vol = dg_target.volume_term(space, law, U)
    IH = dg_target.face_flux_integrals(space, law, U, t, inflow)
    r = vol - scatter_face_nodes(space, IH)
    udot = dg_target.solve_consistent_mass(space, r)
    f_elem = raw_element_fluxes(space, U, udot, vol, bs)
    f_face = raw_face_fluxes(space, law, bs, IH)
    f_pair, q, v = decompose_element_fluxes(space, f_elem, U, bs.d)
    return AntidiffusiveFluxes(f_elem, f_face, f_pair, q, v, udot)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def _stencil_table(space: DGSpace) -> np.ndarray:
    tab = getattr(space, "_stencil_table", None)
    if tab is None:
        ref = space.ref
        rows = [ref.neighbors(i) for i in range(ref.N)]
        width = max(len(r) for r in rows)
        tab = np.array([np.r_[r, np.full(width - len(r), i)] for i, r in enumerate(rows)])
        space._stencil_table = tab
    return tab


def _scatter_extreme(space: DGSpace, base: np.ndarray, pair_vals, face_vals, ufunc):
    """Fold per-pair values (into both ends) and per-face-node values into nodes."""
    out = base.copy()
    if pair_vals is not None:
        for p, (i, j) in enumerate(space.ref.pairs):
            out[:, i] = ufunc(out[:, i], pair_vals[:, p])
            out[:, j] = ufunc(out[:, j], pair_vals[:, p])
    if face_vals is not None:
        for k in range(space.nf):
            idx = space.face_nodes[k]
            out[:, idx] = ufunc(out[:, idx], face_vals[:, k])
    return out


def scalar_bounds(space: DGSpace, U: np.ndarray, u_hat: Optional[np.ndarray] = None):
    """Min/max over the stencil union of every physical node, per component.

    Exterior values ``u_hat`` on faces (partner or ghost coefficients) are
    included, which only matters on the domain boundary.
    """
    vals = U[:, _stencil_table(space)]                  # (E, N, w, m)
    lo, hi = vals.min(axis=2), vals.max(axis=2)
    if u_hat is not None:
        lo = _scatter_extreme(space, lo, None, u_hat, np.minimum)
        hi = _scatter_extreme(space, hi, None, u_hat, np.maximum)
    return space.glue_min(lo), space.glue_max(hi)


def specific_bar_states(law: ConservationLaw, bs: BarStateBuffer):
    """Volume and face bar states of the specific variables.

    Returns ``(phi_pair, phi_face)``; entries with zero dissipation are NaN.
    """
    r, prod = law.main, list(law.products)
    num = bs.P_ij[..., prod] + bs.P_ji[..., prod]
    den = (bs.P_ij[..., r] + bs.P_ji[..., r])[..., None]
    ok = (bs.d[..., None] > 0) & (den > 0)
    phi_pair = np.divide(num, den, out=np.full(num.shape, np.nan), where=ok)
    den_f = bs.P_face[..., r][..., None]
    ok_f = (bs.d_face[..., None] > 0) & (den_f > 0)
    phi_face = np.divide(bs.P_face[..., prod], den_f, out=np.full(bs.P_face[..., prod].shape, np.nan),
                         where=ok_f)
    return phi_pair, phi_face


def compute_bounds(space: DGSpace, law: ConservationLaw, U: np.ndarray, bs: BarStateBuffer) -> NodalBounds:
    """Bounds for the scalar limiter and, for systems, the specific variables."""
    umin, umax = scalar_bounds(space, U, bs.u_hat)
    nb = NodalBounds(umin=umin, umax=umax)
    if law.main is None:
        return nb
    prod = list(law.products)
    ratio = U[..., prod] / U[..., law.main][..., None]
    phi_pair, phi_face = specific_bar_states(law, bs)
    lo = _scatter_extreme(space, ratio, np.where(np.isnan(phi_pair), np.inf, phi_pair),
                          np.where(np.isnan(phi_face), np.inf, phi_face), np.minimum)
    hi = _scatter_extreme(space, ratio, np.where(np.isnan(phi_pair), -np.inf, phi_pair),
                          np.where(np.isnan(phi_face), -np.inf, phi_face), np.maximum)
    nb.phimin, nb.phimax = space.glue_min(lo), space.glue_max(hi)
    nb.face_phimin = np.nanmin(np.where(np.isnan(phi_face), np.inf, phi_face), axis=2)
    nb.face_phimax = np.nanmax(np.where(np.isnan(phi_face), -np.inf, phi_face), axis=2)
    return nb


# ---------------------------------------------------------------------------
# Clip formulas
# ---------------------------------------------------------------------------

def _gap(two_d, bound, P, sign):
    """``sign * (two_d * bound - P)`` clamped at zero; unbounded gives +inf.

    ``fmax`` maps the NaN of ``0 * inf`` (no dissipation) to zero.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        return np.fmax(sign * (two_d * bound - P), 0.0)


def limit_volume_scalar(f, d, P_ij, P_ji, umin_i, umax_i, umin_j, umax_j):
    """Monolithically limited pair fluxes, denominator-free.

    For ``f >= 0``: ``min(f, 2d u_i^max - P_ij, P_ji - 2d u_j^min)``; mirrored
    for ``f < 0``.  Gaps are clamped at zero, so bounds that exclude the
    bar state freeze the flux instead of reversing it.
    """
    two_d = 2.0 * d
    up = np.minimum(_gap(two_d, umax_i, P_ij, 1.0), _gap(two_d, umin_j, P_ji, -1.0))
    down = np.minimum(_gap(two_d, umin_i, P_ij, -1.0), _gap(two_d, umax_j, P_ji, 1.0))
    out = np.where(f >= 0, np.minimum(f, up), np.maximum(f, -down))
    return np.where(d > 0, out, 0.0)


def limit_face_scalar(f, d, P, umin, umax):
    """Limited interfacial fluxes; the symmetric cap keeps both sides consistent."""
    two_d = 2.0 * d
    cap = np.minimum(_gap(two_d, umax, P, 1.0), _gap(two_d, umin, P, -1.0))
    out = np.where(f >= 0, np.minimum(f, cap), np.maximum(f, -cap))
    return np.where(d > 0, out, 0.0)


def _g_caps(Pstar, phi_hi, phi_lo, phibar, scale):
    """``Pstar (phi_hi - phibar) >= 0`` and ``Pstar (phibar - phi_lo) >= 0``.

    Both caps vanish where ``Pstar`` is degenerate.
    """
    Pl = np.where(Pstar > DEGENERATE * scale, Pstar, 0.0)
    with np.errstate(invalid="ignore"):
        return np.fmax(Pl * (phi_hi - phibar), 0.0), np.fmax(Pl * (phibar - phi_lo), 0.0)


def _positive_main(Pstar, scale, where):
    bad = (Pstar < -DEGENERATE * scale) & where
    if np.any(bad):
        raise InvariantViolation(f"limited main-variable bar state negative (min {Pstar[bad].min():.3e})",
                                 "main")


def limit_volume_sequential(f_main_star, f_prod, d, P_main_ij, P_main_ji, P_prod_ij, P_prod_ji,
                            phimin_i, phimax_i, phimin_j, phimax_j):
    """Product-rule splitting and clipping of the specific-variable remainders.

    Main-variable arrays have shape ``(E, P)``; product arrays ``(E, P, n)``.
    """
    Pi = (P_main_ij + f_main_star)[..., None]
    Pj = (P_main_ji - f_main_star)[..., None]
    live = d > 0
    scale = np.abs(P_main_ij).max(initial=0.0) + np.abs(P_main_ji).max(initial=0.0)
    _positive_main(Pi[..., 0], scale, live)
    _positive_main(Pj[..., 0], scale, live)
    den = (P_main_ij + P_main_ji)[..., None]
    ok = live[..., None] & (den > 0)
    phibar = np.divide(P_prod_ij + P_prod_ji, den, out=np.zeros(P_prod_ij.shape), where=ok)
    base = Pi * phibar - P_prod_ij
    g = f_prod - base
    up_i, down_i = _g_caps(Pi, phimax_i, phimin_i, phibar, scale)
    up_j, down_j = _g_caps(Pj, phimax_j, phimin_j, phibar, scale)
    gstar = np.where(g >= 0, np.minimum(g, np.minimum(up_i, down_j)),
                     np.maximum(g, -np.minimum(down_i, up_j)))
    return np.where(ok, base + gstar, 0.0)


def limit_face_sequential(f_main_star, f_prod, d, P_main, P_prod, phimin, phimax):
    """Interfacial counterpart; the partner side sees ``2 P - Pstar``."""
    Pstar = (P_main + f_main_star)[..., None]
    Ppart = (P_main - f_main_star)[..., None]
    live = d > 0
    scale = np.abs(P_main).max(initial=0.0)
    _positive_main(Pstar[..., 0], scale, live)
    _positive_main(Ppart[..., 0], scale, live)
    den = P_main[..., None]
    ok = live[..., None] & (den > 0)
    phibar = np.divide(P_prod, den, out=np.zeros(P_prod.shape), where=ok)
    base = Pstar * phibar - P_prod
    g = f_prod - base
    up, down = _g_caps(Pstar, phimax, phimin, phibar, scale)
    up_p, down_p = _g_caps(Ppart, phimax, phimin, phibar, scale)
    gstar = np.where(g >= 0, np.minimum(g, np.minimum(up, down_p)),
                     np.maximum(g, -np.minimum(down, up_p)))
    return np.where(ok, base + gstar, 0.0)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def limit_fluxes(space: DGSpace, law: ConservationLaw, U: np.ndarray, bs: BarStateBuffer,
                 af: AntidiffusiveFluxes, bounds: NodalBounds):
    """Limited pair and face fluxes ``(f*_ij, f*_ik)``."""
    pi, pj = space.pair_i, space.pair_j
    d, df = bs.d, bs.d_face
    fp, ff = af.f_pair, af.f_face
    fp_star = np.zeros_like(fp)
    ff_star = np.zeros_like(ff)
    fb_min = bounds.umin[:, space.face_nodes]
    fb_max = bounds.umax[:, space.face_nodes]
    scalar_comps = range(law.m) if law.main is None else [law.main]
    for c in scalar_comps:
        fp_star[..., c] = limit_volume_scalar(
            fp[..., c], d, bs.P_ij[..., c], bs.P_ji[..., c],
            bounds.umin[:, pi, c], bounds.umax[:, pi, c], bounds.umin[:, pj, c], bounds.umax[:, pj, c])
        ff_star[..., c] = limit_face_scalar(ff[..., c], df, bs.P_face[..., c],
                                            fb_min[..., c], fb_max[..., c])
    if law.main is not None:
        r, prod = law.main, list(law.products)
        fp_star[..., prod] = limit_volume_sequential(
            fp_star[..., r], fp[..., prod], d, bs.P_ij[..., r], bs.P_ji[..., r],
            bs.P_ij[..., prod], bs.P_ji[..., prod],
            bounds.phimin[:, pi], bounds.phimax[:, pi], bounds.phimin[:, pj], bounds.phimax[:, pj])
        ff_star[..., prod] = limit_face_sequential(
            ff_star[..., r], ff[..., prod], df, bs.P_face[..., r], bs.P_face[..., prod],
            bounds.face_phimin[:, :, None], bounds.face_phimax[:, :, None])
    return fp_star, ff_star


@dataclass
class StageReport:
    """Intermediate quantities of one right-hand-side evaluation."""

    bar_states: BarStateBuffer
    fluxes: Optional[AntidiffusiveFluxes] = None
    bounds: Optional[NodalBounds] = None
    f_pair_star: Optional[np.ndarray] = None
    f_face_star: Optional[np.ndarray] = None


def limited_rhs(space: DGSpace, law: ConservationLaw, U: np.ndarray, t: float = 0.0,
                scheme: str = "mcl", inflow: Optional[Callable] = None, limit: bool = True,
                report: bool = False):
    """``m_i du_i/dt`` for ``scheme`` in ``{"dg", "lo", "mcl"}``.

    With ``limit=False`` the raw fluxes are added unchanged, which reproduces
    the target scheme with its mass matrix lumped.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "dg":
        udot = dg_target.nodal_time_derivatives(space, law, U, t, inflow)
        out = space.lumped[:, None, None] * udot
        return (out, None) if report else out
    bs = bar_states(space, law, U, t, inflow)
    rhs = low_order_volume(space, U, bs) + scatter_face_nodes(space, low_order_face(space, bs))
    rep = StageReport(bar_states=bs)
    if scheme == "mcl":
        af = antidiffusive_fluxes(space, law, U, t, inflow, bs)
        rep.fluxes = af
        if limit:
            rep.bounds = compute_bounds(space, law, U, bs)
            fp, ff = limit_fluxes(space, law, U, bs, af, rep.bounds)
        else:
            fp, ff = af.f_pair, af.f_face
        rep.f_pair_star, rep.f_face_star = fp, ff
        rhs = rhs + scatter_pairs(space, fp, -fp) + scatter_face_nodes(space, ff)
    return (rhs, rep) if report else rhs


class SemiDiscretization:
    """Callable ``du/dt = L(U, t)`` bundling space, law, scheme and boundary data."""

    def __init__(self, space: DGSpace, law: ConservationLaw, scheme: str = "mcl",
                 inflow: Optional[Callable] = None, limit: bool = True):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        self.space, self.law, self.scheme = space, law, scheme
        self.inflow, self.limit = inflow, limit
        self.evaluations = 0

    def mass_rhs(self, U, t=0.0):
        return limited_rhs(self.space, self.law, U, t, self.scheme, self.inflow, self.limit)

    def __call__(self, U, t=0.0):
        self.evaluations += 1
        if self.scheme == "dg":
            return dg_target.nodal_time_derivatives(self.space, self.law, U, t, self.inflow)
        return self.mass_rhs(U, t) / self.space.lumped[:, None, None]

    def max_timestep(self, U, t=0.0) -> float:
        from .low_order import max_idp_timestep
        return max_idp_timestep(self.space, self.law, U, t, self.inflow)
