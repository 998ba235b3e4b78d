import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcldg.benchmarks import setup
from mcldg.dg_target import nodal_time_derivatives
from mcldg.law import Advection, Burgers, Euler, ShallowWater
from mcldg.limiter import (SemiDiscretization, compute_bounds, decompose_element_fluxes, limit_face_scalar,
                           limit_face_sequential, limit_volume_scalar, limit_volume_sequential, limited_rhs)
from mcldg.low_order import bar_states, low_order_rhs, max_idp_timestep, scatter_pairs
from mcldg.mesh import build_structured_line_mesh
from mcldg.space import DGSpace
from mcldg.time_integration import ssprk_step
from mcldg.verification import (equivalence_suite, idp_suite, limiter_oracle_suite, random_state,
                                small_mesh)

CASES = [
    (Advection((1.0,)), "line"), (Burgers(1), "line"), (Euler(1), "line"),
    (Advection((0.7, -0.4)), "quad"), (Burgers(2), "quad"), (Euler(2), "quad"),
    (ShallowWater(2), "quad"), (ShallowWater(2), "tri"),
]


def _space(kind, p):
    return DGSpace(small_mesh(kind, kind != "tri"), p)


def _report(law, kind, p, rng, U=None):
    space = _space(kind, p)
    if U is None:
        U = random_state(law, (space.E, space.N), rng)
    rhs, rep = limited_rhs(space, law, U, report=True)
    return space, U, rhs, rep


# ---------------------------------------------------------------------------
# Raw fluxes and decomposition
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("law, kind", CASES)
@pytest.mark.parametrize("p", [1, 2, 3])
def test_element_fluxes_sum_to_zero(law, kind, p, rng):
    _, _, _, rep = _report(law, kind, p, rng)
    f = rep.fluxes.f_elem
    assert np.abs(f.sum(axis=1)).max() <= 1e-11 * max(1.0, np.abs(f).max())


@pytest.mark.parametrize("law", [Advection((1.0,)), Burgers(1), Euler(1)])
def test_face_fluxes_vanish_in_1d(law, rng):
    _, _, _, rep = _report(law, "line", 3, rng)
    assert np.all(rep.fluxes.f_face == 0)


@pytest.mark.parametrize("law, kind", CASES)
def test_constant_field_has_no_antidiffusion(law, kind):
    space = _space(kind, 2)
    c = random_state(law, (1,), np.random.default_rng(5))[0]
    U = np.broadcast_to(c, (space.E, space.N, law.m)).copy()
    _, _, _, rep = _report(law, kind, 2, None, U)
    scale = np.abs(c).max()
    assert np.abs(rep.fluxes.f_pair).max() < 1e-11 * scale
    assert np.abs(rep.fluxes.f_face).max() < 1e-11 * scale


@pytest.mark.parametrize("kind, p", [("line", 1), ("line", 4), ("quad", 2), ("quad", 3), ("tri", 2), ("tri", 3)])
def test_decomposition_round_trip(kind, p, rng):
    space = _space(kind, p)
    f = rng.standard_normal((space.E, space.N, 2))
    f -= f.mean(axis=1, keepdims=True)
    U = rng.standard_normal((space.E, space.N, 2))
    d = rng.uniform(size=(space.E, len(space.pair_i)))
    fp, q, v = decompose_element_fluxes(space, f, U, d)
    assert np.abs(scatter_pairs(space, fp, -fp) - f).max() < 1e-10


def test_decomposition_rejects_inconsistent_input(rng):
    space = _space("line", 2)
    f = np.ones((space.E, space.N, 1))
    with pytest.raises(ValueError):
        decompose_element_fluxes(space, f, f, np.ones((space.E, len(space.pair_i))))


def test_face_flux_antisymmetry(rng):
    _, _, _, rep = _report(Euler(2), "quad", 2, rng)
    space = _space("quad", 2)
    ff = rep.fluxes.f_face
    assert np.abs(ff + space.partner_face_values(ff)).max() < 1e-12 * max(1.0, np.abs(ff).max())


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def test_bounds_of_constant_field():
    space = _space("quad", 2)
    law = Burgers(2)
    U = np.full((space.E, space.N, 1), 0.4)
    nb = compute_bounds(space, law, U, bar_states(space, law, U))
    assert np.all(nb.umin == 0.4) and np.all(nb.umax == 0.4)


def test_bounds_are_glued_at_interfaces():
    space = DGSpace(build_structured_line_mesh(2), 1)
    law = Advection((1.0,))
    U = np.array([[[0.0], [1.0]], [[1.0], [1.0]]])
    nb = compute_bounds(space, law, U, bar_states(space, law, U))
    assert nb.umin[1, 0, 0] == 0.0 and nb.umax[1, 0, 0] == 1.0        # borrowed from element 0
    assert nb.umin[0, 1, 0] == 0.0 and nb.umax[0, 1, 0] == 1.0
    assert nb.umin[1, 1, 0] == 1.0 and nb.umax[1, 1, 0] == 1.0        # outflow ghost copies 1


@pytest.mark.parametrize("law, kind", CASES)
def test_bounds_ordered_and_shared(law, kind, rng):
    space, U, _, rep = _report(law, kind, 2, rng)
    nb = rep.bounds
    assert np.all(nb.umin <= nb.umax)
    if nb.phimin is not None:
        assert np.all(nb.phimin <= nb.phimax)
    # co-located face nodes see identical bounds
    fmin = nb.umin[:, space.face_nodes]
    if kind != "tri":
        assert np.array_equal(fmin, space.partner_face_values(fmin))


# ---------------------------------------------------------------------------
# Clip formulas
# ---------------------------------------------------------------------------

def test_scalar_clip_trivial_cases():
    one = np.ones(3)
    assert np.all(limit_volume_scalar(0 * one, one, one, one, 0 * one, one, 0 * one, one) == 0)
    f = np.array([2.0, -3.0, 0.5])
    inf = np.inf * one
    assert np.array_equal(limit_volume_scalar(f, one, one, one, -inf, inf, -inf, inf), f)
    assert np.array_equal(limit_face_scalar(f, one, one, -inf, inf), f)
    # bar state 0.5 (P = 2 d ubar = 1) at the upper bound: the partner sees -f, so both directions stop
    g = limit_face_scalar(np.array([0.3, -0.3]), np.ones(2), np.ones(2), np.zeros(2), 0.5 * np.ones(2))
    assert np.all(g == 0)
    g = limit_face_scalar(np.array([0.3, -0.3]), np.ones(2), np.ones(2), np.zeros(2), np.ones(2))
    assert np.array_equal(g, [0.3, -0.3])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.floats(0.01, 3.0), st.floats(-5, 5))
def test_scalar_volume_clip_properties(vals, d, f):
    ui, uj, a, b, c, e = vals
    umin_i, umax_i = min(a, b, ui, uj), max(a, b, ui, uj)
    umin_j, umax_j = min(c, e, ui, uj), max(c, e, ui, uj)
    ubar = 0.5 * (ui + uj)
    P = 2 * d * ubar
    fs = float(limit_volume_scalar(np.array(f), np.array(d), np.array(P), np.array(P), umin_i, umax_i,
                                   umin_j, umax_j))
    assert fs * f >= 0 and abs(fs) <= abs(f)
    tol = 1e-12 * (1 + abs(f))
    assert umin_i - tol <= ubar + fs / (2 * d) <= umax_i + tol
    assert umin_j - tol <= ubar - fs / (2 * d) <= umax_j + tol


def test_sequential_unlimited_and_low_order_limits(rng):
    n = 50
    d = rng.uniform(0.5, 1.5, n)
    rho = rng.uniform(0.5, 1.5, (n, 2))
    phi = rng.standard_normal((n, 2, 2))
    Pm_ij, Pm_ji = 2 * d * rho[:, 0], 2 * d * rho[:, 1]
    Pp_ij, Pp_ji = Pm_ij[:, None] * phi[:, 0], Pm_ji[:, None] * phi[:, 1]
    fm = 0.1 * rng.standard_normal(n)
    fp = rng.standard_normal((n, 2))
    inf = np.full((n, 2), np.inf)
    out = limit_volume_sequential(fm, fp, d, Pm_ij, Pm_ji, Pp_ij, Pp_ji, -inf, inf, -inf, inf)
    assert np.allclose(out, fp, atol=1e-13)
    phibar = (Pp_ij + Pp_ji) / (Pm_ij + Pm_ji)[:, None]
    out = limit_volume_sequential(fm, fp, d, Pm_ij, Pm_ji, Pp_ij, Pp_ji, phibar, phibar, phibar, phibar)
    # g* = 0: the limited product bar state is rhobar* times phibar
    lhs = Pp_ij + out
    assert np.allclose(lhs, (Pm_ij + fm)[:, None] * phibar, atol=1e-13)
    face = limit_face_sequential(fm, fp, d, Pm_ij, Pp_ij, -inf, inf)
    assert np.allclose(face, fp, atol=1e-13)


def test_limiter_formulas_match_brute_force():
    res = limiter_oracle_suite(2000, np.random.default_rng(11))
    assert res.passed, res.detail


# ---------------------------------------------------------------------------
# Assembled scheme
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("law, kind", CASES)
def test_limited_fluxes_respect_sign_and_bounds(law, kind, rng):
    space, U, _, rep = _report(law, kind, 2, rng)
    bs, af = rep.bar_states, rep.fluxes
    comps = range(law.m) if law.main is None else [law.main]
    for c in comps:
        f, fs = af.f_pair[..., c], rep.f_pair_star[..., c]
        assert np.all(f * fs >= 0) and np.all(np.abs(fs) <= np.abs(f) + 1e-15)
        live = bs.d > 0
        two_d = 2 * np.where(live, bs.d, 1.0)
        ubar_i = (bs.P_ij[..., c] + fs) / two_d
        ubar_j = (bs.P_ji[..., c] - fs) / two_d
        lo_i = np.minimum(rep.bounds.umin[:, space.pair_i, c], bs.P_ij[..., c] / two_d)
        hi_i = np.maximum(rep.bounds.umax[:, space.pair_i, c], bs.P_ij[..., c] / two_d)
        lo_j = np.minimum(rep.bounds.umin[:, space.pair_j, c], bs.P_ji[..., c] / two_d)
        hi_j = np.maximum(rep.bounds.umax[:, space.pair_j, c], bs.P_ji[..., c] / two_d)
        tol = 1e-11 * max(1.0, np.abs(U).max())
        assert np.all(~live | ((lo_i - tol <= ubar_i) & (ubar_i <= hi_i + tol)))
        assert np.all(~live | ((lo_j - tol <= ubar_j) & (ubar_j <= hi_j + tol)))
        ff, ffs = af.f_face[..., c], rep.f_face_star[..., c]
        assert np.all(ff * ffs >= 0) and np.all(np.abs(ffs) <= np.abs(ff) + 1e-15)


@pytest.mark.parametrize("law, kind", [(Euler(2), "quad"), (ShallowWater(2), "quad"), (Burgers(2), "quad")])
def test_limited_face_fluxes_conservative(law, kind, rng):
    space, _, _, rep = _report(law, kind, 2, rng)
    ff = rep.f_face_star
    assert np.abs(ff + space.partner_face_values(ff)).max() < 1e-12 * max(1.0, np.abs(ff).max())


@pytest.mark.parametrize("law, kind", CASES[:7])
def test_mcl_conservation(law, kind, rng):
    _, _, rhs, _ = _report(law, kind, 2, rng)
    assert np.abs(rhs.sum(axis=(0, 1))).max() < 1e-11 * max(1.0, np.abs(rhs).max())


@pytest.mark.parametrize("law, kind", CASES)
def test_scheme_lo_is_low_order_rhs(law, kind, rng):
    space = _space(kind, 2)
    U = random_state(law, (space.E, space.N), rng)
    assert np.allclose(limited_rhs(space, law, U, scheme="lo"), low_order_rhs(space, law, U), atol=1e-13)


@pytest.mark.parametrize("law, kind", CASES)
@pytest.mark.parametrize("p", [1, 3])
def test_unlimited_mcl_equals_target(law, kind, p, rng):
    space = _space(kind, p)
    U = random_state(law, (space.E, space.N), rng)
    a = limited_rhs(space, law, U, limit=False)
    b = space.lumped[:, None, None] * nodal_time_derivatives(space, law, U)
    assert np.abs(a - b).max() < 1e-10 * max(1.0, np.abs(b).max())


def test_equivalence_and_idp_suites():
    assert equivalence_suite(5, np.random.default_rng(1)).passed
    res = idp_suite(8, 20, np.random.default_rng(2))
    assert res.passed, res.detail


def test_rk3_step_of_step_profile_stays_in_unit_interval():
    pr = setup("advect1d_mixed", "mcl", 2, 96)
    U = pr.U0
    assert U.min() >= 0 and U.max() <= 1
    for _ in range(3):
        dt = max_idp_timestep(pr.space, pr.law, U)
        U = ssprk_step(pr.semi, U, 0.0, dt, "ssprk3")
    assert U.min() >= -1e-12 and U.max() <= 1 + 1e-12


def test_semidiscretization_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        SemiDiscretization(_space("line", 1), Burgers(1), "weno")
