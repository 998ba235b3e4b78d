import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcldg.benchmarks import setup
from mcldg.law import Advection, Burgers, Euler, ShallowWater
from mcldg.low_order import (bar_states, dissipation_matrix, low_order_rhs, low_order_rhs_bar_form,
                             max_idp_timestep)
from mcldg.mesh import build_structured_line_mesh
from mcldg.space import DGSpace
from mcldg.verification import random_state, small_mesh

CASES = [
    (Advection((1.0,)), "line"), (Burgers(1), "line"), (Euler(1), "line"),
    (Advection((0.7, -0.4)), "quad"), (Burgers(2), "quad"), (Euler(2), "quad"),
    (ShallowWater(2), "quad"), (ShallowWater(2), "tri"), (Burgers(2), "tri"),
]


def _space(kind, p):
    return DGSpace(small_mesh(kind, kind != "tri"), p)


@pytest.mark.parametrize("law, kind", CASES)
@pytest.mark.parametrize("p", [1, 2])
def test_algebraic_and_bar_state_forms_agree(law, kind, p, rng):
    space = _space(kind, p)
    U = random_state(law, (space.E, space.N), rng)
    a = low_order_rhs(space, law, U)
    b = low_order_rhs_bar_form(space, law, U)
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())


@pytest.mark.parametrize("law, kind", CASES)
def test_dissipation_symmetric_nonnegative(law, kind, rng):
    space = _space(kind, 2)
    U = random_state(law, (space.E, space.N), rng)
    d, lam_ij, lam_ji = dissipation_matrix(space, law, U)
    assert np.all(d >= 0)
    # swapping the roles of i and j reproduces the same coefficient
    c = np.linalg.norm(space.pair_c, axis=-1)
    assert np.allclose(d, np.maximum(c[..., 0] * lam_ij, c[..., 1] * lam_ji))


def test_advection_dissipation_on_one_element():
    space = DGSpace(build_structured_line_mesh(1, interval=(0.0, 0.5), periodic=True), 1)
    law = Advection((2.0,))
    d, _, _ = dissipation_matrix(space, law, np.zeros((1, 2, 1)))
    # p = 1: c_01 = -c_10 = 1/2 in physical units, so d = |c| |a| = 1
    assert np.allclose(d, 1.0)


def test_box_stencil_excludes_diagonal_neighbours(rng):
    space = _space("quad", 2)
    idx = np.asarray(space.ref.index)
    step = np.abs(idx[space.pair_i] - idx[space.pair_j]).sum(axis=-1)
    assert np.all(step == 1)            # diagonal neighbours never enter, so d_ij = 0 there
    d, _, _ = dissipation_matrix(space, Euler(2), random_state(Euler(2), (space.E, space.N), rng))
    assert np.all(d > 0)


@pytest.mark.parametrize("law, kind", CASES)
def test_bar_states_consistent_for_constant_data(law, kind):
    space = _space(kind, 2)
    c = random_state(law, (1,), np.random.default_rng(3))[0]
    U = np.broadcast_to(c, (space.E, space.N, law.m)).copy()
    bs = bar_states(space, law, U)
    vol = bs.d[..., None] > 0
    assert np.allclose(np.where(vol, bs.P_ij, 0), np.where(vol, 2 * bs.d[..., None] * c, 0), atol=1e-12)
    assert np.allclose(np.where(vol, bs.P_ji, 0), np.where(vol, 2 * bs.d[..., None] * c, 0), atol=1e-12)
    assert np.allclose(bs.P_face, 2 * bs.d_face[..., None] * c, atol=1e-12)
    if kind != "tri":
        assert np.abs(low_order_rhs(space, law, U)).max() < 1e-12


def test_advection_face_bar_state_is_upwind(rng):
    space = DGSpace(build_structured_line_mesh(4, periodic=True), 3)
    law = Advection((1.0,))
    U = rng.uniform(size=(space.E, space.N, 1))
    bs = bar_states(space, law, U)
    ubar = bs.P_face / (2 * bs.d_face[..., None])
    assert np.allclose(ubar[:, 1], bs.u_face[:, 1], atol=1e-15)    # outflow face: own value
    assert np.allclose(ubar[:, 0], bs.u_hat[:, 0], atol=1e-15)     # inflow face: neighbour value


@settings(max_examples=300, deadline=None)
@given(ui=st.floats(-2, 2), uj=st.floats(-2, 2))
def test_burgers_bar_state_between_endpoints(ui, uj):
    space = DGSpace(build_structured_line_mesh(1, periodic=True), 1)
    law = Burgers(1)
    U = np.array([[[ui], [uj]]])
    bs = bar_states(space, law, U)
    if bs.d[0, 0] == 0:
        return
    for P in (bs.P_ij, bs.P_ji):
        ubar = P[0, 0, 0] / (2 * bs.d[0, 0])
        assert min(ui, uj) - 1e-14 <= ubar <= max(ui, uj) + 1e-14


@pytest.mark.parametrize("law, kind", [(Euler(2), "quad"), (ShallowWater(2), "quad"), (Burgers(1), "line"),
                                       (Euler(1), "line")])
def test_interfacial_bar_states_shared(law, kind, rng):
    space = _space(kind, 2)
    U = random_state(law, (space.E, space.N), rng)
    bs = bar_states(space, law, U)
    ubar = bs.P_face / (2 * bs.d_face[..., None])
    assert np.abs(ubar - space.partner_face_values(ubar)).max() < 1e-13 * max(1.0, np.abs(ubar).max())


@pytest.mark.parametrize("law, kind", CASES[:7])
def test_low_order_conservation(law, kind, rng):
    space = _space(kind, 2)
    U = random_state(law, (space.E, space.N), rng)
    r = low_order_rhs(space, law, U)
    assert np.abs(r.sum(axis=(0, 1))).max() < 1e-11 * max(1.0, np.abs(r).max())


def test_idp_timestep_scales_with_h(rng):
    law = Advection((1.0,))
    bounds = []
    for n in (8, 16):
        space = DGSpace(build_structured_line_mesh(n, periodic=True), 1)
        bounds.append(max_idp_timestep(space, law, rng.uniform(size=(n, 2, 1))))
    assert bounds[0] / bounds[1] == pytest.approx(2.0, abs=1e-12)


def test_idp_timestep_infinite_for_zero_speed():
    space = DGSpace(build_structured_line_mesh(4, periodic=True), 2)
    assert max_idp_timestep(space, Advection((0.0,)), np.ones((4, 3, 1))) == np.inf


def test_sod_timestep_respects_bound():
    pr = setup("sod", "lo", 1, 256, check_dt=False)
    bound = max_idp_timestep(pr.space, pr.law, pr.U0)
    assert 4e-4 <= bound


@pytest.mark.parametrize("law, kind", [(Advection((1.0,), (0.0, 1.0)), "line"), (Burgers(2), "quad")])
def test_forward_euler_keeps_global_range(law, kind, rng):
    space = _space(kind, 2)
    U = rng.uniform(size=(space.E, space.N, 1))
    lo, hi = U.min(), U.max()
    for _ in range(50):
        dt = max_idp_timestep(space, law, U)
        U = U + dt * low_order_rhs(space, law, U) / space.lumped[:, None, None]
    assert lo - 1e-12 <= U.min() and U.max() <= hi + 1e-12
