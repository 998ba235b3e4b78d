import math

import numpy as np
import pytest

from mcldg.benchmarks import (CHANNEL_INFLOW, DMR_LEFT, DMR_RIGHT, PRESETS, advect1d_mixed_initial,
                              build_mesh, check_timestep, elements_per_direction, eoc,
                              generate_channel_mesh, get_preset, l1_error, project_initial, setup)
from mcldg.law import Euler
from mcldg.mesh import build_structured_line_mesh, read_unstructured_tri_mesh
from mcldg.space import DGSpace

NAMES = ["advect1d_mixed", "advect1d_smooth", "burgers1d", "burgers2d", "sod", "double_mach",
         "dam_break", "channel"]


def test_registry_names():
    assert sorted(PRESETS) == sorted(NAMES)
    with pytest.raises(KeyError, match="available"):
        get_preset("lax")


def test_eoc_examples():
    assert eoc([1e-2, 2.5e-3], [1, 2]) == [pytest.approx(2.0)]
    assert eoc([1.27e-2, 6.43e-3], [24, 32])[0] == pytest.approx(2.366, abs=5e-3)
    assert eoc([2.59e-4, 1.01e-4], [128, 192])[0] == pytest.approx(2.32, abs=1e-2)
    assert math.isnan(eoc([0.0, 1e-3], [1, 2])[0])
    with pytest.raises(ValueError):
        eoc([1.0], [1])


def test_preset_parameters():
    sod = get_preset("sod")
    law = sod.make_law()
    assert isinstance(law, Euler) and law.gamma == 1.4
    assert (sod.dt, sod.t_final, sod.default_res) == (4e-4, 0.231, 256)
    U = sod.initial(np.array([[0.25], [0.75]]))
    assert np.allclose(U, [[1.0, 0.0, 2.5], [0.125, 0.0, 0.25]])
    assert law.pressure(U[1]) == pytest.approx(0.1)
    assert np.allclose(DMR_LEFT, [8.0, 57.157676649772960, -33.0, 563.5])
    assert law.pressure(DMR_RIGHT[[0, 1, 3]]) == pytest.approx(1.0)
    assert get_preset("dam_break").make_law().g == 9.81
    assert get_preset("channel").make_law().g == 0.16
    assert np.array_equal(CHANNEL_INFLOW, [1.0, 1.0, 0.0])
    assert get_preset("double_mach").long


def test_resolution_conventions():
    assert elements_per_direction(get_preset("advect1d_smooth"), 1, 24) == (48,)
    assert elements_per_direction(get_preset("dam_break"), 1, 256) == (128, 128)
    assert elements_per_direction(get_preset("double_mach"), 1, 96) == (192, 48)
    with pytest.raises(ValueError):
        elements_per_direction(get_preset("sod"), 2, 256)


def test_constant_projection():
    preset = get_preset("dam_break")
    space = DGSpace(build_mesh(preset, 2, 12), 2)
    U = space.sample(lambda x: np.broadcast_to([0.7, 0.1, -0.2], x.shape[:-1] + (3,)), 3)
    assert np.all(U == np.array([0.7, 0.1, -0.2]))


def test_step_profile_coefficients_are_nodal_values():
    pr = setup("advect1d_mixed", "mcl", 1, 192)
    x = pr.space.node_x[..., 0]
    assert np.array_equal(pr.U0[..., 0], advect1d_mixed_initial(x))
    assert pr.U0.min() >= 0.0 and pr.U0.max() <= 1.0


def test_dam_break_heights_take_two_values():
    pr = setup("dam_break", "mcl", 1, 64)
    assert set(np.unique(pr.U0[..., 0])) == {0.1, 1.0}
    assert np.all(pr.U0[..., 1:] == 0)


def test_l1_error_hand_values():
    space = DGSpace(build_structured_line_mesh(1), 1)
    U = np.array([[[0.0], [1.0]]])
    assert l1_error(space, U, lambda x, t: x[..., :1], 0.0)[0] == pytest.approx(0.0, abs=1e-16)
    assert l1_error(space, U, lambda x, t: np.full(x.shape[:-1] + (1,), 0.5), 0.0, n_points=40)[0] \
        == pytest.approx(0.25, abs=1e-3)
    with pytest.raises(ValueError):
        l1_error(space, U, None, 0.0)


def test_l2_projection_beats_sampling():
    pr = setup("burgers1d", "dg", 3, 48)
    assert pr.preset.projection == "l2"
    space = pr.space
    proj = project_initial(pr.preset, space, 1)
    # the projection is the best element-wise fit, so its error beats nodal sampling
    assert l1_error(space, proj, pr.preset.exact, 0.0)[0] < l1_error(space, space.sample(pr.preset.initial, 1),
                                                                      pr.preset.exact, 0.0)[0]


@pytest.mark.parametrize("name", NAMES)
def test_preset_timestep_respects_idp_bound(name):
    pr = setup(name, "lo", check_dt=False)
    bound = check_timestep(pr.preset, pr.space, pr.law, pr.U0, pr.preset.dt)
    assert pr.preset.dt <= bound


def test_oversized_timestep_rejected():
    with pytest.raises(ValueError, match="IDP bound"):
        setup("sod", "mcl", dt=1e-2)


def test_channel_mesh_structure():
    mesh = read_unstructured_tri_mesh(generate_channel_mesh(18, 8))
    counts = mesh.boundary_counts()
    assert counts["inflow"] == 8 and counts["outflow"] == 8 and counts["wall"] == 36
    with pytest.raises(ValueError):
        generate_channel_mesh(10, 8)


def test_initial_data_in_invariant_sets():
    for name in NAMES:
        pr = setup(name, "lo", check_dt=False)
        ok, detail = pr.law.in_invariant_set(pr.U0)
        assert ok, (name, detail)
        lo_hi = pr.preset.invariant_bounds
        # only coefficient sampling inherits the bounds; L2 projections may overshoot
        if lo_hi is not None and pr.preset.projection == "sample":
            assert lo_hi[0] <= pr.U0[..., 0].min() and pr.U0[..., 0].max() <= lo_hi[1]
