import math

import numpy as np
import pytest

from mcldg.time_integration import (METHODS, NumericalFailure, TimeController, integrate, march_to_steady,
                                    ssprk_step)


def decay(U, t):
    return -U


def test_rk3_one_step_matches_taylor():
    u = ssprk_step(decay, np.array([1.0]), 0.0, 0.1, "ssprk3")
    assert u[0] == pytest.approx(1 - 0.1 + 0.1 ** 2 / 2 - 0.1 ** 3 / 6, abs=1e-15)
    # 0.9048375 would be the fourth-order truncation; the three-stage method stops at third order
    assert u[0] == pytest.approx(0.9048333333333333, abs=1e-15)
    assert abs(u[0] - 0.9048375) > 4e-6


@pytest.mark.parametrize("method, order", [("ssprk1", 1), ("ssprk2", 2), ("ssprk3", 3)])
def test_observed_order(method, order):
    errs = []
    for n in (10, 20, 40, 80):
        u, dt = np.array([1.0]), 1.0 / n
        for _ in range(n):
            u = ssprk_step(decay, u, 0.0, dt, method)
        errs.append(abs(u[0] - math.exp(-1.0)))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert order - 0.1 <= rates[-1] <= order + 0.1


def test_stage_times_for_time_dependent_rhs():
    # u' = t^2 is integrated exactly by the third-order method
    u = ssprk_step(lambda U, t: np.full_like(U, t * t), np.zeros(1), 0.3, 0.2, "ssprk3")
    assert u[0] == pytest.approx((0.5 ** 3 - 0.3 ** 3) / 3, abs=1e-15)


@pytest.mark.parametrize("method", METHODS)
def test_zero_rhs_leaves_field_unchanged(method, rng):
    U = rng.standard_normal((4, 3, 2))
    assert np.array_equal(ssprk_step(lambda V, t: np.zeros_like(V), U, 0.0, 0.5, method), U)


@pytest.mark.parametrize("method", METHODS)
def test_convex_stages_preserve_bounds(method, rng):
    # a forward Euler step of u' = (c - u) with dt <= 1 is a convex combination
    c = rng.uniform(size=50)
    U = rng.uniform(size=50)
    for _ in range(20):
        U = ssprk_step(lambda V, t: c - V, U, 0.0, 1.0, method)
        assert U.min() >= 0.0 and U.max() <= 1.0


def test_step_errors():
    with pytest.raises(ValueError):
        ssprk_step(decay, np.ones(1), 0.0, 0.0)
    with pytest.raises(ValueError):
        ssprk_step(decay, np.ones(1), 0.0, 0.1, "rk4")
    with pytest.raises(NumericalFailure, match="stage 1"):
        ssprk_step(lambda U, t: np.full_like(U, np.nan), np.ones(1), 0.0, 0.1)


def test_controller_validation():
    with pytest.raises(ValueError):
        TimeController(method="euler")
    with pytest.raises(ValueError):
        TimeController(dt=-1.0)
    with pytest.raises(ValueError):
        TimeController(safety=1.5)


class _Semi:
    def __init__(self, bound):
        self.bound = bound

    def __call__(self, U, t):
        return -U

    def max_timestep(self, U, t):
        return self.bound


def test_auto_step_respects_bound():
    r = integrate(_Semi(0.04), np.ones(1), 1.0, TimeController(safety=0.5))
    assert max(r.dt_history) <= 0.5 * 0.04 + 1e-15
    assert r.t == pytest.approx(1.0)
    with pytest.raises(NumericalFailure):
        integrate(_Semi(np.inf), np.ones(1), 1.0, TimeController())


def test_integrate_lands_on_final_time():
    seen = []
    r = integrate(_Semi(1.0), np.ones(1), 0.25, TimeController(dt=0.1), callback=lambda U, t, k: seen.append(k))
    assert r.steps == 3 and seen == [1, 2, 3]
    assert r.t == pytest.approx(0.25, abs=1e-15)
    assert r.dt_history[-1] == pytest.approx(0.05)


def test_steady_field_converges_immediately():
    res = march_to_steady(lambda U, t: np.zeros_like(U), np.ones(3), 0.1)
    assert res.converged and res.steps == 1 and res.residuals == [0.0]


def test_relaxation_decays_geometrically():
    dt = 0.2
    res = march_to_steady(lambda U, t: 1.0 - U, np.zeros(4), dt, tol=1e-12)
    assert res.converged
    r = np.array(res.residuals)
    assert np.allclose(r[1:20] / r[:19], 1 - dt, rtol=1e-9)
    assert np.all(r[-10:] < 1e-12)
    assert np.allclose(res.U, 1.0, atol=1e-11)


def test_steady_march_limits_and_errors():
    res = march_to_steady(lambda U, t: 1.0 - U, np.zeros(1), 0.01, max_steps=5)
    assert not res.converged and len(res.residuals) == 5
    with pytest.raises(NumericalFailure):
        march_to_steady(lambda U, t: 10.0 * U, np.ones(1), 1.0)
    with pytest.raises(ValueError):
        march_to_steady(decay, np.ones(1), 0.0)
