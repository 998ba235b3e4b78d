"""SSP Runge-Kutta stepping, IDP time-step control and pseudo-time marching."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

METHODS = ("ssprk1", "ssprk2", "ssprk3")

# Shu-Osher form: stage s is a_s * U^n + (1 - a_s) * (U^(s-1) + dt L(U^(s-1)))
_SHU_OSHER = {
    "ssprk1": ((0.0, 0.0),),
    "ssprk2": ((0.0, 0.0), (0.5, 1.0)),
    "ssprk3": ((0.0, 0.0), (0.75, 1.0), (1.0 / 3.0, 0.5)),
}


class NumericalFailure(RuntimeError):
    """Non-finite state or divergence during time integration."""


def _check_finite(U, stage: int, t: float):
    if not np.all(np.isfinite(U)):
        raise NumericalFailure(f"non-finite values after stage {stage} (t = {t:.6g})")


def ssprk_step(rhs_fn: Callable, U: np.ndarray, t: float, dt: float, method: str = "ssprk3") -> np.ndarray:
    """One step of an SSP Runge-Kutta scheme built from forward Euler stages.

    ``rhs_fn(U, t)`` returns ``du/dt``.  Stage times follow the usual
    abscissae ``0``, ``1`` and ``1/2`` of the three-stage method.
    """
    if method not in _SHU_OSHER:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if not dt > 0:
        raise ValueError("time step must be positive")
    stage_times = {"ssprk1": (0.0,), "ssprk2": (0.0, 1.0), "ssprk3": (0.0, 1.0, 0.5)}[method]
    V = U
    for s, ((a, _), c) in enumerate(zip(_SHU_OSHER[method], stage_times), start=1):
        euler = V + dt * rhs_fn(V, t + c * dt)
        # a U + (1 - a) euler, arranged so that a vanishing update is exact
        V = euler if a == 0.0 else U + (1.0 - a) * (euler - U)
        _check_finite(V, s, t)
    return V


@dataclass
class TimeController:
    """Step-size policy: a fixed ``dt`` or ``safety`` times the IDP bound."""

    method: str = "ssprk3"
    dt: Optional[float] = None
    safety: float = 0.9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("time step must be positive")
        if not 0.0 < self.safety <= 1.0:
            raise ValueError("safety factor must lie in (0, 1]")

    def step_size(self, semi, U, t: float) -> float:
        if self.dt is not None:
            return self.dt
        bound = semi.max_timestep(U, t)
        if not np.isfinite(bound):
            raise NumericalFailure("no finite IDP time-step bound (zero wave speeds everywhere)")
        dt = self.safety * bound
        assert dt <= self.safety * bound
        return dt


@dataclass
class RunResult:
    U: np.ndarray
    t: float
    steps: int
    dt_history: List[float] = field(default_factory=list)


def integrate(semi, U: np.ndarray, t_final: float, controller: Optional[TimeController] = None,
              t0: float = 0.0, callback: Optional[Callable] = None) -> RunResult:
    """Advance ``U`` from ``t0`` to ``t_final``; the last step is shortened to land exactly."""
    ctl = controller or TimeController()
    t, U, steps, hist = t0, U.copy(), 0, []
    tiny = 1e-12 * max(abs(t_final), 1.0)
    while t < t_final - tiny:
        dt = min(ctl.step_size(semi, U, t), t_final - t)
        U = ssprk_step(semi, U, t, dt, ctl.method)
        t += dt
        steps += 1
        hist.append(dt)
        if callback is not None:
            callback(U, t, steps)
    return RunResult(U=U, t=t, steps=steps, dt_history=hist)


@dataclass
class SteadyResult:
    U: np.ndarray
    residuals: List[float]
    converged: bool
    steps: int
    residuals_l2: List[float] = field(default_factory=list)


def march_to_steady(rhs_fn: Callable, U: np.ndarray, dt: float, tol: float = 1e-12,
                    max_steps: int = 100000, consecutive: int = 10, t0: float = 0.0,
                    blowup: float = 1e6) -> SteadyResult:
    """Forward Euler pseudo-time marching until ``max|U^{k+1} - U^k| < tol``.

    Convergence is declared once the criterion has held for ``consecutive``
    steps in a row, or immediately when an update is exactly zero.
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    U = U.copy()
    res: List[float] = []
    res2: List[float] = []
    streak = 0
    for k in range(1, max_steps + 1):
        dU = dt * rhs_fn(U, t0)
        _check_finite(dU, 1, t0 + k * dt)
        U = U + dU
        r = float(np.abs(dU).max(initial=0.0))
        res.append(r)
        res2.append(float(np.sqrt(np.mean(dU * dU))))
        if r > blowup * max(res[0], np.finfo(float).tiny) and k > 1:
            raise NumericalFailure(f"steady march diverged at step {k} (r = {r:.3e})")
        if r == 0.0:
            return SteadyResult(U, res, True, k, res2)
        streak = streak + 1 if r < tol else 0
        if streak >= consecutive:
            return SteadyResult(U, res, True, k, res2)
    return SteadyResult(U, res, False, max_steps, res2)
