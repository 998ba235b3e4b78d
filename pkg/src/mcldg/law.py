"""Conservation laws: fluxes, wave speeds, Lax-Friedrichs flux, admissibility,
boundary ghost states and exact solutions.

States are arrays whose last axis holds the ``m`` conserved components;
fluxes carry an additional trailing spatial axis of length ``d``.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import INFLOW, OUTFLOW, TAG_CODES, WALL


class InvariantViolation(ArithmeticError):
    """A state left the invariant set (nonpositive density, height, ...)."""

    def __init__(self, message: str, component: str = ""):
        super().__init__(message)
        self.component = component


class ConservationLaw:
    """Base class.  ``main`` and ``products`` describe sequential limiting roles."""

    name = "law"
    m: int = 1
    dim: int = 1
    main: Optional[int] = None
    products: tuple = ()
    component_names: tuple = ("u",)

    @property
    def is_scalar(self) -> bool:
        return self.m == 1

    def flux(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flux_normal(self, U: np.ndarray, n: np.ndarray) -> np.ndarray:
        return np.einsum("...mk,...k->...m", self.flux(U), n)

    def max_wave_speed(self, U, V, n) -> np.ndarray:
        raise NotImplementedError

    def lax_friedrichs(self, U, V, n, lam=None) -> np.ndarray:
        """Local Lax-Friedrichs flux ``H(U, V; n)``."""
        if lam is None:
            lam = self.max_wave_speed(U, V, n)
        return 0.5 * (self.flux_normal(U, n) + self.flux_normal(V, n)) + 0.5 * lam[..., None] * (U - V)

    def in_invariant_set(self, U) -> tuple:
        return True, ""

    def check(self, U) -> None:
        ok, detail = self.in_invariant_set(U)
        if not ok:
            raise InvariantViolation(detail, detail.split(" ")[0] if detail else "")

    def reflect(self, U, n):
        return U.copy()

    def derived(self, U) -> tuple:
        """Name and nodal values of a derived scalar for output."""
        return "magnitude", np.abs(U[..., 0])


def boundary_ghost_state(law: ConservationLaw, tag, U_in, n, x=None, t: float = 0.0,
                         inflow: Optional[Callable] = None) -> np.ndarray:
    """Exterior state for a boundary face.

    ``tag`` is a name or an integer code (array-valued tags are allowed and
    broadcast over the leading axes of ``U_in``).  Inflow faces take
    ``inflow(x, t)``; outflow copies ``U_in``; walls reflect the normal
    velocity.
    """
    U_in = np.asarray(U_in, dtype=float)
    if isinstance(tag, str):
        if tag not in ("inflow", "outflow", "wall"):
            raise ValueError(f"unknown boundary tag {tag!r}")
        tag = TAG_CODES[tag]
    tag = np.broadcast_to(np.asarray(tag), U_in.shape[:-1])
    if np.any((tag != INFLOW) & (tag != OUTFLOW) & (tag != WALL)):
        raise ValueError("unknown boundary tag code")
    out = U_in.copy()
    wall = tag == WALL
    if np.any(wall):
        nn = np.broadcast_to(n, U_in.shape[:-1] + (np.shape(n)[-1],))
        out[wall] = law.reflect(U_in[wall], nn[wall])
    inl = tag == INFLOW
    if np.any(inl):
        if inflow is None:
            raise ValueError("inflow boundary without an inflow state")
        xx = np.broadcast_to(x, U_in.shape[:-1] + (np.shape(x)[-1],))
        out[inl] = np.asarray(inflow(xx[inl], t), dtype=float).reshape(-1, law.m)
    return out


# ---------------------------------------------------------------------------
# Scalar laws
# ---------------------------------------------------------------------------

class Advection(ConservationLaw):
    """Linear transport ``u_t + div(a u) = 0``."""

    name = "advection"

    def __init__(self, velocity: Sequence[float] = (1.0,), bounds=(-np.inf, np.inf)):
        self.velocity = np.asarray(velocity, dtype=float)
        self.dim = len(self.velocity)
        self.bounds = bounds

    def flux(self, U):
        return U[..., :, None] * self.velocity

    def flux_normal(self, U, n):
        return U * (n @ self.velocity)[..., None]

    def max_wave_speed(self, U, V, n):
        lam = np.abs(np.asarray(n) @ self.velocity)
        return np.broadcast_to(lam, np.broadcast_shapes(U.shape[:-1], V.shape[:-1])).copy()

    def in_invariant_set(self, U):
        lo, hi = self.bounds
        u = U[..., 0]
        if np.any(u < lo) or np.any(u > hi):
            return False, f"u outside [{lo}, {hi}]: min {u.min():.6g}, max {u.max():.6g}"
        return True, ""

    def derived(self, U):
        return "u", U[..., 0]


class Burgers(ConservationLaw):
    """Inviscid Burgers equation with flux ``v u^2 / 2``, ``v = (1, ..., 1)``."""

    name = "burgers"

    def __init__(self, dim: int = 1, bounds=(-np.inf, np.inf)):
        self.dim = dim
        self.bounds = bounds

    def flux(self, U):
        return np.repeat(0.5 * U[..., :, None] ** 2, self.dim, axis=-1)

    def flux_normal(self, U, n):
        return 0.5 * U ** 2 * np.sum(n, axis=-1)[..., None]

    def max_wave_speed(self, U, V, n):
        return np.maximum(np.abs(U[..., 0]), np.abs(V[..., 0])) * np.abs(np.sum(n, axis=-1))

    in_invariant_set = Advection.in_invariant_set

    def derived(self, U):
        return "u", U[..., 0]


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

class Euler(ConservationLaw):
    """Compressible Euler equations for an ideal polytropic gas."""

    name = "euler"

    def __init__(self, dim: int = 1, gamma: float = 1.4):
        if gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        self.dim, self.gamma = dim, gamma
        self.m = dim + 2
        self.main = 0
        self.products = tuple(range(1, dim + 2))
        self.component_names = ("rho",) + tuple(f"rho_v{k}" for k in range(dim)) + ("rho_E",)

    def pressure(self, U):
        rho = U[..., 0]
        mom = U[..., 1:1 + self.dim]
        return (self.gamma - 1.0) * (U[..., -1] - 0.5 * np.sum(mom ** 2, axis=-1) / rho)

    def _check_density(self, rho):
        if np.any(rho <= 0):
            raise InvariantViolation(f"rho nonpositive (min {rho.min():.6g})", "rho")

    def flux(self, U):
        rho = U[..., 0]
        self._check_density(rho)
        d = self.dim
        v = U[..., 1:1 + d] / rho[..., None]
        p = self.pressure(U)
        F = np.empty(U.shape + (d,))
        F[..., 0, :] = U[..., 1:1 + d]
        F[..., 1:1 + d, :] = U[..., 1:1 + d, None] * v[..., None, :] + p[..., None, None] * np.eye(d)
        F[..., -1, :] = (U[..., -1] + p)[..., None] * v
        return F

    def flux_normal(self, U, n):
        rho = U[..., 0]
        self._check_density(rho)
        d = self.dim
        v = U[..., 1:1 + d] / rho[..., None]
        vn = np.sum(v * n, axis=-1)
        p = self.pressure(U)
        out = np.empty(U.shape)
        out[..., 0] = rho * vn
        out[..., 1:1 + d] = U[..., 1:1 + d] * vn[..., None] + p[..., None] * n
        out[..., -1] = (U[..., -1] + p) * vn
        return out

    def _speed(self, U, n):
        rho = U[..., 0]
        self._check_density(rho)
        vn = np.sum(U[..., 1:1 + self.dim] * n, axis=-1) / rho
        p = self.pressure(U)
        c = np.sqrt(np.maximum(self.gamma * p / rho, 0.0))
        return np.abs(vn) + c

    def max_wave_speed(self, U, V, n):
        return np.maximum(self._speed(U, n), self._speed(V, n))

    def specific_internal_energy(self, U):
        return self.pressure(U) / ((self.gamma - 1.0) * U[..., 0])

    def in_invariant_set(self, U):
        rho = U[..., 0]
        if np.any(rho <= 0):
            return False, f"rho nonpositive (min {rho.min():.6g})"
        e = self.specific_internal_energy(U)
        if np.any(e <= 0):
            return False, f"e nonpositive (min {e.min():.6g})"
        return True, ""

    def entropy(self, U):
        """Specific entropy ``log(e^(1/(gamma-1)) / rho)``, reported only."""
        e = self.specific_internal_energy(U)
        return np.log(e ** (1.0 / (self.gamma - 1.0)) / U[..., 0])

    def reflect(self, U, n):
        out = U.copy()
        mom = U[..., 1:1 + self.dim]
        out[..., 1:1 + self.dim] = mom - 2.0 * np.sum(mom * n, axis=-1)[..., None] * n
        return out

    def derived(self, U):
        return "pressure", self.pressure(U)


class ShallowWater(ConservationLaw):
    """Shallow water equations without source terms."""

    name = "shallow_water"

    def __init__(self, dim: int = 2, g: float = 9.81):
        if g <= 0:
            raise ValueError("g must be positive")
        self.dim, self.g = dim, g
        self.m = dim + 1
        self.main = 0
        self.products = tuple(range(1, dim + 1))
        self.component_names = ("H",) + tuple(f"H_v{k}" for k in range(dim))

    def _check_height(self, H):
        if np.any(H <= 0):
            raise InvariantViolation(f"H nonpositive (min {H.min():.6g})", "H")

    def flux(self, U):
        H = U[..., 0]
        self._check_height(H)
        d = self.dim
        v = U[..., 1:] / H[..., None]
        F = np.empty(U.shape + (d,))
        F[..., 0, :] = U[..., 1:]
        F[..., 1:, :] = U[..., 1:, None] * v[..., None, :] + (0.5 * self.g * H ** 2)[..., None, None] * np.eye(d)
        return F

    def flux_normal(self, U, n):
        H = U[..., 0]
        self._check_height(H)
        vn = np.sum(U[..., 1:] * n, axis=-1) / H
        out = np.empty(U.shape)
        out[..., 0] = H * vn
        out[..., 1:] = U[..., 1:] * vn[..., None] + (0.5 * self.g * H ** 2)[..., None] * n
        return out

    def _speed(self, U, n):
        H = U[..., 0]
        self._check_height(H)
        vn = np.sum(U[..., 1:] * n, axis=-1) / H
        return np.abs(vn) + np.sqrt(self.g * H)

    def max_wave_speed(self, U, V, n):
        return np.maximum(self._speed(U, n), self._speed(V, n))

    def in_invariant_set(self, U):
        H = U[..., 0]
        if np.any(H <= 0):
            return False, f"H nonpositive (min {H.min():.6g})"
        return True, ""

    reflect = Euler.reflect

    def derived(self, U):
        v = U[..., 1:] / U[..., :1]
        return "velocity_magnitude", np.linalg.norm(v, axis=-1)


# ---------------------------------------------------------------------------
# Exact solutions
# ---------------------------------------------------------------------------

def advection_exact(u0: Callable, x, t: float, velocity: float = 1.0, interval=(0.0, 1.0)):
    """Periodic translation of ``u0`` on ``interval``."""
    a, b = interval
    xs = a + np.mod(np.asarray(x, dtype=float) - velocity * t - a, b - a)
    return u0(xs)


def burgers1d_exact(x, t: float, tol: float = 1e-15, max_iter: int = 100):
    """Classical solution of ``u = sin(2 pi (x - u t))`` before the shock time.

    A Newton iteration safeguarded by a bracketing interval; the residual is
    monotone in ``u`` because ``2 pi t < 1``.
    """
    if t >= 1.0 / (2.0 * np.pi):
        raise ValueError("the classical solution exists only for t < 1/(2 pi)")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.sin(2.0 * np.pi * x)
    lo = np.full(x.shape, -1.0)
    hi = np.full(x.shape, 1.0)
    u = np.sin(2.0 * np.pi * x)
    for _ in range(max_iter):
        arg = 2.0 * np.pi * (x - u * t)
        g = u - np.sin(arg)
        dg = 1.0 + 2.0 * np.pi * t * np.cos(arg)
        lo = np.where(g < 0, u, lo)
        hi = np.where(g > 0, u, hi)
        step = u - g / dg
        bad = (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        if np.all(np.abs(new - u) <= tol * (1.0 + np.abs(u))):
            u = new
            break
        u = new
    return u


def burgers2d_initial(x, y):
    """Four-quadrant data of the 2D Burgers benchmark."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.where(x < 0.5, np.where(y > 0.5, -0.2, 0.5), np.where(y > 0.5, -1.0, 0.8))
    return out


def _hopf_lax(s, t, breaks, values):
    """Entropy solution of 1D Burgers for piecewise-constant data, pointwise.

    ``breaks`` (shape ``(nb, npts)``) and ``values`` (``(nb+1, npts)``) describe
    the data on each line.  Uses the Hopf-Lax minimization of
    ``U0(y) + (s - y)^2 / (2 t)`` with ``U0`` the primitive of the data.
    """
    nb = breaks.shape[0]
    lower = np.vstack([np.full_like(s, -np.inf)[None], breaks])
    upper = np.vstack([breaks, np.full_like(s, np.inf)[None]])
    # primitive at the lower end of every piece, anchored at the first break
    prim = np.zeros((nb + 1,) + s.shape)
    for k in range(2, nb + 1):
        prim[k] = prim[k - 1] + values[k - 1] * (breaks[k - 1] - breaks[k - 2])
    anchor = np.vstack([breaks[:1], breaks])
    best = np.full(s.shape, np.inf)
    ystar = np.zeros_like(s)
    for k in range(nb + 1):
        y = np.clip(s - values[k] * t, lower[k], upper[k])
        f = prim[k] + values[k] * (y - anchor[k]) + (s - y) ** 2 / (2.0 * t)
        take = f < best
        best = np.where(take, f, best)
        ystar = np.where(take, y, ystar)
    return (s - ystar) / t


def burgers2d_exact(x, y, t: float):
    """Exact solution of the 2D Burgers four-quadrant problem.

    Characteristics travel along ``(1, 1)``, so in ``s = (x + y)/2`` and
    ``eta = x - y`` the problem is a family of 1D Burgers problems in ``s``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if t <= 0.0:
        return burgers2d_initial(x, y)
    s = 0.5 * (x + y).ravel()
    eta = (x - y).ravel()
    half = 0.5 * np.abs(eta)
    breaks = np.stack([0.5 - half, 0.5 + half])
    middle = np.where(eta > 0, 0.8, -0.2)
    values = np.stack([np.full_like(s, 0.5), middle, np.full_like(s, -1.0)])
    return _hopf_lax(s, t, breaks, values).reshape(x.shape)
