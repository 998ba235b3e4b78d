"""Property suites shared by the test-suite and ``mcldg verify``.

Each suite returns a :class:`SuiteResult`; the random instances come from a
seeded generator so every run is reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .bernstein import (KINDS, dense_precond_grad, reference_element, reference_precond_grad)
from .dg_target import nodal_time_derivatives
from .law import Advection, Burgers, ConservationLaw, Euler, ShallowWater
from .limiter import (limit_face_scalar, limit_volume_scalar, limit_volume_sequential, limited_rhs)
from .low_order import max_idp_timestep
from .mesh import (Mesh, build_structured_line_mesh, build_structured_quad_mesh,
                   read_unstructured_tri_mesh, structured_triangle_mesh_text)
from .space import DGSpace
from .time_integration import ssprk_step

PERIODIC_2D = {s: "periodic" for s in ("left", "right", "bottom", "top")}


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


# ---------------------------------------------------------------------------
# Random admissible states
# ---------------------------------------------------------------------------

def random_state(law: ConservationLaw, shape, rng: np.random.Generator) -> np.ndarray:
    """Random coefficients inside the invariant set of ``law``."""
    shape = tuple(shape)
    if isinstance(law, Euler):
        rho = 0.5 + rng.random(shape)
        v = 0.8 * rng.standard_normal(shape + (law.dim,))
        p = 0.5 + rng.random(shape)
        E = p / (law.gamma - 1.0) + 0.5 * rho * np.sum(v * v, axis=-1)
        return np.concatenate([rho[..., None], rho[..., None] * v, E[..., None]], axis=-1)
    if isinstance(law, ShallowWater):
        H = 0.5 + rng.random(shape)
        v = 0.5 * rng.standard_normal(shape + (law.dim,))
        return np.concatenate([H[..., None], H[..., None] * v], axis=-1)
    return rng.uniform(-1.0, 1.0, shape + (law.m,))


def small_mesh(kind: str, periodic: bool = True, n: int = 3) -> Mesh:
    if kind == "line":
        return build_structured_line_mesh(2 * n, periodic=periodic)
    if kind == "quad":
        return build_structured_quad_mesh(n, n, boundary_spec=PERIODIC_2D if periodic else None)
    return read_unstructured_tri_mesh(structured_triangle_mesh_text(n, n))


def _law_cases():
    return [
        ("advection-1d", Advection((1.0,)), "line"),
        ("burgers-1d", Burgers(1), "line"),
        ("advection-2d-quad", Advection((1.0, 0.5)), "quad"),
        ("burgers-2d-tri", Burgers(2), "tri"),
        ("euler-1d", Euler(1), "line"),
        ("euler-2d-quad", Euler(2), "quad"),
        ("swe-2d-quad", ShallowWater(2), "quad"),
        ("swe-2d-tri", ShallowWater(2), "tri"),
    ]


# ---------------------------------------------------------------------------
# Operator suite
# ---------------------------------------------------------------------------

def operator_suite(max_p: int = 3, rng: Optional[np.random.Generator] = None) -> SuiteResult:
    """Partition of unity, zero row sums, stencil sparsity and dense oracles."""
    rng = rng or np.random.default_rng(0)
    worst = {"unity": 0.0, "rowsum": 0.0, "sparsity": 0.0, "oracle": 0.0}
    for kind in KINDS:
        for p in range(1, max_p + 1):
            ref = reference_element(kind, p)
            pts = rng.random((50, ref.dim))
            if kind == "tri":
                pts = pts[pts.sum(axis=1) <= 1.0]
            worst["unity"] = max(worst["unity"], np.abs(ref.eval(pts).sum(axis=1) - 1.0).max())
            R = reference_precond_grad(ref)
            worst["rowsum"] = max(worst["rowsum"], np.abs(R.sum(axis=2)).max())
            allowed = np.eye(ref.N, dtype=bool)
            allowed[ref.pairs[:, 0], ref.pairs[:, 1]] = True
            allowed[ref.pairs[:, 1], ref.pairs[:, 0]] = True
            worst["sparsity"] = max(worst["sparsity"], np.abs(R[:, ~allowed]).max(initial=0.0))
            worst["oracle"] = max(worst["oracle"], np.abs(R - dense_precond_grad(ref)).max())
    ok = all(v < 1e-12 for v in worst.values())
    return SuiteResult("operators", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------------------
# Equivalence suite
# ---------------------------------------------------------------------------

def equivalence_suite(n_fields: int = 50, rng: Optional[np.random.Generator] = None,
                      tol: float = 1e-10) -> SuiteResult:
    """Unlimited MCL reproduces the target scheme (with lumped time derivative)."""
    rng = rng or np.random.default_rng(1)
    worst, where = 0.0, ""
    for name, law, kind in _law_cases():
        for k in range(n_fields):
            p = 1 + k % 3
            space = DGSpace(small_mesh(kind, periodic=kind != "tri", n=2), p)
            U = random_state(law, (space.E, space.N), rng)
            target = space.lumped[:, None, None] * nodal_time_derivatives(space, law, U)
            mcl = limited_rhs(space, law, U, scheme="mcl", limit=False)
            err = np.abs(mcl - target).max() / max(1.0, np.abs(target).max())
            if err > worst:
                worst, where = err, f"{name} p={p}"
    return SuiteResult("equivalence", worst < tol, f"max relative defect {worst:.2e} ({where})")


# ---------------------------------------------------------------------------
# IDP suite
# ---------------------------------------------------------------------------

def idp_suite(trials: int = 100, steps: int = 100, rng: Optional[np.random.Generator] = None,
              tol: float = 1e-11) -> SuiteResult:
    """Scalar forward Euler at the IDP time-step bound keeps the global extrema."""
    rng = rng or np.random.default_rng(2)
    cases = [(Advection((1.0,)), "line"), (Burgers(1), "line"), (Advection((0.7, -0.4)), "quad"),
             (Burgers(2), "quad"), (Burgers(2), "tri"), (Advection((1.0, 1.0)), "tri")]
    worst, fails = 0.0, 0
    for k in range(trials):
        law, kind = cases[k % len(cases)]
        p = 1 + (k // len(cases)) % 3
        space = DGSpace(small_mesh(kind, periodic=kind != "tri", n=2 + k % 2), p)
        U = random_state(law, (space.E, space.N), rng)
        lo, hi = U.min(), U.max()
        for _ in range(steps):
            dt = max_idp_timestep(space, law, U)
            if not np.isfinite(dt):
                break
            U = U + dt * limited_rhs(space, law, U, scheme="mcl") / space.lumped[:, None, None]
            excess = max(lo - U.min(), U.max() - hi, 0.0)
            worst = max(worst, excess)
            if excess > tol:
                fails += 1
                break
    return SuiteResult("idp", fails == 0, f"{trials} trials x {steps} steps, worst excursion {worst:.1e}")


# ---------------------------------------------------------------------------
# Conservation suite
# ---------------------------------------------------------------------------

def conservation_suite(steps: int = 1000, rng: Optional[np.random.Generator] = None,
                       tol: float = 1e-10) -> SuiteResult:
    """Total mass on periodic meshes is constant under SSP-RK3 with every scheme."""
    rng = rng or np.random.default_rng(3)
    cases = [("euler-1d mcl p2", Euler(1), "line", 2, "mcl"),
             ("burgers-2d mcl p1", Burgers(2), "quad", 1, "mcl"),
             ("swe-2d lo p1", ShallowWater(2), "quad", 1, "lo"),
             ("advection-1d dg p3", Advection((1.0,)), "line", 3, "dg")]
    worst, where = 0.0, ""
    for name, law, kind, p, scheme in cases:
        space = DGSpace(small_mesh(kind, periodic=True, n=3), p)
        U = random_state(law, (space.E, space.N), rng)
        if scheme == "dg":
            rhs: Callable = lambda V, t: nodal_time_derivatives(space, law, V)  # noqa: E731
        else:
            rhs = lambda V, t: limited_rhs(space, law, V, scheme=scheme) / space.lumped[:, None, None]  # noqa: E731
        dt = 0.5 * max_idp_timestep(space, law, U) / (p if scheme == "dg" else 1)
        m0 = space.total(U)
        for _ in range(steps):
            U = ssprk_step(rhs, U, 0.0, dt)
        drift = np.abs(space.total(U) - m0).max()
        if drift > worst:
            worst, where = drift, name
    return SuiteResult("conservation", worst < tol, f"{steps} steps, max drift {worst:.1e} ({where})")


# ---------------------------------------------------------------------------
# Limiter oracle suite
# ---------------------------------------------------------------------------

def brute_force_clip(f, lower_bounds, upper_bounds):
    """Largest admissible ``|f*|`` with ``sign(f*) = sign(f)`` and ``|f*| <= |f|``.

    The constraints are ``lo_k <= s_k * f* <= hi_k`` for each ``(s_k, lo_k, hi_k)``
    in ``lower_bounds``; ``upper_bounds`` lists the same triples (kept apart so
    callers can mix one- and two-sided constraints).  The feasible set is an
    interval containing zero, so the optimum sits at ``f`` or at a constraint
    breakpoint; every candidate is tested directly.
    """
    cons = list(lower_bounds) + list(upper_bounds)
    cands = [0.0, f]
    for s, lo, hi in cons:
        for b in (lo, hi):
            if np.isfinite(b) and s != 0:
                cands.append(b / s)
    best = 0.0
    for c in cands:
        if f * c < 0 or abs(c) > abs(f):
            continue
        if all(lo - 1e-13 * (1 + abs(lo)) <= s * c <= hi + 1e-13 * (1 + abs(hi)) for s, lo, hi in cons):
            if abs(c) > abs(best):
                best = c
    return best


def _instance(rng):
    """Random bar-state configuration with admissible (in-bounds) bar states."""
    d = rng.uniform(0.1, 2.0)
    ubar_i, ubar_j = rng.uniform(-1, 1, 2)
    umin_i = ubar_i - rng.exponential(0.3)
    umax_i = ubar_i + rng.exponential(0.3)
    umin_j = ubar_j - rng.exponential(0.3)
    umax_j = ubar_j + rng.exponential(0.3)
    f = rng.normal(0.0, 2.0)
    return d, 2 * d * ubar_i, 2 * d * ubar_j, umin_i, umax_i, umin_j, umax_j, f


def limiter_oracle_suite(instances: int = 10000, rng: Optional[np.random.Generator] = None,
                         tol: float = 1e-12) -> SuiteResult:
    """Closed-form clipping equals a brute-force constrained maximiser."""
    rng = rng or np.random.default_rng(4)
    worst = 0.0
    for _ in range(instances):
        d, Pij, Pji, mi, Mi, mj, Mj, f = _instance(rng)
        two_d = 2 * d
        # volume: (P_ij + f*) / 2d in [mi, Mi] and (P_ji - f*) / 2d in [mj, Mj]
        ref = brute_force_clip(f, [(1.0, two_d * mi - Pij, two_d * Mi - Pij)],
                               [(-1.0, two_d * mj - Pji, two_d * Mj - Pji)])
        got = float(limit_volume_scalar(np.array(f), np.array(d), np.array(Pij), np.array(Pji),
                                        np.array(mi), np.array(Mi), np.array(mj), np.array(Mj)))
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
        # face: (P + f*) / 2d and (P - f*) / 2d in the shared face bounds
        ref = brute_force_clip(f, [(1.0, two_d * mi - Pij, two_d * Mi - Pij)],
                               [(-1.0, two_d * mi - Pij, two_d * Mi - Pij)])
        got = float(limit_face_scalar(np.array(f), np.array(d), np.array(Pij), np.array(mi), np.array(Mi)))
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
        # sequential: main flux already limited, product remainder g is clipped
        rho_i, rho_j = rng.uniform(0.2, 2.0, 2)
        Pm_ij, Pm_ji = two_d * rho_i, two_d * rho_j
        fm = rng.uniform(-0.9, 0.9) * min(Pm_ij, Pm_ji)
        phi_i, phi_j = rng.normal(0, 1, 2)
        Pp_ij, Pp_ji = Pm_ij * phi_i, Pm_ji * phi_j
        phibar = (Pp_ij + Pp_ji) / (Pm_ij + Pm_ji)
        lo_i = min(phi_i, phi_j, phibar) - rng.exponential(0.2)
        hi_i = max(phi_i, phi_j, phibar) + rng.exponential(0.2)
        lo_j = min(phi_i, phi_j, phibar) - rng.exponential(0.2)
        hi_j = max(phi_i, phi_j, phibar) + rng.exponential(0.2)
        fp = rng.normal(0, 2.0)
        Pi, Pj = Pm_ij + fm, Pm_ji - fm
        base = Pi * phibar - Pp_ij
        g = fp - base
        ref_g = brute_force_clip(g, [(1.0, Pi * (lo_i - phibar), Pi * (hi_i - phibar))],
                                 [(-1.0, Pj * (lo_j - phibar), Pj * (hi_j - phibar))])
        got = limit_volume_sequential(np.array([fm]), np.array([[fp]]), np.array([d]),
                                      np.array([Pm_ij]), np.array([Pm_ji]), np.array([[Pp_ij]]),
                                      np.array([[Pp_ji]]), np.array([[lo_i]]), np.array([[hi_i]]),
                                      np.array([[lo_j]]), np.array([[hi_j]]))[0, 0]
        worst = max(worst, abs((got - base) - ref_g) / max(1.0, abs(ref_g)))
    return SuiteResult("limiter-oracle", worst < tol, f"{instances} instances x 3 formulas, max defect {worst:.1e}")


def run_all(quick: bool = False, seed: int = 0) -> List[SuiteResult]:
    """All suites; ``quick`` shrinks the random sample sizes about tenfold."""
    rng = lambda k: np.random.default_rng([seed, k])  # noqa: E731
    if quick:
        return [operator_suite(rng=rng(0)), equivalence_suite(5, rng(1)), idp_suite(12, 20, rng(2)),
                conservation_suite(100, rng(3)), limiter_oracle_suite(1000, rng(4))]
    return [operator_suite(rng=rng(0)), equivalence_suite(50, rng(1)), idp_suite(100, 100, rng(2)),
            conservation_suite(1000, rng(3)), limiter_oracle_suite(10000, rng(4))]
