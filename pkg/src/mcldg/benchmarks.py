"""Registered benchmark problems: initial and boundary data, resolutions and reference values."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .bernstein import collapsed_triangle_rule, gauss_legendre_01
from .dg_target import solve_consistent_mass
from .law import (Advection, Burgers, ConservationLaw, Euler, ShallowWater, advection_exact,
                  burgers1d_exact, burgers2d_exact, burgers2d_initial)
from .limiter import SemiDiscretization
from .low_order import max_idp_timestep
from .mesh import (Mesh, build_structured_line_mesh, build_structured_quad_mesh,
                   read_unstructured_tri_mesh)
from .space import DGSpace
from .time_integration import TimeController


@dataclass(frozen=True)
class BenchmarkPreset:
    """Immutable description of one benchmark.

    ``resolution`` is either ``"inv_h"`` (elements per unit length of a 1D
    interval), ``"dof"`` (degrees of freedom per direction, so that a
    Q_p mesh has ``dof / (p + 1)`` elements per direction) or ``"mesh"``
    (a generated unstructured mesh).
    """

    name: str
    make_law: Callable[[], ConservationLaw]
    kind: str
    domain: Tuple[Tuple[float, float], ...]
    initial: Callable[[np.ndarray], np.ndarray]
    dt: float
    t_final: Optional[float]
    resolution: str
    default_res: int
    default_p: int
    boundary: Dict[str, object] = field(default_factory=dict)
    inflow: Optional[Callable] = None
    exact: Optional[Callable] = None
    projection: str = "sample"
    method: str = "ssprk3"
    steady: bool = False
    error_scale: float = 1.0
    invariant_bounds: Optional[Tuple[float, float]] = None
    table_res: Tuple[int, ...] = ()
    reference: Dict[Tuple[str, int, int], float] = field(default_factory=dict)
    long: bool = False
    description: str = ""

    @property
    def dim(self) -> int:
        return len(self.domain)

    @property
    def measure(self) -> float:
        return float(np.prod([b - a for a, b in self.domain]))


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

def advect1d_mixed_initial(x):
    """Step on [0.2, 0.4] plus a compactly supported smooth hill on (0.5, 0.9)."""
    x = np.asarray(x, dtype=float)
    out = np.where((x >= 0.2) & (x <= 0.4), 1.0, 0.0)
    inside = (x > 0.5) & (x < 0.9)
    xi = np.where(inside, x, 0.7)
    hill = np.exp(10.0 + 1.0 / (0.5 - xi) + 1.0 / (xi - 0.9))
    return np.where(inside, hill, out)


def gaussian_initial(x):
    return np.exp(-25.0 * np.asarray(x, dtype=float) ** 2)


def sine_initial(x):
    return np.sin(2.0 * np.pi * np.asarray(x, dtype=float))


def sod_initial(x):
    x = np.asarray(x, dtype=float)
    left = x < 0.5
    rho = np.where(left, 1.0, 0.125)
    rhoE = np.where(left, 2.5, 0.25)
    return np.stack([rho, np.zeros_like(x), rhoE], axis=-1)


DMR_LEFT = np.array([8.0, 66.0 * math.cos(math.pi / 6), -66.0 * math.sin(math.pi / 6), 563.5])
DMR_RIGHT = np.array([1.4, 0.0, 0.0, 2.5])


def double_mach_state(x, y, t: float = 0.0):
    shocked = np.asarray(x) < 1.0 / 6.0 + (np.asarray(y) + 20.0 * t) / math.sqrt(3.0)
    return np.where(shocked[..., None], DMR_LEFT, DMR_RIGHT)


def dam_break_initial(xy):
    r = np.linalg.norm(xy, axis=-1)
    H = np.where(r <= 0.5, 1.0, 0.1)
    return np.stack([H, np.zeros_like(H), np.zeros_like(H)], axis=-1)


CHANNEL_INFLOW = np.array([1.0, 1.0, 0.0])
CHANNEL_SLOPE = math.tan(math.pi / 36.0)


def _per_point(fn, m):
    """Wrap ``fn(x) -> (...)`` of a 1D coordinate into ``x (..., d) -> (..., m)``."""
    def wrapped(x):
        return np.asarray(fn(x[..., 0]), dtype=float).reshape(x.shape[:-1] + (m,))
    return wrapped


# ---------------------------------------------------------------------------
# Channel mesh
# ---------------------------------------------------------------------------

def channel_walls(x):
    lower = np.maximum(0.0, CHANNEL_SLOPE * x)
    upper = np.minimum(40.0, 40.0 - CHANNEL_SLOPE * x)
    return lower, upper


def generate_channel_mesh(nx: int = 90, ny: int = 36) -> str:
    """Triangulation of the narrowing channel in the plain-text mesh format.

    Columns are uniform in ``x`` with ``x = 0`` on a column line; each column
    is split uniformly between the walls.  Diagonals are mirrored about the
    centre line so the mesh is symmetric under ``y -> 40 - y``.
    """
    if nx % 9 or ny % 2 or nx < 9 or ny < 2:
        raise ValueError("nx must be a positive multiple of 9 and ny a positive even number")
    xs = np.linspace(-10.0, 80.0, nx + 1)
    lo, hi = channel_walls(xs)
    eta = np.linspace(0.0, 1.0, ny + 1)
    X = np.repeat(xs[:, None], ny + 1, axis=1)
    Y = lo[:, None] + eta[None, :] * (hi - lo)[:, None]
    vid = lambda i, j: i * (ny + 1) + j  # noqa: E731
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if j < ny // 2:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    edges = []
    for j in range(ny):
        edges.append((vid(0, j + 1), vid(0, j), "inflow"))
        edges.append((vid(nx, j), vid(nx, j + 1), "outflow"))
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0), "wall"))
        edges.append((vid(i + 1, ny), vid(i, ny), "wall"))
    lines = [f"{(nx + 1) * (ny + 1)} {len(tris)} {len(edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in zip(X.ravel(), Y.ravel())]
    lines += [f"{a} {b} {c}" for a, b, c in tris]
    lines += [f"{a} {b} {t}" for a, b, t in edges]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def _burgers2d_inflow(x, t):
    return burgers2d_exact(x[..., 0], x[..., 1], t)[..., None]


def _dmr_inflow(x, t):
    return double_mach_state(x[..., 0], x[..., 1], t)


def _dmr_bottom(mid):
    return "wall" if mid[0] >= 1.0 / 6.0 else "inflow"


def _channel_inflow(x, t):
    return np.broadcast_to(CHANNEL_INFLOW, x.shape[:-1] + (3,))


PRESETS: Dict[str, BenchmarkPreset] = {}


def _register(p: BenchmarkPreset):
    PRESETS[p.name] = p


_register(BenchmarkPreset(
    name="advect1d_mixed", make_law=lambda: Advection((1.0,), bounds=(0.0, 1.0)), kind="line",
    domain=((0.0, 1.0),), initial=_per_point(advect1d_mixed_initial, 1), dt=1e-3, t_final=1.0,
    resolution="dof", default_res=192, default_p=2, boundary={"periodic": True},
    exact=lambda x, t: advection_exact(advect1d_mixed_initial, x[..., 0], t)[..., None],
    invariant_bounds=(0.0, 1.0),
    description="step and smooth hill advected once around the periodic unit interval"))

_register(BenchmarkPreset(
    name="advect1d_smooth", make_law=lambda: Advection((1.0,)), kind="line",
    domain=((-1.0, 1.0),), initial=_per_point(gaussian_initial, 1), dt=1e-4, t_final=2.0,
    resolution="inv_h", default_res=24, default_p=1, boundary={"periodic": True},
    exact=lambda x, t: advection_exact(gaussian_initial, x[..., 0], t, 1.0, (-1.0, 1.0))[..., None],
    projection="l2", error_scale=0.5, table_res=(24, 32, 48, 64, 96, 128, 192),
    reference={
        ("dg", 1, 24): 1.27e-2, ("dg", 1, 32): 6.43e-3, ("dg", 1, 48): 2.26e-3,
        ("dg", 2, 24): 3.21e-4, ("dg", 2, 32): 8.28e-5, ("dg", 2, 48): 1.53e-5,
        ("lo", 1, 24): 9.43e-2, ("lo", 1, 32): 7.93e-2, ("lo", 1, 48): 6.05e-2,
        ("lo", 1, 64): 4.92e-2, ("lo", 1, 96): 3.58e-2, ("lo", 1, 128): 2.82e-2,
        ("lo", 1, 192): 1.98e-2,
        ("mcl", 1, 24): 1.04e-2, ("mcl", 1, 32): 5.69e-3, ("mcl", 1, 48): 2.36e-3,
        ("mcl", 1, 64): 1.27e-3, ("mcl", 1, 96): 5.08e-4, ("mcl", 1, 128): 2.59e-4,
        ("mcl", 1, 192): 1.01e-4,
    },
    description="Gaussian advected once around the periodic interval (-1, 1)"))

_register(BenchmarkPreset(
    name="burgers1d", make_law=lambda: Burgers(1), kind="line", domain=((0.0, 1.0),),
    initial=_per_point(sine_initial, 1), dt=4e-4, t_final=0.1, resolution="inv_h",
    default_res=48, default_p=1, boundary={"periodic": True},
    exact=lambda x, t: burgers1d_exact(x[..., 0], t)[..., None], projection="l2",
    invariant_bounds=(-1.0, 1.0), table_res=(48, 64, 96, 128, 192, 256, 384),
    reference={
        ("dg", 1, 48): 7.45e-4, ("dg", 2, 48): 1.60e-5, ("dg", 2, 64): 7.23e-6,
        ("lo", 1, 48): 1.62e-2, ("lo", 1, 64): 1.23e-2, ("lo", 1, 96): 8.39e-3,
        ("mcl", 1, 48): 1.29e-3, ("mcl", 1, 64): 7.68e-4, ("mcl", 1, 96): 3.44e-4,
        ("mcl", 1, 128): 1.94e-4, ("mcl", 1, 192): 8.41e-5, ("mcl", 1, 256): 4.69e-5,
        ("mcl", 1, 384): 2.04e-5,
    },
    description="sine wave before shock formation on the periodic unit interval"))

_register(BenchmarkPreset(
    name="burgers2d", make_law=lambda: Burgers(2, bounds=(-1.0, 0.8)), kind="quad",
    domain=((0.0, 1.0), (0.0, 1.0)),
    initial=lambda x: burgers2d_initial(x[..., 0], x[..., 1])[..., None], dt=1e-3, t_final=0.5,
    resolution="dof", default_res=128, default_p=1,
    boundary={s: "inflow" for s in ("left", "right", "bottom", "top")},
    inflow=_burgers2d_inflow, exact=lambda x, t: burgers2d_exact(x[..., 0], x[..., 1], t)[..., None],
    invariant_bounds=(-1.0, 0.8),
    reference={("mcl", 1, 128): 1.09e-2, ("dg", 1, 128): 9.67e-3, ("mcl", 3, 128): 1.28e-2},
    description="four-quadrant Riemann problem for the isotropic Burgers equation"))

_register(BenchmarkPreset(
    name="sod", make_law=lambda: Euler(1), kind="line", domain=((0.0, 1.0),),
    initial=_per_point(sod_initial, 3), dt=4e-4, t_final=0.231, resolution="dof",
    default_res=256, default_p=1, boundary={"left": "wall", "right": "wall"},
    description="Sod shock tube between reflecting walls"))

_register(BenchmarkPreset(
    name="double_mach", make_law=lambda: Euler(2), kind="quad", domain=((0.0, 4.0), (0.0, 1.0)),
    initial=lambda x: double_mach_state(x[..., 0], x[..., 1], 0.0), dt=5e-5, t_final=0.2,
    resolution="dof", default_res=96, default_p=1,
    boundary={"left": "inflow", "top": "inflow", "right": "outflow", "bottom": _dmr_bottom},
    inflow=_dmr_inflow, long=True,
    description="Mach 10 shock reflecting off a wedge-shaped wall"))

_register(BenchmarkPreset(
    name="dam_break", make_law=lambda: ShallowWater(2, g=9.81), kind="quad",
    domain=((-1.0, 1.0), (-1.0, 1.0)), initial=dam_break_initial, dt=1e-4, t_final=0.06,
    resolution="dof", default_res=256, default_p=1,
    boundary={s: "outflow" for s in ("left", "right", "bottom", "top")},
    invariant_bounds=(0.1, 1.0),
    description="radially symmetric dam break in shallow water"))

_register(BenchmarkPreset(
    name="channel", make_law=lambda: ShallowWater(2, g=0.16), kind="tri",
    domain=((-10.0, 80.0), (0.0, 40.0)),
    initial=lambda x: np.broadcast_to(CHANNEL_INFLOW, x.shape[:-1] + (3,)).copy(),
    dt=0.025, t_final=None, resolution="mesh", default_res=72, default_p=1,
    inflow=_channel_inflow, method="ssprk1", steady=True,
    description="supercritical flow in a symmetrically narrowing channel, marched to steady state"))


def get_preset(name: str) -> BenchmarkPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


# ---------------------------------------------------------------------------
# Setup helpers
# ---------------------------------------------------------------------------

def elements_per_direction(preset: BenchmarkPreset, p: int, res: int) -> Tuple[int, ...]:
    """Element counts per coordinate direction for a resolution value."""
    lengths = [b - a for a, b in preset.domain]
    if preset.resolution == "inv_h":
        return tuple(int(round(res * L)) for L in lengths)
    if preset.resolution == "dof":
        if res % (p + 1):
            raise ValueError(f"#DOF per direction {res} is not divisible by p + 1 = {p + 1}")
        n = res // (p + 1)
        if preset.name == "double_mach":
            return (4 * n, n)
        return (n,) * preset.dim
    raise ValueError(f"preset {preset.name} uses a generated mesh")


def build_mesh(preset: BenchmarkPreset, p: int, res: Optional[int] = None,
               mesh_text: Optional[str] = None) -> Mesh:
    res = preset.default_res if res is None else res
    if preset.kind == "tri":
        if mesh_text is None:
            mesh_text = generate_channel_mesh(res, 2 * (round(res * 0.4) // 2))
        return read_unstructured_tri_mesh(mesh_text)
    if mesh_text is not None:
        raise ValueError(f"preset {preset.name} uses a structured mesh")
    counts = elements_per_direction(preset, p, res)
    b = preset.boundary
    if preset.kind == "line":
        periodic = bool(b.get("periodic", False))
        return build_structured_line_mesh(counts[0], preset.domain[0], periodic=periodic,
                                          left=b.get("left", "outflow"), right=b.get("right", "outflow"))
    return build_structured_quad_mesh(counts[0], counts[1], preset.domain, boundary_spec=b)


def element_quadrature(space: DGSpace, n: int):
    """Reference points and weights (summing to the reference volume)."""
    x, w = gauss_legendre_01(n)
    if space.mesh.kind == "line":
        return x[:, None], w
    if space.mesh.kind == "quad":
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1), np.outer(w, w).ravel()
    return collapsed_triangle_rule(n)


def project_initial(preset: BenchmarkPreset, space: DGSpace, m: int) -> np.ndarray:
    """Bernstein coefficients of the initial data.

    ``"sample"`` uses point values at the Bernstein nodes as coefficients,
    which keeps the coefficients inside the range of the data.  ``"l2"`` is
    the element-wise L2 projection used for the smooth convergence studies.
    """
    if preset.projection == "sample":
        return space.sample(preset.initial, m)
    xq, wq = element_quadrature(space, space.p + 4)
    B = space.ref.eval(xq)
    vals = np.asarray(preset.initial(space.mesh.to_physical(xq)), dtype=float).reshape(space.E, len(wq), m)
    r = np.einsum("q,qi,eqm,e->eim", wq, B, vals, space.det)
    return solve_consistent_mass(space, r)


def l1_error(space: DGSpace, U: np.ndarray, exact: Callable, t: float,
             n_points: Optional[int] = None) -> np.ndarray:
    """Per-component ``||u(t) - u_h||_L1`` by element quadrature.

    The default rule has ``p + 2`` Gauss points per direction (exact for
    polynomials of degree ``2p + 2`` and beyond).
    """
    if exact is None:
        raise ValueError("no exact solution available for this problem")
    xq, wq = element_quadrature(space, n_points or space.p + 2)
    uh = np.einsum("qi,eim->eqm", space.ref.eval(xq), U)
    ue = np.asarray(exact(space.mesh.to_physical(xq), t), dtype=float).reshape(uh.shape)
    return np.einsum("q,e,eqm->m", wq, space.det, np.abs(uh - ue))


def eoc(errors: Sequence[float], inv_h: Sequence[float]) -> list:
    """Rates ``log(e_a / e_b) / log(h_a / h_b)`` between neighbours; NaN where undefined."""
    if len(errors) != len(inv_h) or len(errors) < 2:
        raise ValueError("need at least two (error, 1/h) pairs of equal length")
    out = []
    for (ea, ha), (eb, hb) in zip(zip(errors, inv_h), zip(errors[1:], inv_h[1:])):
        if ea <= 0 or eb <= 0 or ha == hb:
            out.append(float("nan"))
        else:
            out.append(math.log(ea / eb) / math.log(hb / ha))
    return out


@dataclass
class Problem:
    preset: BenchmarkPreset
    space: DGSpace
    law: ConservationLaw
    U0: np.ndarray
    semi: SemiDiscretization
    controller: TimeController
    res: int


def setup(name: str, scheme: str = "mcl", p: Optional[int] = None, res: Optional[int] = None,
          dt: Optional[float] = None, mesh_text: Optional[str] = None, auto_dt: bool = False,
          check_dt: bool = True) -> Problem:
    """Build mesh, space, law, initial state and time controller for a preset."""
    preset = get_preset(name)
    p = preset.default_p if p is None else p
    if p < 1:
        raise ValueError("polynomial degree must be >= 1")
    res = preset.default_res if res is None else res
    if res < 1:
        raise ValueError("resolution must be positive")
    law = preset.make_law()
    space = DGSpace(build_mesh(preset, p, res, mesh_text), p)
    U0 = project_initial(preset, space, law.m)
    semi = SemiDiscretization(space, law, scheme, inflow=preset.inflow)
    step = preset.dt if dt is None else dt
    if step <= 0:
        raise ValueError("time step must be positive")
    ctl = TimeController(method=preset.method, dt=None if auto_dt else step)
    if check_dt and not auto_dt:
        check_timestep(preset, space, law, U0, step)
    return Problem(preset, space, law, U0, semi, ctl, res)


def check_timestep(preset: BenchmarkPreset, space: DGSpace, law: ConservationLaw,
                   U0: np.ndarray, dt: float) -> float:
    """Raise if ``dt`` exceeds the IDP bound of the low-order scheme on ``U0``."""
    bound = max_idp_timestep(space, law, U0, 0.0, preset.inflow)
    if dt > bound * (1.0 + 1e-12):
        raise ValueError(f"time step {dt:g} exceeds the IDP bound {bound:.4g} for {preset.name}")
    return bound


def channel_symmetry_defect(space: DGSpace, U: np.ndarray) -> float:
    """Relative L1 distance between ``H(x, y)`` and ``H(x, 40 - y)``.

    Elements are paired through their mirrored centroids, which requires a
    mesh symmetric about the centre line such as :func:`generate_channel_mesh`.
    Returns the defect divided by the mean height.
    """
    from scipy.spatial import cKDTree

    centroid = space.node_x.mean(axis=1)
    mirrored = centroid * np.array([1.0, -1.0]) + np.array([0.0, 40.0])
    dist, partner = cKDTree(centroid).query(mirrored)
    if dist.max() > 1e-8 * 40.0:
        raise ValueError("mesh is not mirror symmetric about y = 20")
    H = U[..., 0].mean(axis=1)                   # element means of the Bernstein coefficients
    w = space.volume
    return float(np.sum(w * np.abs(H - H[partner])) / np.sum(w * H))
