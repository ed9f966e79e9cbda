"""Time integration of the surface diffusion flow and the run loop.

Two steppers:
  * explicit: forward Euler on the exact normal velocity (lap H) nu;
    faithful to the flow law, used for verification runs
  * semi_implicit: linearly implicit vector bilaplacian step
    (M + dt L M^{-1} L) x_new = M x_old per coordinate, the production
    stepper; agrees with the explicit velocity to leading order plus
    tangential and lower-order terms

Both scale exactly under the parabolic rescaling x -> lambda x,
dt -> lambda^4 dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .mesh import (
    DEGENERATE_AREA_FACTOR,
    TriangleMesh,
    edge_lengths,
    face_areas_normals,
)
from .geometry import (
    cotan_laplacian,
    curvature_field,
    enclosed_volume,
    enclosed_volume_of,
    lumped_mass,
)
from . import monitors

EXPLICIT = "explicit"
SEMI_IMPLICIT = "semi_implicit"
FIXED = "fixed"
CFL = "cfl"

# step outcome / stop reasons
OK = "ok"
DIVERGED = "diverged"
T_END = "t_end"
MAX_STEPS = "max_steps"
SPHERICITY = "sphericity"
QUALITY_FLOOR = "quality_floor"
CURVATURE_CEILING = "curvature_ceiling"

SINGULARITY_STOPS = frozenset({QUALITY_FLOOR, CURVATURE_CEILING})


@dataclass(frozen=True)
class FlowState:
    """Mesh plus simulation clock; operators are built lazily and cached.

    States are immutable, so a cache always matches the vertex positions
    it was built from.
    """

    mesh: TriangleMesh
    t: float = 0.0
    step: int = 0

    @cached_property
    def mass(self):
        return lumped_mass(self.mesh)

    @cached_property
    def lap(self):
        return cotan_laplacian(self.mesh)

    @cached_property
    def curvature(self):
        return curvature_field(self.mesh, self.mass, self.lap)

    def advanced(self, mesh: TriangleMesh, dt: float) -> "FlowState":
        return FlowState(mesh=mesh, t=self.t + dt, step=self.step + 1)


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = SEMI_IMPLICIT
    dt_policy: str = CFL
    dt: float = 1e-4
    cfl_sigma: float = 0.1
    t_end: float = 1.0
    max_steps: int = 1000000
    volume_correction: bool = False
    linear_tol: float = 1e-10
    linear_max_iter: int = 0  # 0 means 10 * vertex count
    snapshot_every: int = 100
    monitor_radii: tuple = ()
    eps0: float = 8.0 * math.pi
    stop_sphericity: float = 1.0  # sphericity < 1 on polyhedra: disabled
    quality_floor: float = 0.02
    curvature_ceiling: float = 2.0

    def __post_init__(self):
        if self.scheme not in (EXPLICIT, SEMI_IMPLICIT):
            raise ValueError(f"unknown scheme: {self.scheme}")
        if self.dt_policy not in (FIXED, CFL):
            raise ValueError(f"unknown dt policy: {self.dt_policy}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_sigma <= 1:
            raise ValueError("cfl_sigma must lie in (0, 1]")
        if not 0 < self.linear_tol <= 1e-4:
            raise ValueError("linear_tol must lie in (0, 1e-4]")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        object.__setattr__(self, "monitor_radii", tuple(float(r) for r in self.monitor_radii))


@dataclass(frozen=True)
class StepOutcome:
    accepted: bool
    dt_used: float
    displacement_max: float
    linear_iters: int
    reason: str


@dataclass
class Trajectory:
    records: list
    snapshots: dict
    stop_reason: str
    config: SolverConfig | None = None
    initial_volume: float = 0.0


def choose_dt(state: FlowState, config: SolverConfig) -> float:
    """FIXED passes dt through; CFL uses sigma * h_min^4 (explicit, fourth
    order) or sigma * h_min^2 (semi-implicit)."""
    if config.dt_policy == FIXED:
        return config.dt
    h_min = float(edge_lengths(state.mesh).min())
    if config.scheme == EXPLICIT:
        return config.cfl_sigma * h_min**4
    return config.cfl_sigma * h_min**2


def _mesh_ok(vertices: np.ndarray, mesh: TriangleMesh) -> bool:
    if not np.isfinite(vertices).all():
        return False
    trial = mesh.with_vertices(vertices)
    areas, _ = face_areas_normals(trial)
    hmax = float(edge_lengths(trial).max())
    return bool((areas > DEGENERATE_AREA_FACTOR * hmax**2).all())


def _rejected(dt: float) -> StepOutcome:
    return StepOutcome(
        accepted=False, dt_used=dt, displacement_max=0.0, linear_iters=0, reason=DIVERGED
    )


def step_explicit(state: FlowState, dt: float):
    """x_i <- x_i + dt * (lap H)_i * nu_i; purely normal velocity."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    curv = state.curvature
    disp = (dt * curv.lapH)[:, None] * curv.normal
    new_vertices = state.mesh.vertices + disp
    if not _mesh_ok(new_vertices, state.mesh):
        return state, _rejected(dt)
    outcome = StepOutcome(
        accepted=True,
        dt_used=dt,
        displacement_max=float(np.sqrt(np.sum(disp**2, axis=1)).max()),
        linear_iters=0,
        reason=OK,
    )
    return state.advanced(state.mesh.with_vertices(new_vertices), dt), outcome


def step_semi_implicit(
    state: FlowState, dt: float, linear_tol: float = 1e-10, linear_max_iter: int = 0
):
    """Solve (M + dt L M^{-1} L) x_new = M x_old per coordinate by
    Jacobi-preconditioned conjugate gradients, L frozen at x_old."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = state.mass.m
    L = state.lap.matrix
    n = len(m)
    A = (sparse.diags(m) + dt * (L @ sparse.diags(1.0 / m) @ L)).tocsr()
    precond = sparse.diags(1.0 / A.diagonal())
    maxiter = linear_max_iter if linear_max_iter > 0 else 10 * n
    x_old = state.mesh.vertices
    new_vertices = np.empty_like(x_old)
    iters = 0
    for k in range(3):
        count = [0]

        def _cb(_xk, count=count):
            count[0] += 1

        sol, info = cg(
            A,
            m * x_old[:, k],
            x0=x_old[:, k].copy(),
            rtol=linear_tol,
            atol=0.0,
            maxiter=maxiter,
            M=precond,
            callback=_cb,
        )
        iters += count[0]
        if info != 0:
            return state, _rejected(dt)
        new_vertices[:, k] = sol
    if not _mesh_ok(new_vertices, state.mesh):
        return state, _rejected(dt)
    disp = new_vertices - x_old
    outcome = StepOutcome(
        accepted=True,
        dt_used=dt,
        displacement_max=float(np.sqrt(np.sum(disp**2, axis=1)).max()),
        linear_iters=iters,
        reason=OK,
    )
    return state.advanced(state.mesh.with_vertices(new_vertices), dt), outcome


def correct_volume(state: FlowState, target_volume: float) -> FlowState:
    """Offset vertices along their normals by one scalar restoring the
    enclosed volume, found by bisection to 1e-12 relative."""
    v0 = enclosed_volume(state.mesh)
    if abs(v0 - target_volume) > 0.1 * abs(target_volume):
        raise monitors.NumericsError(
            f"volume drifted beyond 10% at step {state.step}: {v0} vs {target_volume}"
        )
    tol = 1e-12 * abs(target_volume)
    if abs(v0 - target_volume) <= tol:
        return state
    nu = state.curvature.normal
    x = state.mesh.vertices
    faces = state.mesh.faces

    def vol_at(s):
        return enclosed_volume_of(x + s * nu, faces)

    # volume increases along outward normals; bracket around the linear guess
    area = state.mass.total_area
    guess = (target_volume - v0) / area
    span = 2.0 * abs(guess) + 1e-30
    lo, hi = -span, span
    expansions = 0
    while (vol_at(lo) - target_volume) * (vol_at(hi) - target_volume) > 0:
        span *= 2.0
        lo, hi = -span, span
        expansions += 1
        if expansions > 60:
            raise monitors.NumericsError(
                f"volume correction bracket failure at step {state.step}"
            )
    s = 0.0
    for _ in range(200):
        s = 0.5 * (lo + hi)
        v = vol_at(s)
        if abs(v - target_volume) <= tol:
            break
        if (v - target_volume) * (vol_at(lo) - target_volume) < 0:
            hi = s
        else:
            lo = s
    return FlowState(
        mesh=state.mesh.with_vertices(x + s * nu), t=state.t, step=state.step
    )


def _curvature_scale_trigger(state: FlowState) -> float:
    """max over vertices of sqrt(|A|^2) times the longest incident edge."""
    mesh = state.mesh
    he = mesh.half_edges
    lens = np.linalg.norm(mesh.vertices[he[:, 0]] - mesh.vertices[he[:, 1]], axis=1)
    local_h = np.zeros(mesh.num_vertices)
    np.maximum.at(local_h, he[:, 0], lens)
    np.maximum.at(local_h, he[:, 1], lens)
    return float((np.sqrt(state.curvature.A_sq) * local_h).max())


def run(initial: TriangleMesh, config: SolverConfig) -> Trajectory:
    """Step until t_end, max_steps, or a stop trigger; a diagnostics record
    per accepted step, a snapshot every snapshot_every steps."""
    state = FlowState(mesh=initial)
    target_volume = enclosed_volume(initial)
    records = [monitors.diagnostics(state, config.monitor_radii, config.eps0)]
    snapshots = {0: initial}
    rejects = 0
    stop = None
    while stop is None:
        if state.t >= config.t_end:
            stop = T_END
            break
        if state.step >= config.max_steps:
            stop = MAX_STEPS
            break
        dt = choose_dt(state, config)
        if config.scheme == EXPLICIT:
            state_new, outcome = step_explicit(state, dt)
        else:
            state_new, outcome = step_semi_implicit(
                state, dt, config.linear_tol, config.linear_max_iter
            )
        if not outcome.accepted:
            rejects += 1
            if rejects >= 3:
                stop = DIVERGED
                break
            continue
        rejects = 0
        try:
            if config.volume_correction:
                state_new = correct_volume(state_new, target_volume)
            rec = monitors.diagnostics(state_new, config.monitor_radii, config.eps0)
        except monitors.NumericsError:
            stop = DIVERGED
            break
        state = state_new
        records.append(rec)
        if state.step % config.snapshot_every == 0:
            snapshots[state.step] = state.mesh
        if rec.sphericity >= config.stop_sphericity:
            stop = SPHERICITY
        elif rec.quality < config.quality_floor:
            stop = QUALITY_FLOOR
        elif _curvature_scale_trigger(state) > config.curvature_ceiling:
            stop = CURVATURE_CEILING
    if state.step not in snapshots:
        snapshots[state.step] = state.mesh
    return Trajectory(
        records=records,
        snapshots=snapshots,
        stop_reason=stop,
        config=config,
        initial_volume=target_volume,
    )
