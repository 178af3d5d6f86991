"""Explicit monotone time stepping for u_t + F(u, ∇u, ∇²u, K∩{u<u(x,t)}) = 0.

One step freezes the nonlocal term: the sublevel index is built from the
pre-step field and every node reads ``a = m(K ∩ {u < u(x)})`` from it. Forward
Euler with Godunov upwinding for first-order terms and central differences for
second-order terms; where the upwind slope falls below ``eps_grad`` an operator
that is singular at p = 0 is replaced by its limit μ(u).
"""
from __future__ import annotations

import io
import math
import time as _time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import (
    ScalarField,
    central_gradients,
    godunov_magnitude,
    hessians,
    one_sided_differences,
)
from .operators import Operator
from .sublevel import ObstacleSet, SublevelMeasureIndex, build_index


class SchemeError(RuntimeError):
    """Numerical failure of the time stepper."""


class CFLError(SchemeError):
    pass


@dataclass
class EvolveConfig:
    t_end: float
    cfl_first: float = 0.5
    cfl_second: float = 0.25
    eps_grad: float | None = None
    boundary: str = "one_sided_extrapolation"
    snapshot_times: Sequence[float] = ()
    c0: float | None = None
    tol_drift: float = 1e-9

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if not 0 < self.cfl_first <= 1:
            raise ValueError("cfl_first must lie in (0, 1]")
        if not 0 < self.cfl_second <= 0.5:
            raise ValueError("cfl_second must lie in (0, 0.5]")
        if self.eps_grad is not None and not self.eps_grad > 0:
            raise ValueError("eps_grad must be positive")
        if self.boundary != "one_sided_extrapolation":
            raise ValueError(f"unsupported boundary policy {self.boundary!r}")
        self.snapshot_times = tuple(sorted(float(t) for t in self.snapshot_times))


@dataclass
class StepDiagnostics:
    step: int
    time: float
    dt: float
    min: float
    max: float
    measure_mid: float
    wall: float


@dataclass
class EvolutionTrajectory:
    snapshots: list[tuple[float, ScalarField]] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1][1]

    def at(self, t: float, tol: float = 1e-12) -> ScalarField:
        for s, f in self.snapshots:
            if abs(s - t) <= tol * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,time,dt,min,max,measure_mid\n")
        for d in self.diagnostics:
            buf.write(f"{d.step},{d.time!r},{d.dt!r},{d.min!r},{d.max!r},{d.measure_mid!r}\n")
        return buf.getvalue()


def default_eps_grad(field: ScalarField) -> float:
    g = field.grid
    diameter = math.dist(g.lower, g.upper)
    scale = (field.max - field.min) / diameter
    return 1e-8 * (scale if scale > 0 else 1.0)


def _a_max(field: ScalarField, K: ObstacleSet | None) -> float:
    if K is None:
        return 0.0
    counted = float(K.membership(field.grid).sum()) * field.grid.cell_volume
    return max(K.measure_total, counted)


def cfl_dt(field: ScalarField, op: Operator, K: ObstacleSet | None, cfg: EvolveConfig,
           remaining: float | None = None) -> float:
    """min(cfl_first h / S, cfl_second h² / D, remaining)."""
    h = field.grid.h
    remaining = cfg.t_end if remaining is None else remaining
    S = op.first_order_speed_bound(field.min, field.max, _a_max(field, K), h)
    D = op.diffusion_bound(field.grid.dim)
    dt = remaining
    if S > 0:
        dt = min(dt, cfg.cfl_first * h / S)
    if D > 0:
        dt = min(dt, cfg.cfl_second * h * h / D)
    return dt


def _needs_hessian(op: Operator, dim: int) -> bool:
    return op.diffusion_bound(dim) > 0 or type(op).scheme_rate is Operator.scheme_rate


def step(field: ScalarField, op: Operator, K: ObstacleSet | None, dt: float,
         cfg: EvolveConfig | None = None, index: SublevelMeasureIndex | None = None,
         check_cfl: bool = True) -> ScalarField:
    """One forward-Euler step of the monotone scheme."""
    cfg = cfg or EvolveConfig(t_end=dt)
    if check_cfl:
        limit = cfl_dt(field, op, K, cfg, remaining=math.inf)
        if dt > limit * (1 + 1e-9):
            raise CFLError(f"dt={dt:g} exceeds the stability limit {limit:g}")
    u = field.values
    grid = field.grid
    if K is not None:
        index = index or build_index(field, K)
        a = index.measure_strict(u)
    else:
        a = np.zeros_like(u)
    dminus, dplus = one_sided_differences(u, grid.spacing)
    g_plus = godunov_magnitude(dminus, dplus, +1)
    g_minus = godunov_magnitude(dminus, dplus, -1)
    grad = central_gradients(u, grid.spacing)
    hess = hessians(u, grid.spacing) if _needs_hessian(op, grid.dim) else None
    rate = op.scheme_rate(u, g_plus, g_minus, grad, hess, a)
    if op.singular_at_zero:
        eps = cfg.eps_grad if cfg.eps_grad is not None else default_eps_grad(field)
        coef = op.first_order_coefficient(u, a)
        g_sel = np.where(coef >= 0, g_plus, g_minus)
        flat = (g_sel < eps) | (np.linalg.norm(grad, axis=-1) < eps)
        if flat.any():
            rate = np.where(flat, op.mu(u), rate)
    new = u - dt * rate
    if not np.all(np.isfinite(new)):
        raise SchemeError("non-finite value produced by the update")
    return field.with_values(new)


def _check_initial(u0: ScalarField, cfg: EvolveConfig) -> None:
    c0 = cfg.c0 if cfg.c0 is not None else u0.c0
    if c0 is not None and u0.min < c0:
        raise ValueError(f"initial data violates the positivity floor c0={c0}")
    interior = u0.values[~u0.grid.boundary_mask()]
    if interior.size and u0.values[u0.grid.boundary_mask()].min() <= interior.min():
        raise ValueError("initial data is not coercive on the box (boundary min <= interior min)")


def _targets(cfg: EvolveConfig) -> list[float]:
    ts = {t for t in cfg.snapshot_times if 0 < t <= cfg.t_end}
    ts.add(cfg.t_end)
    return sorted(t for t in ts if t > 0)


def evolve_shared(fields: Sequence[ScalarField], op: Operator, K: ObstacleSet | None,
                  cfg: EvolveConfig, check_initial: bool = True,
                  on_step=None) -> list[EvolutionTrajectory]:
    """Evolve several initial fields with one common dt schedule.

    Each step uses the smallest stable dt over all fields, so that discrete
    comparison between runs is made at matched times. ``on_step(n, t, fields)``
    is called after every step.
    """
    if check_initial:
        for f in fields:
            _check_initial(f, cfg)
    c0 = cfg.c0
    current = list(fields)
    trajs = [EvolutionTrajectory(snapshots=[(0.0, f)]) for f in fields]
    t = 0.0
    n = 0
    mu_max = 0.0
    for target in _targets(cfg):
        while t < target:
            remaining = target - t
            dt = min(cfl_dt(f, op, K, cfg, remaining=remaining) for f in current)
            if dt <= 0:
                raise SchemeError("time step collapsed to zero")
            tick = _time.perf_counter()
            updated = []
            for f in current:
                index = build_index(f, K) if K is not None else None
                updated.append(step(f, op, K, dt, cfg, index=index, check_cfl=False))
                mu_max = max(mu_max, float(np.max(np.abs(op.mu(f.values)))))
            wall = _time.perf_counter() - tick
            current = updated
            n += 1
            t = target if dt >= remaining else t + dt
            if on_step is not None:
                on_step(n, t, current)
            for traj, f in zip(trajs, current):
                mid = float(np.median(f.values))
                mm = build_index(f, K).measure_strict(mid) if K is not None else 0.0
                traj.diagnostics.append(StepDiagnostics(n, t, dt, f.min, f.max, mm, wall))
        for traj, f in zip(trajs, current):
            traj.snapshots.append((t, f))
            floor = c0 if c0 is not None else f.c0
            if floor is not None and f.min < floor - cfg.tol_drift:
                traj.flags.append(f"t={t!r}: min {f.min!r} below c0={floor!r}")
    for traj in trajs:
        traj.mu_max = mu_max
    return trajs


def evolve(u0: ScalarField, op: Operator, K: ObstacleSet | None, cfg: EvolveConfig) -> EvolutionTrajectory:
    return evolve_shared([u0], op, K, cfg)[0]


# ---------------------------------------------------------------------------
# radial reduction of the nonlocal eikonal example


def radial_evolve(phi0: ScalarField, R: float, cfg: EvolveConfig, speed: str = "frozen") -> EvolutionTrajectory:
    """Solve φ_t + c(r)|φ_r| = 0 on [0, r_max] with no flux at r = 0.

    ``speed="frozen"`` uses c(r) = π min(R², r²). ``"self_consistent"``
    recomputes c from the profile as the area of {φ < φ(r)} inside the disk of
    radius R, with weight 2πr Δr per radial cell.
    """
    if phi0.grid.dim != 1:
        raise ValueError("radial profile must be one-dimensional")
    if phi0.grid.lower[0] != 0.0:
        raise ValueError("radial grid must start at r = 0")
    if speed not in ("frozen", "self_consistent"):
        raise ValueError(f"unknown speed mode {speed!r}")
    if np.any(np.diff(phi0.values) < 0):
        msg = "initial profile decreases somewhere; the radial reduction is invalid"
        if speed == "frozen":
            raise ValueError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    r = phi0.grid.axis(0)
    dr = phi0.grid.spacing[0]
    inside = r <= R
    frozen = np.pi * np.minimum(R * R, r * r)
    weights = 2 * np.pi * r[inside] * dr
    s_max = max(np.pi * R * R, float(weights.sum()))

    traj = EvolutionTrajectory(snapshots=[(0.0, phi0)])
    u = phi0.values.copy()
    t = 0.0
    n = 0
    for target in _targets(cfg):
        while t < target:
            remaining = target - t
            dt = min(remaining, cfg.cfl_first * dr / s_max)
            if speed == "frozen":
                c = frozen
            else:
                c = SublevelMeasureIndex(u[inside], weights).measure_strict(u)
            dm = np.empty_like(u)
            dp = np.zeros_like(u)
            dm[1:] = (u[1:] - u[:-1]) / dr
            dm[0] = (u[0] - u[1]) / dr  # mirror ghost at r = -dr
            dp[:-1] = dm[1:]
            g = np.sqrt(np.maximum(dm, 0.0) ** 2 + np.minimum(dp, 0.0) ** 2)
            u = u - dt * c * g
            n += 1
            t = target if dt >= remaining else t + dt
            traj.diagnostics.append(StepDiagnostics(n, t, dt, float(u.min()), float(u.max()), 0.0, 0.0))
        traj.snapshots.append((t, phi0.with_values(u)))
    return traj
