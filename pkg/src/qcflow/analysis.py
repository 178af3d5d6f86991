"""Field-level verdicts and the experiments built on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .evolve import EvolutionTrajectory, EvolveConfig, evolve, evolve_shared
from .fields import ScalarField, interpolate
from .operators import Operator
from .reports import ViolationReport
from .sublevel import ObstacleSet

DIRECTIONS_2D = ((1, 0), (0, 1), (1, 1), (1, -1))
DEFAULT_LAMBDAS = (0.25, 0.5, 0.75)


def _phys(field: ScalarField, idx) -> list[float]:
    g = field.grid
    return [g.lower[k] + float(idx[k]) * g.spacing[k] for k in range(g.dim)]


def _as2d(field: ScalarField) -> np.ndarray:
    v = np.asarray(field.values, dtype=float)
    return v.reshape(-1, 1) if v.ndim == 1 else v


def is_quasiconvex(field: ScalarField, tol: float = 0.0, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                   exhaustive: bool = False, backend: str | None = None) -> ViolationReport:
    """Test u(λy+(1−λ)z) ≤ max{u(y), u(z)} on sampled triples.

    Node pairs run along the axes and both diagonals (all node pairs when
    ``exhaustive``); the combination point is interpolated. A margin is
    u(combination) − max(endpoint values).
    """
    u = _as2d(field)
    if exhaustive:
        dirs = [None]
    elif field.grid.dim == 1:
        dirs = [(1, 0)]
    else:
        dirs = list(DIRECTIONS_2D)
    worst = -np.inf
    count = 0
    found = []
    for d in dirs:
        w, wit, c = kernels.qc_scan(u, lambdas, tol, d, backend)
        count += c
        worst = max(worst, w)
        if wit is not None:
            found.append((w, wit, d))
    witnesses = []
    for w, (yi, yj, zi, zj, lam), d in sorted(found, key=lambda e: -e[0]):
        y = (yi, yj)[: field.grid.dim]
        z = (zi, zj)[: field.grid.dim]
        xi = [lam * a + (1 - lam) * b for a, b in zip(y, z)]
        py, pz, px = _phys(field, y), _phys(field, z), _phys(field, xi)
        vx = float(interpolate(field, np.array([px]))[0])
        witnesses.append({
            "points": [py, pz, px],
            "values": [float(field.values[tuple(y)]), float(field.values[tuple(z)]), vx],
            "lambda": lam,
            "direction": None if d is None else list(d),
            "margin": float(w),
        })
    return ViolationReport(float(worst), float(tol), witnesses, name="quasiconvexity",
                           n_violations=int(count))


def second_differences(field: ScalarField, axis: int) -> np.ndarray:
    """Δ²u/h² along one axis at nodes with both neighbours."""
    v = np.moveaxis(np.asarray(field.values, dtype=float), axis, 0)
    h = field.grid.spacing[axis]
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    return np.moveaxis(d2, 0, axis)


def is_convex_1d_sections(field: ScalarField, tol: float = 1.0, mask=None,
                          n_witnesses: int = 5) -> ViolationReport:
    """Convexity of every axis-aligned grid line.

    A section is nonconvex at a node when Δ²u < −tol·h². The margin reported
    is −Δ²u/h², so the report fails exactly when some margin exceeds ``tol``.
    ``mask`` restricts the tested centre nodes.
    """
    g = field.grid
    worst = -np.inf
    cands = []
    count = 0
    for k in range(g.dim):
        marg = -second_differences(field, k)
        sl = [slice(None)] * g.dim
        sl[k] = slice(1, -1)
        if mask is not None:
            marg = np.where(np.asarray(mask)[tuple(sl)], marg, -np.inf)
        count += int(np.sum(marg > tol))
        if marg.size == 0:
            continue
        flat = np.argsort(marg, axis=None)[::-1][:n_witnesses]
        for f in flat:
            idx = list(np.unravel_index(f, marg.shape))
            idx[k] += 1
            m = float(marg[tuple(np.unravel_index(f, marg.shape))])
            if not np.isfinite(m):
                continue
            worst = max(worst, m)
            lo, hi = list(idx), list(idx)
            lo[k] -= 1
            hi[k] += 1
            cands.append({
                "points": [_phys(field, lo), _phys(field, idx), _phys(field, hi)],
                "values": [float(field.values[tuple(lo)]), float(field.values[tuple(idx)]),
                           float(field.values[tuple(hi)])],
                "axis": k,
                "margin": m,
            })
    cands.sort(key=lambda w: -w["margin"])
    return ViolationReport(float(worst), float(tol), cands[:n_witnesses], name="convexity",
                           n_violations=count)


@dataclass
class PreservationRow:
    time: float
    quasiconvexity: ViolationReport
    convexity: ViolationReport

    def to_dict(self) -> dict:
        return {"time": self.time, "quasiconvexity": self.quasiconvexity.to_dict(),
                "convexity": self.convexity.to_dict()}


@dataclass
class PreservationResult:
    rows: list[PreservationRow]
    trajectory: EvolutionTrajectory = field(repr=False)
    qc_tol: float = 0.0

    @property
    def quasiconvex_everywhere(self) -> bool:
        return all(r.quasiconvexity.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {"qc_tol": self.qc_tol, "rows": [r.to_dict() for r in self.rows]}


def preservation_experiment(u0: ScalarField, op: Operator, K: ObstacleSet | None, cfg: EvolveConfig,
                            times: Sequence[float] | None = None, qc_tol: float | None = None,
                            convex_tol: float = 1.0, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                            check_initial: bool = True) -> PreservationResult:
    """Evolve u0 and test quasiconvexity and convexity at each snapshot.

    ``qc_tol`` defaults to 4h.
    """
    qc_tol = 4 * u0.grid.h if qc_tol is None else qc_tol
    if check_initial:
        r0 = is_quasiconvex(u0, qc_tol, lambdas)
        if not r0.passed:
            raise ValueError(f"initial data is not quasiconvex (margin {r0.worst_margin:g})")
    if times is not None:
        cfg = EvolveConfig(**{**cfg.__dict__, "snapshot_times": tuple(times)})
    traj = evolve(u0, op, K, cfg)
    wanted = list(cfg.snapshot_times) or [cfg.t_end]
    rows = []
    for t in wanted:
        f = traj.at(t)
        rows.append(PreservationRow(t, is_quasiconvex(f, qc_tol, lambdas), is_convex_1d_sections(f, convex_tol)))
    return PreservationResult(rows, traj, qc_tol)


def comparison_experiment(u0: ScalarField, v0: ScalarField, op: Operator, K: ObstacleSet | None,
                          cfg: EvolveConfig) -> float:
    """Max over steps and nodes of u − v under a shared dt schedule."""
    if np.any(u0.values > v0.values):
        raise ValueError("comparison needs u0 <= v0 pointwise")
    worst = [float(np.max(u0.values - v0.values))]

    def track(n, t, fields):
        worst[0] = max(worst[0], float(np.max(fields[0].values - fields[1].values)))

    evolve_shared([u0, v0], op, K, cfg, check_initial=False, on_step=track)
    return worst[0]


def sublevel_boundary(field: ScalarField, level: float) -> np.ndarray:
    """Physical coordinates of nodes in {u < level} with an axis neighbour outside."""
    inside = field.values < level
    edge = np.zeros_like(inside)
    for k in range(field.grid.dim):
        for s in (1, -1):
            nb = np.roll(inside, s, axis=k)
            sl = [slice(None)] * field.grid.dim
            sl[k] = 0 if s == 1 else -1
            nb[tuple(sl)] = True  # the box edge does not count as outside
            edge |= inside & ~nb
    return field.grid.points()[edge]


def grid_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    da = cKDTree(b).query(a)[0].max()
    db = cKDTree(a).query(b)[0].max()
    return float(max(da, db))


def relabel_experiment(u0: ScalarField, g: Callable, g_inv: Callable, op: Operator, K: ObstacleSet | None,
                       cfg: EvolveConfig, levels: Sequence[float]) -> ViolationReport:
    """Level-set drift between evolve(g∘u0) and the relabeled base run.

    ``levels`` are values of the relabeled field. The report tolerance is 2h.
    """
    if not op.geometric:
        raise ValueError(f"operator {op.name!r} is not geometric")
    v0 = u0.with_values(g(u0.values))
    base, rel = evolve_shared([u0, v0], op, K, cfg, check_initial=False)
    table = []
    worst = 0.0
    for (t, fu), (_, fv) in zip(base.snapshots, rel.snapshots):
        for lev in levels:
            d = grid_hausdorff(sublevel_boundary(fv, lev), sublevel_boundary(fu, float(g_inv(lev))))
            table.append({"time": t, "level": float(lev), "drift": d})
            worst = max(worst, d)
    wit = [{"points": [], "values": [row["time"], row["level"]], "margin": row["drift"]}
           for row in sorted(table, key=lambda r: -r["drift"])[:5]]
    return ViolationReport(worst, 2 * u0.grid.h, wit, name="relabel", extra={"table": table})
