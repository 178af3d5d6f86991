"""Closed-form references and subsolution barriers.

The radial example: K is the closed disk of radius R and u₀ = |x| + 1 under
u_t + |∇u| m(K ∩ {u < u(x,t)}) = 0. Its solution and optimal inward
trajectories are known in closed form. The second half builds explicit
subsolutions φ for three operator families and checks them on a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import GridSpec, ScalarField
from .operators import (
    ArctanShifted,
    Isotropic,
    Operator,
    Profile,
    SurfaceEnergy,
)
from .reports import ViolationReport
from .sublevel import ObstacleSet, SublevelMeasureIndex


@dataclass(frozen=True)
class ExampleParams:
    R: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be nonnegative")


def example_radial_profile(r, t: float, R: float = 1.0):
    """Three-branch closed form as a function of the radius."""
    ExampleParams(R)
    _check_time(t)
    r = np.abs(np.asarray(r, dtype=float))
    front = R + math.pi * R * R * t
    inner = r / (1.0 + math.pi * r * t) + 1.0
    with np.errstate(divide="ignore"):
        middle = R * R / (math.pi * R * R * t - r + 2.0 * R) + 1.0
    outer = r - math.pi * R * R * t + 1.0
    out = np.where(r <= R, inner, np.where(r <= front, middle, outer))
    return float(out) if out.ndim == 0 else out


def exact_example_solution(x, t: float, R: float = 1.0):
    """Closed-form solution at point(s) ``x`` (coordinates on the last axis)."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim == 0 else np.linalg.norm(x, axis=-1)
    return example_radial_profile(r, t, R)


def example_field(grid: GridSpec, t: float, R: float = 1.0) -> ScalarField:
    return ScalarField(grid, exact_example_solution(grid.points(), t, R), c0=1.0)


def optimal_trajectory(r, t, R: float = 1.0):
    """Endpoint γ*(t) of the fastest inward path started at radius r.

    Inside the disk γ' = −πγ²; outside it γ' = −πR², switching at
    t̃ = (r − R)/(πR²).
    """
    ExampleParams(R)
    _check_time(t)
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    front = R + math.pi * R * R * t
    inner = r / (1.0 + math.pi * r * t)
    with np.errstate(divide="ignore"):
        middle = R * R / (math.pi * R * R * t - r + 2.0 * R)
    outer = r - math.pi * R * R * t
    out = np.where(r <= R, inner, np.where(r <= front, middle, outer))
    return float(out) if out.ndim == 0 else out


def value_from_control(r, t: float, R: float, phi0: Callable, check_points: int = 257):
    """φ(r,t) = φ₀(γ*(t)) for a nondecreasing profile φ₀."""
    r_arr = np.asarray(r, dtype=float)
    s = np.linspace(0.0, max(float(np.max(r_arr)), R), check_points)
    if np.any(np.diff(np.asarray(phi0(s), dtype=float)) < 0):
        raise ValueError("phi0 must be nondecreasing for the trajectory shortcut")
    return phi0(optimal_trajectory(r_arr, t, R))


# ---------------------------------------------------------------------------
# subsolutions


@dataclass(frozen=True)
class AffineSigma:
    """σ(s) = c0 + slope·s."""

    c0: float = 1.0
    slope: float = 1.0

    def __post_init__(self):
        if not (self.c0 > 0 and self.slope > 0):
            raise ValueError("sigma needs c0 > 0 and slope > 0")

    def __call__(self, s):
        return self.c0 + self.slope * np.asarray(s, dtype=float)

    def d1(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.slope)

    def d2(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    @property
    def inf_d1(self) -> float:
        return self.slope


VARIANTS = ("s51", "s52", "s53")


@dataclass(frozen=True)
class SubsolutionSpec:
    """Parameters of one barrier construction.

    ``s51``: φ = σ(max{γ(x) − Ct, 0}) with C = sup|∇γ|(|a| + b m(K)).
    ``s52``: γ = |x| and C = sup V / inf σ' + m(K).
    ``s53``: φ = k max{|x| − R − a k^(α−1) t, 0} + c₀.
    ``C_scale`` multiplies the derived C (1 for the genuine barrier).
    """

    variant: str
    sigma: AffineSigma = field(default_factory=AffineSigma)
    gamma: SurfaceEnergy = field(default_factory=Isotropic)
    a: float = 0.0
    b: float = 1.0
    c: float = 0.0
    mK: float = math.pi
    V: Profile = field(default_factory=ArctanShifted)
    k: float = 1.0
    R: float = 1.0
    c0: float = 1.0
    a_coef: float = 1.0
    alpha: float = 0.5
    n: int = 2
    C_scale: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.mK < 0:
            raise ValueError("m(K) must be nonnegative")
        if self.variant == "s53":
            if not (self.k > 0 and self.R > 0 and self.c0 > 0):
                raise ValueError("s53 needs k, R, c0 > 0")
            if not 0 < self.alpha < 1:
                raise ValueError("alpha must lie in (0, 1)")
        if self.n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @property
    def floor(self) -> float:
        return self.c0 if self.variant == "s53" else self.sigma.c0


@dataclass
class Subsolution:
    """Piecewise-smooth φ(x, t) with analytic derivatives on its smooth part.

    ``phase(x, t)`` is the argument of max{·, 0}; the kink is where it
    vanishes and ``phase_lip`` bounds its spatial gradient.
    """

    spec: SubsolutionSpec
    C: float
    _phase: Callable
    _phase_grad: Callable
    _phase_hess: Callable
    _phase_t: float
    _outer: Callable
    _outer_d1: Callable
    _outer_d2: Callable
    phase_lip: float

    def phase(self, x, t):
        return self._phase(np.asarray(x, dtype=float), t)

    def __call__(self, x, t):
        return self._outer(np.maximum(self.phase(x, t), 0.0))

    def value(self, x, t):
        return self(x, t)

    def derivatives(self, x, t):
        """(φ, ∇φ, ∇²φ, φ_t) with the flat branch where phase ≤ 0."""
        x = np.asarray(x, dtype=float)
        s = self.phase(x, t)
        on = s > 0
        sp = np.maximum(s, 0.0)
        d1 = np.where(on, self._outer_d1(sp), 0.0)
        d2 = np.where(on, self._outer_d2(sp), 0.0)
        g = self._phase_grad(x)
        H = self._phase_hess(x)
        grad = d1[..., None] * g
        hess = d2[..., None, None] * g[..., :, None] * g[..., None, :] + d1[..., None, None] * H
        phi_t = d1 * self._phase_t
        return self._outer(sp), grad, hess, phi_t


def _radial_parts(x):
    r = np.linalg.norm(x, axis=-1)
    safe = np.where(r > 0, r, 1.0)[..., None]
    g = x / safe
    e = g[..., :, None] * g[..., None, :]
    H = (np.eye(x.shape[-1]) - e) / safe[..., None]
    return r, g, H


def make_subsolution(spec: SubsolutionSpec) -> Subsolution:
    """Build φ and its constant C from a spec."""
    v = spec.variant
    if v == "s51":
        gam = spec.gamma
        lip = 1.0 if isinstance(gam, Isotropic) else gam.sup_grad(spec.n)
        C = lip * (abs(spec.a) + spec.b * spec.mK)
    elif v == "s52":
        gam = Isotropic()
        lip = 1.0
        C = spec.V.sup / spec.sigma.inf_d1 + spec.mK
    else:
        gam = Isotropic()
        lip = 1.0
        C = spec.a_coef * spec.k ** (spec.alpha - 1.0)
    C *= spec.C_scale

    if v == "s53":
        shift = spec.R

        def phase(x, t):
            return np.linalg.norm(x, axis=-1) - shift - C * t

        def pgrad(x):
            return _radial_parts(x)[1]

        def phess(x):
            return _radial_parts(x)[2]

        k, c0 = spec.k, spec.c0
        outer = lambda s: k * np.asarray(s, dtype=float) + c0  # noqa: E731
        outer_d1 = lambda s: np.full_like(np.asarray(s, dtype=float), k)  # noqa: E731
        outer_d2 = lambda s: np.zeros_like(np.asarray(s, dtype=float))  # noqa: E731
    else:
        if isinstance(gam, Isotropic):
            def phase(x, t):
                return np.linalg.norm(x, axis=-1) - C * t

            def pgrad(x):
                return _radial_parts(x)[1]

            def phess(x):
                return _radial_parts(x)[2]
        else:
            def phase(x, t):
                return gam.value(x) - C * t

            def pgrad(x):
                return gam.grad(np.where(np.linalg.norm(x, axis=-1, keepdims=True) > 0, x, 1.0))

            def phess(x):
                return gam.hess(np.where(np.linalg.norm(x, axis=-1, keepdims=True) > 0, x, 1.0))

        outer, outer_d1, outer_d2 = spec.sigma, spec.sigma.d1, spec.sigma.d2
    return Subsolution(spec, float(C), phase, pgrad, phess, -float(C), outer, outer_d1, outer_d2, lip)


def _measure_index(grid: GridSpec, K: ObstacleSet, values: np.ndarray) -> SublevelMeasureIndex:
    """Index over K's nodes with weights normalised to the exact m(K)."""
    mask = K.membership(grid)
    count = int(mask.sum())
    if count == 0:
        return SublevelMeasureIndex(np.empty(0), np.empty(0))
    w = np.full(count, K.measure_total / count)
    return SublevelMeasureIndex(values[mask], w)


def subsolution_residual(sub: Subsolution, op: Operator, K: ObstacleSet | None, grid: GridSpec, t: float):
    """φ_t + F(φ, ∇φ, ∇²φ, m(K∩{φ<φ(x,t)})) at every node, plus the kink mask.

    Nodes within half a cell diagonal of the kink are excluded. At nodes where
    ∇φ = 0 an operator singular at p = 0 uses μ(φ).
    """
    x = grid.points()
    phi, grad, hess, phi_t = sub.derivatives(x, t)
    if K is not None:
        a = _measure_index(grid, K, phi).measure_strict(phi)
    else:
        a = np.zeros_like(phi)
    gnorm = np.linalg.norm(grad, axis=-1)
    rate = op.scheme_rate(phi, gnorm, gnorm, grad, hess, a)
    if op.singular_at_zero:
        rate = np.where(gnorm > 0, rate, op.mu(phi))
    half_diag = 0.5 * math.sqrt(sum(s * s for s in grid.spacing))
    kink = np.abs(sub.phase(x, t)) < sub.phase_lip * half_diag
    r = np.linalg.norm(x, axis=-1)
    kink |= r < half_diag  # γ itself is not smooth at the origin
    return phi_t + rate, ~kink


def verify_subsolution(sub: Subsolution, op: Operator, K: ObstacleSet | None, grid: GridSpec,
                       times: Sequence[float], tol: float | None = None,
                       n_witnesses: int = 5) -> ViolationReport:
    """Check the subsolution inequality at every smooth sampled node.

    The default tolerance is 1e−6 + h·sup|∇φ|.
    """
    if tol is None:
        lip = sub.phase_lip * (sub.spec.k if sub.spec.variant == "s53" else sub.spec.sigma.slope)
        tol = 1e-6 + grid.h * lip
    worst = -math.inf
    wit = []
    count = 0
    n = 0
    excluded = 0
    x = grid.points()
    for t in times:
        res, smooth = subsolution_residual(sub, op, K, grid, float(t))
        excluded += int((~smooth).sum())
        vals = np.where(smooth, res, -np.inf)
        n += int(smooth.sum())
        count += int(np.sum(vals > tol))
        if n == 0:
            continue
        worst = max(worst, float(vals.max()))
        for f in np.argsort(vals, axis=None)[::-1][:n_witnesses]:
            idx = np.unravel_index(f, vals.shape)
            if np.isfinite(vals[idx]):
                wit.append({"points": [x[idx].tolist()], "values": [float(t), float(sub(x[idx], t))],
                            "margin": float(vals[idx])})
    wit.sort(key=lambda w: -w["margin"])
    return ViolationReport(worst, float(tol), wit[:n_witnesses], name=f"subsolution:{sub.spec.variant}",
                           n_samples=n, n_violations=count,
                           extra={"C": sub.C, "excluded_nodes": excluded})


def _box_boundary(rho: float, dim: int, n: int = 401) -> np.ndarray:
    if dim == 1:
        return np.array([[-rho], [rho]])
    s = np.linspace(-rho, rho, n)
    one = np.ones_like(s)
    return np.concatenate([np.stack([s, -rho * one], -1), np.stack([s, rho * one], -1),
                           np.stack([-rho * one, s], -1), np.stack([rho * one, s], -1)])


def verify_conditions_I(phi: Callable, u0: ScalarField, c0: float, boxes: Sequence[float],
                        times: Sequence[float], tol: float = 1e-12) -> dict[str, ViolationReport]:
    """Check the barrier conditions (i)–(iv) on the grid of ``u0``.

    (i) uniform continuity: the largest jump between neighbouring nodes must
    shrink when the grid spacing is halved. (ii) φ(·,0) ≤ u₀. (iii) φ ≥ c₀.
    (iv) with m_k the minimum of φ over the boundary of box k (half widths
    ``boxes``) and all sampled times, m_k must never decrease and must
    strictly grow on the outermost pair.
    """
    grid = u0.grid
    dim = grid.dim
    x = grid.points()
    ts = sorted(set([0.0, *map(float, times)]))

    def max_jump(g: GridSpec, t):
        v = phi(g.points(), t)
        return max(float(np.max(np.abs(np.diff(v, axis=k)))) for k in range(dim))

    fine = GridSpec(grid.lower, grid.upper, tuple(2 * c - 1 for c in grid.counts))
    ratios = [max_jump(fine, t) / max(max_jump(grid, t), 1e-300) for t in ts]
    rep_i = ViolationReport(max(ratios), 0.75, [], name="(i) uniform continuity",
                            extra={"jump_ratio_per_time": ratios})

    gap = phi(x, 0.0) - u0.values
    idx = np.unravel_index(int(np.argmax(gap)), gap.shape)
    rep_ii = ViolationReport(float(gap[idx]), tol, [{"points": [x[idx].tolist()],
                             "values": [float(phi(x[idx], 0.0)), float(u0.values[idx])],
                             "margin": float(gap[idx])}], name="(ii) phi(.,0) <= u0")

    worst, w3 = -math.inf, None
    for t in ts:
        v = c0 - phi(x, t)
        j = np.unravel_index(int(np.argmax(v)), v.shape)
        if v[j] > worst:
            worst = float(v[j])
            w3 = {"points": [x[j].tolist()], "values": [t, float(phi(x[j], t))], "margin": worst}
    rep_iii = ViolationReport(worst, tol, [w3], name="(iii) phi >= c0")

    boxes = sorted(float(b) for b in boxes)
    if len(boxes) < 2:
        raise ValueError("coercivity needs at least two boxes")
    mins = [min(float(np.min(phi(_box_boundary(b, dim), t))) for t in ts) for b in boxes]
    drops = [mins[k] - mins[k + 1] for k in range(len(mins) - 1)]
    k = int(np.argmax(drops))
    tail = mins[-1] - mins[-2]
    # a drop anywhere or no growth on the outermost pair both count as failures
    margin = max(drops[k] - tol, tol - tail)
    w4 = {"points": [[boxes[k]], [boxes[k + 1]]], "values": [mins[k], mins[k + 1]], "margin": margin}
    rep_iv = ViolationReport(margin, 0.0, [w4], name="(iv) coercive",
                             extra={"boxes": boxes, "boundary_min": mins})
    return {"i": rep_i, "ii": rep_ii, "iii": rep_iii, "iv": rep_iv}
