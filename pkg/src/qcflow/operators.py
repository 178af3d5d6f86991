"""Operators F(r, p, X, a) of u_t + F(u, ∇u, ∇²u, K∩{u<u(x,t)}) = 0.

The set argument enters only through its measure ``a = m(A)``. Each operator
provides a scalar :meth:`Operator.evaluate` used by the assumption checkers and
a vectorised :meth:`Operator.scheme_rate` used by the time stepper, where
first-order terms see Godunov gradient magnitudes and second-order terms see
central differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .reports import ViolationReport, merge_reports

CHECK_TOL = 1e-9


# ---------------------------------------------------------------------------
# catalogues for V and gamma


class Profile:
    """Scalar function V with first and second derivatives."""

    name = "profile"

    def __call__(self, r):
        raise NotImplementedError

    def d1(self, r):
        raise NotImplementedError

    def d2(self, r):
        raise NotImplementedError

    @property
    def sup(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ArctanShifted(Profile):
    """V(r) = arctan(r) + shift."""

    shift: float = 0.0

    @property
    def name(self):
        return f"arctan_shifted:{self.shift!r}"

    def __call__(self, r):
        return np.arctan(r) + self.shift

    def d1(self, r):
        return 1.0 / (1.0 + np.square(r))

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 * r / (1.0 + r * r) ** 2

    @property
    def sup(self):
        return math.pi / 2 + self.shift


@dataclass(frozen=True)
class TanhShifted(Profile):
    """V(r) = tanh(r) + shift."""

    shift: float = 0.0

    @property
    def name(self):
        return f"tanh_shifted:{self.shift!r}"

    def __call__(self, r):
        return np.tanh(r) + self.shift

    def d1(self, r):
        return 1.0 / np.cosh(r) ** 2

    def d2(self, r):
        return -2.0 * np.tanh(r) / np.cosh(r) ** 2

    @property
    def sup(self):
        return 1.0 + self.shift


@dataclass(frozen=True)
class ConstantProfile(Profile):
    value: float = 0.0

    @property
    def name(self):
        return f"constant:{self.value!r}"

    def __call__(self, r):
        return np.zeros_like(np.asarray(r, dtype=float)) + self.value

    def d1(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    d2 = d1

    @property
    def sup(self):
        return self.value


PROFILES = {"arctan_shifted": ArctanShifted, "tanh_shifted": TanhShifted, "constant": ConstantProfile}


def parse_profile(spec: str) -> Profile:
    """``"arctan_shifted:0.5"`` -> V(r) = arctan(r) + 0.5."""
    name, _, arg = spec.partition(":")
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return PROFILES[name](float(arg)) if arg else PROFILES[name]()


class SurfaceEnergy:
    """Positively 1-homogeneous gamma with gradient and Hessian (vectorised on the last axis)."""

    name = "surface_energy"

    def value(self, p):
        raise NotImplementedError

    def grad(self, p):
        raise NotImplementedError

    def hess(self, p):
        raise NotImplementedError

    def check_homogeneity(self, dim: int = 2, n: int = 64, seed: int = 0) -> float:
        """Worst relative defect of gamma(cp)=c gamma(p) and c hess(cp)=hess(p) on samples."""
        rng = np.random.default_rng(seed)
        p = rng.normal(size=(n, dim))
        c = np.exp(rng.uniform(-2, 2, size=(n, 1)))
        g1 = self.value(c * p)
        g2 = c[:, 0] * self.value(p)
        h1 = c[:, :, None] * self.hess(c * p)
        h2 = self.hess(p)
        d1 = np.max(np.abs(g1 - g2) / np.maximum(1.0, np.abs(g2)))
        d2 = np.max(np.abs(h1 - h2)) / max(1.0, float(np.max(np.abs(h2))))
        if np.any(self.value(p) <= 0):
            return math.inf
        return float(max(d1, d2))

    def trace_bound(self, dim: int, n_dirs: int = 720) -> float:
        """sup over unit p of tr(hess(p)), which bounds the curvature coefficient."""
        if dim == 1:
            return 0.0
        theta = np.linspace(0.0, 2 * np.pi, n_dirs, endpoint=False)
        p = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return float(np.max(np.trace(self.hess(p), axis1=-2, axis2=-1)))

    def sup_grad(self, dim: int, n_dirs: int = 720) -> float:
        if dim == 1:
            return float(np.max(np.abs(self.grad(np.array([[1.0], [-1.0]])))))
        theta = np.linspace(0.0, 2 * np.pi, n_dirs, endpoint=False)
        p = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return float(np.max(np.linalg.norm(self.grad(p), axis=-1)))


class Isotropic(SurfaceEnergy):
    name = "isotropic"

    def value(self, p):
        return np.linalg.norm(p, axis=-1)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def hess(self, p):
        p = np.asarray(p, dtype=float)
        n = np.linalg.norm(p, axis=-1)[..., None, None]
        e = p[..., :, None] * p[..., None, :] / n**2
        return (np.eye(p.shape[-1]) - e) / n

    def __eq__(self, other):
        return isinstance(other, Isotropic)

    def __hash__(self):
        return hash("isotropic")


class QuadraticNorm(SurfaceEnergy):
    """gamma(p) = sqrt(sum w_i p_i^2), convex for positive weights."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        self.name = "quadratic:" + ",".join(repr(float(w)) for w in self.weights)

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(np.sum(self.weights * p * p, axis=-1))

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        return self.weights * p / self.value(p)[..., None]

    def hess(self, p):
        p = np.asarray(p, dtype=float)
        g = self.value(p)[..., None, None]
        wp = self.weights * p
        return (np.diag(self.weights) - wp[..., :, None] * wp[..., None, :] / g**2) / g

    def __eq__(self, other):
        return isinstance(other, QuadraticNorm) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash(self.name)


def parse_surface_energy(spec: str) -> SurfaceEnergy:
    name, _, arg = spec.partition(":")
    if name == "isotropic":
        return Isotropic()
    if name == "quadratic":
        return QuadraticNorm([float(w) for w in arg.split(",")])
    raise ValueError(f"unknown surface energy {spec!r}")


# ---------------------------------------------------------------------------
# operators


def _check_args(p, X):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape != (p.size, p.size):
        raise ValueError(f"X must be {p.size}x{p.size}, got {X.shape}")
    norm = float(np.linalg.norm(p))
    if norm == 0.0:
        raise ValueError("F is undefined at p = 0; route the singular point through mu")
    return p, X, norm


def _iso_curvature(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """tr((I - p̂⊗p̂) H) per node, zero where the gradient vanishes."""
    g2 = np.sum(grad * grad, axis=-1)
    tr = np.trace(hess, axis1=-2, axis2=-1)
    pHp = np.einsum("...i,...ij,...j->...", grad, hess, grad)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = tr - np.where(g2 > 0, pHp / np.where(g2 > 0, g2, 1.0), tr)
    return out


class Operator:
    """Base class; concrete operators override ``_evaluate`` and the scheme hooks."""

    name = "operator"
    geometric = False
    r_dependent = False
    # needs the mu branch where the discrete gradient vanishes
    singular_at_zero = False
    a_max: float = math.inf

    def evaluate(self, r: float, p, X, a: float) -> float:
        p, X, norm = _check_args(p, X)
        if not (0.0 <= a <= self.a_max * (1 + 1e-12)):
            raise ValueError(f"measure argument {a} outside [0, {self.a_max}]")
        return float(self._evaluate(float(r), p, X, float(a), norm))

    def _evaluate(self, r, p, X, a, norm):
        raise NotImplementedError

    def mu(self, r):
        return np.zeros_like(np.asarray(r, dtype=float)) + 0.0

    def first_order_speed_bound(self, r_lo: float, r_hi: float, a_max: float, p_lo: float) -> float:
        """Upper bound on the coefficient multiplying |p| (``p_lo``: smallest resolved slope)."""
        return 0.0

    def diffusion_bound(self, dim: int) -> float:
        """Upper bound on the trace of the (PSD) second-order coefficient."""
        return 0.0

    def first_order_coefficient(self, r, a):
        """Sign of this selects the upwind direction per node."""
        return np.ones_like(np.asarray(a, dtype=float))

    def scheme_rate(self, r, g_plus, g_minus, grad, hess, a) -> np.ndarray:
        """F̂ at every node (generic path: evaluate with central differences)."""
        out = np.empty(r.shape)
        for idx in np.ndindex(r.shape):
            p = grad[idx]
            if np.linalg.norm(p) == 0.0:
                out[idx] = self.mu(r[idx])
            else:
                out[idx] = self.evaluate(r[idx], p, hess[idx], min(a[idx], self.a_max))
        return out


@dataclass(frozen=True, eq=False)
class NonlocalEikonal(Operator):
    """F = b |p| a."""

    b: float = 1.0
    a_max: float = math.inf
    name = "nonlocal_eikonal"
    geometric = True

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("b must be nonnegative")

    def _evaluate(self, r, p, X, a, norm):
        return self.b * norm * a

    def first_order_speed_bound(self, r_lo, r_hi, a_max, p_lo):
        return self.b * a_max

    def scheme_rate(self, r, g_plus, g_minus, grad, hess, a):
        return self.b * a * g_plus


@dataclass(frozen=True, eq=False)
class AnisoFlow(Operator):
    """F = a|p| + b|p| a_meas - c|p| tr(hess_gamma(-p) X)."""

    a_drift: float = 0.0
    b: float = 0.0
    c: float = 0.0
    gamma: SurfaceEnergy = field(default_factory=Isotropic)
    a_max: float = math.inf
    name = "aniso_flow"
    geometric = True

    def __post_init__(self):
        if self.b < 0 or self.c < 0:
            raise ValueError("b and c must be nonnegative")
        if self.gamma.check_homogeneity() > 1e-9:
            raise ValueError(f"surface energy {self.gamma.name} fails the homogeneity self-check")

    @property
    def singular_at_zero(self):
        return self.c > 0

    @property
    def isotropic(self) -> bool:
        return isinstance(self.gamma, Isotropic)

    def _evaluate(self, r, p, X, a, norm):
        curv = norm * float(np.trace(self.gamma.hess(-p) @ X)) if self.c else 0.0
        return self.a_drift * norm + self.b * norm * a - self.c * curv

    def first_order_speed_bound(self, r_lo, r_hi, a_max, p_lo):
        return abs(self.a_drift) + self.b * a_max

    def diffusion_bound(self, dim):
        return self.c * self.gamma.trace_bound(dim)

    def first_order_coefficient(self, r, a):
        return self.a_drift + self.b * np.asarray(a, dtype=float)

    def scheme_rate(self, r, g_plus, g_minus, grad, hess, a):
        s = self.first_order_coefficient(r, a)
        rate = s * np.where(s >= 0, g_plus, g_minus)
        if self.c:
            if self.isotropic:
                curv = _iso_curvature(grad, hess)
            else:
                norm = np.linalg.norm(grad, axis=-1)
                safe = np.where(norm[..., None] > 0, grad, 1.0)
                Hg = self.gamma.hess(-safe)
                curv = np.where(norm > 0, norm * np.einsum("...ij,...ji->...", Hg, hess), 0.0)
            rate = rate - self.c * curv
        return rate


@dataclass(frozen=True, eq=False)
class UDepFlow(Operator):
    """F = V(r) + |p| a - tr((I - p⊗p/|p|²) X)."""

    V: Profile = field(default_factory=ArctanShifted)
    a_max: float = math.inf
    name = "u_dep_flow"
    r_dependent = True
    singular_at_zero = True

    def _evaluate(self, r, p, X, a, norm):
        e = np.outer(p, p) / norm**2
        return float(self.V(r)) + norm * a - float(np.trace((np.eye(p.size) - e) @ X))

    def mu(self, r):
        return self.V(np.asarray(r, dtype=float))

    def first_order_speed_bound(self, r_lo, r_hi, a_max, p_lo):
        return a_max

    def diffusion_bound(self, dim):
        return float(dim - 1)

    def scheme_rate(self, r, g_plus, g_minus, grad, hess, a):
        return self.V(r) + a * g_plus - _iso_curvature(grad, hess)


@dataclass(frozen=True, eq=False)
class ViscousHJ(Operator):
    """F = -tr X + a |p|^alpha."""

    a_coef: float = 1.0
    alpha: float = 0.5
    a_max: float = math.inf
    name = "viscous_hj"

    def __post_init__(self):
        if self.a_coef < 0:
            raise ValueError("a_coef must be nonnegative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def _evaluate(self, r, p, X, a, norm):
        return -float(np.trace(X)) + self.a_coef * norm**self.alpha

    def first_order_speed_bound(self, r_lo, r_hi, a_max, p_lo):
        # coefficient of |p| is a|p|^(alpha-1), finite only above the resolved slope p_lo
        if self.a_coef == 0:
            return 0.0
        return self.a_coef * self.alpha * p_lo ** (self.alpha - 1.0)

    def diffusion_bound(self, dim):
        return float(dim)

    def scheme_rate(self, r, g_plus, g_minus, grad, hess, a):
        return -np.trace(hess, axis1=-2, axis2=-1) + self.a_coef * g_plus**self.alpha


class FunctionOperator(Operator):
    """Operator from plain callables; used for adversarial fixtures."""

    def __init__(self, fn: Callable, mu: Callable | None = None, name: str = "function",
                 geometric: bool = False, r_dependent: bool = False):
        self._fn = fn
        self._mu = mu
        self.name = name
        self.geometric = geometric
        self.r_dependent = r_dependent

    def _evaluate(self, r, p, X, a, norm):
        return self._fn(r, p, X, a)

    def mu(self, r):
        if self._mu is None:
            return super().mu(r)
        return self._mu(r)


OPERATOR_KINDS = ("nonlocal_eikonal", "aniso_flow", "u_dep_flow", "viscous_hj")


def make_operator(kind: str, **params) -> Operator:
    """Build a shipped operator; ``V`` and ``gamma`` may be catalogue strings."""
    if kind == "nonlocal_eikonal":
        return NonlocalEikonal(**params)
    if kind == "aniso_flow":
        if isinstance(params.get("gamma"), str):
            params["gamma"] = parse_surface_energy(params["gamma"])
        return AnisoFlow(**params)
    if kind == "u_dep_flow":
        if isinstance(params.get("V"), str):
            params["V"] = parse_profile(params["V"])
        return UDepFlow(**params)
    if kind == "viscous_hj":
        return ViscousHJ(**params)
    raise ValueError(f"unknown operator kind {kind!r}; choose from {OPERATOR_KINDS}")


def evaluate(op: Operator, r, p, X, a) -> float:
    return op.evaluate(r, p, X, a)


def mu(op: Operator, r):
    return op.mu(r)


# ---------------------------------------------------------------------------
# the transformed operator


def g_beta(op: Operator, beta: float, r: float, p, X, a: float) -> float:
    """(1-β)^{-1} r^β F(r^{1-β}, (1-β) r^{-β} p, (1-β) r^{-β} X + (β²-β) r^{-β-1} p⊗p, a)."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if not r > 0:
        raise ValueError("r must be positive")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    s = (1 - beta) * r**-beta
    p1 = s * p
    X1 = s * X + (beta * beta - beta) * r ** (-beta - 1) * np.outer(p, p)
    return r**beta / (1 - beta) * op.evaluate(r ** (1 - beta), p1, X1, a)


def g_beta_viscous_closed_form(op: ViscousHJ, beta: float, r: float, p, X) -> float:
    """-tr X + β r^{-1}|p|² + a (1-β)^{α-1} r^{β(1-α)} |p|^α."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    n2 = float(p @ p)
    al = op.alpha
    return (
        -float(np.trace(np.atleast_2d(X)))
        + beta / r * n2
        + op.a_coef * (1 - beta) ** (al - 1) * r ** (beta * (1 - al)) * n2 ** (al / 2)
    )


# ---------------------------------------------------------------------------
# sampling checkers


@dataclass
class SamplePlan:
    """Random draws of (r, p, X, a) for the assumption checkers."""

    n_samples: int = 10_000
    dim: int = 2
    r_range: tuple[float, float] = (1.0, 10.0)
    p_max: float = 10.0
    x_scale: float = 5.0
    a_max: float = math.pi
    seed: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _draw_p(rng, n, dim, p_max):
    d = rng.normal(size=(n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    mag = p_max * (1.0 - rng.uniform(size=(n, 1)))  # in (0, p_max]
    return d * mag


def _draw_sym(rng, n, dim, scale):
    A = rng.normal(scale=scale, size=(n, dim, dim))
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def _draw_psd(rng, n, dim, scale):
    B = rng.normal(scale=np.sqrt(scale), size=(n, dim, dim))
    return B @ np.swapaxes(B, 1, 2)


def _report(name, margins, tol, witness_fn, extra=None, max_witnesses=5):
    margins = np.asarray(margins, dtype=float)
    bad = np.flatnonzero(margins > tol)
    order = bad[np.argsort(-margins[bad])][:max_witnesses]
    return ViolationReport(
        worst_margin=float(margins.max()) if margins.size else -math.inf,
        tolerance=tol,
        witnesses=[witness_fn(int(i)) for i in order],
        name=name,
        n_samples=int(margins.size),
        n_violations=int(bad.size),
        extra=extra or {},
    )


def check_ellipticity(op: Operator, plan: SamplePlan, tol: float = CHECK_TOL) -> ViolationReport:
    """(F1): F(r, p, X+Δ, a) <= F(r, p, X, a) for PSD Δ, and F nondecreasing in r."""
    rng = plan.rng()
    n, d = plan.n_samples, plan.dim
    r1 = rng.uniform(*plan.r_range, size=n)
    r2 = rng.uniform(*plan.r_range, size=n)
    r1, r2 = np.minimum(r1, r2), np.maximum(r1, r2)
    p = _draw_p(rng, n, d, plan.p_max)
    X = _draw_sym(rng, n, d, plan.x_scale)
    D = _draw_psd(rng, n, d, plan.x_scale)
    a = rng.uniform(0.0, plan.a_max, size=n)
    m_x = np.empty(n)
    m_r = np.empty(n)
    for i in range(n):
        base = op.evaluate(r1[i], p[i], X[i], a[i])
        m_x[i] = op.evaluate(r1[i], p[i], X[i] + D[i], a[i]) - base
        m_r[i] = base - op.evaluate(r2[i], p[i], X[i], a[i])

    def wx(i):
        return {"points": {"r": r1[i], "p": p[i], "X": X[i], "delta": D[i], "a": a[i]},
                "values": [op.evaluate(r1[i], p[i], X[i], a[i]),
                           op.evaluate(r1[i], p[i], X[i] + D[i], a[i])],
                "margin": m_x[i]}

    def wr(i):
        return {"points": {"r1": r1[i], "r2": r2[i], "p": p[i], "X": X[i], "a": a[i]},
                "values": [op.evaluate(r1[i], p[i], X[i], a[i]),
                           op.evaluate(r2[i], p[i], X[i], a[i])],
                "margin": m_r[i]}

    return merge_reports("F1", [
        _report("F1_degenerate_elliptic", m_x, tol, wx),
        _report("F1_proper", m_r, tol, wr),
    ])


def check_set_monotonicity(op: Operator, plan: SamplePlan, tol: float = CHECK_TOL) -> ViolationReport:
    """(F4) in measure form: F nondecreasing in a."""
    rng = plan.rng()
    n, d = plan.n_samples, plan.dim
    r = rng.uniform(*plan.r_range, size=n)
    p = _draw_p(rng, n, d, plan.p_max)
    X = _draw_sym(rng, n, d, plan.x_scale)
    a1 = rng.uniform(0.0, plan.a_max, size=n)
    a2 = rng.uniform(0.0, plan.a_max, size=n)
    a1, a2 = np.minimum(a1, a2), np.maximum(a1, a2)
    f1 = np.array([op.evaluate(r[i], p[i], X[i], a1[i]) for i in range(n)])
    f2 = np.array([op.evaluate(r[i], p[i], X[i], a2[i]) for i in range(n)])
    m = f1 - f2

    def w(i):
        return {"points": {"r": r[i], "p": p[i], "X": X[i], "a1": a1[i], "a2": a2[i]},
                "values": [f1[i], f2[i]], "margin": m[i]}

    return _report("F4", m, tol, w)


def check_f7(op: Operator, beta: float, r_range=(1.0, 10.0), p_max: float = 10.0,
             n_samples: int = 10_000, dim: int = 2, x_scale: float = 5.0,
             a_max: float = math.pi, seed: int = 0, tol: float = CHECK_TOL) -> ViolationReport:
    """(F7) by sampling: midpoint concavity of (r, X) -> G_β, a second difference in r
    alone, and midpoint concavity of r -> r^β μ(r^{1-β}).

    ``p_max`` is the Lipschitz cap L of the relaxed condition (|p| <= L).
    """
    rng = np.random.default_rng(seed)
    lo, hi = r_range
    n = n_samples
    p = _draw_p(rng, n, dim, p_max)
    a = rng.uniform(0.0, a_max, size=n)
    r1 = rng.uniform(lo, hi, size=n)
    r2 = rng.uniform(lo, hi, size=n)
    X1 = _draw_sym(rng, n, dim, x_scale)
    X2 = _draw_sym(rng, n, dim, x_scale)

    def G(r, i, X):
        return g_beta(op, beta, r, p[i], X, a[i])

    m_mid = np.empty(n)
    m_r = np.empty(n)
    rc = rng.uniform(lo, hi, size=n)
    delta = rng.uniform(0.0, 1.0, size=n) * np.minimum(rc - lo, hi - rc)
    for i in range(n):
        g1, g2 = G(r1[i], i, X1[i]), G(r2[i], i, X2[i])
        gm = G(0.5 * (r1[i] + r2[i]), i, 0.5 * (X1[i] + X2[i]))
        m_mid[i] = 0.5 * (g1 + g2) - gm
        m_r[i] = 0.5 * (G(rc[i] - delta[i], i, X1[i]) + G(rc[i] + delta[i], i, X1[i])) - G(rc[i], i, X1[i])

    s1 = rng.uniform(lo, hi, size=n)
    s2 = rng.uniform(lo, hi, size=n)

    def mu_t(r):
        return r**beta * op.mu(r ** (1 - beta))

    m_mu = 0.5 * (mu_t(s1) + mu_t(s2)) - mu_t(0.5 * (s1 + s2))

    def w_mid(i):
        return {"points": {"r1": r1[i], "r2": r2[i], "X1": X1[i], "X2": X2[i], "p": p[i], "a": a[i]},
                "values": [G(r1[i], i, X1[i]), G(r2[i], i, X2[i]),
                           G(0.5 * (r1[i] + r2[i]), i, 0.5 * (X1[i] + X2[i]))],
                "margin": m_mid[i]}

    def w_r(i):
        return {"points": {"r": rc[i], "delta": delta[i], "X": X1[i], "p": p[i], "a": a[i]},
                "values": [G(rc[i] - delta[i], i, X1[i]), G(rc[i], i, X1[i]),
                           G(rc[i] + delta[i], i, X1[i])],
                "margin": m_r[i]}

    def w_mu(i):
        return {"points": {"r1": s1[i], "r2": s2[i]},
                "values": [float(mu_t(s1[i])), float(mu_t(s2[i])), float(mu_t(0.5 * (s1[i] + s2[i])))],
                "margin": float(m_mu[i])}

    margins = np.concatenate([m_mid, m_r, m_mu])
    hist, edges = np.histogram(margins, bins=10)
    report = merge_reports("F7", [
        _report("F7_midpoint_rX", m_mid, tol, w_mid),
        _report("F7_second_difference_r", m_r, tol, w_r),
        _report("F7_mu_transform", m_mu, tol, w_mu),
    ])
    report.extra["beta"] = beta
    report.extra["p_max"] = p_max
    report.extra["r_range"] = list(r_range)
    report.extra["margin_histogram"] = {"counts": hist.tolist(), "edges": edges.tolist()}
    return report


def check_geometric(op: Operator, plan: SamplePlan, tol: float = CHECK_TOL) -> ViolationReport:
    """F(r1, c1 p, c1 X + c2 p⊗p, a) = c1 F(r2, p, X, a) for c1 > 0, relative to max(1, |rhs|)."""
    rng = plan.rng()
    n, d = plan.n_samples, plan.dim
    c1 = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=n))
    c2 = rng.uniform(-5.0, 5.0, size=n)
    r1 = rng.uniform(*plan.r_range, size=n)
    r2 = rng.uniform(*plan.r_range, size=n)
    p = _draw_p(rng, n, d, plan.p_max)
    X = _draw_sym(rng, n, d, plan.x_scale)
    a = rng.uniform(0.0, plan.a_max, size=n)
    lhs = np.empty(n)
    rhs = np.empty(n)
    for i in range(n):
        lhs[i] = op.evaluate(r1[i], c1[i] * p[i], c1[i] * X[i] + c2[i] * np.outer(p[i], p[i]), a[i])
        rhs[i] = c1[i] * op.evaluate(r2[i], p[i], X[i], a[i])
    m = np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))

    def w(i):
        return {"points": {"c1": c1[i], "c2": c2[i], "r1": r1[i], "r2": r2[i], "p": p[i], "X": X[i],
                           "a": a[i]},
                "values": [lhs[i], rhs[i]], "margin": m[i]}

    return _report("geometric", m, tol, w)


def mu_deviation(op: Operator, r: float, p, X, a: float, scales) -> np.ndarray:
    """|F(r, s p, s X, a) - μ(r)| along a shrinking sequence of scales s (samplable (F6))."""
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    return np.array([abs(op.evaluate(r, s * p, s * X, a) - float(op.mu(r))) for s in scales])
