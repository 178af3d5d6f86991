"""Quasiconvex and power-convex envelopes of sampled fields.

Both envelopes minimize over decompositions x = λy + (1−λ)z with y a grid
node and z interpolated. Pairs with z outside the box are skipped. The
search runs in index space, which is exact for axis-aligned uniform grids.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .fields import ScalarField

SEARCH_MODES = ("auto", "exhaustive", "directions")


@dataclass(frozen=True)
class EnvelopeParams:
    """Parameters of an envelope computation.

    Parameters
    ----------
    lam : float
        Weight λ in (0, 1).
    q : float, optional
        Power-mean exponent, q > 1. Ignored by the quasiconvex envelope.
    search : str
        ``"exhaustive"`` tries every node y; ``"directions"`` restricts y − x
        to the axes and both diagonals. ``"auto"`` picks exhaustive in 1D and
        directions in 2D.
    """

    lam: float = 0.5
    q: float | None = None
    search: str = "auto"

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie strictly inside (0, 1), got {self.lam}")
        if self.q is not None and not self.q > 1.0:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if self.search not in SEARCH_MODES:
            raise ValueError(f"unknown search mode {self.search!r}")

    def mode_for(self, dim: int) -> str:
        if self.search == "auto":
            return "exhaustive" if dim == 1 else "directions"
        return self.search


def _as2d(field: ScalarField) -> np.ndarray:
    v = np.asarray(field.values, dtype=float)
    return v.reshape(-1, 1) if v.ndim == 1 else v


def _from2d(field: ScalarField, arr: np.ndarray) -> ScalarField:
    return field.with_values(arr.reshape(field.values.shape))


def quasiconvex_envelope(field: ScalarField, params: EnvelopeParams = EnvelopeParams(),
                         backend: str | None = None) -> ScalarField:
    """Pointwise min over feasible pairs of max{u(y), u(z)}."""
    out = kernels.envelope(_as2d(field), params.lam, 0.0, params.mode_for(field.grid.dim), backend)
    return _from2d(field, out)


def power_envelope(field: ScalarField, params: EnvelopeParams, backend: str | None = None) -> ScalarField:
    """Pointwise min over feasible pairs of the λ-weighted q-mean."""
    if params.q is None:
        raise ValueError("power envelope needs q")
    if field.min <= 0:
        raise ValueError("power envelope needs a strictly positive field")
    out = kernels.envelope(_as2d(field), params.lam, params.q, params.mode_for(field.grid.dim), backend)
    return _from2d(field, out)


@dataclass
class GapStudy:
    """Result of the q → ∞ convergence study.

    ``gaps[k]`` holds the nodewise gap u_⋆ − u_q for ``q_list[k]``.
    """

    q_list: list[float]
    sup_gaps: list[float]
    fitted_slope: float
    C: float
    bound_ok: bool
    bound_worst: float
    monotone_ok: bool
    nonnegative_ok: bool
    qc_envelope: ScalarField
    gaps: list[np.ndarray] = field(repr=False, default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("q,sup_gap,fitted_slope\n")
        for q, g in zip(self.q_list, self.sup_gaps):
            buf.write(f"{q!r},{g!r},{self.fitted_slope!r}\n")
        return buf.getvalue()


def sub_box_mask(field: ScalarField, fraction: float = 0.5) -> np.ndarray:
    """Nodes inside the centered sub-box scaled by ``fraction``."""
    pts = field.grid.points()
    lo = np.asarray(field.grid.lower)
    hi = np.asarray(field.grid.upper)
    mid = 0.5 * (lo + hi)
    half = 0.5 * fraction * (hi - lo)
    return np.all(np.abs(pts - mid) <= half + 1e-12, axis=-1)


def envelope_gap_study(field: ScalarField, lam: float, q_list: Sequence[float],
                       search: str = "auto", fraction: float = 0.5,
                       tol: float = 1e-12, backend: str | None = None) -> GapStudy:
    """Gap u_⋆,λ − u_q,λ for increasing q on a centered sub-box.

    The constant C is fitted at the first q as max q·gap/(u_⋆+1), then the
    bound gap ≤ (C/q)(u_⋆+1) is checked at every later q.
    """
    q_list = [float(q) for q in q_list]
    if any(b <= a for a, b in zip(q_list, q_list[1:])):
        raise ValueError("q_list must be strictly increasing")
    qc = quasiconvex_envelope(field, EnvelopeParams(lam=lam, search=search), backend)
    mask = sub_box_mask(field, fraction)
    ustar = qc.values[mask]
    gaps, sups = [], []
    for q in q_list:
        pe = power_envelope(field, EnvelopeParams(lam=lam, q=q, search=search), backend)
        g = ustar - pe.values[mask]
        gaps.append(g)
        sups.append(float(g.max()))
    nonneg = all(float(g.min()) >= -tol for g in gaps)
    mono = all(float((b - a).max()) <= tol for a, b in zip(gaps, gaps[1:]))
    pos = [(q, s) for q, s in zip(q_list, sups) if s > 0]
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]), 1)[0])
    else:
        slope = float("nan")
    C = float(np.max(q_list[0] * gaps[0] / (ustar + 1.0)))
    worst = -np.inf
    for q, g in zip(q_list[1:], gaps[1:]):
        worst = max(worst, float(np.max(g - C / q * (ustar + 1.0))))
    bound_ok = worst <= tol if len(q_list) > 1 else True
    return GapStudy(q_list, sups, slope, C, bound_ok, float(worst), mono, nonneg, qc, gaps)
