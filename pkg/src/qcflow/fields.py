"""Uniform grids, scalar fields and the finite-difference stencils of the scheme.

Arrays are stored with ``indexing="ij"``: axis ``k`` of ``values`` runs along
coordinate ``k``. Boundary policy (shared with :mod:`qcflow.evolve`): a
one-sided difference that would need a node outside the box is taken as zero,
central first derivatives fall back to the inward one-sided difference, and
second derivatives along a boundary axis are zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid in one or two dimensions."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        counts = tuple(int(v) for v in np.atleast_1d(self.counts))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "counts", counts)
        if not (len(lower) == len(upper) == len(counts)):
            raise ValueError("lower, upper and counts must have the same length")
        if len(counts) not in (1, 2):
            raise ValueError(f"only 1D and 2D grids are supported, got dim={len(counts)}")
        if any(n < 3 for n in counts):
            raise ValueError(f"need at least 3 points per axis, got {counts}")
        if any(not (u > lo) for lo, u in zip(lower, upper)):
            raise ValueError("upper must exceed lower on every axis")

    @classmethod
    def uniform(cls, lower: float, upper: float, n: int, dim: int = 2) -> "GridSpec":
        return cls((lower,) * dim, (upper,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((u - lo) / (n - 1) for lo, u, n in zip(self.lower, self.upper, self.counts))

    @property
    def h(self) -> float:
        """Smallest grid spacing."""
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axis(self, k: int) -> np.ndarray:
        lo, u, n = self.lower[k], self.upper[k], self.counts[k]
        # lower + i*(upper-lower)/(n-1) hits both ends exactly
        return lo + np.arange(n) * ((u - lo) / (n - 1))

    def axes(self) -> list[np.ndarray]:
        return [self.axis(k) for k in range(self.dim)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``counts + (dim,)``."""
        return np.stack(self.mesh(), axis=-1)

    def coordinate(self, idx: Sequence[int]) -> np.ndarray:
        idx = self._check_index(idx)
        return np.array([self.axis(k)[i] for k, i in enumerate(idx)])

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Nearest node index of a coordinate; raises if ``x`` is outside the box."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.contains(x):
            raise ValueError(f"point {x} outside grid box")
        return tuple(int(round((xi - lo) / h)) for xi, lo, h in zip(x, self.lower, self.spacing))

    def contains(self, x: Sequence[float], slack: float = 1e-12) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ValueError(f"expected a {self.dim}-vector, got shape {x.shape}")
        scale = max(1.0, *(abs(v) for v in self.lower + self.upper))
        tol = slack * scale
        return all(lo - tol <= xi <= u + tol for xi, lo, u in zip(x, self.lower, self.upper))

    def is_interior(self, idx: Sequence[int]) -> bool:
        idx = self._check_index(idx)
        return all(0 < i < n - 1 for i, n in zip(idx, self.counts))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.counts, dtype=bool)
        for k in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[k] = 0
            mask[tuple(sl)] = True
            sl[k] = -1
            mask[tuple(sl)] = True
        return mask

    def _check_index(self, idx) -> tuple[int, ...]:
        idx = tuple(int(i) for i in np.atleast_1d(idx))
        if len(idx) != self.dim or any(not (0 <= i < n) for i, n in zip(idx, self.counts)):
            raise IndexError(f"index {idx} out of range for grid counts {self.counts}")
        return idx


@dataclass(frozen=True)
class ScalarField:
    """Values of a function on the nodes of a :class:`GridSpec`.

    ``c0`` is the positivity floor the field is meant to respect during an
    evolution; it is metadata and is not enforced here.
    """

    grid: GridSpec
    values: np.ndarray
    c0: float | None = dc_field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.counts:
            if values.size != self.grid.size:
                raise ValueError(
                    f"{values.size} values do not fit grid counts {self.grid.counts}"
                )
            values = values.reshape(self.grid.counts)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, fn, c0: float | None = None) -> "ScalarField":
        """Sample ``fn(points)`` where ``points`` has shape ``counts + (dim,)``."""
        return cls(grid, fn(grid.points()), c0=c0)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values, c0=self.c0)

    def __getitem__(self, idx):
        return self.values[idx]

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())


# ---------------------------------------------------------------------------
# pointwise stencils


def _shift(values: np.ndarray, idx: tuple[int, ...], axis: int, step: int) -> float:
    j = list(idx)
    j[axis] += step
    return float(values[tuple(j)])


def central_gradient(field: ScalarField, idx) -> np.ndarray:
    """Central difference gradient at a node.

    At a boundary node the inward one-sided first-order difference is used.
    """
    grid = field.grid
    idx = grid._check_index(idx)
    u = field.values
    out = np.empty(grid.dim)
    for k, (i, n, h) in enumerate(zip(idx, grid.counts, grid.spacing)):
        if i == 0:
            out[k] = (_shift(u, idx, k, 1) - u[idx]) / h
        elif i == n - 1:
            out[k] = (u[idx] - _shift(u, idx, k, -1)) / h
        else:
            out[k] = (_shift(u, idx, k, 1) - _shift(u, idx, k, -1)) / (2 * h)
    return out


def hessian(field: ScalarField, idx) -> np.ndarray:
    """Second differences at a node (diagonal: 3-point, off-diagonal: 4-point cross).

    Entries involving an axis on which the node sits at the boundary are zero.
    """
    grid = field.grid
    idx = grid._check_index(idx)
    u = field.values
    d = grid.dim
    inner = [0 < i < n - 1 for i, n in zip(idx, grid.counts)]
    H = np.zeros((d, d))
    for k in range(d):
        if not inner[k]:
            continue
        h = grid.spacing[k]
        H[k, k] = (_shift(u, idx, k, 1) - 2 * u[idx] + _shift(u, idx, k, -1)) / h**2
    if d == 2 and all(inner):
        i, j = idx
        hx, hy = grid.spacing
        H[0, 1] = H[1, 0] = (
            u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]
        ) / (4 * hx * hy)
    return H


def upwind_gradient(field: ScalarField, idx, speed_sign: int) -> float:
    """Godunov gradient magnitude for a first-order term of the given sign.

    ``speed_sign=+1``: sqrt(sum max(D-,0)^2 + min(D+,0)^2); ``-1`` mirrors it.
    """
    if speed_sign not in (1, -1):
        raise ValueError("speed_sign must be +1 or -1")
    grid = field.grid
    idx = grid._check_index(idx)
    u = field.values
    total = 0.0
    for k, (i, n, h) in enumerate(zip(idx, grid.counts, grid.spacing)):
        dm = (u[idx] - _shift(u, idx, k, -1)) / h if i > 0 else 0.0
        dp = (_shift(u, idx, k, 1) - u[idx]) / h if i < n - 1 else 0.0
        if speed_sign > 0:
            total += max(dm, 0.0) ** 2 + min(dp, 0.0) ** 2
        else:
            total += min(dm, 0.0) ** 2 + max(dp, 0.0) ** 2
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# whole-field stencils used by the time stepper


def one_sided_differences(values: np.ndarray, spacing: Sequence[float]):
    """Backward and forward differences per axis, zero where the neighbour is missing."""
    dminus, dplus = [], []
    for k, h in enumerate(spacing):
        d = np.diff(values, axis=k) / h
        pad_lo = [(0, 0)] * values.ndim
        pad_hi = [(0, 0)] * values.ndim
        pad_lo[k] = (1, 0)
        pad_hi[k] = (0, 1)
        dminus.append(np.pad(d, pad_lo))
        dplus.append(np.pad(d, pad_hi))
    return dminus, dplus


def godunov_magnitude(dminus, dplus, speed_sign: int) -> np.ndarray:
    total = np.zeros_like(dminus[0])
    for dm, dp in zip(dminus, dplus):
        if speed_sign > 0:
            total += np.maximum(dm, 0.0) ** 2 + np.minimum(dp, 0.0) ** 2
        else:
            total += np.minimum(dm, 0.0) ** 2 + np.maximum(dp, 0.0) ** 2
    return np.sqrt(total)


def central_gradients(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Gradient at every node, shape ``values.shape + (dim,)``."""
    grads = []
    for k, h in enumerate(spacing):
        g = np.empty_like(values)
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        mid = [slice(None)] * values.ndim
        lo[k], hi[k], mid[k] = slice(None, -2), slice(2, None), slice(1, -1)
        g[tuple(mid)] = (values[tuple(hi)] - values[tuple(lo)]) / (2 * h)
        first = [slice(None)] * values.ndim
        second = [slice(None)] * values.ndim
        first[k], second[k] = 0, 1
        g[tuple(first)] = (values[tuple(second)] - values[tuple(first)]) / h
        first[k], second[k] = -1, -2
        g[tuple(first)] = (values[tuple(first)] - values[tuple(second)]) / h
        grads.append(g)
    return np.stack(grads, axis=-1)


def hessians(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Hessian at every node, shape ``values.shape + (dim, dim)``."""
    d = values.ndim
    H = np.zeros(values.shape + (d, d))
    for k, h in enumerate(spacing):
        sl = [slice(None)] * d
        sl[k] = slice(1, -1)
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[k], hi[k] = slice(None, -2), slice(2, None)
        H[tuple(sl) + (k, k)] = (
            values[tuple(hi)] - 2 * values[tuple(sl)] + values[tuple(lo)]
        ) / h**2
    if d == 2:
        hx, hy = spacing
        u = values
        cross = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * hx * hy)
        H[1:-1, 1:-1, 0, 1] = cross
        H[1:-1, 1:-1, 1, 0] = cross
    return H


# ---------------------------------------------------------------------------
# interpolation


def interpolate(field: ScalarField, points) -> np.ndarray:
    """Multilinear interpolation at arbitrary points inside the box.

    ``points`` has shape ``(..., dim)``; a 1D field also accepts plain scalars.
    """
    grid = field.grid
    pts = np.asarray(points, dtype=float)
    if grid.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != grid.dim:
        raise ValueError(f"points must have trailing dimension {grid.dim}")
    flat = pts.reshape(-1, grid.dim)
    lower = np.array(grid.lower)
    spacing = np.array(grid.spacing)
    counts = np.array(grid.counts)
    s = (flat - lower) / spacing
    tol = 1e-9
    if np.any(s < -tol) or np.any(s > counts - 1 + tol):
        raise ValueError("interpolation point outside the grid box")
    s = np.clip(s, 0.0, counts - 1)
    base = np.minimum(np.floor(s).astype(int), counts - 2)
    frac = s - base
    u = field.values
    out = np.zeros(len(flat))
    for corner in np.ndindex(*(2,) * grid.dim):
        w = np.ones(len(flat))
        for k, c in enumerate(corner):
            w *= frac[:, k] if c else (1.0 - frac[:, k])
        out += w * u[tuple(base[:, k] + corner[k] for k in range(grid.dim))]
    return out.reshape(pts.shape[:-1])


def line_samples(field: ScalarField, point_a, point_b, n: int) -> np.ndarray:
    """Interpolated values at ``n`` equally spaced points from ``point_a`` to ``point_b``."""
    if n < 3:
        raise ValueError("need n >= 3 samples")
    grid = field.grid
    a = np.atleast_1d(np.asarray(point_a, dtype=float))
    b = np.atleast_1d(np.asarray(point_b, dtype=float))
    for p in (a, b):
        if not grid.contains(p):
            raise ValueError(f"endpoint {p} outside the grid box")
    s = np.linspace(0.0, 1.0, n)[:, None]
    return interpolate(field, a + s * (b - a))


# ---------------------------------------------------------------------------
# snapshot files


def write_snapshot(field: ScalarField, path) -> None:
    """Plain-text snapshot: dim, counts, lower, upper, then row-major values."""
    g = field.grid
    lines = [
        str(g.dim),
        " ".join(str(n) for n in g.counts),
        " ".join(repr(float(v)) for v in g.lower),
        " ".join(repr(float(v)) for v in g.upper),
    ]
    lines.extend(repr(float(v)) for v in field.values.ravel(order="C"))
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path, c0: float | None = None) -> ScalarField:
    lines = Path(path).read_text().split("\n")
    lines = [ln.strip() for ln in lines if ln.strip()]
    if len(lines) < 4:
        raise ValueError(f"{path}: truncated snapshot header")
    dim = int(lines[0])
    counts = tuple(int(v) for v in lines[1].split())
    lower = tuple(float(v) for v in lines[2].split())
    upper = tuple(float(v) for v in lines[3].split())
    if not (len(counts) == len(lower) == len(upper) == dim):
        raise ValueError(f"{path}: header dimensions disagree")
    grid = GridSpec(lower, upper, counts)
    values = np.array([float(v) for v in lines[4:]])
    if values.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {values.size}")
    return ScalarField(grid, values.reshape(counts), c0=c0)
