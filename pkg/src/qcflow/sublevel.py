"""The compact set K and sublevel-measure queries m(K ∩ {u < h}).

Membership is decided at cell centres (grid nodes); each member node carries
the volume of its cell. A sorted copy of the member values plus prefix sums of
the weights answers strict and non-strict sublevel queries by binary search.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import GridSpec, ScalarField


@dataclass(frozen=True)
class ObstacleSet:
    """A closed ball or a raster mask.

    For a ball ``measure_total`` is the exact volume; for a mask it is the
    number of cells times the cell volume.
    """

    kind: str
    center: tuple[float, ...] | None = None
    radius: float | None = None
    mask: np.ndarray | None = None
    mask_grid: GridSpec | None = None

    def __post_init__(self):
        if self.kind == "ball":
            if self.radius is None or not self.radius > 0:
                raise ValueError("ball radius must be positive")
            object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        elif self.kind == "mask":
            if self.mask is None or self.mask_grid is None:
                raise ValueError("mask obstacle needs mask and mask_grid")
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != self.mask_grid.counts:
                raise ValueError("mask shape does not match its grid")
            m = m.copy()
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)
        else:
            raise ValueError(f"unknown obstacle kind {self.kind!r}")

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "ObstacleSet":
        return cls("ball", center=tuple(center), radius=float(radius))

    @classmethod
    def from_mask(cls, grid: GridSpec, mask: np.ndarray) -> "ObstacleSet":
        return cls("mask", mask=mask, mask_grid=grid)

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "ball" else self.mask_grid.dim

    @property
    def measure_total(self) -> float:
        if self.kind == "ball":
            r = self.radius
            return {1: 2 * r, 2: np.pi * r**2}[self.dim]
        return float(self.mask.sum()) * self.mask_grid.cell_volume

    def membership(self, grid: GridSpec) -> np.ndarray:
        """Boolean array over ``grid`` nodes lying in K."""
        if grid.dim != self.dim:
            raise ValueError(f"obstacle is {self.dim}D but grid is {grid.dim}D")
        if self.kind == "ball":
            lo = np.array(self.center) - self.radius
            hi = np.array(self.center) + self.radius
            if np.any(lo < np.array(grid.lower)) or np.any(hi > np.array(grid.upper)):
                raise ValueError("obstacle ball is not contained in the grid box")
            d2 = sum((x - c) ** 2 for x, c in zip(grid.mesh(), self.center))
            return d2 <= self.radius**2
        if grid != self.mask_grid:
            raise ValueError("mask obstacle was defined on a different grid")
        return np.array(self.mask)


class SublevelMeasureIndex:
    """Sorted values with prefix sums of their cell weights."""

    def __init__(self, values: np.ndarray, weights: np.ndarray):
        values = np.asarray(values, dtype=float).ravel()
        weights = np.broadcast_to(np.asarray(weights, dtype=float), values.shape).ravel()
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        order = np.argsort(values, kind="stable")
        self.values = values[order]
        self.weights = weights[order]
        self.prefix = np.concatenate(([0.0], np.cumsum(self.weights)))

    @property
    def total(self) -> float:
        return float(self.prefix[-1])

    def __len__(self) -> int:
        return len(self.values)

    def measure_strict(self, h):
        """m(K ∩ {u < h}); vectorised over ``h``."""
        out = self.prefix[np.searchsorted(self.values, h, side="left")]
        return float(out) if np.ndim(out) == 0 else out

    def measure_nonstrict(self, h):
        """m(K ∩ {u <= h}); vectorised over ``h``."""
        out = self.prefix[np.searchsorted(self.values, h, side="right")]
        return float(out) if np.ndim(out) == 0 else out


def build_index(field: ScalarField, K: ObstacleSet) -> SublevelMeasureIndex:
    inside = K.membership(field.grid)
    return SublevelMeasureIndex(field.values[inside], field.grid.cell_volume)


def measure_strict(index: SublevelMeasureIndex, h):
    return index.measure_strict(h)


def measure_nonstrict(index: SublevelMeasureIndex, h):
    return index.measure_nonstrict(h)
