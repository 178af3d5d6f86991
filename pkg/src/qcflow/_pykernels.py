"""NumPy implementations of the envelope search and the quasiconvexity scan.

All positions are in index space: node ``(i, j)`` sits at integer coordinates
and the affine map to physical coordinates commutes with convex combinations.
Arrays are 2D; 1D fields are passed with shape ``(n, 1)``.
"""
from __future__ import annotations

import numpy as np

EDGE_TOL = 1e-9


def _interp(u: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    nx, ny = u.shape
    x = np.clip(x, 0.0, nx - 1)
    y = np.clip(y, 0.0, ny - 1)
    i0 = np.minimum(np.floor(x).astype(np.intp), max(nx - 2, 0))
    j0 = np.minimum(np.floor(y).astype(np.intp), max(ny - 2, 0))
    fx = x - i0
    fy = y - j0
    i1 = np.minimum(i0 + 1, nx - 1)
    j1 = np.minimum(j0 + 1, ny - 1)
    return ((1 - fx) * (1 - fy) * u[i0, j0] + fx * (1 - fy) * u[i1, j0]
            + (1 - fx) * fy * u[i0, j1] + fx * fy * u[i1, j1])


def _objective(a: np.ndarray, b: np.ndarray, lam: float, q: float) -> np.ndarray:
    m = np.maximum(a, b)
    if q <= 0:
        return m
    with np.errstate(divide="ignore", invalid="ignore"):
        s = lam * (a / m) ** q + (1 - lam) * (b / m) ** q
        v = m * s ** (1.0 / q)
    return np.minimum(v, m)


def _offsets(nx: int, ny: int, mode: str):
    if mode == "directions":
        for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
            if (dy != 0 and ny == 1) or (dx != 0 and nx == 1):
                continue
            kmax = max(nx, ny)
            for k in range(-kmax, kmax + 1):
                if k:
                    yield k * dx, k * dy
    elif mode == "exhaustive":
        for dx in range(-(nx - 1), nx):
            for dy in range(-(ny - 1), ny):
                if dx or dy:
                    yield dx, dy
    else:
        raise ValueError(f"unknown search mode {mode!r}")


def envelope(u: np.ndarray, lam: float, q: float, mode: str) -> np.ndarray:
    """min over y = x + offset (grid node) of objective(u(y), u(z)), z = (x - λy)/(1-λ).

    ``q <= 0`` selects the max objective (quasiconvex envelope). The offset 0
    (y = z = x) is always included.
    """
    u = np.ascontiguousarray(u, dtype=float)
    nx, ny = u.shape
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    out = u.copy()
    c = lam / (1.0 - lam)
    for ox, oy in _offsets(nx, ny, mode):
        yi, yj = I + ox, J + oy
        zx, zy = I - c * ox, J - c * oy
        ok = ((yi >= 0) & (yi < nx) & (yj >= 0) & (yj < ny)
              & (zx >= -EDGE_TOL) & (zx <= nx - 1 + EDGE_TOL)
              & (zy >= -EDGE_TOL) & (zy <= ny - 1 + EDGE_TOL))
        if not ok.any():
            continue
        a = u[yi[ok], yj[ok]]
        b = _interp(u, zx[ok], zy[ok])
        val = _objective(a, b, lam, q)
        out[ok] = np.minimum(out[ok], val)
    return out


def qc_scan(u: np.ndarray, lams, tol: float, direction):
    """Worst margin u(λy+(1-λ)z) - max(u(y), u(z)) over node pairs on grid lines.

    ``direction`` is an integer step ``(dx, dy)``; every pair of nodes joined by
    a multiple of it is tested, or ``None`` for all node pairs. Returns
    ``(worst, (yi, yj, zi, zj, lam), n_violations)``.
    """
    u = np.ascontiguousarray(u, dtype=float)
    nx, ny = u.shape
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    lam_all = sorted(set(float(v) for v in lams) | set(1.0 - float(v) for v in lams))
    worst = -np.inf
    witness = None
    count = 0
    if direction is None:
        steps = [(ox, oy) for ox in range(0, nx) for oy in range(-(ny - 1), ny)
                 if ox > 0 or (ox == 0 and oy > 0)]
    else:
        dx, dy = direction
        kmax = max(nx, ny)
        steps = [(k * dx, k * dy) for k in range(1, kmax)]
    for ox, oy in steps:
        zi, zj = I + ox, J + oy
        ok = (zi >= 0) & (zi < nx) & (zj >= 0) & (zj < ny)
        if not ok.any():
            continue
        yi_v, yj_v = I[ok], J[ok]
        zi_v, zj_v = zi[ok], zj[ok]
        top = np.maximum(u[yi_v, yj_v], u[zi_v, zj_v])
        for lam in lam_all:
            cx = lam * yi_v + (1 - lam) * zi_v
            cy = lam * yj_v + (1 - lam) * zj_v
            margin = _interp(u, cx, cy) - top
            count += int(np.count_nonzero(margin > tol))
            k = int(np.argmax(margin))
            if margin[k] > worst:
                worst = float(margin[k])
                witness = (int(yi_v[k]), int(yj_v[k]), int(zi_v[k]), int(zj_v[k]), lam)
    return worst, witness, count
