# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled envelope search and quasiconvexity scan (same semantics as _pykernels)."""
import numpy as np

from libc.math cimport floor, pow, INFINITY

cdef double EDGE_TOL = 1e-9


cdef inline double _interp(const double[:, ::1] u, Py_ssize_t nx, Py_ssize_t ny,
                           double x, double y) noexcept nogil:
    cdef Py_ssize_t i0, j0, i1, j1
    cdef double fx, fy
    if x < 0.0:
        x = 0.0
    elif x > nx - 1:
        x = nx - 1
    if y < 0.0:
        y = 0.0
    elif y > ny - 1:
        y = ny - 1
    i0 = <Py_ssize_t>floor(x)
    j0 = <Py_ssize_t>floor(y)
    if nx >= 2 and i0 > nx - 2:
        i0 = nx - 2
    if ny >= 2 and j0 > ny - 2:
        j0 = ny - 2
    if nx == 1:
        i0 = 0
    if ny == 1:
        j0 = 0
    fx = x - i0
    fy = y - j0
    i1 = i0 + 1 if i0 + 1 < nx else nx - 1
    j1 = j0 + 1 if j0 + 1 < ny else ny - 1
    return ((1 - fx) * (1 - fy) * u[i0, j0] + fx * (1 - fy) * u[i1, j0]
            + (1 - fx) * fy * u[i0, j1] + fx * fy * u[i1, j1])


cdef inline double _objective(double a, double b, double lam, double q) noexcept nogil:
    cdef double m = a if a > b else b
    cdef double s, v
    if q <= 0:
        return m
    s = lam * pow(a / m, q) + (1 - lam) * pow(b / m, q)
    v = m * pow(s, 1.0 / q)
    return v if v < m else m


cdef inline void _try(const double[:, ::1] u, double[:, ::1] out, Py_ssize_t nx, Py_ssize_t ny,
                      Py_ssize_t i, Py_ssize_t j, Py_ssize_t ox, Py_ssize_t oy,
                      double c, double lam, double q) noexcept nogil:
    cdef Py_ssize_t yi = i + ox, yj = j + oy
    cdef double zx, zy, val
    if yi < 0 or yi >= nx or yj < 0 or yj >= ny:
        return
    zx = i - c * ox
    zy = j - c * oy
    if zx < -EDGE_TOL or zx > nx - 1 + EDGE_TOL or zy < -EDGE_TOL or zy > ny - 1 + EDGE_TOL:
        return
    val = _objective(u[yi, yj], _interp(u, nx, ny, zx, zy), lam, q)
    if val < out[i, j]:
        out[i, j] = val


def envelope(u_in, double lam, double q, str mode):
    cdef const double[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1]
    result = np.array(u, dtype=np.float64, copy=True)
    cdef double[:, ::1] out = result
    cdef double c = lam / (1.0 - lam)
    cdef Py_ssize_t i, j, k, ox, oy, kmax = nx if nx > ny else ny
    cdef int d
    cdef Py_ssize_t dxs[4]
    cdef Py_ssize_t dys[4]
    dxs[:] = [1, 0, 1, 1]
    dys[:] = [0, 1, 1, -1]
    if mode == "directions":
        with nogil:
            for i in range(nx):
                for j in range(ny):
                    for d in range(4):
                        if (dys[d] != 0 and ny == 1) or (dxs[d] != 0 and nx == 1):
                            continue
                        for k in range(-kmax, kmax + 1):
                            if k != 0:
                                _try(u, out, nx, ny, i, j, k * dxs[d], k * dys[d], c, lam, q)
    elif mode == "exhaustive":
        with nogil:
            for i in range(nx):
                for j in range(ny):
                    for ox in range(-i, nx - i):
                        for oy in range(-j, ny - j):
                            if ox != 0 or oy != 0:
                                _try(u, out, nx, ny, i, j, ox, oy, c, lam, q)
    else:
        raise ValueError(f"unknown search mode {mode!r}")
    return result


def qc_scan(u_in, lams, double tol, direction):
    cdef const double[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1]
    lam_list = sorted(set(float(v) for v in lams) | set(1.0 - float(v) for v in lams))
    cdef double[::1] lv = np.array(lam_list, dtype=np.float64)
    cdef Py_ssize_t nl = lv.shape[0]
    cdef double worst = -INFINITY, top, margin, lam
    cdef Py_ssize_t count = 0
    cdef Py_ssize_t i, j, zi, zj, ox, oy, k, l, kmax = nx if nx > ny else ny
    cdef Py_ssize_t wyi = -1, wyj = -1, wzi = -1, wzj = -1
    cdef double wlam = 0.0
    cdef Py_ssize_t ddx = 0, ddy = 0
    cdef bint all_pairs = direction is None
    if not all_pairs:
        ddx, ddy = direction
    with nogil:
        for i in range(nx):
            for j in range(ny):
                if all_pairs:
                    for ox in range(0, nx - i):
                        for oy in range(-j, ny - j):
                            if ox == 0 and oy <= 0:
                                continue
                            zi = i + ox
                            zj = j + oy
                            top = u[i, j] if u[i, j] > u[zi, zj] else u[zi, zj]
                            for l in range(nl):
                                lam = lv[l]
                                margin = _interp(u, nx, ny, lam * i + (1 - lam) * zi,
                                                 lam * j + (1 - lam) * zj) - top
                                if margin > tol:
                                    count += 1
                                if margin > worst:
                                    worst = margin
                                    wyi, wyj, wzi, wzj, wlam = i, j, zi, zj, lam
                else:
                    for k in range(1, kmax):
                        zi = i + k * ddx
                        zj = j + k * ddy
                        if zi < 0 or zi >= nx or zj < 0 or zj >= ny:
                            break
                        top = u[i, j] if u[i, j] > u[zi, zj] else u[zi, zj]
                        for l in range(nl):
                            lam = lv[l]
                            margin = _interp(u, nx, ny, lam * i + (1 - lam) * zi,
                                             lam * j + (1 - lam) * zj) - top
                            if margin > tol:
                                count += 1
                            if margin > worst:
                                worst = margin
                                wyi, wyj, wzi, wzj, wlam = i, j, zi, zj, lam
    witness = None if wyi < 0 else (int(wyi), int(wyj), int(wzi), int(wzj), float(wlam))
    return float(worst), witness, int(count)
