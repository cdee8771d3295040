# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled allocation kernels.

Same contract as ``_pykernels``: per-mode stationarity solve for the robust
allocator, returning noise levels together with per-mode rates and
distortions. See the pure-Python module for the algorithm description.
"""

from libc.math cimport INFINITY, acos, cbrt, copysign, cos, fabs, isfinite, log1p, sqrt

import numpy as np

cdef double LN2 = 0.6931471805599453
cdef double D_FLOOR = 1e-300
cdef double TWO_PI = 6.283185307179586


cdef int _cubic_roots(double a3, double a2, double a1, double a0, double* out) noexcept nogil:
    cdef double scale, disc, s, q, p, r, Q, R, theta, m, A, B, x, f, df, step, tmp
    cdef int n = 0
    cdef int i, j, k
    scale = max(max(fabs(a3), fabs(a2)), max(fabs(a1), fabs(a0)))
    if scale == 0.0:
        return 0
    if fabs(a3) <= 1e-14 * scale:
        if fabs(a2) <= 1e-14 * scale:
            if a1 == 0.0:
                return 0
            out[0] = -a0 / a1
            n = 1
        else:
            disc = a1 * a1 - 4.0 * a2 * a0
            if disc < 0.0:
                return 0
            s = sqrt(disc)
            q = -0.5 * (a1 + copysign(s, a1))
            out[0] = q / a2
            n = 1
            if q != 0.0:
                out[1] = a0 / q
                n = 2
    else:
        p = a2 / a3
        q = a1 / a3
        r = a0 / a3
        Q = (p * p - 3.0 * q) / 9.0
        R = (2.0 * p * p * p - 9.0 * p * q + 27.0 * r) / 54.0
        if R * R < Q * Q * Q:
            theta = acos(R / sqrt(Q * Q * Q))
            m = -2.0 * sqrt(Q)
            out[0] = m * cos(theta / 3.0) - p / 3.0
            out[1] = m * cos((theta + TWO_PI) / 3.0) - p / 3.0
            out[2] = m * cos((theta - TWO_PI) / 3.0) - p / 3.0
            n = 3
        else:
            A = -copysign(cbrt(fabs(R) + sqrt(R * R - Q * Q * Q)), R)
            B = Q / A if A != 0.0 else 0.0
            out[0] = A + B - p / 3.0
            n = 1
    for i in range(n):
        x = out[i]
        # guarded Newton polish: keep a step only if it reduces |f|
        f = ((a3 * x + a2) * x + a1) * x + a0
        for j in range(2):
            df = (3.0 * a3 * x + 2.0 * a2) * x + a1
            if df == 0.0 or not isfinite(df):
                break
            step = x - f / df
            if not isfinite(step):
                break
            tmp = ((a3 * step + a2) * step + a1) * step + a0
            if fabs(tmp) >= fabs(f):
                break
            x = step
            f = tmp
        out[i] = x
    # insertion sort, ascending
    for i in range(1, n):
        tmp = out[i]
        k = i
        while k > 0 and out[k - 1] > tmp:
            out[k] = out[k - 1]
            k -= 1
        out[k] = tmp
    return n


cdef inline double _distortion(double l, double b, double d) noexcept nogil:
    cdef double t
    if d == INFINITY:
        return l
    if d >= b:
        t = b / d
        return (l + b * t) / ((1.0 + t) * (1.0 + t))
    t = d / b
    return (l * t * t + d) / ((1.0 + t) * (1.0 + t))


cdef inline double _rate(double l, double d) noexcept nogil:
    if l <= 0.0 or d == INFINITY:
        return 0.0
    return log1p(l / d) / LN2


cdef double _solve_mode(double l, double b, double mu, double d_min_rel, bint interior_only) noexcept nogil:
    # interior_only pins the mode to a stationary point, preferring the
    # efficient branch (distortion below the mode variance); the default
    # rule also weighs the d_min guard and the switch-off boundary.
    cdef double rho, m, c3, c2, c1, c0
    cdef double roots[3]
    cdef double cands[4]
    cdef int nr, nc, i, k
    cdef double u, d, e, phi, best_phi, best_d, best_u_phi, best_u_d, tmp
    rho = l / b
    m = mu / (LN2 * b)
    c3 = rho * (2.0 - m) - 1.0
    c2 = 2.0 * rho * rho - rho + 1.0 - 3.0 * m * rho
    c1 = rho * (1.0 - 3.0 * m)
    c0 = -m * rho
    nr = _cubic_roots(c3, c2, c1, c0, roots)
    nc = 0
    for i in range(nr):
        u = roots[i]
        if u > 0.0 and isfinite(u):
            d = u * b
            if d < D_FLOOR:
                d = D_FLOOR
            cands[nc] = d
            nc += 1
    if interior_only:
        best_phi = INFINITY
        best_d = INFINITY
        best_u_phi = INFINITY
        best_u_d = INFINITY
        for i in range(nc):
            d = cands[i]
            e = _distortion(l, b, d)
            phi = e + mu * _rate(l, d)
            if phi < best_phi:
                best_phi = phi
                best_d = d
            if e <= l and phi < best_u_phi:
                best_u_phi = phi
                best_u_d = d
        if isfinite(best_u_d):
            return best_u_d
        return best_d
    d = d_min_rel * l
    if d < D_FLOOR:
        d = D_FLOOR
    cands[nc] = d
    nc += 1
    for i in range(1, nc):
        tmp = cands[i]
        k = i
        while k > 0 and cands[k - 1] > tmp:
            cands[k] = cands[k - 1]
            k -= 1
        cands[k] = tmp
    best_phi = INFINITY
    best_d = INFINITY
    for i in range(nc):
        d = cands[i]
        phi = _distortion(l, b, d) + mu * _rate(l, d)
        if phi < best_phi:
            best_phi = phi
            best_d = d
    if l < best_phi:
        return INFINITY
    return best_d


def cubic_roots(double a3, double a2, double a1, double a0):
    """Real roots of a3*x^3 + a2*x^2 + a1*x + a0, ascending, as a list."""
    cdef double out[3]
    cdef int n = _cubic_roots(a3, a2, a1, a0, out)
    return [out[i] for i in range(n)]


def mode_distortion_scalar(double l, double b, double d):
    return _distortion(l, b, d)


def mode_rate_scalar(double l, double d):
    return _rate(l, d)


def allocate_at_mu(double[::1] lam, double[::1] lam_b, double mu, double d_min_rel=1e-12, bint interior_only=False):
    """Per-mode noise levels minimizing e_i + mu*r_i, with rates and distortions.

    Returns (d, r, e) arrays; inactive modes carry d = inf, r = 0, e = lam_i.
    """
    cdef Py_ssize_t n = lam.shape[0]
    if lam_b.shape[0] != n:
        raise ValueError("spectra must have equal length")
    d_arr = np.empty(n)
    r_arr = np.empty(n)
    e_arr = np.empty(n)
    cdef double[::1] d = d_arr
    cdef double[::1] r = r_arr
    cdef double[::1] e = e_arr
    cdef Py_ssize_t i
    cdef double di
    with nogil:
        for i in range(n):
            di = _solve_mode(lam[i], lam_b[i], mu, d_min_rel, interior_only)
            d[i] = di
            r[i] = _rate(lam[i], di)
            e[i] = _distortion(lam[i], lam_b[i], di)
    return d_arr, r_arr, e_arr
