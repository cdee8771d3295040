"""Pure-Python allocation kernels.

Reference implementation of the per-mode stationarity solve used by the
robust allocator. For each mode with true variance l, decoder variance b
and multiplier price mu, the candidate noise levels are the positive real
roots of a cubic (the stationarity condition of e(d) + mu*r(d)), plus the
small-noise guard d_min and the switch-off boundary d = inf; the candidate
with the smallest per-mode objective wins, with the mode switched off only
when the boundary value is strictly smaller than every finite candidate.

The compiled module ``_cykernels`` implements the same contract; parity is
enforced by tests.
"""

from __future__ import annotations

import math

import numpy as np

LN2 = 0.6931471805599453
D_FLOOR = 1e-300  # keeps test-channel noise representable
_TWO_PI = 6.283185307179586


def cubic_roots(a3: float, a2: float, a1: float, a0: float) -> list:
    """Real roots of a3*x^3 + a2*x^2 + a1*x + a0, ascending (possibly empty).

    Degenerate leading coefficients fall back to the quadratic/linear case;
    roots are polished with a couple of Newton steps.
    """
    scale = max(abs(a3), abs(a2), abs(a1), abs(a0))
    if scale == 0.0:
        return []
    roots: list = []
    if abs(a3) <= 1e-14 * scale:
        if abs(a2) <= 1e-14 * scale:
            if a1 == 0.0:
                return []
            return [-a0 / a1]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            return []
        s = math.sqrt(disc)
        q = -0.5 * (a1 + math.copysign(s, a1))
        roots.append(q / a2)
        if q != 0.0:
            roots.append(a0 / q)
    else:
        p = a2 / a3
        q = a1 / a3
        r = a0 / a3
        Q = (p * p - 3.0 * q) / 9.0
        R = (2.0 * p * p * p - 9.0 * p * q + 27.0 * r) / 54.0
        if R * R < Q * Q * Q:
            theta = math.acos(R / math.sqrt(Q * Q * Q))
            m = -2.0 * math.sqrt(Q)
            roots.append(m * math.cos(theta / 3.0) - p / 3.0)
            roots.append(m * math.cos((theta + _TWO_PI) / 3.0) - p / 3.0)
            roots.append(m * math.cos((theta - _TWO_PI) / 3.0) - p / 3.0)
        else:
            A = -math.copysign((abs(R) + math.sqrt(R * R - Q * Q * Q)) ** (1.0 / 3.0), R)
            B = Q / A if A != 0.0 else 0.0
            roots.append(A + B - p / 3.0)
    out = []
    for x in roots:
        # guarded Newton polish: keep a step only if it reduces |f|
        f = ((a3 * x + a2) * x + a1) * x + a0
        for _ in range(2):
            df = (3.0 * a3 * x + 2.0 * a2) * x + a1
            if df == 0.0 or not math.isfinite(df):
                break
            x_new = x - f / df
            if not math.isfinite(x_new):
                break
            f_new = ((a3 * x_new + a2) * x_new + a1) * x_new + a0
            if abs(f_new) >= abs(f):
                break
            x, f = x_new, f_new
        out.append(x)
    out.sort()
    return out


def mode_distortion_scalar(l: float, b: float, d: float) -> float:
    """Reconstruction MSE (l*d^2 + b^2*d) / (b + d)^2, stable for extreme d."""
    if math.isinf(d):
        return l
    if d >= b:
        t = b / d
        return (l + b * t) / ((1.0 + t) * (1.0 + t))
    t = d / b
    return (l * t * t + d) / ((1.0 + t) * (1.0 + t))


def mode_rate_scalar(l: float, d: float) -> float:
    """Rate log2(1 + l/d) in bits; zero for an inactive mode."""
    if l <= 0.0 or math.isinf(d):
        return 0.0
    return math.log1p(l / d) / LN2


def _solve_mode(l: float, b: float, mu: float, d_min_rel: float, interior_only: bool) -> float:
    """Best per-mode noise level for the objective e(d) + mu*r(d).

    The default rule compares every stationary point against the d_min
    guard and the switch-off boundary. With ``interior_only`` the mode is
    pinned to a stationary point, preferring the efficient branch where
    the distortion stays below the mode variance; this is how the robust
    allocator explores active sets the plain dual rule cannot reach.
    """
    rho = l / b
    m = mu / (LN2 * b)
    # stationarity cubic in u = d/b, nondimensionalized for conditioning
    c3 = rho * (2.0 - m) - 1.0
    c2 = 2.0 * rho * rho - rho + 1.0 - 3.0 * m * rho
    c1 = rho * (1.0 - 3.0 * m)
    c0 = -m * rho
    cands = []
    for u in cubic_roots(c3, c2, c1, c0):
        if u > 0.0 and math.isfinite(u):
            cands.append(max(u * b, D_FLOOR))
    cands.sort()
    if interior_only:
        best_phi = math.inf
        best_d = math.inf
        best_useful_phi = math.inf
        best_useful_d = math.inf
        for d in cands:
            e = mode_distortion_scalar(l, b, d)
            phi = e + mu * mode_rate_scalar(l, d)
            if phi < best_phi:
                best_phi = phi
                best_d = d
            if e <= l and phi < best_useful_phi:
                best_useful_phi = phi
                best_useful_d = d
        return best_useful_d if math.isfinite(best_useful_d) else best_d
    cands.append(max(d_min_rel * l, D_FLOOR))
    best_phi = math.inf
    best_d = math.inf
    for d in cands:
        phi = mode_distortion_scalar(l, b, d) + mu * mode_rate_scalar(l, d)
        if phi < best_phi:
            best_phi = phi
            best_d = d
    if l < best_phi:  # switch-off boundary strictly beats every finite candidate
        return math.inf
    return best_d


def allocate_at_mu(lam, lam_b, mu, d_min_rel=1e-12, interior_only=False):
    """Per-mode noise levels minimizing e_i + mu*r_i, with rates and distortions.

    Returns (d, r, e) arrays; inactive modes carry d = inf, r = 0, e = lam_i.
    """
    lam = np.asarray(lam, dtype=float)
    lam_b = np.asarray(lam_b, dtype=float)
    n = lam.size
    d = np.empty(n)
    r = np.empty(n)
    e = np.empty(n)
    for i in range(n):
        di = _solve_mode(float(lam[i]), float(lam_b[i]), float(mu), float(d_min_rel), bool(interior_only))
        d[i] = di
        r[i] = mode_rate_scalar(float(lam[i]), di)
        e[i] = mode_distortion_scalar(float(lam[i]), float(lam_b[i]), di)
    return d, r, e
