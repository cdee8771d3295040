"""Independent brute-force oracles used to pin expected values in tests.

These deliberately use the plain textbook formulas (no stability tricks)
and exhaustive grid search, so they share no code path with the package.
"""

import numpy as np

LN2 = np.log(2.0)


def rate_bits(lam, d):
    return np.log2(1.0 + lam / d)


def distortion(lam, lam_b, d):
    return (lam * d**2 + lam_b**2 * d) / (lam_b + d) ** 2


def lagrangian_grid_min(lam, lam_b, mu, n=10**6, lo=1e-9, hi=1e6):
    """Minimizer of e(d) + mu*r(d) over a log grid plus the switch-off boundary."""
    d = np.geomspace(lo, hi, n)
    phi = distortion(lam, lam_b, d) + mu * rate_bits(lam, d)
    i = int(np.argmin(phi))
    if lam < phi[i]:
        return np.inf
    return float(d[i])


def _mode_table(lam, lam_b, n, lo, hi):
    """Rate/distortion samples for one mode, with the switch-off option appended."""
    d = np.geomspace(lo, hi, n)
    r = np.append(rate_bits(lam, d), 0.0)
    e = np.append(distortion(lam, lam_b, d), lam)
    return r, e


def grid_oracle_2mode(lam, lam_b, R, n=2000, lo=1e-9, hi=1e6):
    """Constrained minimum of e1 + e2 subject to r1 + r2 <= R on a 2-D log grid."""
    r1, e1 = _mode_table(lam[0], lam_b[0], n, lo, hi)
    r2, e2 = _mode_table(lam[1], lam_b[1], n, lo, hi)
    feasible = r1[:, None] + r2[None, :] <= R + 1e-12
    total = e1[:, None] + e2[None, :]
    return float(total[feasible].min())


def grid_oracle_3mode(lam, lam_b, R, n=300, lo=1e-9, hi=1e6):
    """3-mode constrained minimum: 2-D grid over (d1, d2), third mode closed form.

    For the last mode the distortion is increasing in d up to the point
    where it reaches the mode variance, so spending the entire remaining
    budget (or switching off) is optimal.
    """
    r1, e1 = _mode_table(lam[0], lam_b[0], n, lo, hi)
    r2, e2 = _mode_table(lam[1], lam_b[1], n, lo, hi)
    rem = R - (r1[:, None] + r2[None, :])
    feasible = rem >= -1e-12
    rem_pos = np.maximum(rem, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        d3 = lam[2] / np.expm1(rem_pos * LN2)
        e3 = np.where(rem_pos > 0.0, distortion(lam[2], lam_b[2], d3), lam[2])
    e3 = np.minimum(e3, lam[2])
    total = e1[:, None] + e2[None, :] + e3
    return float(total[feasible].min())
