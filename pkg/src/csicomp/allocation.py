"""Rate allocation over covariance eigenmodes under a total bit budget.

Four schemes:

* ``rwf``     -- classical reverse water-filling on the true spectrum: a
  common per-mode distortion level clipped at the mode variance.
* ``rrwf``    -- robust allocation that anticipates the decoder's mismatched
  eigenvalues: outer bisection on the Lagrange multiplier with a per-mode
  cubic stationarity solve (the compiled kernels) in the inner loop.
* ``asrwf``   -- water-filling designed on the decoder's (wrong) spectrum,
  with the water level rescaled so the rate actually spent by the encoder
  (which knows the true spectrum) meets the budget.
* ``uniform`` -- equal rate over the strongest modes.

Noise levels use ``inf`` to encode a switched-off mode throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distortion import mode_distortions, mode_rates
from .spectrum import SpectrumPair

__all__ = [
    "Allocation",
    "ConvergenceError",
    "mode_rate",
    "solve_mode_kkt",
    "rwf",
    "rrwf",
    "asrwf",
    "uniform_alloc",
    "default_l_strong",
]

LN2 = 0.6931471805599453
D_MIN_REL_DEFAULT = 1e-12
MAX_BISECT_ITER = 200


class ConvergenceError(RuntimeError):
    """Multiplier bisection failed to bracket or converge."""


@dataclass(frozen=True)
class Allocation:
    """Per-mode test-channel noise levels and rates for one scheme.

    ``multiplier`` is the scheme's scalar knob: the water level for the
    water-filling schemes, the Lagrange multiplier for the robust scheme,
    and the per-mode rate for the uniform scheme. ``design_rate_bits``
    records the rate the decoder-side design believed it was spending when
    that differs from the true rate (assumed-statistics scheme only).
    """

    scheme: str
    d: np.ndarray
    r: np.ndarray
    multiplier: float
    rate_total: float
    design_rate_bits: float | None = None


def _active_spectra(spectrum):
    """Accept a SpectrumPair or a (lambda_true, lambda_dec) pair of arrays."""
    if isinstance(spectrum, SpectrumPair):
        lam, lam_b = spectrum.active_true, spectrum.active_dec
    else:
        lam, lam_b = spectrum
        lam = np.asarray(lam, dtype=float)
        lam_b = np.asarray(lam_b, dtype=float)
    if lam.size == 0:
        raise ValueError("spectrum has no active modes")
    if lam.shape != lam_b.shape:
        raise ValueError("true and decoder spectra must have equal length")
    if np.any(lam <= 0.0) or np.any(lam_b <= 0.0):
        raise ValueError("active eigenvalues must be positive")
    return lam, lam_b


def _positive_spectrum(lambda_true) -> np.ndarray:
    lam = np.asarray(lambda_true, dtype=float)
    if lam.size == 0:
        raise ValueError("spectrum is empty")
    if np.any(lam <= 0.0):
        raise ValueError("eigenvalues must be positive")
    return lam


def _inactive_allocation(scheme: str, n: int, multiplier: float) -> Allocation:
    return Allocation(
        scheme=scheme,
        d=np.full(n, np.inf),
        r=np.zeros(n),
        multiplier=multiplier,
        rate_total=0.0,
    )


def mode_rate(lambda_i: float, d_i: float) -> float:
    """Per-mode rate log2(1 + lambda_i/d_i) in bits; 0 when lambda_i = 0."""
    if lambda_i < 0.0:
        raise ValueError("lambda_i must be >= 0")
    if math.isinf(d_i):
        return 0.0
    if d_i <= 0.0:
        raise ValueError("d_i must be positive")
    if lambda_i == 0.0:
        return 0.0
    return math.log1p(lambda_i / d_i) / LN2


def solve_mode_kkt(
    lambda_i: float,
    lambda_b_i: float,
    mu: float,
    d_min_rel: float = D_MIN_REL_DEFAULT,
) -> float:
    """Best noise level for one mode at multiplier price mu.

    Among the positive roots of the stationarity cubic plus the d_min
    guard, returns the minimizer of e_i(d) + mu*r_i(d); returns inf when
    switching the mode off is strictly better than every finite candidate.
    """
    if lambda_i <= 0.0 or lambda_b_i <= 0.0:
        raise ValueError("active eigenvalues must be positive")
    if mu < 0.0:
        raise ValueError("mu must be >= 0")
    d, _, _ = _kernels.allocate_at_mu([lambda_i], [lambda_b_i], mu, d_min_rel)
    return float(d[0])


def _water_level(lam: np.ndarray, rate_bits: float) -> float:
    """Distortion-space water level: sum over {lam > g} of log2(lam/g) = R.

    Bisection locates the active set, then the level is polished to the
    exact geometric-mean closed form for that set.
    """
    lam_sorted = np.sort(lam)[::-1]
    logs = np.log(lam_sorted)
    target = rate_bits * LN2

    def rate_nats(g: float) -> float:
        act = lam_sorted > g
        return float(np.sum(logs[act] - math.log(g))) if act.any() else 0.0

    lo = float(lam_sorted[-1]) * 2.0 ** (-rate_bits - 1.0)
    hi = float(lam_sorted[0])
    for _ in range(MAX_BISECT_ITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if rate_nats(mid) > target:
            lo = mid
        else:
            hi = mid
    k = int(np.count_nonzero(lam_sorted > 0.5 * (lo + hi)))
    k = max(k, 1)
    # exact level for the located active set
    g = math.exp((float(np.sum(logs[:k])) - target) / k)
    return g


def rwf(lambda_true, rate_bits: float) -> Allocation:
    """Classical reverse water-filling on the true spectrum.

    Per-mode distortion is min(g, lambda_i) for a water level g meeting the
    rate budget; noise levels are recovered as d = lambda*g/(lambda - g) on
    active modes.
    """
    lam = _positive_spectrum(lambda_true)
    R = float(rate_bits)
    if R < 0.0:
        raise ValueError("rate budget must be >= 0")
    if R == 0.0:
        return _inactive_allocation("rwf", lam.size, float(lam.max()))
    g = _water_level(lam, R)
    act = lam > g
    d = np.full(lam.size, np.inf)
    r = np.zeros(lam.size)
    d[act] = lam[act] * g / (lam[act] - g)
    r[act] = np.log(lam[act] / g) / LN2
    return Allocation(
        scheme="rwf", d=d, r=r, multiplier=g, rate_total=float(r.sum())
    )


def asrwf(spectrum, rate_bits: float, match_true_rate: bool = True) -> Allocation:
    """Water-filling designed on the decoder spectrum, spent on the true one.

    The noise levels follow the decoder-side water level; per-mode rates are
    the true ones (the encoder knows the true spectrum). By default the
    water level is rescaled so the true total rate meets the budget, keeping
    cross-scheme comparisons at equal spent bits; the decoder-side design
    rate is recorded separately.
    """
    lam, lam_b = _active_spectra(spectrum)
    R = float(rate_bits)
    if R < 0.0:
        raise ValueError("rate budget must be >= 0")
    if R == 0.0:
        out = _inactive_allocation("asrwf", lam.size, float(lam_b.max()))
        return Allocation(
            scheme="asrwf", d=out.d, r=out.r, multiplier=out.multiplier,
            rate_total=0.0, design_rate_bits=0.0,
        )

    def levels(g: float):
        act = lam_b > g
        d = np.full(lam.size, np.inf)
        d[act] = lam_b[act] * g / (lam_b[act] - g)
        return d, act

    if match_true_rate:
        def true_rate(g: float) -> float:
            d, _ = levels(g)
            return float(mode_rates(lam, d).sum())

        hi = float(lam_b.max())
        lo = hi
        for _ in range(4 * MAX_BISECT_ITER):
            lo = max(0.5 * lo, 1e-300)
            if true_rate(lo) >= R:
                break
            if lo == 1e-300:
                raise ConvergenceError("could not bracket the assumed-statistics water level")
        else:
            raise ConvergenceError("could not bracket the assumed-statistics water level")
        for _ in range(MAX_BISECT_ITER):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if true_rate(mid) > R:
                lo = mid
            else:
                hi = mid
        g = 0.5 * (lo + hi)
    else:
        g = _water_level(lam_b, R)
    d, act = levels(g)
    r = mode_rates(lam, d)
    design = float(np.sum(np.log(lam_b[act] / g)) / LN2) if act.any() else 0.0
    return Allocation(
        scheme="asrwf", d=d, r=r, multiplier=g,
        rate_total=float(r.sum()), design_rate_bits=design,
    )


def default_l_strong(lambda_true, rel: float = 1e-3) -> int:
    """Number of modes above rel * lambda_max; the uniform scheme's default."""
    lam = _positive_spectrum(lambda_true)
    return max(int(np.count_nonzero(lam > rel * lam.max())), 1)


def uniform_alloc(lambda_true, rate_bits: float, l_strong: int) -> Allocation:
    """Equal rate over the l_strong strongest modes."""
    lam = _positive_spectrum(lambda_true)
    R = float(rate_bits)
    if R < 0.0:
        raise ValueError("rate budget must be >= 0")
    if not 1 <= l_strong <= lam.size:
        raise ValueError(f"l_strong must lie in 1..{lam.size}, got {l_strong}")
    order = np.argsort(-lam, kind="stable")
    d = np.full(lam.size, np.inf)
    r = np.zeros(lam.size)
    if R > 0.0:
        r_per = R / l_strong
        strongest = order[:l_strong]
        r[strongest] = r_per
        gain = math.expm1(r_per * LN2)  # 2^r_per - 1
        d[strongest] = np.maximum(lam[strongest] / gain, 1e-300)
    return Allocation(
        scheme="uniform", d=d, r=r,
        multiplier=R / l_strong, rate_total=float(r.sum()),
    )


class _Best:
    """Tracks the best rate-feasible candidate seen during bisection."""

    def __init__(self, budget: float, feas_eps: float):
        self.budget = budget
        self.feas_eps = feas_eps
        self.key = None
        self.d = None
        self.r = None
        self.mu = None
        self.rate = None
        self.dist = None

    def offer(self, mu: float, d, r, e) -> float:
        rate = float(r.sum())
        dist = float(e.sum())
        if rate <= self.budget + self.feas_eps:
            key = (dist, abs(self.budget - rate), mu)
            if self.key is None or key < self.key:
                self.key = key
                self.d, self.r = d, r
                self.mu, self.rate, self.dist = mu, rate, dist
        return rate


def rrwf(
    spectrum,
    rate_bits: float,
    d_min_rel: float = D_MIN_REL_DEFAULT,
    max_iter: int = MAX_BISECT_ITER,
) -> Allocation:
    """Robust allocation for a mismatched decoder spectrum.

    Bisects the multiplier so the per-mode stationarity solutions meet the
    rate budget, tracking every rate-feasible candidate and returning the
    one with the smallest true distortion. Two refinements cover the
    non-convex corner cases: when the total rate jumps across the budget
    (a mode switching off), the feasible side is re-solved with its active
    set held fixed; and modes the dual rule leaves off despite having an
    efficient interior branch (decoder variance above twice the true one)
    are retried pinned on.
    """
    lam, lam_b = _active_spectra(spectrum)
    R = float(rate_bits)
    if R < 0.0:
        raise ValueError("rate budget must be >= 0")
    n = lam.size
    if R == 0.0:
        return _inactive_allocation("rrwf", n, math.inf)

    feas_eps = 1e-12 * max(R, 1.0)
    best = _Best(R, feas_eps)

    def probe(mu: float, force_on=None, restrict_to=None) -> float:
        """One dual evaluation; forced modes are pinned interior, modes
        outside the restriction are switched off."""
        if force_on is None and restrict_to is None:
            d, r, e = _kernels.allocate_at_mu(lam, lam_b, mu, d_min_rel)
            return best.offer(mu, d, r, e)
        keep = np.ones(n, dtype=bool) if restrict_to is None else restrict_to
        forced = np.zeros(n, dtype=bool) if force_on is None else force_on
        free = keep & ~forced
        d = np.full(n, np.inf)
        r = np.zeros(n)
        e = lam.copy()
        for mask, pinned in ((free, False), (keep & forced, True)):
            if mask.any():
                dm, rm, em = _kernels.allocate_at_mu(lam[mask], lam_b[mask], mu, d_min_rel, pinned)
                d[mask], r[mask], e[mask] = dm, rm, em
        return best.offer(mu, d, r, e)

    def bracket_and_bisect(mu_seed: float, force_on=None, restrict_to=None) -> None:
        """Grow a bracket around the budget-crossing multiplier, then bisect."""
        lo = mu_seed
        for _ in range(4 * max_iter):
            if probe(lo, force_on, restrict_to) >= R:
                break
            lo *= 0.5
            if lo < 1e-280:
                return  # budget unreachable under this restriction
        hi = mu_seed
        for _ in range(max_iter):
            if probe(hi, force_on, restrict_to) < R:
                break
            hi *= 2.0
        else:
            return
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if probe(mid, force_on, restrict_to) >= R:
                lo = mid
            else:
                hi = mid

    mu_scale = LN2 * float(lam.max())
    rate_cap = probe(0.0)
    if rate_cap >= R:
        mu_hi = mu_scale
        for _ in range(max_iter):
            if probe(mu_hi) < R:
                break
            mu_hi *= 2.0
        else:
            raise ConvergenceError(
                f"could not bracket the multiplier (rate still above {R} bits at mu={mu_hi:.3e})"
            )
        lo, hi = 0.0, mu_hi
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if probe(mid) >= R:
                lo = mid
            else:
                hi = mid
    else:
        # budget above the mu -> 0+ guard cap: push noise below d_min via tiny mu
        bracket_and_bisect(mu_scale * 2.0 ** -40)
        if best.key is None:
            raise ConvergenceError(f"rate budget {R} unreachable (cap {rate_cap:.6g} bits)")

    if best.key is None:
        raise ConvergenceError(f"no rate-feasible allocation found for budget {R} bits")

    rate_tol = max(1e-6, 1e-9 * R)
    if best.rate < R - rate_tol:
        # active-set jump left slack; push rate back into the jumped set
        subset = np.isfinite(best.d)
        if subset.any():
            mu0 = best.mu if best.mu > 0.0 else mu_scale * 2.0 ** -40
            bracket_and_bisect(mu0, force_on=subset, restrict_to=subset)

    # modes the dual rule switched off but that own an efficient interior
    # branch; retry with them pinned on (covers the duality gap)
    overshoot_off = np.isinf(best.d) & (lam_b > 2.0 * lam)
    idx = np.flatnonzero(overshoot_off)
    if idx.size:
        mu0 = best.mu if best.mu > 0.0 else mu_scale * 2.0 ** -40
        trials = [np.array([i]) for i in idx]
        if 2 <= idx.size <= 5:
            trials += [np.array(pair) for pair in _pairs(idx)]
        if idx.size >= 2:
            trials.append(idx)
        for trial in trials:
            force = np.zeros(n, dtype=bool)
            force[trial] = True
            bracket_and_bisect(mu0, force_on=force)

    return Allocation(
        scheme="rrwf", d=best.d, r=best.r,
        multiplier=float(best.mu), rate_total=float(best.rate),
    )


def _pairs(idx):
    for i in range(idx.size):
        for j in range(i + 1, idx.size):
            yield (idx[i], idx[j])


def rrwf_distortion(spectrum, alloc: Allocation) -> float:
    """Total true distortion of an allocation against a spectrum pair."""
    lam, lam_b = _active_spectra(spectrum)
    return float(mode_distortions(lam, lam_b, alloc.d).sum())
