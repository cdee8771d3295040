"""Self-checks: matrix-vs-mode consistency and Monte Carlo validation.

Deterministic checks compare the matrix-form rate/distortion evaluators
against the per-mode sums on random shared-eigenbasis instances at the
given relative tolerance. Statistical checks compare empirical MSEs against
the closed forms, passing within the looser of three standard errors and
the relative tolerance; they are skipped when fewer than two samples are
requested (no standard error can be formed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import rrwf
from .config import ExperimentConfig
from .covariance import sample_multipath_params, synth_covariance
from .distortion import (
    distortion_matrix,
    mode_distortions,
    mode_rates,
    rate_matrix,
    mismatched_error_covariance,
)
from .montecarlo import McConfig, agreement_threshold, simulate_pilot_chain, simulate_test_channel
from .pilots import PilotConfig, comb_indices
from .seeding import derive_seed, generator
from .spectrum import MismatchSpec, inject_mismatch

__all__ = ["CheckResult", "VerificationReport", "run_verification"]

DETERMINISTIC_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "ok" | "FAIL" | "SKIPPED"
    observed: float
    expected: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.status != "FAIL" for c in self.checks)


def _haar_unitary(rng, n: int) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def _relative(observed: float, expected: float) -> float:
    return abs(observed - expected) / max(abs(expected), 1e-300)


def _cross_checks(seed: int, tol: float, n_instances: int = 10):
    checks = []
    worst_rate = worst_dist = worst_expand = 0.0
    for k in range(n_instances):
        rng = generator(derive_seed(seed, "crosscheck", k))
        n = int(rng.integers(2, 33))
        F = _haar_unitary(rng, n)
        lam = 10.0 ** rng.uniform(-3, 3, n)
        lam_b = lam * 10.0 ** (rng.normal(0, 0.4, n))
        d = 10.0 ** rng.uniform(-4, 2, n)
        C_u = (F * lam) @ F.conj().T
        C_ub = (F * lam_b) @ F.conj().T
        C_q = (F * d) @ F.conj().T
        worst_rate = max(worst_rate, _relative(rate_matrix(C_u, C_q), float(mode_rates(lam, d).sum())))
        dm = distortion_matrix(C_u, C_ub, C_q)
        worst_dist = max(worst_dist, _relative(dm, float(mode_distortions(lam, lam_b, d).sum())))
        expanded = float(np.trace(mismatched_error_covariance(C_u, C_ub, C_q)).real)
        worst_expand = max(worst_expand, _relative(dm, expanded))
    for name, worst in (
        ("rate matrix vs per-mode sum", worst_rate),
        ("distortion matrix vs per-mode sum", worst_dist),
        ("distortion trace expansion identity", worst_expand),
    ):
        checks.append(
            CheckResult(
                name=name,
                status="ok" if worst <= tol else "FAIL",
                observed=worst,
                expected=0.0,
                threshold=tol,
                detail=f"worst relative deviation over {n_instances} instances",
            )
        )
    return checks


def _test_channel_checks(cfg: ExperimentConfig, n_samples: int, tol_mc: float):
    checks = []
    cases = [
        ("matched mode MSE", 1.0, 1.0, 1.0),
        ("mismatched mode MSE", 1.0, 2.0, 1.0),
        ("weak decoder mode MSE", 2.0, 0.5, 0.7),
    ]
    for name, lam, lam_b, d in cases:
        mc = McConfig(n_samples=n_samples, seed=derive_seed(cfg.master_seed, "verify", name))
        res = simulate_test_channel(([lam], [lam_b]), [d], mc)
        expected = float(mode_distortions([lam], [lam_b], [d])[0])
        thr = agreement_threshold(res.per_mode_se[0], expected, tol_mc)
        ok = abs(res.per_mode_mse[0] - expected) <= thr
        checks.append(
            CheckResult(
                name=name,
                status="ok" if ok else "FAIL",
                observed=float(res.per_mode_mse[0]),
                expected=expected,
                threshold=thr,
            )
        )
    return checks


def _pilot_chain_check(cfg: ExperimentConfig, n_samples: int, tol_mc: float):
    params = sample_multipath_params(cfg.M, cfg.N, cfg.L, derive_seed(cfg.master_seed, "cov", 0))
    C_h = synth_covariance(params, cfg.spread_factor)
    pcfg = PilotConfig(
        T_p=cfg.T_p,
        N_p=cfg.N_p,
        probed_indices=comb_indices(cfg.N, cfg.N_p),
        snr_dl=cfg.snr_dl,
        seed=derive_seed(cfg.master_seed, "pilot", 0),
    )
    mc = McConfig(n_samples=n_samples, seed=derive_seed(cfg.master_seed, "verify", "pilotchain"))
    res = simulate_pilot_chain(C_h, pcfg, cfg.M, cfg.N, mc)
    thr = agreement_threshold(res.standard_error, res.analytic_mse, tol_mc)
    ok = abs(res.empirical_mse - res.analytic_mse) <= thr
    return CheckResult(
        name="pilot chain MSE",
        status="ok" if ok else "FAIL",
        observed=res.empirical_mse,
        expected=res.analytic_mse,
        threshold=thr,
    )


def _kkt_residual_check(cfg: ExperimentConfig, tol: float):
    rng = generator(derive_seed(cfg.master_seed, "verify", "kkt"))
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        lam = 10.0 ** rng.uniform(-2, 2, n)
        lam = np.sort(lam)[::-1]
        lam_b = inject_mismatch(lam, MismatchSpec(4.0, int(rng.integers(0, 2**63))))
        alloc = rrwf((lam, lam_b), float(rng.uniform(0.5, 4.0 * n)))
        mu = alloc.multiplier
        for i in range(n):
            d = alloc.d[i]
            if not math.isfinite(d):
                continue
            lhs = math.log(2.0) * lam_b[i] * d * (lam[i] + d) * (
                lam_b[i] ** 2 + (2.0 * lam[i] - lam_b[i]) * d
            )
            rhs = mu * lam[i] * (lam_b[i] + d) ** 3
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return CheckResult(
        name="robust allocation stationarity residual",
        status="ok" if worst <= tol else "FAIL",
        observed=worst,
        expected=0.0,
        threshold=tol,
        detail="worst relative residual over 20 random allocations",
    )


def run_verification(
    cfg: ExperimentConfig,
    n_samples=None,
    tolerance_rel=None,
    seed=None,
) -> VerificationReport:
    """Run the full self-check suite and collect per-check results.

    ``tolerance_rel`` overrides both the deterministic cross-check tolerance
    and the Monte Carlo relative band when given; the Monte Carlo pilot
    chain caps its sample count at 20000 (the dominant cost at full
    dimension). With fewer than two samples the statistical checks are
    skipped, since no standard error can be formed.
    """
    if seed is not None:
        import dataclasses as _dc

        cfg = _dc.replace(cfg, master_seed=int(seed))
    n = cfg.n_samples if n_samples is None else int(n_samples)
    tol_det = DETERMINISTIC_TOL if tolerance_rel is None else float(tolerance_rel)
    tol_mc = cfg.mc_tolerance_rel if tolerance_rel is None else float(tolerance_rel)
    kkt_tol = 1e-6 if tolerance_rel is None else max(float(tolerance_rel), 0.0)

    checks = _cross_checks(cfg.master_seed, tol_det)
    checks.append(_kkt_residual_check(cfg, kkt_tol))
    if n < 2:
        for name in ("matched mode MSE", "mismatched mode MSE", "weak decoder mode MSE", "pilot chain MSE"):
            checks.append(
                CheckResult(
                    name=name,
                    status="SKIPPED",
                    observed=math.nan,
                    expected=math.nan,
                    threshold=math.nan,
                    detail="insufficient samples",
                )
            )
    else:
        checks.extend(_test_channel_checks(cfg, n, tol_mc))
        checks.append(_pilot_chain_check(cfg, min(n, 20000), tol_mc))
    return VerificationReport(checks=checks)
