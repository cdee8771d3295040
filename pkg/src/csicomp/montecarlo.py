"""Monte Carlo validation of the closed-form MSE expressions.

Two simulators: the per-mode Gaussian test channel with the decoder's
mismatched Wiener gain, and the full pilot/MMSE estimation chain. Both
accumulate in fixed-size chunks with per-chunk derived seeds, so results
are reproducible bit-for-bit regardless of how the work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import as_matrix
from .pilots import PilotConfig, build_pilot_matrix, mmse_filter, mmse_posterior
from .seeding import derive_seed, generator
from .spectrum import eigendecompose

__all__ = [
    "McConfig",
    "TestChannelResult",
    "PilotChainResult",
    "simulate_test_channel",
    "simulate_pilot_chain",
    "agreement_threshold",
]

CHUNK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    """Sample budget, seed and relative agreement tolerance."""

    n_samples: int
    seed: int
    tolerance_rel: float = 0.02

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.tolerance_rel < 0.0:
            raise ValueError("tolerance_rel must be >= 0")


@dataclass(frozen=True)
class TestChannelResult:
    per_mode_mse: np.ndarray
    per_mode_se: np.ndarray
    total_mse: float
    total_se: float
    n_samples: int


@dataclass(frozen=True)
class PilotChainResult:
    empirical_mse: float
    standard_error: float
    analytic_mse: float
    n_samples: int


def agreement_threshold(se: float, reference: float, tolerance_rel: float) -> float:
    """Looser of three standard errors and the relative tolerance band."""
    return max(3.0 * se, tolerance_rel * abs(reference))


def _complex_normal(rng, size, variance):
    s = math.sqrt(variance / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def simulate_test_channel(spectrum, d, cfg: McConfig) -> TestChannelResult:
    """Empirical per-mode MSE of the mismatched reconstruction.

    Per mode i draws z ~ CN(0, lambda_i) and q ~ CN(0, d_i), reconstructs
    with the decoder gain lambda_b/(lambda_b + d), and averages |z - zhat|^2.
    Inactive modes (d = inf) are reconstructed as zero.
    """
    from .allocation import _active_spectra  # local to avoid import cycle

    lam, lam_b = _active_spectra(spectrum)
    d = np.asarray(d, dtype=float)
    if d.shape != lam.shape:
        raise ValueError("noise levels must match the active mode count")
    n = int(cfg.n_samples)
    mse = np.empty(lam.size)
    se = np.empty(lam.size)
    for i in range(lam.size):
        k = 0.0 if math.isinf(d[i]) else lam_b[i] / (lam_b[i] + d[i])
        acc = 0.0
        acc2 = 0.0
        done = 0
        chunk = 0
        while done < n:
            cnt = min(CHUNK, n - done)
            rng = generator(derive_seed(cfg.seed, "testchan", i, chunk))
            z = _complex_normal(rng, cnt, lam[i])
            if k > 0.0:
                q = _complex_normal(rng, cnt, d[i])
                err = np.abs(z - k * (z + q)) ** 2
            else:
                err = np.abs(z) ** 2
            acc += float(err.sum())
            acc2 += float((err * err).sum())
            done += cnt
            chunk += 1
        m = acc / n
        var = max(acc2 / n - m * m, 0.0)
        mse[i] = m
        se[i] = math.sqrt(var / n)
    return TestChannelResult(
        per_mode_mse=mse,
        per_mode_se=se,
        total_mse=float(mse.sum()),
        total_se=float(np.sqrt(np.sum(se**2))),
        n_samples=n,
    )


def simulate_pilot_chain(C_h, pilot_cfg: PilotConfig, M: int, N: int, cfg: McConfig) -> PilotChainResult:
    """Empirical estimation MSE of the pilot/MMSE chain vs the analytic value.

    Channels are drawn through the eigen square root of the prior, observed
    through the pilot matrix with unit noise, estimated with the MMSE
    filter, and the squared error is averaged over cfg.n_samples draws.
    """
    C = as_matrix(C_h)
    X = build_pilot_matrix(pilot_cfg, M, N)
    post = mmse_posterior(C, X)
    W = mmse_filter(C, X)
    V, lam = eigendecompose(C)
    rank = int(np.count_nonzero(lam > 1e-12 * max(lam[0], 1e-300)))
    rank = max(rank, 1)
    B = V[:, :rank] * np.sqrt(lam[:rank])
    L_tr = X.shape[0]
    n = int(cfg.n_samples)
    acc = 0.0
    acc2 = 0.0
    done = 0
    chunk = 0
    while done < n:
        cnt = min(2048, n - done)
        rng = generator(derive_seed(cfg.seed, "pilotchain", chunk))
        w = _complex_normal(rng, (rank, cnt), 1.0)
        h = B @ w
        if L_tr > 0:
            noise = _complex_normal(rng, (L_tr, cnt), 1.0)
            est = W @ (X @ h + noise)
            err = np.sum(np.abs(h - est) ** 2, axis=0)
        else:
            err = np.sum(np.abs(h) ** 2, axis=0)
        acc += float(err.sum())
        acc2 += float((err * err).sum())
        done += cnt
        chunk += 1
    m = acc / n
    var = max(acc2 / n - m * m, 0.0)
    return PilotChainResult(
        empirical_mse=m,
        standard_error=math.sqrt(var / n),
        analytic_mse=post.D_mmse,
        n_samples=n,
    )
