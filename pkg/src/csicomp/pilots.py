"""Stacked pilot observation model and the linear MMSE posterior.

Pilots probe a comb of subcarriers over a few OFDM symbols; the stacked
observation is y = X h + n with unit-variance noise. The MMSE estimate of
the stacked channel h from y is linear in y, its covariance shrinks the
prior, and the estimation MSE is the trace deficit between the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .covariance import as_matrix
from .seeding import generator

__all__ = [
    "PilotConfig",
    "PosteriorModel",
    "comb_indices",
    "build_pilot_matrix",
    "mmse_posterior",
    "mmse_filter",
    "mmse_estimate",
]


@dataclass(frozen=True)
class PilotConfig:
    """Training setup: T_p pilot symbols over N_p probed subcarriers.

    probed_indices are 1-based subcarrier indices; snr_dl is the linear
    pre-beamforming downlink SNR. The pilot dimension is L_tr = T_p * N_p.
    """

    T_p: int
    N_p: int
    probed_indices: tuple
    snr_dl: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "probed_indices", tuple(int(i) for i in self.probed_indices))
        if self.T_p < 0 or self.N_p < 0:
            raise ValueError("T_p and N_p must be >= 0")
        if len(self.probed_indices) != self.N_p:
            raise ValueError(f"expected {self.N_p} probed indices, got {len(self.probed_indices)}")
        if len(set(self.probed_indices)) != len(self.probed_indices):
            raise ValueError("probed indices must be distinct")
        if self.snr_dl <= 0.0:
            raise ValueError("snr_dl must be positive")

    @property
    def L_tr(self) -> int:
        return self.T_p * self.N_p


@dataclass(frozen=True)
class PosteriorModel:
    """Covariance of the MMSE estimate and the estimation MSE floor."""

    C_tilde: np.ndarray
    D_mmse: float


def comb_indices(N: int, N_p: int) -> tuple:
    """Evenly spaced 1-based subcarrier indices: 1 + round(k*N/N_p)."""
    if N_p < 0 or N_p > N:
        raise ValueError("need 0 <= N_p <= N")
    return tuple(1 + int(round(k * N / N_p)) for k in range(N_p))


def build_pilot_matrix(config: PilotConfig, M: int, N: int) -> np.ndarray:
    """Stacked pilot matrix X of shape (L_tr, M*N).

    The row block for each probed subcarrier acts only on that subcarrier's
    antenna block; probed entries are i.i.d. circularly symmetric complex
    Gaussian with variance snr_dl/M, all other columns are zero. Blocks are
    drawn in ascending subcarrier order, deterministically from the seed.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    for idx in config.probed_indices:
        if not 1 <= idx <= N:
            raise ValueError(f"probed subcarrier index {idx} outside 1..{N}")
    L_tr = config.L_tr
    X = np.zeros((L_tr, M * N), dtype=complex)
    if L_tr == 0:
        return X
    rng = generator(config.seed)
    scale = np.sqrt(config.snr_dl / (2.0 * M))
    for j, idx in enumerate(sorted(config.probed_indices)):
        block = scale * (
            rng.standard_normal((config.T_p, M)) + 1j * rng.standard_normal((config.T_p, M))
        )
        X[j * config.T_p : (j + 1) * config.T_p, (idx - 1) * M : idx * M] = block
    return X


def _gram_factor(C: np.ndarray, X: np.ndarray):
    """Cholesky factor of the L_tr x L_tr system X C X^H + I, plus A = C X^H."""
    A = C @ X.conj().T
    G = X @ A
    G = 0.5 * (G + G.conj().T)
    G[np.diag_indices_from(G)] += 1.0
    return scipy.linalg.cho_factor(G, lower=True), A


def mmse_posterior(C_h, X: np.ndarray) -> PosteriorModel:
    """Posterior covariance C X^H (X C X^H + I)^{-1} X C and its MSE.

    Solves the small Gram system with a Hermitian factorization; never forms
    the inverse explicitly. An empty pilot matrix yields the no-observation
    posterior (zero covariance, MSE = trace of the prior).
    """
    C = as_matrix(C_h)
    if X.ndim != 2 or X.shape[1] != C.shape[0]:
        raise ValueError(f"pilot matrix shape {X.shape} incompatible with dim {C.shape[0]}")
    if X.shape[0] == 0:
        return PosteriorModel(C_tilde=np.zeros_like(C), D_mmse=float(np.trace(C).real))
    cf, A = _gram_factor(C, X)
    W = scipy.linalg.cho_solve(cf, A.conj().T)
    C_t = A @ W
    C_t = 0.5 * (C_t + C_t.conj().T)
    D = float(np.trace(C).real - np.trace(C_t).real)
    return PosteriorModel(C_tilde=C_t, D_mmse=max(D, 0.0))


def mmse_filter(C_h, X: np.ndarray) -> np.ndarray:
    """Linear MMSE filter C X^H (X C X^H + I)^{-1} of shape (M*N, L_tr)."""
    C = as_matrix(C_h)
    if X.ndim != 2 or X.shape[1] != C.shape[0]:
        raise ValueError(f"pilot matrix shape {X.shape} incompatible with dim {C.shape[0]}")
    if X.shape[0] == 0:
        return np.zeros((C.shape[0], 0), dtype=complex)
    cf, A = _gram_factor(C, X)
    return scipy.linalg.cho_solve(cf, A.conj().T).conj().T


def mmse_estimate(C_h, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """MMSE estimate C X^H (X C X^H + I)^{-1} y of the stacked channel."""
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError(f"observation length {y.shape} does not match {X.shape[0]} pilot rows")
    C = as_matrix(C_h)
    if X.shape[1] != C.shape[0]:
        raise ValueError(f"pilot matrix shape {X.shape} incompatible with dim {C.shape[0]}")
    if X.shape[0] == 0:
        return np.zeros(C.shape[0], dtype=complex)
    cf, A = _gram_factor(C, X)
    return A @ scipy.linalg.cho_solve(cf, y)
