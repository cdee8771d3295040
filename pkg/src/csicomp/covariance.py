"""Wideband MIMO-OFDM channel covariance synthesis.

The channel covariance is a sum of rank-one Kronecker terms, one per
propagation path: a delay signature across subcarriers crossed with a
uniform-linear-array steering signature across antennas, weighted by the
path power. With unit-modulus signatures and path powers summing to one,
the trace of the synthesized covariance equals the stacked dimension M*N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import generator

__all__ = [
    "MultipathParams",
    "ChannelCovariance",
    "CovarianceReport",
    "steering_vector",
    "delay_vector",
    "sample_multipath_params",
    "path_signatures",
    "synth_covariance",
    "validate_covariance",
    "as_matrix",
]

HERMITIAN_RTOL = 1e-10
PSD_RTOL = 1e-8
GAIN_SUM_TOL = 1e-12


@dataclass(frozen=True)
class MultipathParams:
    """Path-level description of one channel realization.

    gains are per-path powers (positive, summing to one), angles_deg are
    arrival angles in degrees within [-60, 60], delays are normalized to
    [0, 1] as a fraction of the maximum delay spread.
    """

    M: int
    N: int
    L: int
    gains: np.ndarray
    angles_deg: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        for name in ("gains", "angles_deg", "delays"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (self.L,):
                raise ValueError(f"{name} must have shape ({self.L},), got {arr.shape}")
        if self.M < 1 or self.N < 1 or self.L < 1:
            raise ValueError("M, N, L must all be >= 1")
        if np.any(self.gains <= 0.0):
            raise ValueError("path gains must be positive")
        if abs(float(self.gains.sum()) - 1.0) > GAIN_SUM_TOL:
            raise ValueError(f"path gains must sum to 1 (got {self.gains.sum()!r})")
        if np.any(np.abs(self.angles_deg) > 60.0):
            raise ValueError("angles must lie in [-60, 60] degrees")
        if np.any((self.delays < 0.0) | (self.delays > 1.0)):
            raise ValueError("normalized delays must lie in [0, 1]")


@dataclass(frozen=True)
class ChannelCovariance:
    """Hermitian PSD prior covariance of the stacked channel vector."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2 or mat.shape != (self.dim, self.dim):
            raise ValueError(f"matrix must be {self.dim}x{self.dim}, got {mat.shape}")


@dataclass(frozen=True)
class CovarianceReport:
    """Validation summary for a candidate covariance matrix."""

    dim: int
    hermitian_dev: float
    min_eigenvalue: float
    trace: float
    passed: bool


def as_matrix(C) -> np.ndarray:
    """Accept either a ChannelCovariance or a plain array."""
    if isinstance(C, ChannelCovariance):
        return C.matrix
    return np.asarray(C)


def steering_vector(theta_deg: float, M: int) -> np.ndarray:
    """Half-wavelength ULA response: entry m has phase -pi*m*sin(theta)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    phase = -math.pi * math.sin(math.radians(theta_deg)) * np.arange(M)
    return np.exp(1j * phase)


def delay_vector(tau: float, N: int, spread_factor: float | None = None) -> np.ndarray:
    """Subcarrier response of a path at normalized delay tau in [0, 1].

    Entry n has phase -2*pi*n*tau*W where the spread factor W sets the
    frequency selectivity (default N/4).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    W = N / 4.0 if spread_factor is None else float(spread_factor)
    phase = -2.0 * math.pi * tau * W * np.arange(N)
    return np.exp(1j * phase)


def sample_multipath_params(M: int, N: int, L: int, seed: int) -> MultipathParams:
    """Draw path powers, angles and delays for one covariance realization.

    Gains are Unif[0.4, 0.8] renormalized to sum to one, angles Unif[-60, 60]
    degrees, delays Unif[0, 1]; all deterministic given the seed.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    rng = generator(seed)
    raw = rng.uniform(0.4, 0.8, size=L)
    gains = raw / raw.sum()
    angles = rng.uniform(-60.0, 60.0, size=L)
    delays = rng.uniform(0.0, 1.0, size=L)
    return MultipathParams(M=M, N=N, L=L, gains=gains, angles_deg=angles, delays=delays)


def path_signatures(params: MultipathParams, spread_factor: float | None = None) -> np.ndarray:
    """MN x L factor G with columns sqrt(gain_l) * kron(b_l, a_l), so C = G G^H."""
    G = np.empty((params.M * params.N, params.L), dtype=complex)
    for ell in range(params.L):
        a = steering_vector(params.angles_deg[ell], params.M)
        b = delay_vector(params.delays[ell], params.N, spread_factor)
        G[:, ell] = math.sqrt(params.gains[ell]) * np.kron(b, a)
    return G


def synth_covariance(params: MultipathParams, spread_factor: float | None = None) -> ChannelCovariance:
    """Sum of per-path rank-one Kronecker terms; trace equals M*N, rank <= L."""
    G = path_signatures(params, spread_factor)
    C = G @ G.conj().T
    C = 0.5 * (C + C.conj().T)
    return ChannelCovariance(dim=params.M * params.N, matrix=C)


def validate_covariance(C) -> CovarianceReport:
    """Check the Hermitian/PSD/trace invariants of a covariance matrix."""
    mat = as_matrix(C)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"covariance must be square, got shape {mat.shape}")
    n = mat.shape[0]
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    herm_dev = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    trace = float(np.trace(mat).real)
    hermitian_ok = herm_dev <= HERMITIAN_RTOL * max(scale, 1e-300)
    if hermitian_ok:
        min_eig = float(np.linalg.eigvalsh(mat)[0])
    else:
        # eigvalsh assumes Hermitian input; fall back to the symmetrized part
        min_eig = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])
    psd_ok = min_eig >= -PSD_RTOL * trace / n if trace > 0 else False
    passed = hermitian_ok and psd_ok and trace > 0
    return CovarianceReport(
        dim=n,
        hermitian_dev=herm_dev,
        min_eigenvalue=min_eig,
        trace=trace,
        passed=passed,
    )
