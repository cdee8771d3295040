"""Eigen-domain view of a source covariance with a decoder-side twin.

The encoder and decoder are assumed to share the eigenbasis; the decoder's
knowledge error lives entirely in its eigenvalues, modeled as independent
log-domain (dB) Gaussian perturbations of the true spectrum. Numerically
zero modes are truncated before allocation so every retained mode has a
strictly positive variance on both sides.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .covariance import as_matrix
from .seeding import generator

__all__ = [
    "SpectrumPair",
    "MismatchSpec",
    "EmptySpectrumError",
    "eigendecompose",
    "eigenvalues_descending",
    "make_pair",
    "apply_mismatch_db",
    "inject_mismatch",
    "with_mismatch",
    "truncate_rank",
]

EPS_REL_DEFAULT = 1e-10
UNITARY_TOL = 1e-8


class EmptySpectrumError(ValueError):
    """Raised when truncation would drop every mode."""


@dataclass(frozen=True)
class SpectrumPair:
    """Shared eigenbasis with true and decoder-side eigenvalues.

    ``lambda_true`` is sorted descending with the first ``n_active`` entries
    strictly positive; ``lambda_dec`` is positive on those active modes.
    ``basis`` may be None when only eigenvalues are needed downstream (all
    per-mode formulas depend on the spectra alone).
    """

    basis: np.ndarray | None
    lambda_true: np.ndarray
    lambda_dec: np.ndarray
    n_active: int

    def __post_init__(self):
        lam = np.asarray(self.lambda_true, dtype=float)
        lam_b = np.asarray(self.lambda_dec, dtype=float)
        object.__setattr__(self, "lambda_true", lam)
        object.__setattr__(self, "lambda_dec", lam_b)
        if lam.shape != lam_b.shape:
            raise ValueError("true and decoder spectra must have equal length")
        if np.any(lam < 0.0):
            raise ValueError("eigenvalues must be nonnegative")
        if np.any(np.diff(lam) > 0.0):
            raise ValueError("lambda_true must be sorted descending")
        if not 0 <= self.n_active <= lam.size:
            raise ValueError(f"n_active {self.n_active} out of range")
        if np.any(lam[: self.n_active] <= 0.0):
            raise ValueError("active true eigenvalues must be positive")
        if np.any(lam_b[: self.n_active] <= 0.0):
            raise ValueError("active decoder eigenvalues must be positive")

    @property
    def active_true(self) -> np.ndarray:
        return self.lambda_true[: self.n_active]

    @property
    def active_dec(self) -> np.ndarray:
        return self.lambda_dec[: self.n_active]


@dataclass(frozen=True)
class MismatchSpec:
    """Log-domain perturbation level (dB standard deviation) and its seed."""

    sigma_delta_db: float
    seed: int

    def __post_init__(self):
        if self.sigma_delta_db < 0.0:
            raise ValueError("sigma_delta_db must be >= 0")


def _check_hermitian(mat: np.ndarray, rtol: float) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    dev = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
    if dev > rtol * max(scale, 1e-300):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e} vs scale {scale:.3e})")


def eigendecompose(C, hermitian_rtol: float = 1e-10):
    """Unitary basis and eigenvalues of a Hermitian PSD matrix.

    Eigenvalues are returned real, sorted descending and clamped at zero
    from below; the basis columns are the matching eigenvectors.
    """
    mat = as_matrix(C)
    _check_hermitian(mat, hermitian_rtol)
    w, V = np.linalg.eigh(mat)
    order = np.argsort(w, kind="stable")[::-1]
    return V[:, order], np.maximum(w[order], 0.0)


def eigenvalues_descending(C, hermitian_rtol: float = 1e-10) -> np.ndarray:
    """Eigenvalues only (descending, clamped at zero); cheaper than eigendecompose."""
    mat = as_matrix(C)
    _check_hermitian(mat, hermitian_rtol)
    w = np.linalg.eigvalsh(mat)
    return np.maximum(w[::-1], 0.0)


def make_pair(basis, lambda_true, lambda_dec=None, n_active=None) -> SpectrumPair:
    """Assemble a SpectrumPair; decoder spectrum defaults to the true one."""
    lam = np.asarray(lambda_true, dtype=float)
    lam_b = lam.copy() if lambda_dec is None else np.asarray(lambda_dec, dtype=float)
    if n_active is None:
        n_active = int(np.count_nonzero(lam > 0.0))
    return SpectrumPair(basis=basis, lambda_true=lam, lambda_dec=lam_b, n_active=n_active)


def apply_mismatch_db(lambda_true, delta_db) -> np.ndarray:
    """Decoder eigenvalues lambda * 10^(delta/10) for given dB offsets."""
    lam = np.asarray(lambda_true, dtype=float)
    return lam * 10.0 ** (np.asarray(delta_db, dtype=float) / 10.0)


def inject_mismatch(lambda_true, spec: MismatchSpec) -> np.ndarray:
    """Perturb each eigenvalue by an independent Gaussian dB offset.

    Offsets are sigma_delta_db * z with z standard normal, so the same seed
    produces proportionally scaled perturbations across mismatch levels.
    Zero modes stay zero.
    """
    lam = np.asarray(lambda_true, dtype=float)
    delta = spec.sigma_delta_db * generator(spec.seed).standard_normal(lam.size)
    return apply_mismatch_db(lam, delta)


def with_mismatch(pair: SpectrumPair, spec: MismatchSpec) -> SpectrumPair:
    """Copy of the pair with freshly injected decoder eigenvalues."""
    return dataclasses.replace(pair, lambda_dec=inject_mismatch(pair.lambda_true, spec))


def truncate_rank(pair: SpectrumPair, eps_rel: float = EPS_REL_DEFAULT) -> SpectrumPair:
    """Retain modes with lambda_i > eps_rel * lambda_1.

    Retained eigenvalues are not altered, only the active count. Dropped
    modes carry zero rate and zero distortion downstream.
    """
    if not 0.0 < eps_rel < 1.0:
        raise ValueError("eps_rel must lie in (0, 1)")
    lam = pair.lambda_true
    if lam.size == 0 or lam[0] <= 0.0:
        raise EmptySpectrumError("spectrum has no positive modes")
    n_active = int(np.count_nonzero(lam > eps_rel * lam[0]))
    if n_active == 0:
        raise EmptySpectrumError("truncation dropped every mode")
    return dataclasses.replace(pair, n_active=n_active)
