"""Achievable rate and true distortion of the Gaussian test channel.

The matrix forms take arbitrary source/decoder/noise covariances: rate is a
log-determinant and distortion is the trace of the error covariance of the
decoder's (possibly mismatched) Wiener reconstruction. When all three
matrices share an eigenbasis both quantities decouple into sums of per-mode
terms, which is the form the allocator optimizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "DistortionReport",
    "mode_distortion",
    "mode_distortions",
    "mode_rates",
    "rate_matrix",
    "distortion_matrix",
    "mismatched_filter",
    "mismatched_error_covariance",
    "evaluate_allocation",
    "db",
]

LN2 = 0.6931471805599453


@dataclass(frozen=True)
class DistortionReport:
    """Totals for one allocation: quantization, end-to-end, and NMSE in dB."""

    d_quant: float
    nmse_db: float
    per_mode_e: np.ndarray
    d_e2e: float
    nmse_e2e_db: float
    rate_bits: float


def db(x: float) -> float:
    """10*log10(x), with -inf for a zero argument."""
    if x <= 0.0:
        return float("-inf")
    return 10.0 * math.log10(x)


def mode_distortion(lambda_i: float, lambda_b_i: float, d_i: float) -> float:
    """Per-mode true MSE (lambda*d^2 + lambda_b^2*d) / (lambda_b + d)^2.

    d = inf encodes a switched-off mode and returns the full variance.
    """
    if lambda_i < 0.0:
        raise ValueError("lambda_i must be >= 0")
    if lambda_b_i <= 0.0:
        raise ValueError("lambda_b_i must be positive")
    if math.isinf(d_i):
        return float(lambda_i)
    if d_i <= 0.0:
        raise ValueError("d_i must be positive")
    if d_i >= lambda_b_i:
        t = lambda_b_i / d_i
        return (lambda_i + lambda_b_i * t) / ((1.0 + t) * (1.0 + t))
    t = d_i / lambda_b_i
    return (lambda_i * t * t + d_i) / ((1.0 + t) * (1.0 + t))


def mode_distortions(lam, lam_b, d) -> np.ndarray:
    """Vectorized per-mode distortions; inactive (inf) entries give lambda_i."""
    lam = np.asarray(lam, dtype=float)
    lam_b = np.asarray(lam_b, dtype=float)
    d = np.asarray(d, dtype=float)
    out = lam.astype(float).copy()
    act = np.isfinite(d)
    if np.any(act):
        la, ba, da = lam[act], lam_b[act], d[act]
        big = da >= ba
        t = np.where(big, ba / np.where(da > 0, da, 1.0), da / ba)
        num = np.where(big, la + ba * t, la * t * t + da)
        out[act] = num / ((1.0 + t) * (1.0 + t))
    return out


def mode_rates(lam, d) -> np.ndarray:
    """Vectorized per-mode rates log2(1 + lambda/d); zero on inactive modes."""
    lam = np.asarray(lam, dtype=float)
    d = np.asarray(d, dtype=float)
    out = np.zeros(np.broadcast(lam, d).shape)
    act = np.isfinite(d) & (lam > 0.0)
    lam_a = np.broadcast_to(lam, out.shape)[act]
    d_a = np.broadcast_to(d, out.shape)[act]
    out[act] = np.log1p(lam_a / d_a) / LN2
    return out


def _as_square(name: str, A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def rate_matrix(C_u, C_q) -> float:
    """Achievable rate log2 det(I + C_u C_q^{-1}) in bits.

    Computed from the generalized Hermitian eigenvalues of (C_u, C_q), which
    factorizes C_q instead of inverting it; C_u must be PSD and C_q positive
    definite.
    """
    C_u = _as_square("C_u", C_u)
    C_q = _as_square("C_q", C_q)
    if C_u.shape != C_q.shape:
        raise ValueError(f"dimension mismatch: {C_u.shape} vs {C_q.shape}")
    try:
        w = scipy.linalg.eigh(C_u, C_q, eigvals_only=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ValueError(f"C_q is not positive definite: {exc}") from exc
    w = np.maximum(w, 0.0)
    return float(np.sum(np.log1p(w)) / LN2)


def mismatched_filter(C_ub, C_q) -> np.ndarray:
    """Wiener filter K = C_ub (C_ub + C_q)^{-1} built from the decoder model."""
    C_ub = _as_square("C_ub", C_ub)
    C_q = _as_square("C_q", C_q)
    if C_ub.shape != C_q.shape:
        raise ValueError(f"dimension mismatch: {C_ub.shape} vs {C_q.shape}")
    A = C_ub + C_q
    # K = C_ub A^{-1} = (A^{-1} C_ub)^H for Hermitian A, C_ub
    return np.linalg.solve(A, C_ub).conj().T


def mismatched_error_covariance(C_u, C_ub, C_q) -> np.ndarray:
    """(I - K) C_u (I - K)^H + K C_q K^H for the mismatched filter K."""
    C_u = _as_square("C_u", C_u)
    K = mismatched_filter(C_ub, C_q)
    if K.shape != C_u.shape:
        raise ValueError(f"dimension mismatch: {C_u.shape} vs {K.shape}")
    I_K = np.eye(C_u.shape[0], dtype=complex) - K
    C_q = np.asarray(C_q)
    return I_K @ C_u @ I_K.conj().T + K @ C_q @ K.conj().T


def distortion_matrix(C_u, C_ub, C_q) -> float:
    """True MSE tr(C_u - K C_u - C_u K^H + K (C_u + C_q) K^H), K from C_ub."""
    C_u = _as_square("C_u", C_u)
    C_ub = _as_square("C_ub", C_ub)
    C_q = _as_square("C_q", C_q)
    if not (C_u.shape == C_ub.shape == C_q.shape):
        raise ValueError(
            f"dimension mismatch: {C_u.shape}, {C_ub.shape}, {C_q.shape}"
        )
    K = mismatched_filter(C_ub, C_q)
    total = np.trace(C_u - K @ C_u - C_u @ K.conj().T + K @ (C_u + C_q) @ K.conj().T)
    return max(float(total.real), 0.0)


def evaluate_allocation(spectrum, alloc, posterior, trace_prior: float) -> DistortionReport:
    """Score one allocation against a spectrum pair.

    Quantization NMSE normalizes by the source trace (sum of true
    eigenvalues); the end-to-end total adds the estimation MSE and
    normalizes by the prior trace.
    """
    lam = spectrum.active_true
    lam_b = spectrum.active_dec
    d = np.asarray(alloc.d, dtype=float)
    if d.shape != lam.shape:
        raise ValueError(
            f"allocation has {d.shape[0]} modes, spectrum has {lam.shape[0]} active"
        )
    per_mode_e = mode_distortions(lam, lam_b, d)
    d_quant = float(per_mode_e.sum())
    rate_bits = float(mode_rates(lam, d).sum())
    trace_source = float(spectrum.lambda_true.sum())
    d_mmse = float(posterior.D_mmse) if hasattr(posterior, "D_mmse") else float(posterior)
    d_e2e = d_mmse + d_quant
    return DistortionReport(
        d_quant=d_quant,
        nmse_db=db(d_quant / trace_source) if trace_source > 0 else float("-inf"),
        per_mode_e=per_mode_e,
        d_e2e=d_e2e,
        nmse_e2e_db=db(d_e2e / trace_prior) if trace_prior > 0 else float("-inf"),
        rate_bits=rate_bits,
    )
