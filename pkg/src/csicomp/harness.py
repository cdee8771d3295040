"""Experiment sweeps: synthesize, estimate, mismatch, allocate, evaluate, emit.

One realization draws a channel covariance and a pilot matrix, forms the
MMSE posterior, eigendecomposes it, truncates numerically-zero modes, and
injects decoder-side eigenvalue mismatch once per realization (the same
unit draws are scaled across mismatch levels). Every (scheme, rate,
mismatch) cell is then allocated and scored. Rows are gathered in a fixed
order and averaged in the linear domain, so output files are byte-identical
for a given config and master seed regardless of worker count.

Seed derivation: realization-level streams use ``derive_seed(master, label,
r)`` with labels "cov", "pilot", "mismatch"; the per-row seed column is
``derive_seed(master, "row", r, sigma_index, rate_index, scheme)``.
"""

from __future__ import annotations

import dataclasses
import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import _kernels
from .allocation import (
    ConvergenceError,
    asrwf,
    default_l_strong,
    rrwf,
    rwf,
    uniform_alloc,
)
from .config import ExperimentConfig, config_lines
from .covariance import path_signatures, sample_multipath_params, synth_covariance
from .distortion import db, evaluate_allocation
from .pilots import PilotConfig, build_pilot_matrix, comb_indices, mmse_posterior
from .seeding import derive_seed
from .spectrum import MismatchSpec, eigenvalues_descending, make_pair, truncate_rank, with_mismatch

__all__ = [
    "CSV_HEADER",
    "SweepRow",
    "SweepResult",
    "run_rate_sweep",
    "run_mismatch_sweep",
    "run_e2e_sweep",
    "calibrate_snr",
    "write_csv",
    "render_csv",
]

CSV_FIELDS = (
    "scheme",
    "rate_bits",
    "sigma_delta_db",
    "realization",
    "seed",
    "nmse_db",
    "nmse_e2e_db",
    "d_quant",
    "d_mmse",
    "rate_achieved_bits",
    "n_active",
)
CSV_HEADER = ",".join(CSV_FIELDS)


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    rate_bits: float
    sigma_delta_db: float
    realization: int
    seed: int
    nmse_db: float
    nmse_e2e_db: float
    d_quant: float
    d_mmse: float
    rate_achieved_bits: float
    n_active: float


@dataclass
class SweepResult:
    rows: list
    avg_rows: list
    metadata: list
    n_warnings: int


def _pilot_config(cfg: ExperimentConfig, r: int) -> PilotConfig:
    return PilotConfig(
        T_p=cfg.T_p,
        N_p=cfg.N_p,
        probed_indices=comb_indices(cfg.N, cfg.N_p),
        snr_dl=cfg.snr_dl,
        seed=derive_seed(cfg.master_seed, "pilot", r),
    )


def _allocate(scheme: str, pair, rate: float, cfg: ExperimentConfig):
    lam = pair.active_true
    if scheme == "rwf":
        return rwf(lam, rate)
    if scheme == "rrwf":
        return rrwf(pair, rate, d_min_rel=cfg.d_min_rel)
    if scheme == "asrwf":
        return asrwf(pair, rate)
    if scheme == "uniform":
        return uniform_alloc(lam, rate, default_l_strong(lam, cfg.uniform_strong_rel))
    raise ValueError(f"unknown scheme {scheme!r}")


def _realization_rows(cfg: ExperimentConfig, rates, sigmas, r: int):
    """All rows for one covariance realization, plus a warning count."""
    params = sample_multipath_params(cfg.M, cfg.N, cfg.L, derive_seed(cfg.master_seed, "cov", r))
    C_h = synth_covariance(params, cfg.spread_factor)
    trace_prior = float(np.trace(C_h.matrix).real)
    X = build_pilot_matrix(_pilot_config(cfg, r), cfg.M, cfg.N)
    posterior = mmse_posterior(C_h, X)
    lam = eigenvalues_descending(posterior.C_tilde)
    base_pair = truncate_rank(make_pair(None, lam), cfg.eps_rel)
    seed_mm = derive_seed(cfg.master_seed, "mismatch", r)

    rows = []
    warnings = 0
    for si, sigma in enumerate(sigmas):
        pair = with_mismatch(base_pair, MismatchSpec(sigma_delta_db=sigma, seed=seed_mm))
        for ri, rate in enumerate(rates):
            for scheme in cfg.schemes:
                row_seed = derive_seed(cfg.master_seed, "row", r, si, ri, scheme)
                try:
                    alloc = _allocate(scheme, pair, rate, cfg)
                    report = evaluate_allocation(pair, alloc, posterior, trace_prior)
                    rows.append(
                        SweepRow(
                            scheme=scheme,
                            rate_bits=float(rate),
                            sigma_delta_db=float(sigma),
                            realization=r,
                            seed=row_seed,
                            nmse_db=report.nmse_db,
                            nmse_e2e_db=report.nmse_e2e_db,
                            d_quant=report.d_quant,
                            d_mmse=posterior.D_mmse,
                            rate_achieved_bits=report.rate_bits,
                            n_active=float(pair.n_active),
                        )
                    )
                except ConvergenceError:
                    warnings += 1
                    rows.append(
                        SweepRow(
                            scheme=scheme,
                            rate_bits=float(rate),
                            sigma_delta_db=float(sigma),
                            realization=r,
                            seed=row_seed,
                            nmse_db=math.nan,
                            nmse_e2e_db=math.nan,
                            d_quant=math.nan,
                            d_mmse=posterior.D_mmse,
                            rate_achieved_bits=math.nan,
                            n_active=float(pair.n_active),
                        )
                    )
    return rows, warnings


def _worker(args):
    cfg, rates, sigmas, r = args
    return _realization_rows(cfg, rates, sigmas, r)


def _average_rows(cfg: ExperimentConfig, rows, rates, sigmas):
    """Per-(scheme, rate, sigma) averages: linear-domain means, then dB."""
    groups = {}
    for row in rows:
        groups.setdefault((row.sigma_delta_db, row.rate_bits, row.scheme), []).append(row)
    avg_rows = []
    for sigma in sigmas:
        for rate in rates:
            for scheme in cfg.schemes:
                members = [
                    m for m in groups.get((float(sigma), float(rate), scheme), ())
                    if not math.isnan(m.d_quant)
                ]
                if not members:
                    continue
                nmse_lin = np.mean([10.0 ** (m.nmse_db / 10.0) for m in members])
                nmse_e2e_lin = np.mean([10.0 ** (m.nmse_e2e_db / 10.0) for m in members])
                avg_rows.append(
                    SweepRow(
                        scheme=f"{scheme}/avg",
                        rate_bits=float(rate),
                        sigma_delta_db=float(sigma),
                        realization=-1,
                        seed=cfg.master_seed,
                        nmse_db=db(float(nmse_lin)),
                        nmse_e2e_db=db(float(nmse_e2e_lin)),
                        d_quant=float(np.mean([m.d_quant for m in members])),
                        d_mmse=float(np.mean([m.d_mmse for m in members])),
                        rate_achieved_bits=float(np.mean([m.rate_achieved_bits for m in members])),
                        n_active=float(np.mean([m.n_active for m in members])),
                    )
                )
    return avg_rows


def _run_sweep(cfg: ExperimentConfig, command: str, rates, sigmas, jobs: int) -> SweepResult:
    tasks = [(cfg, tuple(rates), tuple(sigmas), r) for r in range(cfg.n_realizations)]
    if jobs > 1 and len(tasks) > 1:
        with multiprocessing.Pool(processes=jobs) as pool:
            results = pool.map(_worker, tasks)
    else:
        results = [_worker(t) for t in tasks]
    rows = [row for chunk, _ in results for row in chunk]
    n_warnings = sum(w for _, w in results)
    avg_rows = _average_rows(cfg, rows, rates, sigmas)
    metadata = [
        f"csicomp {__version__}",
        f"command: {command}",
        f"kernel backend: {_kernels.backend_name()}",
        f"snr_dl_db used: {cfg.snr_dl_db:.12g}",
        f"allocation warnings: {n_warnings}",
    ]
    metadata += [f"config: {line}" for line in config_lines(cfg)]
    return SweepResult(rows=rows, avg_rows=avg_rows, metadata=metadata, n_warnings=n_warnings)


def run_rate_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """NMSE versus rate budget, one curve per scheme and mismatch level."""
    return _run_sweep(cfg, "sweep-rate", cfg.rate_grid_bits, cfg.sigma_delta_db_list, jobs)


def run_mismatch_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """NMSE versus mismatch level at the fixed rate budget."""
    return _run_sweep(cfg, "sweep-mismatch", (cfg.fixed_rate_bits,), cfg.sigma_delta_db_list, jobs)


def run_e2e_sweep(cfg: ExperimentConfig, jobs: int = 1, calibrate_floor_db=None) -> SweepResult:
    """End-to-end NMSE versus rate, optionally calibrating the training SNR first."""
    if calibrate_floor_db is not None:
        snr_db, floor = calibrate_snr(cfg, target_db=calibrate_floor_db)
        cfg = dataclasses.replace(cfg, snr_dl_db=snr_db)
        result = _run_sweep(cfg, "sweep-e2e", cfg.rate_grid_bits, cfg.sigma_delta_db_list, jobs)
        result.metadata.insert(4, f"calibrated floor_db: {floor:.12g} (target {float(calibrate_floor_db):.12g})")
        return result
    return _run_sweep(cfg, "sweep-e2e", cfg.rate_grid_bits, cfg.sigma_delta_db_list, jobs)


def calibrate_snr(cfg: ExperimentConfig, target_db=None, tol_db: float = 1e-3, max_iter: int = 200):
    """Training SNR (dB) whose average estimation floor hits the target.

    The floor is 10*log10(mean D_mmse / mean trace) across realizations.
    Exploits the low-rank prior factorization so each probe costs only
    small-matrix solves; the realization draws match the sweeps exactly.
    """
    target = cfg.target_floor_db if target_db is None else float(target_db)
    pre = []
    for r in range(cfg.n_realizations):
        params = sample_multipath_params(cfg.M, cfg.N, cfg.L, derive_seed(cfg.master_seed, "cov", r))
        G = path_signatures(params, cfg.spread_factor)
        unit_cfg = PilotConfig(
            T_p=cfg.T_p,
            N_p=cfg.N_p,
            probed_indices=comb_indices(cfg.N, cfg.N_p),
            snr_dl=1.0,
            seed=derive_seed(cfg.master_seed, "pilot", r),
        )
        Xu = build_pilot_matrix(unit_cfg, cfg.M, cfg.N)
        S0 = Xu @ G
        T = G.conj().T @ G
        pre.append((S0, T, float(np.linalg.norm(G) ** 2)))

    def floor_db(snr_lin: float) -> float:
        num = 0.0
        den = 0.0
        for S0, T, trace in pre:
            if S0.shape[0] == 0:
                D = trace
            else:
                Msm = snr_lin * (S0 @ S0.conj().T) + np.eye(S0.shape[0])
                W2 = S0.conj().T @ np.linalg.solve(Msm, S0)
                D = trace - snr_lin * float(np.trace(W2 @ T).real)
            num += max(D, 0.0)
            den += trace
        return 10.0 * math.log10(num / den)

    lo_db, hi_db = -40.0, 90.0
    f_lo, f_hi = floor_db(10.0 ** (lo_db / 10.0)), floor_db(10.0 ** (hi_db / 10.0))
    if not f_hi <= target <= f_lo:
        raise ConvergenceError(
            f"target floor {target} dB outside reachable range [{f_hi:.3f}, {f_lo:.3f}] dB"
        )
    achieved = f_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo_db + hi_db)
        achieved = floor_db(10.0 ** (mid / 10.0))
        if abs(achieved - target) <= tol_db:
            return mid, achieved
        if achieved > target:
            lo_db = mid
        else:
            hi_db = mid
    return 0.5 * (lo_db + hi_db), achieved


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def render_csv(result: SweepResult, fmt: str = "csv") -> str:
    """Serialize a sweep: # metadata lines, header, rows, then averaged rows."""
    if fmt not in ("csv", "tsv"):
        raise ValueError(f"format must be csv or tsv, got {fmt!r}")
    sep = "," if fmt == "csv" else "\t"
    lines = [f"# {line}" for line in result.metadata]
    lines.append(sep.join(CSV_FIELDS))
    for row in list(result.rows) + list(result.avg_rows):
        lines.append(sep.join(_format_value(getattr(row, name)) for name in CSV_FIELDS))
    return "\n".join(lines) + "\n"


def write_csv(result: SweepResult, path, fmt: str = "csv") -> None:
    text = render_csv(result, fmt)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
