"""Command-line interface: sweeps, one-off allocations, self-checks, calibration."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from . import __version__
from .allocation import asrwf, default_l_strong, rrwf, rwf, uniform_alloc
from .config import ExperimentConfig, load_config
from .covariance import sample_multipath_params, synth_covariance
from .distortion import evaluate_allocation
from .harness import (
    calibrate_snr,
    run_e2e_sweep,
    run_mismatch_sweep,
    run_rate_sweep,
    write_csv,
)
from .pilots import build_pilot_matrix, comb_indices, mmse_posterior, PilotConfig
from .seeding import derive_seed
from .spectrum import MismatchSpec, eigenvalues_descending, make_pair, truncate_rank, with_mismatch
from .verify import run_verification

__all__ = ["main", "build_parser", "parse_lambda_file"]


def _add_common(sub):
    sub.add_argument("--config", metavar="PATH", help="config file (flat key = value)")
    sub.add_argument("--seed", type=int, metavar="U64", help="override master_seed")
    sub.add_argument("--out", metavar="PATH", help="output path (default: config output_path)")
    sub.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    sub.add_argument("--format", choices=("csv", "tsv"), default="csv", help="output format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csicomp",
        description="Mismatch-aware rate allocation experiments for Gaussian CSI compression.",
    )
    parser.add_argument("--version", action="version", version=f"csicomp {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, doc in (
        ("sweep-rate", "NMSE versus rate budget per scheme and mismatch level"),
        ("sweep-mismatch", "NMSE versus mismatch level at the fixed rate budget"),
        ("sweep-e2e", "end-to-end NMSE versus rate, including the estimation floor"),
    ):
        sub = subs.add_parser(name, help=doc)
        _add_common(sub)
        if name == "sweep-e2e":
            sub.add_argument(
                "--calibrate-floor-db",
                type=float,
                metavar="DB",
                help="calibrate snr_dl so the estimation floor hits this value first",
            )

    sub = subs.add_parser("allocate", help="print one allocation and its distortion report")
    _add_common(sub)
    sub.add_argument("--rate", type=float, required=True, metavar="BITS", help="rate budget")
    sub.add_argument("--scheme", choices=("rwf", "rrwf", "asrwf", "uniform"), default="rrwf")
    sub.add_argument("--lambda-file", metavar="PATH", help="eigenvalue file instead of the synthesis pipeline")
    sub.add_argument("--sigma-delta-db", type=float, default=0.0, metavar="DB", help="mismatch level")
    sub.add_argument("--machine", action="store_true", help="emit JSON instead of a table")

    sub = subs.add_parser("verify", help="run the Monte Carlo and consistency self-checks")
    _add_common(sub)
    sub.add_argument("--n-samples", type=int, metavar="N", help="Monte Carlo sample count")
    sub.add_argument("--tolerance-rel", type=float, metavar="T", help="override all relative tolerances")

    sub = subs.add_parser("calibrate-snr", help="find snr_dl for a target estimation floor")
    _add_common(sub)
    sub.add_argument("--target-floor-db", type=float, metavar="DB", help="target floor (default from config)")

    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


def parse_lambda_file(path):
    """Read one spectrum per line: true eigenvalues, then optionally decoder ones."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.readlines()
    spectra = []
    for lineno, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if len(spectra) == 2:
            raise ValueError(f"{path}:{lineno}: expected at most two spectra lines")
        try:
            values = [float(tok) for tok in stripped.split()]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if not values:
            continue
        if any(v <= 0.0 for v in values):
            raise ValueError(f"{path}:{lineno}: eigenvalues must be positive")
        spectra.append(np.asarray(values, dtype=float))
    if not spectra:
        raise ValueError(f"{path}: no eigenvalues found")
    if len(spectra) == 2 and spectra[0].size != spectra[1].size:
        raise ValueError(f"{path}: decoder spectrum length differs from the true one")
    return spectra[0], (spectra[1] if len(spectra) == 2 else None)


def _allocate_cmd(args) -> int:
    cfg = _load(args)
    d_mmse = 0.0
    trace_prior = None
    if args.lambda_file:
        lam, lam_b = parse_lambda_file(args.lambda_file)
        order = np.argsort(-lam, kind="stable")
        lam = lam[order]
        lam_b = lam_b[order] if lam_b is not None else None
        pair = make_pair(None, lam, lam_b)
        if lam_b is None and args.sigma_delta_db > 0.0:
            pair = with_mismatch(pair, MismatchSpec(args.sigma_delta_db, derive_seed(cfg.master_seed, "mismatch", 0)))
        trace_prior = float(lam.sum())
    else:
        params = sample_multipath_params(cfg.M, cfg.N, cfg.L, derive_seed(cfg.master_seed, "cov", 0))
        C_h = synth_covariance(params, cfg.spread_factor)
        trace_prior = float(np.trace(C_h.matrix).real)
        pcfg = PilotConfig(
            T_p=cfg.T_p, N_p=cfg.N_p, probed_indices=comb_indices(cfg.N, cfg.N_p),
            snr_dl=cfg.snr_dl, seed=derive_seed(cfg.master_seed, "pilot", 0),
        )
        posterior = mmse_posterior(C_h, build_pilot_matrix(pcfg, cfg.M, cfg.N))
        d_mmse = posterior.D_mmse
        pair = truncate_rank(make_pair(None, eigenvalues_descending(posterior.C_tilde)), cfg.eps_rel)
        pair = with_mismatch(pair, MismatchSpec(args.sigma_delta_db, derive_seed(cfg.master_seed, "mismatch", 0)))

    lam = pair.active_true
    if args.scheme == "rwf":
        alloc = rwf(lam, args.rate)
    elif args.scheme == "rrwf":
        alloc = rrwf(pair, args.rate, d_min_rel=cfg.d_min_rel)
    elif args.scheme == "asrwf":
        alloc = asrwf(pair, args.rate)
    else:
        alloc = uniform_alloc(lam, args.rate, default_l_strong(lam, cfg.uniform_strong_rel))
    report = evaluate_allocation(pair, alloc, d_mmse, trace_prior)

    if args.machine:
        payload = {
            "scheme": alloc.scheme,
            "rate_budget_bits": args.rate,
            "multiplier": alloc.multiplier,
            "lambda_true": pair.active_true.tolist(),
            "lambda_dec": pair.active_dec.tolist(),
            "d": alloc.d.tolist(),
            "r": alloc.r.tolist(),
            "per_mode_e": report.per_mode_e.tolist(),
            "rate_achieved_bits": report.rate_bits,
            "design_rate_bits": alloc.design_rate_bits,
            "d_quant": report.d_quant,
            "nmse_db": report.nmse_db,
            "d_mmse": d_mmse,
            "d_e2e": report.d_e2e,
            "nmse_e2e_db": report.nmse_e2e_db,
        }
        text = json.dumps(payload, indent=2)
    else:
        lines = [
            f"scheme: {alloc.scheme}   budget: {args.rate:.12g} bits   multiplier: {alloc.multiplier:.12g}",
            f"{'mode':>4} {'lambda':>14} {'lambda_dec':>14} {'d':>14} {'r_bits':>12} {'e':>14}",
        ]
        for i in range(lam.size):
            lines.append(
                f"{i:>4} {pair.active_true[i]:>14.6g} {pair.active_dec[i]:>14.6g} "
                f"{alloc.d[i]:>14.6g} {alloc.r[i]:>12.6g} {report.per_mode_e[i]:>14.6g}"
            )
        lines.append(
            f"totals: rate {report.rate_bits:.12g} bits, d_quant {report.d_quant:.12g}, "
            f"nmse {report.nmse_db:.6g} dB"
        )
        if alloc.design_rate_bits is not None:
            lines.append(f"design rate (decoder spectrum): {alloc.design_rate_bits:.12g} bits")
        lines.append(
            f"e2e: d_mmse {d_mmse:.12g}, d_e2e {report.d_e2e:.12g}, nmse_e2e {report.nmse_e2e_db:.6g} dB"
        )
        text = "\n".join(lines)
    _emit(text, args.out)
    return 0


def _verify_cmd(args) -> int:
    cfg = _load(args)
    report = run_verification(cfg, n_samples=args.n_samples, tolerance_rel=args.tolerance_rel)
    lines = []
    for c in report.checks:
        if c.status == "SKIPPED":
            lines.append(f"SKIPPED {c.name}: {c.detail}")
        else:
            extra = f" ({c.detail})" if c.detail else ""
            lines.append(
                f"{c.status} {c.name}: observed={c.observed:.6g} expected={c.expected:.6g} "
                f"threshold={c.threshold:.6g}{extra}"
            )
    lines.append("verification PASSED" if report.passed else "verification FAILED")
    _emit("\n".join(lines), args.out)
    return 0 if report.passed else 1


def _calibrate_cmd(args) -> int:
    cfg = _load(args)
    snr_db, floor = calibrate_snr(cfg, target_db=args.target_floor_db)
    _emit(f"snr_dl_db = {snr_db:.12g}\nfloor_db = {floor:.12g}", args.out)
    return 0


def _sweep_cmd(args) -> int:
    cfg = _load(args)
    if args.command == "sweep-rate":
        result = run_rate_sweep(cfg, jobs=args.jobs)
    elif args.command == "sweep-mismatch":
        result = run_mismatch_sweep(cfg, jobs=args.jobs)
    else:
        result = run_e2e_sweep(cfg, jobs=args.jobs, calibrate_floor_db=args.calibrate_floor_db)
    out = args.out or cfg.output_path
    write_csv(result, out, fmt=args.format)
    print(
        f"wrote {len(result.rows)} rows (+{len(result.avg_rows)} averaged) to {out}"
        + (f" with {result.n_warnings} allocation warnings" if result.n_warnings else "")
    )
    return 0


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("sweep-rate", "sweep-mismatch", "sweep-e2e"):
            return _sweep_cmd(args)
        if args.command == "allocate":
            return _allocate_cmd(args)
        if args.command == "verify":
            return _verify_cmd(args)
        if args.command == "calibrate-snr":
            return _calibrate_cmd(args)
        raise AssertionError(f"unhandled command {args.command}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
