"""Experiment configuration: flat ``key = value`` text files with # comments.

Every knob the sweeps consume lives here with its default; a config file
only needs the keys it overrides. Lists are comma- or whitespace-separated.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExperimentConfig", "parse_config_text", "load_config", "config_lines"]

SCHEMES = ("rwf", "rrwf", "asrwf", "uniform")

_DEFAULT_RATE_GRID = tuple(float(x) for x in np.geomspace(8.0, 400.0, 16))


@dataclass
class ExperimentConfig:
    """System dimensions, training, mismatch levels, budgets and seeds."""

    M: int = 32
    N: int = 32
    L: int = 6
    T_p: int = 1
    N_p: int = 8
    snr_dl_db: float = 10.0
    sigma_delta_db_list: tuple = (0.0, 2.0, 4.0, 6.0, 8.0)
    rate_grid_bits: tuple = _DEFAULT_RATE_GRID
    fixed_rate_bits: float = 101.0
    n_realizations: int = 50
    master_seed: int = 1
    schemes: tuple = SCHEMES
    output_path: str = "sweep.csv"
    delay_spread_factor: float = 0.0  # 0 means the default N/4
    eps_rel: float = 1e-10
    d_min_rel: float = 1e-12
    uniform_strong_rel: float = 1e-3
    n_samples: int = 200_000
    mc_tolerance_rel: float = 0.02
    target_floor_db: float = -20.0

    def __post_init__(self):
        self.sigma_delta_db_list = tuple(float(x) for x in self.sigma_delta_db_list)
        self.rate_grid_bits = tuple(float(x) for x in self.rate_grid_bits)
        self.schemes = tuple(str(s) for s in self.schemes)
        if self.M < 1 or self.N < 1 or self.L < 1:
            raise ValueError("M, N, L must be >= 1")
        if self.T_p < 0 or self.N_p < 0 or self.N_p > self.N:
            raise ValueError("need T_p >= 0 and 0 <= N_p <= N")
        if not self.rate_grid_bits:
            raise ValueError("rate_grid_bits must be nonempty")
        if any(b >= a for a, b in zip(self.rate_grid_bits[1:], self.rate_grid_bits)):
            raise ValueError("rate_grid_bits must be strictly increasing")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")

    @property
    def L_tr(self) -> int:
        return self.T_p * self.N_p

    @property
    def snr_dl(self) -> float:
        return 10.0 ** (self.snr_dl_db / 10.0)

    @property
    def spread_factor(self) -> float:
        return self.N / 4.0 if self.delay_spread_factor == 0.0 else self.delay_spread_factor


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    ftype = _FIELDS[name].type
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    if ftype == "str":
        return raw
    if ftype == "tuple":
        parts = [p for chunk in raw.split(",") for p in chunk.split()]
        if name == "schemes":
            return tuple(parts)
        return tuple(float(p) for p in parts)
    raise ValueError(f"unhandled config field type {ftype!r} for {name}")


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat key = value lines; # starts a comment, blank lines ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key == "L_tr":
            values.setdefault("_L_tr_declared", int(raw))
            continue
        if key not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    declared = values.pop("_L_tr_declared", None)
    cfg = ExperimentConfig(**values)
    if declared is not None and declared != cfg.L_tr:
        raise ValueError(f"L_tr = {declared} contradicts T_p * N_p = {cfg.L_tr}")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def config_lines(cfg: ExperimentConfig) -> list:
    """Echo of every config key, suitable for CSV metadata."""
    return [f"{f.name} = {_fmt(getattr(cfg, f.name))}" for f in dataclasses.fields(ExperimentConfig)]
