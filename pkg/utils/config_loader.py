# -*- coding: utf-8 -*-
"""
Experiment configuration loader - TOML file -> frozen ExperimentConfig

Matrix entries are row-major lists; each entry is a number or a [re, im] pair.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

import config
from services.errors import ConfigInvalid


@dataclass(frozen=True)
class SymbolSpec:
    p: int
    m: int
    n: int
    terms: tuple  # ((beta, matrix), ...)


@dataclass(frozen=True)
class CoefficientSpec:
    m: int
    terms: tuple  # ((freq, matrix), ...)
    complete_hermitian: bool = False
    validation_resolution: int = 64


@dataclass(frozen=True)
class TruncationSpec:
    cell: float = 12.0
    fiber: float = 6.0
    report: float = 2.0


@dataclass(frozen=True)
class BrillouinSpec:
    resolution: int = 16
    directions: int = 64


@dataclass(frozen=True)
class RatesSpec:
    taus: tuple = (1.0,)
    eps_start: float = 0.25
    eps_ratio: float = 2.0
    eps_count: int = 6
    s: str = "2p+1"
    fit_rungs: int = 4
    refine_directions: int = 8


@dataclass(frozen=True)
class InterpSpec:
    s_list: tuple = (0.0,)


@dataclass(frozen=True)
class ThresholdSpec:
    t_count: int = 6
    t_ratio: float = 2.0
    directions: int = 4


@dataclass(frozen=True)
class EvolutionSpec:
    tau: float = 1.0
    eps_list: tuple = (0.1, 0.05, 0.025, 0.0125)
    xi_max: float = 3.0
    profile: str = "gaussian"
    width: float = 1.0
    forcing: str = "zero"
    forcing_scale: float = 1.0
    time_steps: int = 256
    points_per_support: int = 24
    synth_points: int = 0
    synth_extent: float = 4.0


@dataclass(frozen=True)
class RunSpec:
    config_id: str = "unnamed"
    seed: int = 0
    threads: int = 1
    out_dir: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    basis: np.ndarray
    symbol: SymbolSpec
    coefficient: CoefficientSpec
    truncation: TruncationSpec = field(default_factory=TruncationSpec)
    brillouin: BrillouinSpec = field(default_factory=BrillouinSpec)
    rates: RatesSpec = field(default_factory=RatesSpec)
    interp: InterpSpec = field(default_factory=InterpSpec)
    threshold: ThresholdSpec = field(default_factory=ThresholdSpec)
    evolution: EvolutionSpec = field(default_factory=EvolutionSpec)
    run: RunSpec = field(default_factory=RunSpec)

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    def resolve_s(self, value: Any | None = None) -> float:
        """'2p+1' / '2p+2' / 'p+1' or a number"""
        raw = self.rates.s if value is None else value
        p = self.symbol.p
        named = {"2p+1": 2 * p + 1, "2p+2": 2 * p + 2, "p+1": p + 1}
        if isinstance(raw, str):
            if raw.replace(" ", "") not in named:
                raise ConfigInvalid(f"unknown smoothing exponent: {raw!r}")
            return float(named[raw.replace(" ", "")])
        return float(raw)

    def eps_ladder(self) -> np.ndarray:
        r = self.rates
        return r.eps_start / r.eps_ratio ** np.arange(r.eps_count)


# ========================================
# PARSING HELPERS
# ========================================
def _entry(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigInvalid(f"complex entry must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(f"matrix entry must be a number or [re, im], got {v!r}")
    return complex(float(v), 0.0)


def _matrix(raw, rows: int, cols: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != rows:
        raise ConfigInvalid(f"{where}: expected {rows} rows")
    out = np.zeros((rows, cols), dtype=complex)
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != cols:
            raise ConfigInvalid(f"{where}: row {i} must have {cols} entries")
        for j, v in enumerate(row):
            out[i, j] = _entry(v)
    return out


def _table(data: dict, name: str, required: bool = False) -> dict:
    section = data.get(name)
    if section is None:
        if required:
            raise ConfigInvalid(f"missing [{name}] table")
        return {}
    if not isinstance(section, dict):
        raise ConfigInvalid(f"[{name}] must be a table")
    return section


def _positive_int(section: dict, key: str, default: int, where: str) -> int:
    v = section.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigInvalid(f"{where}.{key} must be an integer >= 1, got {v!r}")
    return v


def _positive_float(section: dict, key: str, default: float, where: str) -> float:
    v = section.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v) or v <= 0:
        raise ConfigInvalid(f"{where}.{key} must be a positive number, got {v!r}")
    return float(v)


def _choice(section: dict, key: str, default: str, allowed: tuple, where: str) -> str:
    v = section.get(key, default)
    if v not in allowed:
        raise ConfigInvalid(f"{where}.{key} must be one of {allowed}, got {v!r}")
    return v


# ========================================
# SECTIONS
# ========================================
def _parse_basis(data: dict) -> np.ndarray:
    raw = _table(data, "lattice", required=True).get("basis")
    try:
        basis = np.atleast_2d(np.asarray(raw, dtype=float))
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"lattice.basis is not a numeric matrix: {e}") from e
    d = basis.shape[0]
    if basis.shape != (d, d) or not (1 <= d <= 3):
        raise ConfigInvalid(f"lattice.basis must be d x d with 1 <= d <= 3, got shape {basis.shape}")
    return basis


def _parse_symbol(data: dict, d: int) -> SymbolSpec:
    sec = _table(data, "symbol", required=True)
    p = _positive_int(sec, "p", 2, "symbol")
    if p < 2:
        raise ConfigInvalid(f"symbol.p must be >= 2, got {p}")
    m = _positive_int(sec, "m", 1, "symbol")
    n = _positive_int(sec, "n", 1, "symbol")
    if m < n:
        raise ConfigInvalid(f"symbol needs m >= n, got m={m}, n={n}")
    terms = []
    for i, term in enumerate(sec.get("terms", [])):
        beta = tuple(int(b) for b in term.get("beta", []))
        if len(beta) != d or sum(beta) != p or min(beta) < 0:
            raise ConfigInvalid(f"symbol.terms[{i}].beta must be {d} nonnegative ints summing to {p}")
        terms.append((beta, _matrix(term.get("entries"), m, n, f"symbol.terms[{i}]")))
    if not terms:
        raise ConfigInvalid("symbol.terms is empty")
    return SymbolSpec(p, m, n, tuple(terms))


def _parse_coefficient(data: dict, d: int, m: int) -> CoefficientSpec:
    sec = _table(data, "coefficient", required=True)
    if sec.get("m", m) != m:
        raise ConfigInvalid(f"coefficient.m = {sec.get('m')} does not match symbol.m = {m}")
    terms = []
    for i, term in enumerate(sec.get("terms", [])):
        freq = tuple(int(c) for c in term.get("freq", []))
        if len(freq) != d:
            raise ConfigInvalid(f"coefficient.terms[{i}].freq must have {d} integer coordinates")
        terms.append((freq, _matrix(term.get("entries"), m, m, f"coefficient.terms[{i}]")))
    if not terms:
        raise ConfigInvalid("coefficient.terms is empty")
    res = _positive_int(sec, "validation_resolution", 64, "coefficient")
    if res < 8:
        raise ConfigInvalid("coefficient.validation_resolution must be >= 8")
    return CoefficientSpec(m, tuple(terms), bool(sec.get("complete_hermitian", False)), res)


def _parse_rates(data: dict) -> RatesSpec:
    sec = _table(data, "rates")
    taus = tuple(float(t) for t in sec.get("taus", [1.0]))
    if not taus or not all(np.isfinite(taus)):
        raise ConfigInvalid("rates.taus must be a nonempty list of finite numbers")
    ratio = _positive_float(sec, "eps_ratio", 2.0, "rates")
    if ratio <= 1.0:
        raise ConfigInvalid("rates.eps_ratio must exceed 1 (strictly decreasing ladder)")
    count = _positive_int(sec, "eps_count", 6, "rates")
    if count < 2:
        raise ConfigInvalid(f"rates.eps_count must be at least 2 to fit a slope, got {count}")
    s = sec.get("s", "2p+1")
    if not isinstance(s, (str, int, float)) or isinstance(s, bool):
        raise ConfigInvalid(f"rates.s invalid: {s!r}")
    return RatesSpec(
        taus=taus,
        eps_start=_positive_float(sec, "eps_start", 0.25, "rates"),
        eps_ratio=ratio,
        eps_count=count,
        s=s if isinstance(s, str) else float(s),
        fit_rungs=_positive_int(sec, "fit_rungs", 4, "rates"),
        refine_directions=_positive_int(sec, "refine_directions", 8, "rates"),
    )


def _parse_evolution(data: dict) -> EvolutionSpec:
    sec = _table(data, "evolution")
    eps_list = tuple(float(e) for e in sec.get("eps_list", EvolutionSpec.eps_list))
    if len(eps_list) < 2 or any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigInvalid("evolution.eps_list needs at least two positive, strictly decreasing values")
    tau = sec.get("tau", 1.0)
    if not isinstance(tau, (int, float)) or not np.isfinite(tau):
        raise ConfigInvalid(f"evolution.tau must be finite, got {tau!r}")
    return EvolutionSpec(
        tau=float(tau),
        eps_list=eps_list,
        xi_max=_positive_float(sec, "xi_max", 3.0, "evolution"),
        profile=_choice(sec, "profile", "gaussian", ("gaussian", "rough"), "evolution"),
        width=_positive_float(sec, "width", 1.0, "evolution"),
        forcing=_choice(sec, "forcing", "zero", ("zero", "exp", "cos"), "evolution"),
        forcing_scale=float(sec.get("forcing_scale", 1.0)),
        time_steps=_positive_int(sec, "time_steps", 256, "evolution"),
        points_per_support=_positive_int(sec, "points_per_support", 24, "evolution"),
        synth_points=int(sec.get("synth_points", 0)),
        synth_extent=_positive_float(sec, "synth_extent", 4.0, "evolution"),
    )


def config_from_dict(data: dict) -> ExperimentConfig:
    basis = _parse_basis(data)
    d = basis.shape[0]
    symbol = _parse_symbol(data, d)
    coefficient = _parse_coefficient(data, d, symbol.m)

    trunc = _table(data, "truncation")
    truncation = TruncationSpec(
        cell=_positive_float(trunc, "cell", 12.0, "truncation"),
        fiber=_positive_float(trunc, "fiber", 6.0, "truncation"),
        report=float(trunc.get("report", 2.0)),
    )
    bz = _table(data, "brillouin")
    brillouin = BrillouinSpec(
        resolution=_positive_int(bz, "resolution", 16, "brillouin"),
        directions=_positive_int(bz, "directions", 64, "brillouin"),
    )
    interp = InterpSpec(tuple(float(s) for s in _table(data, "interp").get("s_list", [0.0])))
    if any(s < 0 for s in interp.s_list):
        raise ConfigInvalid("interp.s_list entries must be >= 0")
    th = _table(data, "threshold")
    threshold = ThresholdSpec(
        t_count=_positive_int(th, "t_count", 6, "threshold"),
        t_ratio=_positive_float(th, "t_ratio", 2.0, "threshold"),
        directions=_positive_int(th, "directions", 4, "threshold"),
    )
    run = _table(data, "run")
    run_spec = RunSpec(
        config_id=str(run.get("config_id", "unnamed")),
        seed=int(run.get("seed", 0)),
        threads=_positive_int(run, "threads", config.THREADS, "run"),
        out_dir=str(run.get("out_dir", "")),
    )

    return ExperimentConfig(
        basis=basis,
        symbol=symbol,
        coefficient=coefficient,
        truncation=truncation,
        brillouin=brillouin,
        rates=_parse_rates(data),
        interp=interp,
        threshold=threshold,
        evolution=_parse_evolution(data),
        run=run_spec,
    )


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigInvalid(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigInvalid(f"{path}: {e}") from e
    return config_from_dict(data)
