# -*- coding: utf-8 -*-
"""
Rate experiments

- build_problem: config -> lattice, symbol, coefficient, cell solution,
  effective data, threshold window and fiber assembler
- run_rate_experiment: sup over k of the smoothed fiber error on an eps-ladder,
  with a log-log slope per tau
- run_interpolation_experiment: observed vs predicted eps-exponents for a list of s
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

import config
from services.cell_problem import (
    CellSolution,
    EffectiveData,
    SpecialCasesReport,
    detect_special_cases,
    effective_matrix,
    first_order_matrix,
    germ,
    solve_cell_problem,
)
from services.errors import TruncationTooSmall
from services.fibers import FiberAssembler, sup_error_over_points
from services.lattice_geometry import (
    FrequencySet,
    Lattice,
    build_lattice,
    radial_refinement,
    sample_brillouin,
    sample_directions,
    truncate_shells,
)
from services.rate_fit import SlopeFit, fit_loglog_slope
from services.symbols import PeriodicCoefficient, SymbolB, build_symbol, make_coefficient
from services.threshold import ThresholdWindow, threshold_window
from utils.config_loader import ExperimentConfig

logger = logging.getLogger(__name__)


@dataclass
class Problem:
    cfg: ExperimentConfig
    lattice: Lattice
    symbol: SymbolB
    coefficient: PeriodicCoefficient
    cell_freq: FrequencySet
    fiber_freq: FrequencySet
    cell: CellSolution
    eff: EffectiveData
    window: ThresholdWindow
    assembler: FiberAssembler
    # Galerkin cell problem on the fiber frequencies: the germ of the truncated fiber
    fiber_cell: CellSolution
    fiber_eff: EffectiveData


@dataclass
class RateRecord:
    config_id: str
    d: int
    p: int
    n: int
    m: int
    s: float
    tau: float
    eps: float
    sup_error: float
    argmax_k: tuple
    cutoff: float
    wall_ms: float
    points: int


@dataclass
class RateExperimentResult:
    records: list[RateRecord] = field(default_factory=list)
    fits: dict = field(default_factory=dict)  # (tau, s) -> SlopeFit


@dataclass
class InterpolationRow:
    s: float
    tau: float
    predicted_eps_exponent: float
    observed_eps_exponent: float
    predicted_tau_exponent: float
    max_error: float
    passed: bool


def build_problem(cfg: ExperimentConfig) -> Problem:
    lattice = build_lattice(cfg.basis)
    symbol = build_symbol(cfg.symbol.p, cfg.symbol.terms, lattice.dimension)
    coef = make_coefficient(lattice, cfg.coefficient.terms, cfg.coefficient.complete_hermitian,
                            grid_resolution=cfg.coefficient.validation_resolution)

    unit = lattice.longest_dual
    report_cutoff = cfg.truncation.report * unit
    if cfg.truncation.cell * unit < 2.0 * coef.max_frequency + report_cutoff:
        raise TruncationTooSmall(
            f"cell cutoff {cfg.truncation.cell} shells is below 2 K_g + K_report "
            f"= {(2.0 * coef.max_frequency + report_cutoff) / unit:.3g} shells"
        )

    cell_freq = truncate_shells(lattice, cfg.truncation.cell)
    fiber_freq = truncate_shells(lattice, cfg.truncation.fiber)
    cell = solve_cell_problem(lattice, symbol, coef, cell_freq)
    eff = effective_matrix(cell)
    window = threshold_window(lattice, symbol, coef.certificate)
    assembler = FiberAssembler(lattice, symbol, coef, fiber_freq)
    fiber_cell = solve_cell_problem(lattice, symbol, coef, fiber_freq)
    fiber_eff = effective_matrix(fiber_cell)
    logger.info("[Rates] fiber-level g0 differs from the cell g0 by %.3e",
                float(np.linalg.norm(fiber_eff.g0 - eff.g0, 2)))

    logger.info("[Rates] problem %s: d=%s p=%s n=%s m=%s, %s cell / %s fiber frequencies",
                cfg.run.config_id, lattice.dimension, symbol.order, symbol.n, symbol.m,
                len(cell_freq), len(fiber_freq))
    return Problem(cfg, lattice, symbol, coef, cell_freq, fiber_freq, cell, eff, window, assembler,
                   fiber_cell, fiber_eff)


def correction_regime(problem: Problem, directions: int | None = None) -> tuple[float, bool]:
    """
    (max |G(theta)| / |S(theta)| over a direction sample, vanishing flag).
    The flag also holds when a structural hypothesis forces G = 0.
    """
    count = directions or problem.cfg.brillouin.directions
    worst = 0.0
    for theta in sample_directions(problem.lattice.dimension, count):
        s = germ(problem.eff, problem.symbol, theta)
        _, g = first_order_matrix(problem.cell, problem.eff, problem.symbol, theta)
        worst = max(worst, float(np.linalg.norm(g, 2) / np.linalg.norm(s, 2)))
    return worst, worst <= 1e-9


def special_cases(problem: Problem) -> SpecialCasesReport:
    return detect_special_cases(problem.cell, problem.eff)


def sweep_points(problem: Problem, eps: float) -> np.ndarray:
    """Uniform sup-grid plus radial refinement towards k = 0 at scale eps"""
    cfg = problem.cfg
    grid = sample_brillouin(problem.lattice, cfg.brillouin.resolution, "sup-grid").points
    dirs = sample_directions(problem.lattice.dimension, cfg.rates.refine_directions)
    radial = radial_refinement(problem.lattice, eps, dirs, config.REFINE_PER_OCTAVE)
    return np.vstack([grid, radial])


def run_rate_experiment(problem: Problem, pool=None, s_values=None) -> RateExperimentResult:
    cfg = problem.cfg
    s_list = [cfg.resolve_s()] if s_values is None else [float(s) for s in s_values]
    ladder = cfg.eps_ladder()
    result = RateExperimentResult()

    for tau in cfg.rates.taus:
        table = np.zeros((len(ladder), len(s_list)))
        for i, eps in enumerate(ladder):
            points = sweep_points(problem, float(eps))
            start = time.perf_counter()
            values, where = sup_error_over_points(problem.assembler, problem.fiber_eff, points,
                                                  tau, float(eps), s_list, pool)
            wall = (time.perf_counter() - start) * 1000.0 if config.RECORD_WALL_TIME else 0.0
            table[i] = values
            for j, s in enumerate(s_list):
                result.records.append(RateRecord(
                    config_id=cfg.run.config_id,
                    d=problem.lattice.dimension,
                    p=problem.symbol.order,
                    n=problem.symbol.n,
                    m=problem.symbol.m,
                    s=s,
                    tau=float(tau),
                    eps=float(eps),
                    sup_error=float(values[j]),
                    argmax_k=tuple(float(c) for c in where[j]),
                    cutoff=problem.fiber_freq.cutoff,
                    wall_ms=wall,
                    points=int(points.shape[0]),
                ))
            logger.info("[Rates] tau=%g eps=%.5g sup=%s", tau, eps,
                        ", ".join(f"{v:.4e}" for v in values))

        for j, s in enumerate(s_list):
            fit = fit_loglog_slope(ladder, table[:, j], cfg.rates.fit_rungs)
            result.fits[(float(tau), s)] = fit
            if fit.exact:
                logger.info("[Rates] tau=%g s=%g: exact (all errors below floor)", tau, s)
            else:
                logger.info("[Rates] tau=%g s=%g: slope %.3f (residual %.2e, %s rungs)",
                            tau, s, fit.slope, fit.residual, fit.rungs)
    return result


def tau_growth_violations(result: RateExperimentResult, slack: float = 4.0 / 3.0) -> list[str]:
    """
    At the smallest eps, sup error at tau against slack * (1 + |tau|) times the
    tau = 1 value (the linear growth of the bound in tau).
    """
    if not result.records:
        return []
    eps = min(r.eps for r in result.records)
    last = {(r.tau, r.s): r.sup_error for r in result.records if r.eps == eps}
    failures = []
    for (tau, s), value in sorted(last.items()):
        base = last.get((1.0, s))
        if base is None or tau == 1.0:
            continue
        limit = slack * (1.0 + abs(tau)) * base
        if value > limit and value > config.EXACT_FLOOR:
            failures.append(f"eps={eps:g} s={s:g}: sup at tau={tau:g} is {value:.3e} > {limit:.3e}")
    return failures


def trivial_region_violations(problem: Problem, result: RateExperimentResult) -> list[str]:
    """
    Records whose maximiser lies outside the threshold ball |k| <= t0 must stay
    below 2 eps / t0 (for s >= 1 and eps <= t0).
    """
    window = problem.window
    failures = []
    for r in result.records:
        if r.s < 1.0 or r.eps > window.t0 or np.linalg.norm(r.argmax_k) <= window.t0:
            continue
        bound = window.trivial_bound(r.eps)
        if r.sup_error > bound * (1.0 + 1e-9):
            failures.append(f"tau={r.tau:g} s={r.s:g} eps={r.eps:g}: sup {r.sup_error:.3e} at "
                            f"|k|={np.linalg.norm(r.argmax_k):.3e} above 2 eps/t0 = {bound:.3e}")
    return failures


def predicted_exponents(s: float, p: int, vanishing: bool) -> tuple[float, float]:
    """(eps-exponent, tau-exponent) given by interpolation from the s = 0 bound"""
    if vanishing:
        s_eff = min(s, 2 * p + 2)
        return s_eff / (p + 1), s_eff / (2 * p + 2)
    s_eff = min(s, 2 * p + 1)
    return s_eff / (2 * p + 1), s_eff / (2 * p + 1)


def run_interpolation_experiment(problem: Problem, s_list, pool=None,
                                 vanishing: bool | None = None) -> tuple[list[InterpolationRow], RateExperimentResult]:
    p = problem.symbol.order
    if vanishing is None:
        _, vanishing = correction_regime(problem)
    upper = 2 * p + 2 if vanishing else 2 * p + 1
    for s in s_list:
        if not (0 <= s <= upper):
            raise ValueError(f"s = {s} outside [0, {upper}] for this regime")

    result = run_rate_experiment(problem, pool, s_list)
    rows = []
    for (tau, s), fit in sorted(result.fits.items()):
        eps_exp, tau_exp = predicted_exponents(s, p, vanishing)
        max_err = max(r.sup_error for r in result.records if r.tau == tau and r.s == s)
        if s == 0:
            passed = max_err <= 2.0 + 1e-12
        else:
            passed = fit.exact or fit.slope >= eps_exp - 0.15
        rows.append(InterpolationRow(s, tau, eps_exp, fit.slope, tau_exp, max_err, passed))
        logger.info("[Rates] interp s=%g tau=%g predicted %.3f observed %.3f %s",
                    s, tau, eps_exp, fit.slope, "ok" if passed else "FAILED")
    return rows, result


def fit_summary(fits: dict) -> list[dict]:
    return [
        {"tau": tau, "s": s, "slope": f.slope, "residual": f.residual, "rungs": f.rungs, "exact": f.exact}
        for (tau, s), f in sorted(fits.items())
    ]


def slope_of(fits: dict, tau: float, s: float) -> SlopeFit:
    return fits[(float(tau), float(s))]
