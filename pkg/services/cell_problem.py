# -*- coding: utf-8 -*-
"""
Cell problem and effective data

Solves b(D)* g (b(D) Lambda + 1_m) = 0 on the cell with zero mean, by
plane-wave Galerkin on a FrequencySet, then forms
    g~ = g (b(D) Lambda + 1_m),   g0 = mean(g~),
the germ S(theta) = b(theta)* g0 b(theta), the first-order matrix
g1(theta) and the correction G(theta) = b(theta)* g1(theta) b(theta).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

import config
from services.errors import (
    BracketingViolation,
    DegenerateGerm,
    SingularCellSystem,
    TruncationTooSmall,
)
from services.lattice_geometry import FrequencySet, Lattice, truncate
from services.symbols import (
    PeriodicCoefficient,
    SymbolB,
    eval_symbol,
    flatten_blocks,
    multiplication_blocks,
    reuss_mean,
    symbol_component,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CellSolution:
    lattice: Lattice
    symbol: SymbolB
    coefficient: PeriodicCoefficient
    freq: FrequencySet
    lam: np.ndarray  # (N, n, m), lam[zero] = 0
    residual: float

    @property
    def n(self) -> int:
        return self.symbol.n

    @property
    def m(self) -> int:
        return self.symbol.m

    @cached_property
    def coefficient_root(self) -> np.ndarray:
        """Hermitian square root of the Galerkin matrix of g on the cell frequencies"""
        w, u = eigh(flatten_blocks(multiplication_blocks(self.coefficient, self.freq)), check_finite=False)
        return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T


@dataclass(frozen=True)
class EffectiveData:
    gtilde_freq: FrequencySet
    gtilde: np.ndarray  # (N_out, m, m)
    g0: np.ndarray
    g_voigt: np.ndarray
    g_reuss: np.ndarray

    def gtilde_at(self, coord) -> np.ndarray:
        pos = self.gtilde_freq.position(coord)
        if pos is None:
            return np.zeros_like(self.g0)
        return self.gtilde[pos]


@dataclass(frozen=True)
class DirectionData:
    theta: np.ndarray
    germ: np.ndarray  # S(theta)
    g1: np.ndarray
    correction: np.ndarray  # G(theta)
    germ_values: np.ndarray = field(default=None)
    germ_vectors: np.ndarray = field(default=None)  # omega_j as columns
    corrector: np.ndarray = field(default=None)  # Z(theta), (N, n, n)
    germ_factor: np.ndarray = field(default=None)  # R(theta), (N m, n); S = R* R


@dataclass
class SpecialCasesReport:
    voigt_case: bool  # b(D)* g_k = 0 for all columns
    reuss_case: bool  # m == n
    gtilde_constant: bool
    real_scalar_case: bool
    violations: list[str] = field(default_factory=list)

    @property
    def correction_vanishes(self) -> bool:
        return self.voigt_case or self.reuss_case or self.real_scalar_case


def _hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


# ========================================
# CELL PROBLEM
# ========================================
def solve_cell_problem(lattice: Lattice, symbol: SymbolB, coef: PeriodicCoefficient,
                       freq: FrequencySet, tol: float | None = None) -> CellSolution:
    tol = config.CELL_TOL if tol is None else tol
    k_g = coef.max_frequency
    if k_g > 0 and freq.cutoff <= 2.0 * k_g:
        raise TruncationTooSmall(
            f"cell cutoff {freq.cutoff:.6g} must exceed twice the coefficient frequency {k_g:.6g}"
        )

    n, m = symbol.n, symbol.m
    N = len(freq)
    z = freq.zero_index
    nz = np.array([i for i in range(N) if i != z], dtype=int)

    bb = eval_symbol(symbol, freq.vectors)  # (N, m, n)
    gm = multiplication_blocks(coef, freq)  # (N, N, m, m)

    lam = np.zeros((N, n, m), dtype=complex)
    if nz.size == 0:
        return CellSolution(lattice, symbol, coef, freq, lam, 0.0)

    mat = np.einsum("iax,ijac,jcy->ixjy", bb.conj(), gm, bb)[nz][:, :, nz].reshape(nz.size * n, nz.size * n)
    rhs = -np.einsum("iax,iac->ixc", bb.conj(), gm[:, z])[nz].reshape(nz.size * n, m)

    scale = float(np.linalg.norm(mat))
    asym = float(np.linalg.norm(mat - mat.conj().T))
    if asym > config.HERMITIAN_TOL * scale:
        raise SingularCellSystem(f"cell matrix is not Hermitian (|M - M*| / |M| = {asym / scale:.3e})")

    try:
        factor = cho_factor(mat, lower=False)
    except LinAlgError as e:
        raise SingularCellSystem(f"cell matrix is not positive definite: {e}") from e
    sol = cho_solve(factor, rhs)

    rhs_norm = float(np.linalg.norm(rhs))
    residual = 0.0 if rhs_norm == 0.0 else float(np.linalg.norm(mat @ sol - rhs)) / rhs_norm
    if residual > tol:
        raise SingularCellSystem(f"cell residual {residual:.3e} above tolerance {tol:.1e}")

    lam[nz] = sol.reshape(nz.size, n, m)
    logger.info("[Cell] solved %s frequencies (n=%s, m=%s), residual %.3e", N, n, m, residual)
    return CellSolution(lattice, symbol, coef, freq, lam, residual)


def _corrected_columns(cell: CellSolution) -> np.ndarray:
    """Fourier coefficients of b(D) Lambda + 1_m on the cell frequencies"""
    bb = eval_symbol(cell.symbol, cell.freq.vectors)
    w = np.einsum("iax,ixc->iac", bb, cell.lam)
    w[cell.freq.zero_index] += np.eye(cell.m)
    return w


def effective_matrix(cell: CellSolution, bracket_tol: float | None = None,
                     reuss_resolution: int | None = None) -> EffectiveData:
    bracket_tol = config.BRACKET_TOL if bracket_tol is None else bracket_tol
    coef = cell.coefficient

    out = truncate(cell.lattice, cell.freq.cutoff + coef.max_frequency)
    conv = multiplication_blocks(coef, out, cell.freq)  # (N_out, N, m, m)
    gtilde = np.einsum("ijab,jbc->iac", conv, _corrected_columns(cell))

    g0 = gtilde[out.zero_index]
    g0_asym = float(np.linalg.norm(g0 - g0.conj().T))
    if g0_asym > 1e-8 * float(np.linalg.norm(g0)):
        logger.warning("[Cell] g0 deviates from Hermitian by %.3e", g0_asym)
    g0 = _hermitian_part(g0)

    g_voigt = _hermitian_part(coef.fourier((0,) * cell.lattice.dimension))
    g_reuss = reuss_mean(coef, reuss_resolution)

    if np.linalg.eigvalsh(g0).min() <= 0.0:
        raise BracketingViolation("effective matrix g0 is not positive definite")

    ref = float(np.linalg.norm(g_voigt, 2))
    upper = float(np.linalg.eigvalsh(g_voigt - g0).min())
    lower = float(np.linalg.eigvalsh(g0 - g_reuss).min())
    if upper < -bracket_tol * ref or lower < -bracket_tol * ref:
        raise BracketingViolation(
            f"Voigt-Reuss bracketing fails: min eig(gbar - g0) = {upper:.3e}, "
            f"min eig(g0 - g_) = {lower:.3e}; cell truncation too small?"
        )

    logger.info("[Cell] g0 computed; bracket margins %.3e (Voigt), %.3e (Reuss)", upper, lower)
    return EffectiveData(out, gtilde, g0, g_voigt, g_reuss)


def energy_matrix(cell: CellSolution, eff: EffectiveData) -> np.ndarray:
    """mean((b(D)Lambda + 1)* g~), an independent assembly of g0"""
    w = _corrected_columns(cell)
    gt = np.stack([eff.gtilde_at(c) for c in cell.freq.coords])
    return _hermitian_part(np.einsum("iax,iay->xy", w.conj(), gt))


# ========================================
# GERM / FIRST ORDER
# ========================================
def _check_unit(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float).ravel()
    if abs(float(np.linalg.norm(th)) - 1.0) > 1e-12:
        raise ValueError(f"theta must be a unit vector, |theta| = {np.linalg.norm(th):.15g}")
    return th


def germ(eff: EffectiveData, symbol: SymbolB, theta) -> np.ndarray:
    th = _check_unit(theta)
    bt = eval_symbol(symbol, th)
    s = _hermitian_part(bt.conj().T @ eff.g0 @ bt)
    if np.linalg.eigvalsh(s).min() <= 0.0:
        raise DegenerateGerm(f"germ S(theta) is not positive definite at theta={th}")
    return s


def first_order_matrix(cell: CellSolution, eff: EffectiveData, symbol: SymbolB,
                       theta) -> tuple[np.ndarray, np.ndarray]:
    """(g1(theta), G(theta))"""
    th = _check_unit(theta)
    b1 = symbol_component(symbol, 1, th, cell.freq.vectors)  # (N, m, n)
    h = np.einsum("iax,ixc->iac", b1, cell.lam)  # B_1(theta; D) Lambda
    gt = np.stack([eff.gtilde_at(c) for c in cell.freq.coords])
    cross = np.einsum("iba,ibc->ac", gt.conj(), h)
    g1 = cross + cross.conj().T
    bt = eval_symbol(symbol, th)
    return g1, _hermitian_part(bt.conj().T @ g1 @ bt)


def direction_data(cell: CellSolution, eff: EffectiveData, symbol: SymbolB, theta) -> DirectionData:
    th = _check_unit(theta)
    s = germ(eff, symbol, th)
    g1, corr = first_order_matrix(cell, eff, symbol, th)

    bt = eval_symbol(symbol, th)
    s_energy = bt.conj().T @ energy_matrix(cell, eff) @ bt
    drift = float(np.linalg.norm(s - s_energy))
    if drift > 1e-8 * float(np.linalg.norm(s)):
        logger.warning("[Cell] germ cross-check drift %.3e at theta=%s", drift, th)

    factor = germ_factor(cell, symbol, th)
    split = float(np.linalg.norm(factor.conj().T @ factor - s))
    if split > 1e-8 * float(np.linalg.norm(s)):
        logger.warning("[Cell] R(theta)* R(theta) misses S(theta) by %.3e at theta=%s", split, th)

    values, vectors = np.linalg.eigh(s)
    return DirectionData(th, s, g1, corr, values, vectors, corrector_map(cell, symbol, th), factor)


def corrector_map(cell: CellSolution, symbol: SymbolB, theta) -> np.ndarray:
    """Fourier coefficients of Z(theta) = Lambda b(theta), shape (N, n, n)"""
    bt = eval_symbol(symbol, _check_unit(theta))
    return np.einsum("ixc,cy->ixy", cell.lam, bt)


def germ_factor(cell: CellSolution, symbol: SymbolB, theta) -> np.ndarray:
    """
    R(theta) = g^(1/2) (b(D) Lambda + 1_m) b(theta) on the constants, as an
    (N m) x n matrix in the Galerkin basis of the cell frequencies
    """
    bt = eval_symbol(symbol, _check_unit(theta))
    wb = np.einsum("iac,cy->iay", _corrected_columns(cell), bt).reshape(len(cell.freq) * cell.m, symbol.n)
    return cell.coefficient_root @ wb


# ========================================
# SPECIAL CASES
# ========================================
def _is_real_coefficient(coef: PeriodicCoefficient, tol: float) -> bool:
    # g(x) real  <=>  g^(-c) = conj(g^(c))
    for coord, mat in zip(coef.coords, coef.matrices):
        if np.max(np.abs(coef.fourier(-coord) - mat.conj()), initial=0.0) > tol:
            return False
    return True


def detect_special_cases(cell: CellSolution, eff: EffectiveData, tol: float = 1e-8) -> SpecialCasesReport:
    coef, symbol = cell.coefficient, cell.symbol
    scale = float(np.max(np.abs(coef.matrices)))

    # (i) b(c)* g^(c) = 0 for every frequency c of g
    bc = eval_symbol(symbol, coef.coords @ cell.lattice.dual)
    voigt = bool(np.max(np.abs(np.einsum("tax,tab->txb", bc.conj(), coef.matrices))) <= tol * scale)
    reuss = symbol.m == symbol.n

    real_scalar = (
        symbol.n == 1
        and _is_real_coefficient(coef, 1e-14 * scale)
        and all(np.max(np.abs(c.imag)) == 0.0 for _, c in symbol.terms)
    )

    g0_norm = float(np.linalg.norm(eff.g0))
    off = np.array([np.any(c != 0) for c in eff.gtilde_freq.coords])
    tail = float(np.max(np.abs(eff.gtilde[off]), initial=0.0))
    gtilde_constant = tail <= 1e-6 * g0_norm

    report = SpecialCasesReport(voigt, reuss, gtilde_constant, real_scalar)

    if voigt:
        if np.linalg.norm(eff.g0 - eff.g_voigt) > tol * g0_norm:
            report.violations.append("g0 != Voigt mean although b(D)* g_k = 0")
        if np.max(np.abs(cell.lam), initial=0.0) > tol:
            report.violations.append("Lambda != 0 although b(D)* g_k = 0")
    if reuss:
        if np.linalg.norm(eff.g0 - eff.g_reuss) > tol * g0_norm:
            report.violations.append("g0 != Reuss mean although m = n")
        if not gtilde_constant:
            report.violations.append("g~ is not constant although g0 equals the Reuss mean")

    for msg in report.violations:
        logger.error("[Cell] %s", msg)
    return report
