# -*- coding: utf-8 -*-
"""
Fiber operators A(k) = b(D+k)* g b(D+k) and A0(k) = b(D+k)* g0 b(D+k)
on a truncated plane-wave basis, their exponentials and the smoothed
error norm |(exp(-i tau A(k)) - exp(-i tau A0(k))) R0(k, eps)^(s/2)|.

The spectrum of A(k) is taken from the SVD of the factor X(k) = g^(1/2) b(D+k)
(A = X* X), which keeps the threshold eigenvalues ~ t^(2p) relatively accurate
when they are multiplied by tau * eps^(-2p).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, partial

import numpy as np
from scipy.linalg import block_diag, eigh, svd, svdvals

import config
from services.cell_problem import EffectiveData
from services.errors import NotPositiveDefinite, TruncationTooSmall
from services.lattice_geometry import FrequencySet, Lattice
from services.symbols import PeriodicCoefficient, SymbolB, eval_symbol, flatten_blocks, multiplication_blocks

logger = logging.getLogger(__name__)


def spectral_norm(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(svdvals(mat, check_finite=False)[0])


@dataclass(frozen=True)
class FiberOperator:
    k: np.ndarray
    freq: FrequencySet
    n: int
    factor: np.ndarray  # X(k), (N m) x (N n)
    symbol_matrix: np.ndarray  # block-diagonal b(b + k)
    coefficient_matrix: np.ndarray  # Galerkin matrix of g

    @cached_property
    def matrix(self) -> np.ndarray:
        a = self.symbol_matrix.conj().T @ self.coefficient_matrix @ self.symbol_matrix
        return 0.5 * (a + a.conj().T)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues ascending, eigenvectors as columns)"""
        _, sigma, vh = svd(self.factor, full_matrices=False, check_finite=False)
        order = np.argsort(sigma**2, kind="stable")
        return sigma[order] ** 2, vh.conj().T[:, order]


@dataclass(frozen=True)
class EffectiveFiber:
    k: np.ndarray
    freq: FrequencySet
    blocks: np.ndarray  # (N, n, n)

    @cached_property
    def matrix(self) -> np.ndarray:
        return block_diag(*self.blocks)

    @cached_property
    def block_spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.blocks)

    @property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        vals, vecs = self.block_spectrum
        return vals.ravel(), block_diag(*vecs)


@dataclass(frozen=True)
class SmoothingOperator:
    k: np.ndarray
    eps: float
    s: float
    diagonal: np.ndarray


class FiberAssembler:
    """Holds the k-independent Galerkin data of one configuration"""

    def __init__(self, lattice: Lattice, symbol: SymbolB, coef: PeriodicCoefficient, freq: FrequencySet):
        self.lattice = lattice
        self.symbol = symbol
        self.coef = coef
        self.freq = freq

        self.g_matrix = flatten_blocks(multiplication_blocks(coef, freq))
        w, u = eigh(self.g_matrix, check_finite=False)
        if w.min() < -1e-12 * max(w.max(), 1.0):
            raise NotPositiveDefinite(f"Galerkin matrix of g has eigenvalue {w.min():.3e}")
        self.g_root = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T
        logger.debug("[Fiber] assembler ready: %s frequencies, m=%s, n=%s", len(freq), symbol.m, symbol.n)

    def symbol_matrix(self, k) -> np.ndarray:
        kk = np.asarray(k, dtype=float)
        return block_diag(*eval_symbol(self.symbol, self.freq.vectors + kk))

    def fiber(self, k) -> FiberOperator:
        kk = np.asarray(k, dtype=float).ravel()
        bmat = self.symbol_matrix(kk)
        return FiberOperator(kk, self.freq, self.symbol.n, self.g_root @ bmat, bmat, self.g_matrix)

    def effective_fiber(self, eff: EffectiveData, k) -> EffectiveFiber:
        return assemble_effective_fiber(eff, self.symbol, self.freq, k)

    def zero_block(self) -> np.ndarray:
        """Isometry onto the zero-frequency constants, shape (N n, n)"""
        n = self.symbol.n
        emb = np.zeros((len(self.freq) * n, n), dtype=complex)
        z = self.freq.zero_index
        emb[z * n:(z + 1) * n, :] = np.eye(n)
        return emb

    def verify_gap(self, window) -> float:
        """Second-band eigenvalue at k=0 against the lower bound d0"""
        n = self.symbol.n
        vals, _ = self.fiber(np.zeros(self.lattice.dimension)).spectrum
        kernel = vals[:n]
        low_gap = vals.size > n and vals[n] < (1.0 - config.GAP_SLACK) * window.d0_bound
        if np.max(np.abs(kernel)) > window.delta or low_gap:
            raise TruncationTooSmall(
                f"gap at k=0 inconsistent: kernel max {np.max(np.abs(kernel)):.3e}, "
                f"next eigenvalue {vals[n] if vals.size > n else float('nan'):.6g} vs bound {window.d0_bound:.6g}"
            )
        return float(vals[n]) if vals.size > n else float("inf")

    def error_operator(self, eff: EffectiveData, k, tau_scaled: float) -> np.ndarray:
        """exp(-i tau A(k)) - exp(-i tau A0(k))"""
        return (fiber_exponential(self.fiber(k), tau_scaled)
                - fiber_exponential(self.effective_fiber(eff, k), tau_scaled))

    def smoothed_error_norms(self, eff: EffectiveData, k, tau: float, eps: float, s_values) -> np.ndarray:
        s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
        if tau == 0:
            return np.zeros(s_values.shape)
        diff = self.error_operator(eff, k, tau * eps ** (-2 * self.symbol.order))
        return np.array([
            spectral_norm(diff * smoothing_operator(self.freq, k, eps, s, self.symbol.n).diagonal[None, :])
            for s in s_values
        ])

    def smoothed_error_norm(self, eff: EffectiveData, k, tau: float, eps: float, s: float) -> float:
        return float(self.smoothed_error_norms(eff, k, tau, eps, [s])[0])


def assemble_fiber(lattice: Lattice, symbol: SymbolB, coef: PeriodicCoefficient,
                   freq: FrequencySet, k) -> FiberOperator:
    return FiberAssembler(lattice, symbol, coef, freq).fiber(k)


def assemble_effective_fiber(eff: EffectiveData, symbol: SymbolB, freq: FrequencySet, k) -> EffectiveFiber:
    kk = np.asarray(k, dtype=float).ravel()
    bb = eval_symbol(symbol, freq.vectors + kk)
    blocks = np.einsum("iax,ab,iby->ixy", bb.conj(), eff.g0, bb)
    blocks = 0.5 * (blocks + np.conj(np.swapaxes(blocks, -1, -2)))
    return EffectiveFiber(kk, freq, blocks)


def fiber_exponential(fiber: FiberOperator | EffectiveFiber, tau: float) -> np.ndarray:
    """V diag(exp(-i tau lambda)) V*"""
    if isinstance(fiber, EffectiveFiber):
        if tau == 0:
            return np.eye(fiber.blocks.shape[0] * fiber.blocks.shape[1], dtype=complex)
        vals, vecs = fiber.block_spectrum
        phased = vecs * np.exp(-1j * tau * vals)[:, None, :]
        return block_diag(*(phased @ np.conj(np.swapaxes(vecs, -1, -2))))

    vals, vecs = fiber.spectrum
    if tau == 0:
        return np.eye(vals.size, dtype=complex)
    return (vecs * np.exp(-1j * tau * vals)) @ vecs.conj().T


def smoothing_operator(freq: FrequencySet, k, eps: float, s: float, n: int) -> SmoothingOperator:
    """Diagonal eps^s (|b + k|^2 + eps^2)^(-s/2), n entries per frequency"""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    kk = np.asarray(k, dtype=float).ravel()
    q = np.sum((freq.vectors + kk) ** 2, axis=1)
    entries = (eps**2 / (q + eps**2)) ** (0.5 * s)
    return SmoothingOperator(kk, float(eps), float(s), np.repeat(entries, n))


def projection_removal_bound(freq: FrequencySet, k, eps: float) -> float:
    """
    |R0(k, eps)^(1/2) (I - P)| on the truncated diagonal: the largest
    eps (|b + k|^2 + eps^2)^(-1/2) over b != 0. At most eps / r0 for |k| <= r0.
    """
    op = smoothing_operator(freq, k, eps, 1.0, 1)
    rest = np.delete(op.diagonal, freq.zero_index)
    return float(rest.max()) if rest.size else 0.0


def smoothed_error_norm(lattice: Lattice, symbol: SymbolB, coef: PeriodicCoefficient, eff: EffectiveData,
                        freq: FrequencySet, k, tau: float, eps: float, s: float) -> float:
    return FiberAssembler(lattice, symbol, coef, freq).smoothed_error_norm(eff, k, tau, eps, s)


def _norms_at(assembler: FiberAssembler, eff: EffectiveData, tau: float, eps: float, s_values, k) -> np.ndarray:
    return assembler.smoothed_error_norms(eff, k, tau, eps, s_values)


def sup_error_over_points(assembler: FiberAssembler, eff: EffectiveData, points: np.ndarray,
                          tau: float, eps: float, s_values, pool=None) -> tuple[np.ndarray, np.ndarray]:
    """
    Max of the smoothed error norm over k-points, one value per s.
    Returns (sup values, argmax k per s). Ties go to the first point.
    """
    if len(points) == 0:
        raise ValueError("no k-points to evaluate")
    work = partial(_norms_at, assembler, eff, tau, eps, list(np.atleast_1d(s_values)))
    rows = pool.map(work, list(points)) if pool is not None else [work(k) for k in points]
    table = np.vstack(rows)  # (P, S)
    best = np.argmax(table, axis=0)
    return table[best, np.arange(table.shape[1])], points[best]


def sup_error_over_brillouin(assembler: FiberAssembler, eff: EffectiveData, grid, tau: float,
                             eps: float, s: float, pool=None) -> float:
    values, _ = sup_error_over_points(assembler, eff, grid.points, tau, eps, [s], pool)
    return float(values[0])
