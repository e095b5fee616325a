# -*- coding: utf-8 -*-
"""
Threshold window and threshold approximations near the bottom of the spectrum

For k = t*theta with t <= t0, A(k) has exactly n eigenvalues in [0, delta];
F(t) is the projection onto them. The report checks
    |F(t) - P|                                 ~ t^p
    |A(k)F(t) - t^2p S P|                      ~ t^(2p+1)
    |A(k)F(t) - t^2p S P - t^(2p+1) G P|       ~ t^(2p+2)
on a geometric t-ladder.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

import config
from services.cell_problem import CellSolution, EffectiveData, direction_data
from services.errors import RankMismatch
from services.fibers import FiberAssembler, FiberOperator, spectral_norm
from services.lattice_geometry import Lattice
from services.rate_fit import SlopeFit, fit_loglog_slope
from services.symbols import PositivityCertificate, SymbolB

logger = logging.getLogger(__name__)

# multiple of eps_mach |X(k)| below which fiber residuals are roundoff
ROUNDOFF_FACTOR = 64.0


@dataclass(frozen=True)
class ThresholdWindow:
    delta: float
    t0: float
    alpha0: float
    alpha1: float
    norm_g: float
    norm_g_inv: float
    r0: float
    p: int
    factor: float
    c0: float
    c1: float
    c_t: float
    d0_bound: float

    def trivial_bound(self, eps: float) -> float:
        """
        Bound on the smoothed error for |k| > t0, valid for s >= 1 and eps <= t0:
        every smoothing entry is at most eps / t0 there.
        """
        return 2.0 * eps / self.t0


@dataclass
class ThresholdRung:
    t: float
    rank: int
    projection_error: float
    residual_without_g: float
    residual_with_g: float
    lowest_ratio: float  # lambda_1(t) / t^2p
    commutator: float  # |(A F - F A0) P|, A0 P = t^2p S P
    residual_noise: float
    projection_noise: float
    j_norms: dict = field(default_factory=dict)  # tau -> |(exp(-i tau A) - exp(-i tau A0)) P|

    def j_bound(self, tau: float) -> float:
        """2 |F - P| + |tau| |(A F - F A0) P|"""
        return 2.0 * self.projection_error + abs(tau) * self.commutator


@dataclass
class ThresholdReport:
    theta: np.ndarray
    window: ThresholdWindow
    germ_values: np.ndarray
    correction_norm: float
    first_order_shift: float  # v1* G v1 for the lowest germ eigenvector
    rungs: list[ThresholdRung] = field(default_factory=list)
    projection_fit: SlopeFit | None = None
    residual_fit_without_g: SlopeFit | None = None
    residual_fit_with_g: SlopeFit | None = None

    @property
    def germ_ratio_error(self) -> float:
        """Relative gap between lambda_1(t)/t^2p and gamma_1 + t v1* G v1 at the smallest t"""
        last = self.rungs[-1]
        expected = self.germ_values[0] + last.t * self.first_order_shift
        return abs(last.lowest_ratio - expected) / self.germ_values[0]


def threshold_window(lattice: Lattice, symbol: SymbolB, cert: PositivityCertificate,
                     factor: float | None = None) -> ThresholdWindow:
    factor = config.WINDOW_FACTOR if factor is None else factor
    p = symbol.order
    a0, a1 = symbol.alpha0, symbol.alpha1
    r0 = lattice.inradius
    ng, ngi = cert.norm_g, cert.norm_g_inv

    d0 = a0 / ngi * (2.0 * r0) ** (2 * p)
    delta = min(d0 / 36.0, 0.25)
    c0 = factor * math.sqrt(a1 / a0) * math.sqrt(ng * ngi) * (1.0 + 1.0 / r0) ** (p - 1)
    c1 = max((p - 1) * c0, math.sqrt(a1 * ng))
    t0 = math.sqrt(delta) / c1
    c_t = p * c0**2 + a1 * ng / delta

    logger.info("[Threshold] delta=%.6g t0=%.6g C0=%.4g C1=%.4g", delta, t0, c0, c1)
    return ThresholdWindow(delta, t0, a0, a1, ng, ngi, r0, p, factor, c0, c1, c_t, d0)


def threshold_projection(fiber: FiberOperator, window: ThresholdWindow) -> tuple[np.ndarray, int]:
    t = float(np.linalg.norm(fiber.k))
    if t > window.t0 * (1.0 + 1e-12):
        raise ValueError(f"|k| = {t:.6g} exceeds the threshold radius t0 = {window.t0:.6g}")

    vals, vecs = fiber.spectrum
    rank = int(np.count_nonzero(vals <= window.delta))
    crowded = np.count_nonzero((vals > window.delta) & (vals < 3.0 * window.delta))
    if rank != fiber.n or crowded:
        raise RankMismatch(
            f"expected {fiber.n} eigenvalues in [0, delta] and none in (delta, 3 delta), "
            f"found {rank} and {crowded} at |k|={t:.3e}"
        )
    sel = vecs[:, :rank]
    return sel @ sel.conj().T, rank


def _hermitian_exp(h: np.ndarray, tau: float) -> np.ndarray:
    w, u = np.linalg.eigh(h)
    return (u * np.exp(-1j * tau * w)) @ u.conj().T


def _rung(assembler: FiberAssembler, window: ThresholdWindow, theta: np.ndarray, t: float,
          s_theta: np.ndarray, g_theta: np.ndarray, emb: np.ndarray, taus) -> ThresholdRung:
    p = window.p
    n = assembler.symbol.n
    fiber = assembler.fiber(t * theta)
    proj, rank = threshold_projection(fiber, window)

    vals, vecs = fiber.spectrum
    low = vecs[:, :n]
    # A F from the factored spectrum, not A @ F
    af = (low * vals[:n]) @ low.conj().T
    plain = emb @ emb.conj().T
    germ_t = t ** (2 * p) * s_theta
    with_s = af - emb @ germ_t @ emb.conj().T
    with_g = with_s - t ** (2 * p + 1) * emb @ g_theta @ emb.conj().T

    # singular values of X(k) carry an absolute error ~ eps_mach |X|
    sigma_max = math.sqrt(max(float(vals[-1]), 0.0))
    slack = ROUNDOFF_FACTOR * np.finfo(float).eps * sigma_max
    gap = math.sqrt(float(vals[n])) if vals.size > n else sigma_max

    j_norms = {}
    ortho = vecs.conj().T @ emb
    for tau in taus:
        evolved = vecs @ (np.exp(-1j * tau * vals)[:, None] * ortho)
        j_norms[float(tau)] = spectral_norm(evolved - emb @ _hermitian_exp(germ_t, tau))

    return ThresholdRung(
        t=t,
        rank=rank,
        projection_error=spectral_norm(proj - plain),
        residual_without_g=spectral_norm(with_s),
        residual_with_g=spectral_norm(with_g),
        lowest_ratio=float(vals[0] / t ** (2 * p)),
        commutator=spectral_norm(af @ emb - proj @ emb @ germ_t),
        residual_noise=2.0 * slack * math.sqrt(max(float(vals[n - 1]), 0.0)),
        projection_noise=slack / gap,
        j_norms=j_norms,
    )


def threshold_residual(assembler: FiberAssembler, cell: CellSolution, eff: EffectiveData,
                       window: ThresholdWindow, theta, t_ladder, fit_rungs: int | None = None,
                       taus=(1.0,)) -> ThresholdReport:
    """
    Threshold approximations along k = t theta. `cell` and `eff` should be
    solved on the assembler's frequency set: then S and G are the exact
    germ and first-order term of the truncated fiber.
    """
    ts = np.asarray(t_ladder, dtype=float)
    if ts.size < 2 or np.any(ts <= 0) or np.any(ts > window.t0 * (1.0 + 1e-12)):
        raise ValueError(f"t-ladder must lie in (0, t0 = {window.t0:.6g}] with at least two rungs")
    if np.any(np.diff(ts) >= 0):
        raise ValueError("t-ladder must be strictly decreasing")
    if len(cell.freq) != len(assembler.freq):
        logger.warning("[Threshold] cell solved on %s frequencies, fiber uses %s; residuals level off at "
                       "the truncation mismatch", len(cell.freq), len(assembler.freq))

    direction = direction_data(cell, eff, assembler.symbol, theta)
    emb = assembler.zero_block()
    v1 = direction.germ_vectors[:, 0]
    report = ThresholdReport(direction.theta, window, direction.germ_values,
                             float(np.linalg.norm(direction.correction, 2)),
                             float(np.real(v1.conj() @ direction.correction @ v1)))

    for t in ts:
        rung = _rung(assembler, window, direction.theta, float(t), direction.germ, direction.correction, emb, taus)
        logger.debug("[Threshold] t=%.3e |F-P|=%.3e r=%.3e r_G=%.3e",
                     t, rung.projection_error, rung.residual_without_g, rung.residual_with_g)
        report.rungs.append(rung)

    rungs = report.rungs
    noise = [r.residual_noise for r in rungs]
    floor = 1e-10 * ts[-1] ** (2 * window.p)
    report.projection_fit = fit_loglog_slope(ts, [r.projection_error for r in rungs], fit_rungs,
                                             floor=1e-13, noise=[r.projection_noise for r in rungs])
    report.residual_fit_without_g = fit_loglog_slope(ts, [r.residual_without_g for r in rungs],
                                                     fit_rungs, floor=floor, noise=noise)
    report.residual_fit_with_g = fit_loglog_slope(ts, [r.residual_with_g for r in rungs],
                                                  fit_rungs, floor=floor, noise=noise)
    logger.info("[Threshold] slopes: |F-P| %.3f, r %.3f (%s rungs), r_G %.3f (%s rungs)",
                report.projection_fit.slope, report.residual_fit_without_g.slope,
                report.residual_fit_without_g.rungs, report.residual_fit_with_g.slope,
                report.residual_fit_with_g.rungs)
    return report


def geometric_ladder(t_max: float, ratio: float, count: int) -> np.ndarray:
    if count < 2 or ratio <= 1.0:
        raise ValueError("ladder needs count >= 2 and ratio > 1")
    return t_max / ratio ** np.arange(count)
