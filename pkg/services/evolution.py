# -*- coding: utf-8 -*-
"""
Cauchy problem  i du/dt = A_eps u + F,  u(0) = phi,  and its homogenized
counterpart, solved by Bloch synthesis.

After the scaling transform the data live on fibers: for quasimomentum k the
fiber vector is c_k(b) = eps^(-d/2) phi^((b + k) / eps). Each fiber is evolved
with exp(-i tau eps^(-2p) A(k)), the homogenized one with the per-frequency
matrix phase exp(-i tau S(xi)), S(xi) = b(xi)* g0 b(xi). L2 norms come from the
frequency-domain quadrature (2 pi)^(-d) sum_k w_k sum_b |.|^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.integrate import trapezoid

import config
from services.errors import QuadratureUnconverged, SupportOverflow
from services.fibers import FiberAssembler
from services.lattice_geometry import Lattice, to_brillouin_zone
from services.rate_fit import SlopeFit, fit_loglog_slope
from services.symbols import eval_symbol
from utils.config_loader import EvolutionSpec

logger = logging.getLogger(__name__)


@dataclass
class EvolutionField:
    x: np.ndarray
    u_eps: np.ndarray  # (P, n)
    u_hom: np.ndarray


@dataclass
class EvolutionResult:
    tau: float
    eps: float
    norm_u_eps: float
    norm_u_hom: float
    norm_phi: float
    error: float
    sobolev_order: float
    sobolev_norm: float
    forcing_norm: float
    predicted_bound: float
    k_points: int
    resolution: int
    time_steps: int
    duhamel_change: float
    field: EvolutionField | None = None

    @property
    def relative_error(self) -> float:
        return self.error / self.norm_phi if self.norm_phi else 0.0


@dataclass
class EvolutionLadder:
    results: list[EvolutionResult] = field(default_factory=list)
    fit: SlopeFit | None = None


# ========================================
# DATA
# ========================================
def data_profile(spec: EvolutionSpec, xi: np.ndarray, n: int) -> np.ndarray:
    """phi^(xi) (or psi^(xi)) as an (N, n) array, band-limited to |xi| <= xi_max"""
    q = np.sum(np.atleast_2d(xi) ** 2, axis=1)
    d = np.atleast_2d(xi).shape[1]
    if spec.profile == "gaussian":
        amp = np.exp(-0.5 * q / spec.width**2)
    else:
        amp = (1.0 + q / spec.width**2) ** (-(d + 1) / 4.0)
    amp = np.where(q <= spec.xi_max**2, amp, 0.0)
    return amp[:, None] * np.full(n, 1.0 / math.sqrt(n))[None, :]


def forcing_profile(spec: EvolutionSpec, t: np.ndarray) -> np.ndarray:
    if spec.forcing == "exp":
        return np.exp(-1j * t)
    if spec.forcing == "cos":
        return np.cos(t).astype(complex)
    return np.zeros_like(t, dtype=complex)


def _exp_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """int_0^1 (1-u) e^(zu) du and int_0^1 u e^(zu) du"""
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    ez = np.exp(zs)
    left = (ez - 1.0 - zs) / zs**2
    right = (ez * (zs - 1.0) + 1.0) / zs**2
    left_s = 0.5 + z / 6.0 + z**2 / 24.0 + z**3 / 120.0
    right_s = 0.5 + z / 3.0 + z**2 / 8.0 + z**3 / 30.0
    return np.where(small, left_s, left), np.where(small, right_s, right)


def duhamel_integral(lam: np.ndarray, f_values: np.ndarray, tau: float) -> np.ndarray:
    """
    int_0^tau f(s) exp(-i (tau - s) lam) ds per mode, by the composite trapezoid
    rule on f with the exponential factor integrated exactly on each step.
    """
    steps = f_values.size - 1
    h = tau / steps
    s = np.linspace(0.0, tau, steps + 1)
    wl, wr = _exp_weights(1j * lam * h)
    phase = np.exp(-1j * np.outer(lam, tau - s[:-1]))  # (M, steps)
    return h * (wl * (phase @ f_values[:-1]) + wr * (phase @ f_values[1:]))


# ========================================
# FIBER WORK
# ========================================
@dataclass(frozen=True)
class _FiberTask:
    assembler: FiberAssembler
    g0: np.ndarray
    eps: float
    tau: float
    spec: EvolutionSpec
    steps: int
    sobolev_order: float
    keep_vectors: bool


def _evolve_at(task: _FiberTask, k: np.ndarray) -> dict:
    asm = task.assembler
    symbol = asm.symbol
    n, p, d = symbol.n, symbol.order, asm.lattice.dimension
    eps, tau = task.eps, task.tau

    xi = (asm.freq.vectors + k) / eps
    c = (eps ** (-d / 2.0) * data_profile(task.spec, xi, n)).ravel()
    forced = task.spec.forcing != "zero" and task.spec.forcing_scale != 0.0
    psi = task.spec.forcing_scale * c if forced else np.zeros_like(c)

    # exact fiber
    vals, vecs = asm.fiber(k).spectrum
    lam = vals * eps ** (-2 * p)
    v = vecs @ (np.exp(-1j * tau * lam) * (vecs.conj().T @ c))

    # homogenized, per frequency
    bx = eval_symbol(symbol, xi)
    s_blocks = np.einsum("iax,ab,iby->ixy", bx.conj(), task.g0, bx)
    s_blocks = 0.5 * (s_blocks + np.conj(np.swapaxes(s_blocks, -1, -2)))
    mu, w = np.linalg.eigh(s_blocks)
    cb = c.reshape(-1, n)
    coeff = np.einsum("iax,ia->ix", w.conj(), cb)
    v0 = np.einsum("iax,ix->ia", w, np.exp(-1j * tau * mu) * coeff).ravel()

    duh_change = duh_size = 0.0
    if forced:
        a = vecs.conj().T @ psi
        a0 = np.einsum("iax,ia->ix", w.conj(), psi.reshape(-1, n))
        pair = []
        for steps in (task.steps, 2 * task.steps):
            f = forcing_profile(task.spec, np.linspace(0.0, tau, steps + 1))
            duh = -1j * vecs @ (duhamel_integral(lam, f, tau) * a)
            duh0 = -1j * np.einsum("iax,ix->ia", w,
                                   duhamel_integral(mu.ravel(), f, tau).reshape(mu.shape) * a0).ravel()
            pair.append((duh, duh0))
        (d1, d01), (d2, d02) = pair
        duh_change = float(np.sum(np.abs(d2 - d1) ** 2) + np.sum(np.abs(d02 - d01) ** 2))
        duh_size = float(np.sum(np.abs(d2) ** 2) + np.sum(np.abs(d02) ** 2))
        v = v + d2
        v0 = v0 + d02

    weight = (1.0 + np.sum(xi**2, axis=1)) ** task.sobolev_order
    out = {
        "u_eps": float(np.sum(np.abs(v) ** 2)),
        "u_hom": float(np.sum(np.abs(v0) ** 2)),
        "phi": float(np.sum(np.abs(c) ** 2)),
        "error": float(np.sum(np.abs(v - v0) ** 2)),
        "phi_hs": float(np.sum(weight * np.sum(np.abs(cb) ** 2, axis=1))),
        "psi_hs": float(np.sum(weight * np.sum(np.abs(psi.reshape(-1, n)) ** 2, axis=1))),
        "duh_change": duh_change,
        "duh_size": duh_size,
    }
    if task.keep_vectors:
        out["v"] = v
        out["v0"] = v0
    return out


# ========================================
# SOLVER
# ========================================
def brillouin_resolution(lattice: Lattice, eps: float, spec: EvolutionSpec, base: int) -> int:
    support = 2.0 * eps * spec.xi_max
    return max(base, int(math.ceil(spec.points_per_support * lattice.longest_dual / support)))


def active_fibers(lattice: Lattice, eps: float, xi_max: float, resolution: int) -> np.ndarray:
    """
    Quadrature points k whose fiber meets the scaled support |b + k| <= eps * xi_max.
    Enumerates the shifted lattice ((j + 1/2)/M - 1/2) @ dual inside the ball and
    folds it into the Brillouin zone.
    """
    radius = eps * xi_max
    M = resolution
    d = lattice.dimension
    bounds = np.ceil(radius * np.linalg.norm(lattice.basis, axis=1) / (2.0 * math.pi) * M).astype(int) + 1
    ranges = [np.arange(-b, b + 1) for b in bounds]
    mesh = np.meshgrid(*ranges, indexing="ij")
    j = np.stack([m.ravel() for m in mesh], axis=1)
    eta = ((j + 0.5) / M - 0.5 * (M % 2 == 1)) @ lattice.dual
    eta = eta[np.sum(eta**2, axis=1) <= radius**2]
    if eta.shape[0] == 0:
        return np.zeros((0, d))

    k = to_brillouin_zone(lattice, eta)
    frac = k @ np.linalg.inv(lattice.dual)
    keys = np.round(frac * M * 4.0).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return k[np.sort(first)]


def solve_cauchy(assembler: FiberAssembler, g0: np.ndarray, spec: EvolutionSpec, eps: float,
                 base_resolution: int, vanishing: bool, pool=None, tau: float | None = None) -> EvolutionResult:
    lattice = assembler.lattice
    symbol = assembler.symbol
    p, d = symbol.order, lattice.dimension
    tau = spec.tau if tau is None else float(tau)

    M = brillouin_resolution(lattice, eps, spec, base_resolution)
    points = active_fibers(lattice, eps, spec.xi_max, M)
    kmax = float(np.max(np.linalg.norm(points, axis=1), initial=0.0))
    if eps * spec.xi_max + kmax > assembler.freq.cutoff:
        raise SupportOverflow(
            f"scaled support {eps * spec.xi_max:.4g} + |k| {kmax:.4g} exceeds fiber cutoff {assembler.freq.cutoff:.4g}"
        )

    sobolev_order = float(2 * p + 2 if vanishing else 2 * p + 1)
    keep = spec.synth_points > 0
    task = _FiberTask(assembler, g0, eps, tau, spec, spec.time_steps, sobolev_order, keep)
    work = partial(_evolve_at, task)
    rows = pool.map(work, list(points)) if pool is not None else [work(k) for k in points]

    weight = lattice.dual_cell_volume / M**d / (2.0 * math.pi) ** d

    def total(key: str) -> float:
        # fixed k order regardless of worker count
        return math.fsum(r[key] for r in rows) * weight

    duh_size = total("duh_size")
    change = math.sqrt(total("duh_change") / duh_size) if duh_size > 0 else 0.0
    if change > config.DUHAMEL_TOL:
        raise QuadratureUnconverged(
            f"Duhamel term changed by {100 * change:.2f}% when doubling {spec.time_steps} time steps"
        )

    t_grid = np.linspace(0.0, abs(tau), 4 * spec.time_steps + 1)
    f_abs = np.abs(forcing_profile(spec, t_grid))
    forcing_norm = float(trapezoid(f_abs, t_grid)) * math.sqrt(total("psi_hs"))
    sobolev_norm = math.sqrt(total("phi_hs"))
    rate = 2.0 if vanishing else 1.0
    bound = (1.0 + abs(tau)) * eps**rate * (sobolev_norm + forcing_norm)

    result = EvolutionResult(
        tau=tau,
        eps=eps,
        norm_u_eps=math.sqrt(total("u_eps")),
        norm_u_hom=math.sqrt(total("u_hom")),
        norm_phi=math.sqrt(total("phi")),
        error=math.sqrt(total("error")),
        sobolev_order=sobolev_order,
        sobolev_norm=sobolev_norm,
        forcing_norm=forcing_norm,
        predicted_bound=bound,
        k_points=int(points.shape[0]),
        resolution=M,
        time_steps=spec.time_steps,
        duhamel_change=change,
    )
    if keep:
        result.field = synthesize(assembler, points, rows, eps, weight, spec)

    logger.info("[Evolve] eps=%.5g tau=%g: |u_eps - u_0| = %.4e (|phi| = %.4e, %s fibers, M=%s)",
                eps, tau, result.error, result.norm_phi, result.k_points, M)
    return result


def synthesize(assembler: FiberAssembler, points: np.ndarray, rows: list[dict], eps: float,
               weight: float, spec: EvolutionSpec) -> EvolutionField:
    """u(x) = eps^(-d/2) v(x/eps) along the first basis direction"""
    lattice = assembler.lattice
    d, n = lattice.dimension, assembler.symbol.n
    axis = lattice.basis[0] / np.linalg.norm(lattice.basis[0])
    s = np.linspace(-spec.synth_extent, spec.synth_extent, spec.synth_points)
    x = s[:, None] * axis[None, :]
    y = x / eps

    u = np.zeros((x.shape[0], n), dtype=complex)
    u0 = np.zeros_like(u)
    # v(y) = (2 pi)^-d sum_k w_k sum_b v_k(b) e^{i(b+k)y}
    for k, row in zip(points, rows):
        phase = np.exp(1j * y @ (assembler.freq.vectors + k).T)  # (P, N)
        u += phase @ row["v"].reshape(-1, n)
        u0 += phase @ row["v0"].reshape(-1, n)
    scale = weight * eps ** (-d / 2.0)
    return EvolutionField(s, u * scale, u0 * scale)


def run_evolution_ladder(assembler: FiberAssembler, g0: np.ndarray, spec: EvolutionSpec,
                         base_resolution: int, vanishing: bool, pool=None) -> EvolutionLadder:
    ladder = EvolutionLadder()
    for eps in spec.eps_list:
        ladder.results.append(solve_cauchy(assembler, g0, spec, float(eps), base_resolution, vanishing, pool))
    if len(ladder.results) >= 2:
        ladder.fit = fit_loglog_slope([r.eps for r in ladder.results], [r.error for r in ladder.results])
    return ladder
