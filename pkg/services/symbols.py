# -*- coding: utf-8 -*-
"""
Symbols and coefficients

- SymbolB: homogeneous matrix symbol b(xi) = sum_{|beta|=p} b_beta xi^beta
- PeriodicCoefficient: g(x) as a finite Fourier series of m x m matrices,
  keyed by integer dual coordinates
- Galerkin multiplication matrices of g on plane-wave frequency sets
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

import config
from services.errors import NotPositiveDefinite, RankDeficientSymbol
from services.lattice_geometry import FrequencySet, Lattice, sample_directions

logger = logging.getLogger(__name__)


# ========================================
# MULTI-INDICES / SYMBOL
# ========================================
@dataclass(frozen=True)
class MultiIndex:
    exponents: tuple[int, ...]

    @property
    def order(self) -> int:
        return sum(self.exponents)

    def __le__(self, other: "MultiIndex") -> bool:
        return all(a <= b for a, b in zip(self.exponents, other.exponents))

    def binomial(self, gamma: "MultiIndex") -> int:
        """C_beta^gamma = prod_i C(beta_i, gamma_i)"""
        return math.prod(math.comb(b, g) for b, g in zip(self.exponents, gamma.exponents))

    def sub_indices(self, order: int):
        """All gamma <= beta with |gamma| = order"""
        ranges = [range(b + 1) for b in self.exponents]
        for combo in np.ndindex(*[len(r) for r in ranges]):
            if sum(combo) == order:
                yield MultiIndex(tuple(int(c) for c in combo))


def _monomial(xi: np.ndarray, exponents) -> np.ndarray:
    out = np.ones(xi.shape[:-1])
    for i, e in enumerate(exponents):
        if e:
            out = out * xi[..., i] ** e
    return out


@dataclass(frozen=True)
class SymbolB:
    order: int
    terms: tuple  # ((MultiIndex, complex m x n matrix), ...)
    m: int
    n: int
    dimension: int
    alpha0: float = 0.0
    alpha1: float = 0.0


def eval_symbol(symbol: SymbolB, xi) -> np.ndarray:
    """b(xi) for xi of shape (d,) or (N, d)"""
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    out = np.zeros((x.shape[0], symbol.m, symbol.n), dtype=complex)
    for beta, coef in symbol.terms:
        out += _monomial(x, beta.exponents)[:, None, None] * coef
    return out[0] if single else out


def symbol_component(symbol: SymbolB, j: int, theta, xi) -> np.ndarray:
    """
    X_j-part of b(xi + t*theta): the coefficient of t^j,
    sum_beta b_beta sum_{gamma <= beta, |gamma| = p - j} C_beta^gamma theta^(beta-gamma) xi^gamma.
    j = 1 gives the first-order symbol B_1(theta; xi).
    """
    th = np.asarray(theta, dtype=float)
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    out = np.zeros((x.shape[0], symbol.m, symbol.n), dtype=complex)
    for beta, coef in symbol.terms:
        for gamma in beta.sub_indices(symbol.order - j):
            rest = tuple(b - g for b, g in zip(beta.exponents, gamma.exponents))
            weight = beta.binomial(gamma) * float(_monomial(th, rest))
            if weight:
                out += weight * _monomial(x, gamma.exponents)[:, None, None] * coef
    return out[0] if single else out


def ellipticity_constants(symbol: SymbolB, samples: int) -> tuple[float, float]:
    d = symbol.dimension
    if samples < 16 * d:
        raise ValueError(f"need at least {16 * d} direction samples, got {samples}")
    thetas = sample_directions(d, samples)
    bt = eval_symbol(symbol, thetas)
    gram = np.einsum("kai,kaj->kij", bt.conj(), bt)
    eig = np.linalg.eigvalsh(gram)
    alpha0, alpha1 = float(eig.min()), float(eig.max())
    if alpha1 <= 0.0 or alpha0 <= 1e-10 * alpha1:
        raise RankDeficientSymbol(f"b(theta) loses rank: alpha0={alpha0:.3e}, alpha1={alpha1:.3e}")
    return alpha0, alpha1


def build_symbol(order: int, terms, dimension: int, samples: int | None = None) -> SymbolB:
    if order < 2:
        raise ValueError(f"symbol order must be >= 2, got {order}")
    if not terms:
        raise RankDeficientSymbol("symbol has no terms")

    parsed = []
    shape = None
    for beta, coef in terms:
        mi = beta if isinstance(beta, MultiIndex) else MultiIndex(tuple(int(b) for b in beta))
        if len(mi.exponents) != dimension or mi.order != order:
            raise ValueError(f"multi-index {mi.exponents} is not of order {order} in dimension {dimension}")
        mat = np.atleast_2d(np.asarray(coef, dtype=complex))
        if shape is not None and mat.shape != shape:
            raise ValueError(f"symbol term shapes differ: {mat.shape} vs {shape}")
        shape = mat.shape
        parsed.append((mi, mat))

    m, n = shape
    if m < n:
        raise ValueError(f"symbol must have m >= n, got m={m}, n={n}")
    parsed.sort(key=lambda t: t[0].exponents)

    symbol = SymbolB(order, tuple(parsed), m, n, dimension)
    alpha0, alpha1 = ellipticity_constants(symbol, samples or max(16 * dimension, 256))
    return replace(symbol, alpha0=alpha0, alpha1=alpha1)


# ========================================
# PERIODIC COEFFICIENT
# ========================================
@dataclass(frozen=True)
class PositivityCertificate:
    min_eigenvalue: float
    max_eigenvalue: float
    grid_resolution: int

    @property
    def norm_g(self) -> float:
        return self.max_eigenvalue

    @property
    def norm_g_inv(self) -> float:
        return 1.0 / self.min_eigenvalue


@dataclass(frozen=True)
class PeriodicCoefficient:
    lattice: Lattice
    coords: np.ndarray  # (T, d) int
    matrices: np.ndarray  # (T, m, m)
    certificate: PositivityCertificate | None = None
    _lookup: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def m(self) -> int:
        return int(self.matrices.shape[1])

    def fourier(self, coord) -> np.ndarray:
        pos = self._lookup.get(tuple(int(c) for c in coord))
        if pos is None:
            return np.zeros((self.m, self.m), dtype=complex)
        return self.matrices[pos]

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.linalg.norm(self.coords @ self.lattice.dual, axis=1)))

    @property
    def is_constant(self) -> bool:
        nz = np.any(self.coords != 0, axis=1)
        return not np.any(np.abs(self.matrices[nz]) > 0.0)

    def on_lattice(self, lattice: Lattice) -> "PeriodicCoefficient":
        """Same integer-keyed data on another lattice, i.e. x -> g(x/eps) for eps*Gamma"""
        return replace(self, lattice=lattice, certificate=self.certificate)


def make_coefficient(lattice: Lattice, terms, complete_hermitian: bool = False,
                     grid_resolution: int | None = None) -> PeriodicCoefficient:
    """terms: iterable of (integer dual coordinates, m x m matrix)"""
    table: dict[tuple, np.ndarray] = {}
    for coord, mat in terms:
        key = tuple(int(c) for c in coord)
        if len(key) != lattice.dimension:
            raise ValueError(f"frequency {key} does not match dimension {lattice.dimension}")
        arr = np.atleast_2d(np.asarray(mat, dtype=complex))
        table[key] = table.get(key, 0) + arr

    if not table:
        raise ValueError("coefficient has no Fourier terms")
    shapes = {a.shape for a in table.values()}
    if len(shapes) != 1 or next(iter(shapes))[0] != next(iter(shapes))[1]:
        raise ValueError(f"coefficient terms must be square and equally sized, got {shapes}")

    if complete_hermitian:
        for key in list(table):
            partner = tuple(-c for c in key)
            if partner not in table:
                table[partner] = table[key].conj().T

    scale = max(float(np.max(np.abs(a))) for a in table.values()) or 1.0
    for key, mat in table.items():
        partner = table.get(tuple(-c for c in key))
        if partner is None or np.max(np.abs(partner - mat.conj().T)) > 1e-14 * scale:
            raise ValueError(f"coefficient is not Hermitian: g^(-c) != g^(c)* at c={key}")

    keys = sorted(table)
    coords = np.array(keys, dtype=int).reshape(len(keys), lattice.dimension)
    matrices = np.stack([table[k] for k in keys])
    lookup = {k: i for i, k in enumerate(keys)}
    coef = PeriodicCoefficient(lattice, coords, matrices, None, lookup)

    if grid_resolution is not None:
        cert = validate_coefficient(coef, grid_resolution)
        coef = replace(coef, certificate=cert)
    return coef


def eval_coefficient(coef: PeriodicCoefficient, x) -> np.ndarray:
    """g(x) for x of shape (d,) or (N, d); Hermitian by construction"""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    freqs = coef.coords @ coef.lattice.dual
    phases = np.exp(1j * pts @ freqs.T)  # (N, T)
    out = np.einsum("nt,tab->nab", phases, coef.matrices)
    out = 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
    return out[0] if single else out


def coefficient_grid(coef: PeriodicCoefficient, resolution: int) -> np.ndarray:
    """g on the uniform grid {j/res} of fractional cell coordinates"""
    d = coef.lattice.dimension
    frac = np.arange(resolution) / resolution
    mesh = np.meshgrid(*([frac] * d), indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=1)
    return eval_coefficient(coef, u @ coef.lattice.basis)


def validate_coefficient(coef: PeriodicCoefficient, grid_resolution: int) -> PositivityCertificate:
    if grid_resolution < 8:
        raise ValueError(f"validation grid needs >= 8 points per dimension, got {grid_resolution}")
    eig = np.linalg.eigvalsh(coefficient_grid(coef, grid_resolution))
    lo, hi = float(eig.min()), float(eig.max())
    if lo <= 0.0:
        raise NotPositiveDefinite(f"g(x) has eigenvalue {lo:.6g} <= 0 on the validation grid")
    logger.debug("[Coefficient] eigenvalues in [%.6g, %.6g] (grid %s)", lo, hi, grid_resolution)
    return PositivityCertificate(lo, hi, grid_resolution)


def reuss_mean(coef: PeriodicCoefficient, resolution: int | None = None) -> np.ndarray:
    """(mean of g^-1)^-1 by pointwise inversion on a grid"""
    res = max(resolution or config.REUSS_RESOLUTION, 64)
    inv = np.linalg.inv(coefficient_grid(coef, res))
    mean = inv.mean(axis=0)
    out = np.linalg.inv(0.5 * (mean + mean.conj().T))
    return 0.5 * (out + out.conj().T)


# ========================================
# GALERKIN MATRICES
# ========================================
def multiplication_blocks(coef: PeriodicCoefficient, rows: FrequencySet,
                          cols: FrequencySet | None = None) -> np.ndarray:
    """Blocks g^(c_i - c_j), shape (R, C, m, m)"""
    cols = rows if cols is None else cols
    diff = rows.coords[:, None, :] - cols.coords[None, :, :]
    out = np.zeros((len(rows), len(cols), coef.m, coef.m), dtype=complex)
    for coord, mat in zip(coef.coords, coef.matrices):
        mask = np.all(diff == coord, axis=-1)
        out[mask] = mat
    return out


def flatten_blocks(blocks: np.ndarray) -> np.ndarray:
    r, c, a, b = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(r * a, c * b)
