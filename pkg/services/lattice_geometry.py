# -*- coding: utf-8 -*-
"""
Lattice geometry - primal/dual lattice pair, plane-wave truncation and
Brillouin zone sampling.

Dual vectors are always carried together with their integer coordinates
(b = n @ dual). Matrix layouts and coefficient lookups key on the integer
coordinates, so the same coefficient data can be reused on a scaled lattice.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from services.errors import DegenerateBasis, EmptyTruncation

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Lattice:
    basis: np.ndarray  # rows a_i
    dual: np.ndarray  # rows b_i, <b_i, a_j> = 2pi delta_ij
    cell_volume: float
    dual_cell_volume: float
    inradius: float

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    @property
    def longest_dual(self) -> float:
        return float(np.max(np.linalg.norm(self.dual, axis=1)))


@dataclass(frozen=True)
class FrequencySet:
    cutoff: float
    coords: np.ndarray  # (N, d) integer dual coordinates, lexicographic
    vectors: np.ndarray  # (N, d) = coords @ dual
    index: dict = field(compare=False, repr=False)

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    @property
    def zero_index(self) -> int:
        return self.index[(0,) * self.coords.shape[1]]

    def position(self, coord) -> int | None:
        return self.index.get(tuple(int(c) for c in coord))


@dataclass(frozen=True)
class BrillouinGrid:
    points: np.ndarray  # (M, d)
    weights: np.ndarray | None
    avoids_origin: bool
    mode: str

    def __len__(self) -> int:
        return int(self.points.shape[0])


def _integer_box(lattice: Lattice, radius: float) -> np.ndarray:
    # n_i = <xi, a_i> / 2pi, so |n_i| <= radius * |a_i| / 2pi
    bounds = np.floor(radius * np.linalg.norm(lattice.basis, axis=1) / TWO_PI + 1e-9).astype(int)
    ranges = [range(-int(m), int(m) + 1) for m in bounds]
    return np.array(list(itertools.product(*ranges)), dtype=int).reshape(-1, lattice.dimension)


def dual_vectors_within(lattice: Lattice, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """All dual vectors with |b| <= radius, lexicographic on integer coordinates"""
    box = _integer_box(lattice, radius)
    vecs = box @ lattice.dual
    tol = 1e-12 * max(1.0, radius)
    keep = np.linalg.norm(vecs, axis=1) <= radius + tol
    # itertools.product already yields lexicographic order
    return box[keep], vecs[keep]


def build_lattice(primal_basis) -> Lattice:
    a = np.atleast_2d(np.asarray(primal_basis, dtype=float))
    d = a.shape[0]
    if a.shape != (d, d) or not (1 <= d <= 3):
        raise DegenerateBasis(f"basis must be d x d with 1 <= d <= 3, got shape {a.shape}")

    scale = float(np.max(np.linalg.norm(a, axis=1)))
    det = abs(float(np.linalg.det(a)))
    if scale == 0.0 or det < 1e-12 * scale**d:
        raise DegenerateBasis(f"basis vectors are linearly dependent (|det| = {det:.3e})")

    dual = TWO_PI * np.linalg.inv(a).T
    dual_volume = abs(float(np.linalg.det(dual)))

    provisional = Lattice(a, dual, det, dual_volume, inradius=0.0)
    search = 3.0 * provisional.longest_dual
    coords, vecs = dual_vectors_within(provisional, search)
    norms = np.linalg.norm(vecs, axis=1)
    shortest = float(np.min(norms[np.any(coords != 0, axis=1)]))

    lattice = Lattice(a, dual, det, dual_volume, inradius=0.5 * shortest)
    logger.debug("[Lattice] d=%s |cell|=%.6g r0=%.6g", d, det, lattice.inradius)
    return lattice


def scaled_lattice(lattice: Lattice, eps: float) -> Lattice:
    """The lattice eps*Gamma (dual scales by 1/eps)"""
    return build_lattice(eps * lattice.basis)


def truncate(lattice: Lattice, cutoff: float) -> FrequencySet:
    if cutoff < 0:
        raise EmptyTruncation(f"cutoff must be >= 0, got {cutoff}")
    coords, vecs = dual_vectors_within(lattice, float(cutoff))
    index = {tuple(int(c) for c in row): i for i, row in enumerate(coords)}
    return FrequencySet(float(cutoff), coords, vecs, index)


def truncate_shells(lattice: Lattice, shells: float) -> FrequencySet:
    """Truncation with the cutoff given in units of the longest dual basis vector"""
    return truncate(lattice, shells * lattice.longest_dual * (1.0 + 1e-12))


def to_brillouin_zone(lattice: Lattice, points: np.ndarray) -> np.ndarray:
    """Translate each point by the dual vector nearest to it"""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    reach = float(np.max(np.linalg.norm(pts, axis=1))) + lattice.longest_dual
    _, cands = dual_vectors_within(lattice, 2.0 * reach)
    dist = np.linalg.norm(pts[:, None, :] - cands[None, :, :], axis=-1)
    nearest = np.argmin(dist, axis=1)
    return pts - cands[nearest]


def in_brillouin_zone(lattice: Lattice, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coords, cands = dual_vectors_within(lattice, 4.0 * 3.0 * lattice.longest_dual)
    cands = cands[np.any(coords != 0, axis=1)]
    own = np.linalg.norm(pts, axis=1)
    other = np.linalg.norm(pts[:, None, :] - cands[None, :, :], axis=-1)
    return np.all(own[:, None] <= other + tol, axis=1)


def sample_brillouin(lattice: Lattice, resolution: int, mode: str = "sup-grid") -> BrillouinGrid:
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if mode not in ("sup-grid", "quadrature"):
        raise ValueError(f"unknown sampling mode: {mode}")

    d = lattice.dimension
    frac = (np.arange(resolution) + 0.5) / resolution - 0.5
    if mode == "sup-grid" and resolution % 2 == 1:
        # odd grids would hit k = 0
        frac = frac + 0.25 / resolution

    mesh = np.meshgrid(*([frac] * d), indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=1)
    points = to_brillouin_zone(lattice, u @ lattice.dual)

    weights = None
    if mode == "quadrature":
        weights = np.full(points.shape[0], lattice.dual_cell_volume / resolution**d)

    avoids = bool(np.all(np.linalg.norm(points, axis=1) > 1e-14))
    return BrillouinGrid(points, weights, avoids, mode)


def sample_directions(d: int, count: int) -> np.ndarray:
    """Deterministic unit directions on S^{d-1}"""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        phi = TWO_PI * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(phi), np.sin(phi)], axis=1)
    # Fibonacci sphere
    j = np.arange(count) + 0.5
    z = 1.0 - 2.0 * j / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = math.pi * (1.0 + math.sqrt(5.0)) * j
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def radial_refinement(lattice: Lattice, eps: float, directions: np.ndarray, per_octave: int) -> np.ndarray:
    """Points t*theta with t = eps/4 * 2^(j/per_octave) up to the inradius"""
    ratio = 2.0 ** (1.0 / per_octave)
    t_min = 0.25 * eps
    if t_min >= lattice.inradius:
        return np.zeros((0, lattice.dimension))
    count = int(math.floor(math.log(lattice.inradius / t_min) / math.log(ratio))) + 1
    radii = t_min * ratio ** np.arange(count)
    radii = radii[radii <= lattice.inradius]
    return (radii[:, None, None] * directions[None, :, :]).reshape(-1, lattice.dimension)
