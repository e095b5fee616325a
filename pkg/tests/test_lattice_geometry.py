"""Tests for dual lattices, plane-wave truncation and Brillouin sampling."""

import math

import numpy as np
import pytest

from services.errors import DegenerateBasis, EmptyTruncation
from services.lattice_geometry import (
    build_lattice,
    in_brillouin_zone,
    radial_refinement,
    sample_brillouin,
    sample_directions,
    scaled_lattice,
    to_brillouin_zone,
    truncate,
)

TWO_PI = 2.0 * math.pi


def test_unit_line(unit_line):
    np.testing.assert_allclose(unit_line.dual, [[TWO_PI]])
    assert unit_line.cell_volume == pytest.approx(1.0)
    assert unit_line.dual_cell_volume == pytest.approx(TWO_PI)
    assert unit_line.inradius == pytest.approx(math.pi)


def test_square_lattice(square):
    np.testing.assert_allclose(square.dual, TWO_PI * np.eye(2), atol=1e-14)
    assert square.inradius == pytest.approx(math.pi)


def test_hexagonal_volumes():
    lat = build_lattice([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    assert lat.cell_volume == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-14)
    assert lat.cell_volume * lat.dual_cell_volume == pytest.approx(TWO_PI**2, rel=1e-12)


def test_duality_random_bases():
    rng = np.random.default_rng(7)
    for _ in range(100):
        d = int(rng.integers(1, 4))
        basis = np.eye(d) + 0.3 * rng.standard_normal((d, d))
        lat = build_lattice(basis)
        np.testing.assert_allclose(lat.basis @ lat.dual.T, TWO_PI * np.eye(d), atol=1e-10)


def test_degenerate_basis():
    with pytest.raises(DegenerateBasis):
        build_lattice([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(DegenerateBasis):
        build_lattice(np.eye(4))


def test_scaled_lattice(unit_line):
    small = scaled_lattice(unit_line, 0.1)
    np.testing.assert_allclose(small.dual, [[TWO_PI / 0.1]])


def test_truncate_line(unit_line):
    freq = truncate(unit_line, TWO_PI + 0.1)
    np.testing.assert_allclose(freq.vectors[:, 0], [-TWO_PI, 0.0, TWO_PI])
    assert freq.zero_index == 1

    zero = truncate(unit_line, 0.0)
    assert len(zero) == 1
    assert zero.position((0,)) == 0


def test_truncate_square(square):
    freq = truncate(square, TWO_PI * 1.5)
    assert len(freq) == 9
    assert set(map(tuple, freq.coords)) == {(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)}


def test_truncate_order_and_negation(square):
    freq = truncate(square, 3.3 * TWO_PI)
    keys = [tuple(c) for c in freq.coords]
    assert keys == sorted(keys)
    for c in keys:
        assert freq.position(tuple(-x for x in c)) is not None


def test_negative_cutoff(unit_line):
    with pytest.raises(EmptyTruncation):
        truncate(unit_line, -1.0)


def test_quadrature_weights(unit_line, square):
    grid = sample_brillouin(unit_line, 4, "quadrature")
    assert len(grid) == 4
    np.testing.assert_allclose(grid.weights, math.pi / 2)

    grid = sample_brillouin(square, 3, "quadrature")
    assert len(grid) == 9
    assert grid.weights.sum() == pytest.approx(TWO_PI**2, rel=1e-10)


def test_sup_grid_avoids_origin(unit_line, square):
    single = sample_brillouin(unit_line, 1, "sup-grid")
    assert len(single) == 1
    assert single.avoids_origin
    assert abs(single.points[0, 0]) > 0

    for res in (1, 2, 3, 5, 8):
        assert sample_brillouin(square, res, "sup-grid").avoids_origin


def test_samples_in_brillouin_zone():
    lat = build_lattice([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    for mode in ("sup-grid", "quadrature"):
        grid = sample_brillouin(lat, 9, mode)
        assert np.all(in_brillouin_zone(lat, grid.points))


def test_fold_into_zone(unit_line):
    folded = to_brillouin_zone(unit_line, [[TWO_PI + 0.3], [-5.0]])
    np.testing.assert_allclose(folded[:, 0], [0.3, TWO_PI - 5.0], atol=1e-14)


def test_bad_sampling_arguments(unit_line):
    with pytest.raises(ValueError):
        sample_brillouin(unit_line, 0)
    with pytest.raises(ValueError):
        sample_brillouin(unit_line, 4, "voronoi")


@pytest.mark.parametrize("d,count", [(1, 64), (2, 64), (3, 50)])
def test_directions_are_unit(d, count):
    dirs = sample_directions(d, count)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-14)


def test_radial_refinement(unit_line):
    pts = radial_refinement(unit_line, 0.01, sample_directions(1, 2), per_octave=4)
    radii = np.abs(pts[:, 0])
    assert radii.min() == pytest.approx(0.0025)
    assert radii.max() <= unit_line.inradius
    assert radial_refinement(unit_line, 100.0, sample_directions(1, 2), 4).shape == (0, 1)
