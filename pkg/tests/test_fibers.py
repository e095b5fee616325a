"""Tests for fiber operators, their exponentials and the smoothed error norm."""

import math

import numpy as np
import pytest

from services.fibers import (
    FiberAssembler,
    assemble_effective_fiber,
    fiber_exponential,
    projection_removal_bound,
    smoothed_error_norm,
    smoothing_operator,
    sup_error_over_brillouin,
    sup_error_over_points,
)
from services.lattice_geometry import sample_brillouin, truncate_shells
from services.sweep import WorkerPool

from conftest import SQRT3_2

TWO_PI = 2.0 * math.pi


def test_constant_fiber_spectrum(constant_problem):
    asm = constant_problem.assembler
    k = np.array([0.7])
    vals, vecs = asm.fiber(k).spectrum
    expected = np.sort(2.0 * (asm.freq.vectors[:, 0] + 0.7) ** 4)
    np.testing.assert_allclose(vals, expected, rtol=1e-12)
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(vals.size), atol=1e-12)


def test_constant_effective_fiber_equals_fiber(constant_problem):
    asm = constant_problem.assembler
    k = [-1.1]
    np.testing.assert_allclose(asm.fiber(k).matrix, asm.effective_fiber(constant_problem.eff, k).matrix,
                               rtol=1e-13, atol=1e-9)


def test_spectrum_matches_matrix(generic_problem):
    fiber = generic_problem.assembler.fiber([0.4, -0.9])
    vals, vecs = fiber.spectrum
    np.testing.assert_allclose(fiber.matrix @ vecs, vecs * vals, atol=1e-8 * vals.max())


def test_gap_at_origin(scalar_problem, generic_problem):
    for p in (scalar_problem, generic_problem):
        second = p.assembler.verify_gap(p.window)
        assert second >= 0.9 * p.window.d0_bound
        vals, _ = p.assembler.fiber(np.zeros(p.lattice.dimension)).spectrum
        assert np.count_nonzero(vals <= p.window.delta) == p.symbol.n


def test_fiber_truncation_convergence(scalar_problem):
    p = scalar_problem
    k = [0.1 * TWO_PI]
    coarse = FiberAssembler(p.lattice, p.symbol, p.coefficient, truncate_shells(p.lattice, 8))
    fine = FiberAssembler(p.lattice, p.symbol, p.coefficient, truncate_shells(p.lattice, 16))
    lo = coarse.fiber(k).spectrum[0][:3]
    hi = fine.fiber(k).spectrum[0][:3]
    np.testing.assert_allclose(lo, hi, rtol=1e-8)


def test_effective_zero_block_is_germ(scalar_problem):
    p = scalar_problem
    k = np.array([0.05])
    eff = assemble_effective_fiber(p.eff, p.symbol, p.fiber_freq, k)
    z = p.fiber_freq.zero_index
    assert eff.blocks[z, 0, 0].real == pytest.approx(0.05**4 * SQRT3_2, rel=1e-6)
    np.testing.assert_allclose(eff.blocks[:, 0, 0].real, (p.fiber_freq.vectors[:, 0] + 0.05) ** 4 * p.eff.g0[0, 0].real,
                               rtol=1e-12)


def test_exponential_identity_and_unitarity(generic_problem):
    fiber = generic_problem.assembler.fiber([0.3, 0.2])
    size = fiber.spectrum[0].size
    np.testing.assert_array_equal(fiber_exponential(fiber, 0.0), np.eye(size))

    u = fiber_exponential(fiber, 0.731)
    assert np.linalg.norm(u.conj().T @ u - np.eye(size)) < 1e-10


def test_exponential_group_law(scalar_problem):
    rng = np.random.default_rng(11)
    asm = scalar_problem.assembler
    fiber = asm.fiber([0.9])
    eff = asm.effective_fiber(scalar_problem.eff, [0.9])
    for _ in range(5):
        t1, t2 = rng.uniform(-0.02, 0.02, 2)
        for f in (fiber, eff):
            lhs = fiber_exponential(f, t1) @ fiber_exponential(f, t2)
            assert np.linalg.norm(lhs - fiber_exponential(f, t1 + t2)) < 1e-9


def test_constant_exponential_is_phase(constant_problem):
    asm = constant_problem.assembler
    fiber = asm.fiber([0.2])
    phases = np.exp(-1j * 0.01 * 2.0 * (asm.freq.vectors[:, 0] + 0.2) ** 4)
    np.testing.assert_allclose(fiber_exponential(fiber, 0.01), np.diag(phases), atol=1e-10)


def test_smoothing_entries(scalar_problem):
    op = smoothing_operator(scalar_problem.fiber_freq, [0.0], 0.1, 2.0, 1)
    z = scalar_problem.fiber_freq.zero_index
    assert op.diagonal[z] == pytest.approx(1.0)
    assert np.all(op.diagonal <= 1.0)
    with pytest.raises(ValueError):
        smoothing_operator(scalar_problem.fiber_freq, [0.0], 0.0, 2.0, 1)


def test_projection_removal_bound(generic_problem):
    freq = generic_problem.fiber_freq
    r0 = generic_problem.lattice.inradius
    for k in ([0.0, 0.0], [0.3 * r0, -0.5 * r0], [r0, 0.0]):
        for eps in (0.2, 0.05):
            bound = projection_removal_bound(freq, k, eps)
            assert 0.0 < bound <= eps / r0
    # at the origin the nearest nonzero frequency has length 2 r0
    eps = 0.1
    expected = eps / math.sqrt(4.0 * r0**2 + eps**2)
    assert projection_removal_bound(freq, [0.0, 0.0], eps) == pytest.approx(expected)


def test_error_norm_zero_cases(scalar_problem, constant_problem):
    p = scalar_problem
    assert p.assembler.smoothed_error_norm(p.eff, [0.3], 0.0, 0.1, 5.0) == 0.0

    c = constant_problem
    for k, tau, eps in ([0.3], 1.0, 0.1), ([-2.0], 5.0, 0.01), ([1e-3], 1.0, 0.25):
        assert c.assembler.smoothed_error_norm(c.eff, k, tau, eps, 5.0) < 1e-10


def test_error_norm_bounded(generic_problem):
    p = generic_problem
    rng = np.random.default_rng(5)
    for _ in range(5):
        k = rng.uniform(-math.pi, math.pi, 2)
        value = p.assembler.smoothed_error_norm(p.eff, k, 1.0, 0.1, 0.0)
        assert 0.0 <= value <= 2.0 + 1e-12


def test_module_level_norm_matches_assembler(scalar_problem):
    p = scalar_problem
    direct = smoothed_error_norm(p.lattice, p.symbol, p.coefficient, p.eff, p.fiber_freq, [0.2], 1.0, 0.1, 5.0)
    assert direct == pytest.approx(p.assembler.smoothed_error_norm(p.eff, [0.2], 1.0, 0.1, 5.0), rel=1e-10)


def test_sup_dominates_points(scalar_problem):
    p = scalar_problem
    grid = sample_brillouin(p.lattice, 16, "sup-grid")
    sup = sup_error_over_brillouin(p.assembler, p.eff, grid, 1.0, 0.1, 5.0)
    for k in grid.points[:4]:
        assert sup >= p.assembler.smoothed_error_norm(p.eff, k, 1.0, 0.1, 5.0)


def test_sup_deterministic_across_workers(scalar_problem):
    p = scalar_problem
    points = sample_brillouin(p.lattice, 32, "sup-grid").points
    serial, where = sup_error_over_points(p.assembler, p.eff, points, 1.0, 0.05, [5.0, 6.0])
    with WorkerPool(2) as pool:
        parallel, where_p = sup_error_over_points(p.assembler, p.eff, points, 1.0, 0.05, [5.0, 6.0], pool)
    np.testing.assert_array_equal(serial, parallel)
    np.testing.assert_array_equal(where, where_p)


def test_sup_needs_points(scalar_problem):
    with pytest.raises(ValueError):
        sup_error_over_points(scalar_problem.assembler, scalar_problem.eff, np.zeros((0, 1)), 1.0, 0.1, [5.0])
