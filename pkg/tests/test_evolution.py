"""Tests for the Cauchy solver: unitarity, constant-coefficient exactness and Duhamel quadrature."""

import math
from dataclasses import replace

import numpy as np
import pytest

from services.errors import QuadratureUnconverged, SupportOverflow
from services.evolution import (
    _evolve_at,
    _FiberTask,
    active_fibers,
    brillouin_resolution,
    data_profile,
    duhamel_integral,
    forcing_profile,
    run_evolution_ladder,
    solve_cauchy,
)
from services.lattice_geometry import in_brillouin_zone
from utils.config_loader import EvolutionSpec


def _spec(problem, **changes):
    return replace(problem.cfg.evolution, **changes)


def _closed_form(lam, tau):
    """int_0^tau e^(-is) e^(-i(tau-s) lam) ds"""
    lam = np.asarray(lam, dtype=float)
    out = np.empty(lam.shape, dtype=complex)
    resonant = np.isclose(lam, 1.0)
    other = ~resonant
    out[resonant] = tau * np.exp(-1j * tau)
    w = 1.0 - lam[other]
    out[other] = np.exp(-1j * tau * lam[other]) * (1.0 - np.exp(-1j * tau * w)) / (1j * w)
    return out


def test_duhamel_matches_closed_form():
    lam = np.array([0.0, 0.5, 1.0, 3.0, 40.0, 1e4])
    tau = 1.7
    f = forcing_profile(EvolutionSpec(forcing="exp"), np.linspace(0.0, tau, 2049))
    np.testing.assert_allclose(duhamel_integral(lam, f, tau), _closed_form(lam, tau), atol=1e-6)


def test_profiles_are_band_limited(scalar_problem):
    spec = _spec(scalar_problem, xi_max=2.0)
    xi = np.linspace(-4.0, 4.0, 81)[:, None]
    values = data_profile(spec, xi, 1)[:, 0]
    assert np.all(values[np.abs(xi[:, 0]) > 2.0] == 0.0)
    assert values[40] == pytest.approx(1.0)
    rough = data_profile(replace(spec, profile="rough"), xi, 2)
    np.testing.assert_allclose(rough[:, 0], rough[:, 1])


def test_active_fibers(scalar_problem):
    lat = scalar_problem.lattice
    pts = active_fibers(lat, 0.1, 3.0, 400)
    assert np.all(np.abs(pts[:, 0]) <= 0.3 + 1e-12)
    assert np.all(in_brillouin_zone(lat, pts))
    assert len(np.unique(np.round(pts[:, 0], 12))) == len(pts)
    assert brillouin_resolution(lat, 0.1, scalar_problem.cfg.evolution, 16) >= 16


def test_unitary_without_forcing(scalar_problem):
    p = scalar_problem
    spec = _spec(p, forcing="zero")
    result = solve_cauchy(p.assembler, p.eff.g0, spec, 0.1, p.cfg.brillouin.resolution, True)
    assert result.norm_u_eps == pytest.approx(result.norm_phi, rel=1e-8)
    assert result.norm_u_hom == pytest.approx(result.norm_phi, rel=1e-8)
    assert result.predicted_bound > 0


def test_norm_constant_in_time(generic_problem):
    p = generic_problem
    spec = _spec(p, forcing="zero")
    norms = [
        solve_cauchy(p.assembler, p.eff.g0, spec, 0.2, p.cfg.brillouin.resolution, False, tau=tau).norm_u_eps
        for tau in np.linspace(0.25, 2.0, 8)
    ]
    np.testing.assert_allclose(norms, norms[0], rtol=1e-8)


def test_constant_coefficient_exact(constant_problem):
    p = constant_problem
    for forcing in ("zero", "exp"):
        spec = _spec(p, forcing=forcing)
        result = solve_cauchy(p.assembler, p.eff.g0, spec, 0.1, p.cfg.brillouin.resolution, True)
        assert result.error < 1e-9
    assert result.field is not None
    np.testing.assert_allclose(result.field.u_eps, result.field.u_hom, atol=1e-9)


def test_forced_mode_matches_ode(constant_problem):
    p = constant_problem
    eps, tau = 0.1, 1.0
    spec = _spec(p, forcing="exp", time_steps=1024)
    k = active_fibers(p.lattice, eps, spec.xi_max, 64)[0]
    task = _FiberTask(p.assembler, p.eff.g0, eps, tau, spec, spec.time_steps, 0.0, True)
    row = _evolve_at(task, k)

    xi = (p.assembler.freq.vectors[:, 0] + k[0]) / eps
    c = eps ** -0.5 * data_profile(spec, xi[:, None], 1)[:, 0]
    mu = 2.0 * xi**4
    expected = np.exp(-1j * tau * mu) * c - 1j * spec.forcing_scale * c * _closed_form(mu, tau)
    np.testing.assert_allclose(row["v0"], expected, atol=1e-6 * np.abs(c).max())
    np.testing.assert_allclose(row["v"], expected, atol=1e-6 * np.abs(c).max())


def test_support_overflow(scalar_problem):
    p = scalar_problem
    spec = _spec(p, xi_max=1e4)
    with pytest.raises(SupportOverflow):
        solve_cauchy(p.assembler, p.eff.g0, spec, 0.1, p.cfg.brillouin.resolution, True)


def test_coarse_time_grid_rejected(scalar_problem):
    p = scalar_problem
    spec = _spec(p, forcing="cos", time_steps=1)
    with pytest.raises(QuadratureUnconverged):
        solve_cauchy(p.assembler, p.eff.g0, spec, 0.1, p.cfg.brillouin.resolution, True, tau=4.0)


@pytest.mark.slow
def test_scalar_error_exponent(scalar_problem):
    p = scalar_problem
    ladder = run_evolution_ladder(p.assembler, p.fiber_eff.g0, p.cfg.evolution, p.cfg.brillouin.resolution, True)
    assert len(ladder.results) == 4
    assert ladder.fit.slope >= 1.8
    for r in ladder.results:
        assert r.norm_u_eps == pytest.approx(r.norm_phi, rel=1e-8)
        assert math.isfinite(r.relative_error)


@pytest.mark.slow
def test_rough_profile_error_exponent(scalar_problem):
    p = scalar_problem
    spec = _spec(p, profile="rough", xi_max=2.0, eps_list=(0.05, 0.025, 0.0125))
    ladder = run_evolution_ladder(p.assembler, p.fiber_eff.g0, spec, p.cfg.brillouin.resolution, True)
    errors = [r.error for r in ladder.results]
    assert errors[0] > errors[1] > errors[2] > 0.0
    assert not ladder.fit.exact
    assert ladder.fit.slope >= 1.7
    smooth = solve_cauchy(p.assembler, p.fiber_eff.g0, _spec(p, xi_max=2.0), 0.05, p.cfg.brillouin.resolution, True)
    # the rough profile carries more mass near the edge of the band
    assert ladder.results[0].sobolev_norm / ladder.results[0].norm_phi > smooth.sobolev_norm / smooth.norm_phi
