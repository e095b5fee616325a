import numpy as np
import pytest

from services.rate_fit import fit_loglog_slope


def test_exact_power_law():
    x = 0.25 / 2.0 ** np.arange(6)
    fit = fit_loglog_slope(x, 3.0 * x**2)
    assert fit.slope == pytest.approx(2.0)
    assert fit.residual < 1e-12
    assert not fit.exact


def test_last_rungs_only():
    x = 0.25 / 2.0 ** np.arange(6)
    y = np.where(x > 0.05, 1.0, x)
    fit = fit_loglog_slope(x, y, rungs=3)
    assert fit.rungs == 3
    assert fit.slope == pytest.approx(1.0)


def test_below_floor_is_exact():
    fit = fit_loglog_slope([0.1, 0.05, 0.025], [1e-14, 0.0, 3e-15])
    assert fit.exact


def test_needs_two_points():
    with pytest.raises(ValueError):
        fit_loglog_slope([0.1], [0.2])


def test_roundoff_points_are_dropped():
    x = 0.1 / 2.0 ** np.arange(6)
    y = x**6
    noise = 1e-8 * x**2
    y_noisy = np.where(y > noise, y, 0.5 * noise)
    fit = fit_loglog_slope(x, y_noisy, noise=noise)
    assert fit.rungs == 4
    assert fit.slope == pytest.approx(6.0)


def test_too_few_points_above_noise_is_exact():
    x = np.array([0.1, 0.05, 0.025])
    fit = fit_loglog_slope(x, [1e-3, 1e-9, 1e-10], floor=0.0, noise=1e-8)
    assert fit.exact
    assert fit.rungs == 1
