# test_limits.py

import math

import numpy as np
import pytest
from scipy import integrate

from errors import DomainError
from heavy_decomp import heavy_path
from limits import (fit_power_law, heavy_fragmentation, heavy_path_moment_limit, phi, phi_hypergeometric,
                    root_order_statistic_limit, t_infinity_moment, theta_cdf)
from offspring import make_named
from sampler import make_rng, sample_conditional
from tree_core import contour_process

# Phi(1/2) = (4 / sqrt pi) (1 - asinh(1) / sqrt 2)
PHI_HALF = 4 / math.sqrt(math.pi) * (1 - math.asinh(1.0) / math.sqrt(2.0))


def test_phi_known_values():
    assert phi(0.5) == pytest.approx(PHI_HALF, rel=1e-9)
    assert phi(0.5) == pytest.approx(0.85029, abs=1e-5)
    assert phi(1.0) == pytest.approx(4 / math.sqrt(2 * math.pi), rel=1e-9)
    assert phi(1.5) == pytest.approx(4 / math.sqrt(math.pi), rel=1e-9)


@pytest.mark.parametrize('q', [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 4.0, 7.5])
def test_phi_matches_hypergeometric_form(q):
    assert phi(q) == pytest.approx(phi_hypergeometric(q), rel=1e-8)


def test_phi_is_increasing():
    values = [phi(q) for q in np.linspace(0.25, 5, 12)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_phi_domain():
    with pytest.raises(DomainError):
        phi(0)
    with pytest.raises(DomainError):
        phi_hypergeometric(-1)


def test_t_infinity_moments():
    assert t_infinity_moment(0) == 1.0
    assert t_infinity_moment(1) == pytest.approx(1.17607, abs=1e-5)
    assert t_infinity_moment(2) == pytest.approx(2 / (PHI_HALF * 4 / math.sqrt(2 * math.pi)), rel=1e-9)
    with pytest.raises(DomainError):
        t_infinity_moment(1.5)
    with pytest.raises(DomainError):
        t_infinity_moment(-1)


def test_heavy_path_moment_limit_scales_with_sigma():
    catalan = make_named('catalan')
    binary = make_named('full_binary')
    assert heavy_path_moment_limit(catalan, 1) == pytest.approx(2 * math.sqrt(2) * t_infinity_moment(1))
    assert heavy_path_moment_limit(binary, 2) == pytest.approx(4 * t_infinity_moment(2))


def test_theta_cdf_limits_and_shape():
    assert theta_cdf(0.3) == pytest.approx(0.0, abs=1e-12)
    assert theta_cdf(8.0) == pytest.approx(1.0, abs=1e-12)
    grid = np.linspace(0.2, 6, 300)
    values = theta_cdf(grid)
    assert values.shape == grid.shape
    assert np.all(np.diff(values) >= -1e-12)
    with pytest.raises(DomainError):
        theta_cdf(0.0)


def test_theta_cdf_is_continuous_where_series_switch():
    root_pi = math.sqrt(math.pi)
    assert theta_cdf(root_pi - 1e-9) == pytest.approx(theta_cdf(root_pi), abs=1e-8)


def test_theta_mean_is_root_pi():
    mean, _ = integrate.quad(lambda x: 1.0 - theta_cdf(x), 0.0, 20.0, limit=200)
    assert mean == pytest.approx(math.sqrt(math.pi), rel=1e-6)


def test_fragmentation_of_small_contour(fig1_tree):
    trace = heavy_fragmentation(contour_process(fig1_tree), 1.0)
    assert trace.measures.tolist() == [12.0, 6.0, 2.0]
    assert trace.levels.tolist() == [0.0, 0.5, 1.5]
    assert trace.t_infinity == 2.0
    assert trace.zeta(6) == 0.5
    assert trace.zeta(1) == 2.0


def test_fragmentation_of_tent():
    trace = heavy_fragmentation([0, 1, 2, 3, 2, 1, 0], 1.0, dx=0.5)
    assert trace.measures.tolist() == [3.0, 3.0, 2.0, 1.0]
    assert trace.t_infinity == 3.0


def test_fragmentation_bad_input():
    with pytest.raises(DomainError):
        heavy_fragmentation([1, 0], 1.0)
    with pytest.raises(DomainError):
        heavy_fragmentation([0, -1, 0], 1.0)
    with pytest.raises(DomainError):
        heavy_fragmentation([0, 1, 0], 0.0)


def test_fragmentation_recovers_heavy_path():
    dist = make_named('catalan')
    rng = make_rng(12)
    for _ in range(20):
        tree = sample_conditional(dist, 150, rng)
        profile = heavy_path(tree)
        trace = heavy_fragmentation(contour_process(tree), 1.0)
        assert trace.t_infinity == profile.length
        np.testing.assert_array_equal(trace.measures[1:], 2 * profile.sizes[1:])


def test_fit_power_law_exact_points():
    xs = np.array([10, 100, 1000, 10000], dtype=float)
    fit = fit_power_law(np.column_stack([xs, 3 * xs ** 0.5]))
    assert fit.slope == pytest.approx(0.5)
    assert fit.intercept == pytest.approx(math.log(3))
    assert fit.r_squared == pytest.approx(1.0)
    low, high = fit.slope_interval()
    assert low == pytest.approx(0.5) and high == pytest.approx(0.5)
    assert set(fit.as_dict()) == {'slope', 'intercept', 'r_squared', 'slope_stderr', 'slope_ci95'}


def test_fit_power_law_noisy_interval_covers_slope():
    rng = np.random.default_rng(0)
    xs = np.geomspace(100, 10**5, 8)
    ys = xs ** (1 / 3) * np.exp(rng.normal(0, 0.01, xs.size))
    low, high = fit_power_law(np.column_stack([xs, ys])).slope_interval(0.999)
    assert low < 1 / 3 < high


@pytest.mark.parametrize('points', [[(1, 1), (2, 2)], [(1, 1), (2, -1), (3, 3)], [(2, 1), (2, 2), (2, 3)]])
def test_fit_power_law_rejects(points):
    with pytest.raises(DomainError):
        fit_power_law(points)


def test_root_order_statistic_limit_catalan():
    law = root_order_statistic_limit(make_named('catalan'), 2, 200)
    assert law.pmf[0] == pytest.approx(0.5)
    assert law.pmf[1] == pytest.approx(0.125)
    assert law.pmf[2] == pytest.approx(0.5 / 8)
    assert np.all(law.pmf >= -1e-15)
    assert law.cdf[-1] + law.tail == pytest.approx(1.0)


def test_root_order_statistic_limit_ternary():
    dist = make_named('apollonian_ternary')
    second = root_order_statistic_limit(dist, 2, 50)
    third = root_order_statistic_limit(dist, 3, 50)
    assert second.pmf[0] == 0.0
    assert second.pmf[1] == pytest.approx(4 / 9)
    assert third.pmf[1] == pytest.approx(8 / 9)
    # the third largest is stochastically smaller
    assert np.all(third.cdf >= second.cdf - 1e-15)
    with pytest.raises(DomainError):
        root_order_statistic_limit(dist, 1, 50)


def test_closed_form_of_phi_half():
    target = 2 * math.sqrt(2 / math.pi) * (math.sqrt(2) - math.log(1 + math.sqrt(2)))
    assert abs(phi(0.5) - target) <= 1e-8


def test_t_infinity_moments_are_log_convex():
    logs = [math.log(t_infinity_moment(k)) for k in range(0, 9)]
    assert all(t_infinity_moment(k) > 0 for k in range(9))
    for k in range(1, 8):
        assert 2 * logs[k] <= logs[k - 1] + logs[k + 1] + 1e-12


@pytest.mark.slow
def test_fragmentation_recovers_heavy_path_at_scale():
    dist = make_named('catalan')
    rng = make_rng(2024)
    mismatches = 0
    for _ in range(1000):
        tree = sample_conditional(dist, 500, rng)
        trace = heavy_fragmentation(contour_process(tree), 1.0)
        mismatches += trace.t_infinity != heavy_path(tree).length
    assert mismatches == 0
