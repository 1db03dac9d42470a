import math

import numpy as np
import pytest
import sympy as sp
from scipy.optimize import brentq

from rabi_limit import analysis, metrics
from rabi_limit.errors import GridError

A = 0.2
T10 = 10 * math.pi / A
GRID = np.geomspace(1e-4, 0.3, 160)


def test_periods_in():
    assert analysis.periods_in(T10, A) == 10
    with pytest.raises(ValueError):
        analysis.periods_in(T10 * 1.05, A)


def test_sweep_passthrough_and_ordering():
    grid = np.geomspace(1e-3, 0.3, 12)
    curve = analysis.run_sweep("spin_td", A, 0, grid, T10)
    for lam, v in curve.points:
        assert v == metrics.spin_trace_distance_analytic(0, lam, T10)
    shuffled = analysis.run_sweep("spin_td", A, 0, grid[::-1].copy(), T10)
    np.testing.assert_array_equal(shuffled.values, curve.values)
    np.testing.assert_array_equal(shuffled.lambdas, curve.lambdas)


def test_sweep_invalid_point_becomes_gap():
    # lam = 0.3, |alpha| = 0.67 with the lab route and t1 forced off the period raises per point
    grid = [1e-3, 0.3]
    curve = analysis.run_sweep("correlation", A, 1, grid, T10 * 1.05)
    assert not curve.valid.any() and len(curve.errors) == 2
    assert all("ValueError" in msg for msg in curve.errors.values())


def test_sweep_numeric_parallel_matches_serial():
    grid = np.geomspace(1e-3, 0.05, 4)
    serial = analysis.run_sweep("spin_td", A, 1, grid, T10, variant="numeric")
    pooled = analysis.run_sweep("spin_td", A, 1, grid, T10, variant="numeric", workers=2)
    np.testing.assert_array_equal(serial.values, pooled.values)


def test_metric_curve_validation():
    with pytest.raises(ValueError):
        analysis.MetricCurve("spin_td", A, 0, T10, 0.0, np.array([0.1, 0.05]), np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        analysis.MetricCurve("spin_td", A, 0, T10, 0.0, np.array([0.1, 0.2]), np.array([0.1, 1.5]))


def test_inflection_n0_exact():
    res = analysis.inflection_numeric(analysis.analytic_spin_curve(0, T10, GRID))
    assert res.found and res.method == "numeric"
    assert res.lambda_star == pytest.approx(1 / T10, rel=2e-3)
    assert GRID[0] < res.lambda_star < GRID[-1]


def test_inflection_absent_and_grid_errors():
    lam = np.geomspace(1e-3, 0.1, 30)
    convex = analysis.MetricCurve("spin_td", A, 0, T10, 0.0, lam, 0.5 * (lam / lam[-1]) ** 2)
    assert not analysis.inflection_numeric(convex).found
    straight = analysis.MetricCurve("spin_td", A, 0, T10, 0.0, lam, 0.5 * lam / lam[-1])
    assert not analysis.inflection_numeric(straight).found
    with pytest.raises(GridError):
        analysis.inflection_numeric(analysis.analytic_spin_curve(0, T10, np.geomspace(1e-3, 0.3, 10)))
    with pytest.raises(GridError):
        analysis.inflection_numeric(analysis.analytic_spin_curve(0, T10, np.linspace(0.01, 0.05, 40)))


@pytest.mark.parametrize("n", [4, 8, 12, 16])
def test_inflection_numeric_vs_exact_root_and_taylor(n):
    res = analysis.inflection_numeric(analysis.analytic_spin_curve(n, T10, GRID))
    d2 = lambda x: float(analysis.spin_td_derivatives(n, x, T10)[1])
    taylor = analysis.inflection_taylor(n, T10).lambda_star
    exact = brentq(d2, 0.5 * taylor, 1.1 * taylor)
    spacing = GRID[1] / GRID[0] - 1
    assert res.lambda_star == pytest.approx(exact, rel=spacing)
    assert res.lambda_star == pytest.approx(taylor, rel=0.10)


def test_spin_td_derivatives_finite_difference():
    n, lam, h = 3, 0.004, 1e-7
    f = lambda x: metrics.spin_trace_distance_analytic(n, x, T10)
    d1, d2 = analysis.spin_td_derivatives(n, lam, T10)
    assert d1 == pytest.approx((f(lam + h) - f(lam - h)) / (2 * h), rel=1e-6)
    h = 1e-5
    assert d2 == pytest.approx((f(lam + h) - 2 * f(lam) + f(lam - h)) / h**2, rel=1e-4)


def test_taylor_coefficients_symbolic():
    lam, t = sp.symbols("lambda t", positive=True)
    for n in range(8):
        x = lam**2 * t**2
        D = sp.Rational(1, 2) * (1 - sp.assoc_laguerre(n, 0, x) * sp.exp(-x / 2))
        ser = sp.series(D, lam, 0, 8).removeO()
        a, b, c = analysis.taylor_coefficients(n, 1.0)
        assert float(ser.coeff(lam, 2).subs(t, 1)) == pytest.approx(a, rel=1e-12)
        assert float(-ser.coeff(lam, 4).subs(t, 1)) == pytest.approx(b, rel=1e-12)
        assert float(ser.coeff(lam, 6).subs(t, 1)) == pytest.approx(c, rel=1e-12)


def test_taylor_and_large_n():
    assert not analysis.inflection_taylor(0, T10).found
    assert analysis.LARGE_N_CONSTANT == pytest.approx(0.9399, abs=5e-5)
    r100 = analysis.inflection_taylor(100, T10).lambda_star / analysis.inflection_large_n(100, T10).lambda_star
    assert abs(r100 - 1) < 0.05
    r1000 = analysis.inflection_taylor(1000, T10).lambda_star / analysis.inflection_large_n(1000, T10).lambda_star
    assert abs(r1000 - 1) < 0.005
    a = analysis.inflection_large_n(9, 2.0).lambda_star
    assert a * 2.0 * 3 == pytest.approx(analysis.LARGE_N_CONSTANT)
    with pytest.raises(ValueError):
        analysis.inflection_large_n(0, T10)
    with pytest.raises(ValueError):
        analysis.inflection_taylor(2, 0.0)


def test_fit_power_law():
    pts = [(n, 3.0 / math.sqrt(n)) for n in (4, 6, 9, 16)]
    fit = analysis.fit_power_law(pts)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-12)
    assert fit.residual < 1e-12
    with pytest.raises(GridError):
        analysis.fit_power_law([(4, 0.1)])
    with pytest.raises(GridError):
        analysis.fit_power_law([(4, 0.1), (4, 0.2), (4, 0.3), (4, 0.4)])
    with pytest.raises(GridError):
        analysis.fit_power_law([(4, 0.1), (5, -0.2), (6, 0.3), (7, 0.4)])


def test_scaling_and_gradient():
    stars, fit, slope = analysis.scaling_from_analytic(range(4, 17), T10, GRID)
    assert len(stars) == 13
    assert abs(fit.exponent + 0.5) < 0.1
    assert abs(slope.exponent - 0.5) < 0.15
