import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from rabi_limit import metrics
from rabi_limit.dynamics import fbrwa_field_density, fbrwa_inversion, rabi_period
from rabi_limit.errors import SamplingWarning, TruncationError
from rabi_limit.hilbert import DensityMatrix, auto_displaced_fock_ket, displaced_fock_overlap, trace_distance
from rabi_limit.specfun import laguerre

A = 0.2
T10 = 10 * math.pi / A

# mpmath quadrature of the defining integrals (40 digits), frozen
CORRELATION_REF = {(0, 0.05): 0.52494649415134265125, (2, 0.02): 0.60237148509922604637,
                   (5, 0.01): 0.68937458267356336849}
ENTROPY_REF = {(2, 0.02): 0.59127164018090347958, (0, 0.01): 0.35891764131339521916,
               (5, 0.05): 0.66171123321152232414}


def test_spin_td_analytic_examples():
    t = 25.0
    assert metrics.spin_trace_distance_analytic(0, 1 / t, t) == pytest.approx(0.5 * (1 - math.exp(-0.5)), rel=1e-14)
    assert metrics.spin_trace_distance_analytic(4, 0.0, t) == 0.0
    assert metrics.spin_trace_distance_analytic(1, 1 / t, t) == pytest.approx(0.5, abs=1e-15)


def test_spin_td_numeric():
    assert metrics.spin_trace_distance_numeric(A, 0, 0.0, T10) == 0.0
    assert metrics.spin_trace_distance_numeric(A, 0, 1e-3, T10) < 0.01
    for lam in (1e-3, 2e-3):
        num = metrics.spin_trace_distance_numeric(A, 1, lam, T10)
        assert abs(num - metrics.spin_trace_distance_analytic(1, lam, T10)) < 0.02


def test_spin_td_routes_agree():
    lam = 0.05
    a = metrics.spin_trace_distance_numeric(A, 2, lam, T10, route="lab")
    b = metrics.spin_trace_distance_numeric(A, 2, lam, T10, route="displaced")
    assert a == pytest.approx(b, abs=1e-8)
    assert metrics.resolve_route("auto", 4.0, 2) == "lab"
    assert metrics.resolve_route("auto", 2000.0, 2) == "displaced"


def test_field_td_numeric_trivial_and_routes():
    assert metrics.field_trace_distance_numeric(A, 1, 0.0, T10) == 0.0
    assert metrics.field_trace_distance_numeric(A, 1, 0.05, 0.0) == 0.0
    a = metrics.field_trace_distance_numeric(A, 2, 0.05, T10, route="lab")
    b = metrics.field_trace_distance_numeric(A, 2, 0.05, T10, route="displaced")
    assert a == pytest.approx(b, abs=1e-8)


def test_field_td_numeric_vs_fbrwa():
    num = metrics.field_trace_distance_numeric(A, 0, 0.01, T10)
    ana = metrics.field_trace_distance_fbrwa(0, 0.01, A / 0.01, T10)
    assert abs(num - ana) < 0.02


def test_field_geometry_invariants():
    for n, lam, t in [(0, 0.02, T10), (3, 0.01, T10), (5, 0.004, 77.0)]:
        alpha = A / lam
        g = metrics.FbrwaFieldGeometry.build(n, lam, alpha, t)
        assert abs(g.c0p) == pytest.approx(abs(g.kappa), abs=1e-14)
        assert abs(g.c0m) == pytest.approx(abs(g.kappa), abs=1e-14)
        assert g.a <= 0
        assert abs(np.sum(g.eigenvalues())) < 1e-10
        gram = g.gram()
        assert gram[0, 1] == pytest.approx(g.kappa * np.exp(-0.5j * g.phi), abs=1e-10)
        assert gram[1, 2] == pytest.approx(g.zeta * np.exp(1j * g.phi), abs=1e-10)
        np.testing.assert_allclose(np.diag(gram).real, 1.0, atol=1e-10)
        # overlaps with the branch kets from the displacement geometry
        a0 = alpha * np.exp(-1j * t)
        ap = a0 * (1 - 1j * lam * t / (2 * alpha))
        am = a0 * (1 + 1j * lam * t / (2 * alpha))
        assert displaced_fock_overlap(a0, ap, n) == pytest.approx(gram[0, 1], abs=1e-10)
        assert displaced_fock_overlap(ap, am, n) == pytest.approx(gram[1, 2], abs=1e-10)
        np.testing.assert_allclose(np.sort(g.eigenvalues()), np.linalg.eigvalsh(g.delta), atol=1e-10)


def test_field_td_fbrwa_examples():
    assert metrics.field_trace_distance_fbrwa(2, 0.03, 5.0, 0.0) == 0.0
    n, lam, alpha, t = 0, 0.02, 10.0, T10
    rho = fbrwa_field_density(alpha, n, lam, t).entries
    ref = auto_displaced_fock_ket(alpha * np.exp(-1j * t), n, rho.shape[0]).amplitudes
    ev = np.linalg.eigvalsh(rho - np.outer(ref, ref.conj()))
    assert metrics.field_trace_distance_fbrwa(n, lam, alpha, t) == pytest.approx(0.5 * np.sum(np.abs(ev)), abs=1e-8)
    assert np.sum(np.abs(ev) > 1e-9) <= 3


def test_pearson_examples():
    t = metrics.midpoint_grid(T10, 640)
    w = np.cos(0.4 * t) * np.exp(-1e-5 * t * t)
    assert metrics.correlate_series(lambda s: w, lambda s: w, T10, 640, check_sampling=False).value == pytest.approx(0.0, abs=1e-14)
    flip = metrics.correlate_series(lambda s: -np.cos(0.4 * s), lambda s: np.cos(0.4 * s), T10, 640, check_sampling=False)
    assert flip.value == pytest.approx(2.0, abs=1e-14)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=500), rng.normal(size=500)
    r_spec, r_time = metrics.pearson_spectral(x, y)
    assert abs(r_spec - r_time) < 1e-10
    assert r_time == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


def test_correlation_numeric():
    assert metrics.correlation_numeric(A, 2, 0.0, T10) == 0.0
    d = metrics.correlation_numeric_details(A, 1, 0.02, T10)
    assert abs(d.r_spectral - d.r_time) < 1e-10
    assert 0 <= d.value <= 2
    with pytest.raises(ValueError):
        metrics.correlation_numeric(A, 1, 0.02, T10, samples=32)


def test_sampling_warning_on_coarse_grid():
    # 64 samples over 10 periods alias a component at 2.57
    with pytest.warns(SamplingWarning):
        metrics.correlate_series(lambda t: np.cos(0.4 * t) + 0.5 * np.cos(2.57 * t + 0.3),
                                 lambda t: np.cos(0.4 * t), T10, 64)


@pytest.mark.parametrize("key", sorted(CORRELATION_REF))
def test_correlation_analytic_frozen(key):
    n, lam = key
    assert metrics.correlation_analytic(n, lam, A / lam, 10) == pytest.approx(CORRELATION_REF[key], rel=1e-10)


def test_correlation_analytic_quadrature():
    n, lam = 0, 0.05
    T = T10
    X = lambda t: fbrwa_inversion(n, lam, t)
    num = quad(lambda t: X(t) * math.cos(2 * A * t) ** 2, 0, T, limit=400)[0]
    dq = quad(lambda t: (X(t) * math.cos(2 * A * t)) ** 2, 0, T, limit=400)[0]
    ref = 1 - num / math.sqrt(dq * T / 2)
    assert metrics.correlation_analytic(n, lam, A / lam, 10) == pytest.approx(ref, rel=1e-6)
    terms = metrics.correlation_terms(n, lam, A / lam, 10)
    assert terms.T * lam * (A / lam) == pytest.approx(10 * math.pi)
    assert terms.mu == 0.5 * lam * lam


def test_correlation_analytic_limit():
    vals = [metrics.correlation_analytic(1, lam, A / lam, 10) for lam in (1e-3, 1e-4, 1e-5)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-6
    assert metrics.correlation_analytic(1, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("n,lam", [(0, 0.01), (2, 0.02), (5, 0.05)])
def test_correlation_analytic_vs_sampled_fbrwa(n, lam):
    fb = lambda t: fbrwa_inversion(n, lam, t, A=A)
    sc = lambda t: np.cos(2 * A * t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        num = metrics.correlate_series(fb, sc, T10, 20000, check_sampling=False).value
    assert abs(num - metrics.correlation_analytic(n, lam, A / lam, 10)) < 1e-4


def test_entropy_numeric():
    assert metrics.entropy_numeric(A, 1, 0.0, T10) == 0.0
    v = metrics.entropy_numeric(A, 0, 0.01, T10, check_sampling=False)
    assert 0 <= v <= math.log(2)
    assert abs(v - metrics.entropy_analytic(0, 0.01, 10, A)) < 1e-3


@pytest.mark.parametrize("key", sorted(ENTROPY_REF))
def test_entropy_analytic_frozen(key):
    n, lam = key
    assert metrics.entropy_analytic(n, lam, 10, A) == pytest.approx(ENTROPY_REF[key], abs=1e-5)
    # below the cap the closed-form remainder makes it far tighter than the tolerance
    assert metrics.entropy_analytic(n, lam, 10, A) == pytest.approx(ENTROPY_REF[key], abs=1e-10)


def test_entropy_analytic_state_and_limits():
    st = metrics.entropy_analytic_state(2, 0.02, 10, A, tol=1e-6)
    assert st.tail_bound < 1e-6
    assert st.m_max >= 1 and st.series_terms + st.quadrature_terms == st.m_max
    # a large lam T converges before the cap
    early = metrics.entropy_analytic_state(2, 0.3, 10, A, tol=1e-6)
    assert early.m_max < 200 and early.tail_bound < 1e-6
    with pytest.raises(TruncationError):
        metrics.entropy_analytic_state(0, 1e-3, 10, A, m_cap=200, closed_tail=False)
    assert metrics.entropy_analytic(3, 0.0) == 0.0
    small = metrics.entropy_analytic(0, 1e-5, 10, A)
    assert small < 1e-3
    big = metrics.entropy_analytic(2, 2.0, 10, A)
    assert big <= math.log(2)
    assert math.log(2) - big < 0.05


def test_entropy_direct_average():
    ref = metrics.entropy_direct_average(2, 0.02, T10)
    assert ref == pytest.approx(ENTROPY_REF[(2, 0.02)], abs=1e-9)


@pytest.mark.parametrize("metric", ["spin_td", "field_td", "correlation", "entropy"])
def test_analytic_metric_monotone_below_inflection(metric):
    from rabi_limit.analysis import evaluate_metric

    lams = np.geomspace(1e-4, 2e-3, 12)
    vals = [evaluate_metric(metric, "analytic", A, 2, float(l), T10) for l in lams]
    assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))
