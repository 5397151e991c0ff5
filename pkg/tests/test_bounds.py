import math

import mpmath
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from shatterbound.bounds import (
    DEFAULT_LOG_LAMBDA,
    IMAGINARY,
    REAL,
    DivergenceResult,
    GammaQuery,
    chernoff_log_probability,
    convergence_report,
    gamma_at,
    gamma_peak,
    gamma_poly_at,
    generalization_divergence,
    min_n_chernoff,
    min_n_gamma,
    min_n_gamma_poly,
    risk_bound,
)
from shatterbound.errors import DomainError
from shatterbound.polyfit import QuadraticFit

R2 = QuadraticFit(0.91, -0.98, 2.68)


def test_default_lambda_is_the_subnormal():
    assert DEFAULT_LOG_LAMBDA == pytest.approx(-743.7469247, abs=1e-6)


# -- Chernoff ---------------------------------------------------------------


def test_chernoff_at_3629_is_about_five_percent():
    assert chernoff_log_probability(R2, 2, 3629, 0.1) == pytest.approx(math.log(0.05), abs=0.01)


def test_chernoff_vanishes_for_large_epsilon():
    values = [chernoff_log_probability(R2, 2, 100, eps) for eps in (1, 10, 100, 1000)]
    assert values == sorted(values, reverse=True)
    assert values[-1] < -1e7


@pytest.mark.parametrize("n, eps, k", [(3629, 0.1, 2), (50, 0.3, 1), (10**6, 0.01, 30)])
def test_chernoff_against_mpmath(n, eps, k):
    with mpmath.workdps(40):
        fn = mpmath.mpf("0.91") * n * n - mpmath.mpf("0.98") * n + mpmath.mpf("2.68")
        oracle = mpmath.log(2 * fn**k * mpmath.exp(-n * mpmath.mpf(eps) ** 2))
    assert chernoff_log_probability(R2, k, n, eps) == pytest.approx(float(oracle), abs=1e-9)


def test_chernoff_quarter_form():
    full = chernoff_log_probability(R2, 2, 1000, 0.2)
    quarter = chernoff_log_probability(R2, 2, 1000, 0.2, quarter_exponent=True)
    assert quarter - full == pytest.approx(0.75 * 1000 * 0.04)


def test_chernoff_domain_error():
    with pytest.raises(DomainError):
        chernoff_log_probability(QuadraticFit(1, 0, -100), 1, 5, 0.1)


def test_min_n_chernoff_reproduces_3629():
    assert abs(min_n_chernoff(R2, 2, 0.1, 0.05) - 3629) <= 1


def test_min_n_chernoff_tight():
    n = min_n_chernoff(R2, 2, 0.1, 0.05)
    assert chernoff_log_probability(R2, 2, n, 0.1) <= math.log(0.05)
    assert chernoff_log_probability(R2, 2, n - 1, 0.1) > math.log(0.05)


def test_min_n_chernoff_doubling_epsilon():
    assert min_n_chernoff(R2, 2, 0.2, 0.05) < min_n_chernoff(R2, 2, 0.1, 0.05)


def test_min_n_chernoff_quarter_needs_more():
    assert min_n_chernoff(R2, 2, 0.1, 0.05, quarter_exponent=True) > min_n_chernoff(R2, 2, 0.1, 0.05)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.floats(0.02, 0.5), st.floats(0.001, 0.5))
def test_min_n_chernoff_properties(k, eps, delta):
    n = min_n_chernoff(R2, k, eps, delta)
    assert chernoff_log_probability(R2, k, n, eps) <= math.log(delta)
    assert min_n_chernoff(R2, k, eps * 1.5, delta) <= n
    assert min_n_chernoff(R2, k, eps, min(delta * 1.5, 0.99)) <= n


# -- gamma ------------------------------------------------------------------


def test_gamma_at_mnist():
    assert gamma_at(70_000, GammaQuery(2752, 0.01)) == pytest.approx(0.4279751, abs=1e-4)


def test_gamma_at_imagenet_vgg16_without_lambda():
    q = GammaQuery(8960, 0.01, include_lambda=False)
    assert gamma_at(14_197_122, q) == pytest.approx(0.0103935, abs=1e-5)


def test_gamma_at_imagenet_alexnet_without_lambda():
    q = GammaQuery(2752, 0.01, include_lambda=False)
    assert gamma_at(14_197_122, q) == pytest.approx(3.19e-3, abs=5e-6)


def test_gamma_zero_degree():
    q = GammaQuery(0, 0.01, log_lambda=0.0)
    assert all(gamma_at(n, q) == 0 for n in (1, 10, 10**9))


def test_gamma_query_from_lambda():
    q = GammaQuery.from_lambda(2752, 0.01, 1e-323)
    assert q.log_lambda == DEFAULT_LOG_LAMBDA
    with pytest.raises(DomainError):
        GammaQuery.from_lambda(2752, 0.01, 0.0)
    with pytest.raises(DomainError):
        GammaQuery(10, 0.0)


@pytest.mark.parametrize(
    "degree, gamma, expected, tol",
    [
        (2752, 0.01, 4_117_104, 2),
        (2752, 0.1, 343_347, 2),
        (8960, 0.01, 14_713_454, 2),
        (8960, 0.1, 1_250_459, 2),
    ],
)
def test_min_n_gamma_published(degree, gamma, expected, tol):
    assert abs(min_n_gamma(GammaQuery(degree, gamma)) - expected) <= tol


def test_gamma_peak_closed_form():
    q = GammaQuery(2752, 0.01)
    peak = gamma_peak(q)
    assert peak == pytest.approx(math.exp(1 - DEFAULT_LOG_LAMBDA / 2752))
    assert gamma_peak(GammaQuery(10, 0.1, include_lambda=False)) == pytest.approx(math.e)
    # neighbours of the peak are lower
    assert gamma_at(math.floor(peak), q) <= gamma_at(peak, q) >= gamma_at(math.ceil(peak), q)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 20000), st.floats(1e-3, 1.0), st.floats(-800, 50), st.booleans())
def test_min_n_gamma_tight_and_monotone(degree, gamma, log_lambda, include):
    q = GammaQuery(degree, gamma, log_lambda, include)
    n = min_n_gamma(q)
    assert gamma_at(n, q) <= gamma
    if n - 1 > gamma_peak(q):
        assert gamma_at(n - 1, q) > gamma
    # with log lambda < 0 the peak moves left as the degree grows
    if q.effective_log_lambda >= 0:
        assert min_n_gamma(GammaQuery(degree + 1, gamma, log_lambda, include)) >= n
    assert min_n_gamma(GammaQuery(degree, gamma * 1.5, log_lambda, include)) <= n


@given(st.integers(1, 10000), st.floats(-800, 0))
def test_gamma_decays_past_peak(degree, log_lambda):
    q = GammaQuery(degree, 0.5, log_lambda)
    start = math.ceil(math.log10(gamma_peak(q))) + 1
    values = [gamma_at(10**k, q) for k in range(start, start + 8)]
    assert values == sorted(values, reverse=True)
    assert values[-1] < values[0]


@pytest.mark.parametrize(
    "k, expected",
    [(1, 1446), (2, 3211), (3, 5094), (4, 7051), (5, 9065), (10, 19681), (20, 42435), (30, 66332)],
)
def test_min_n_gamma_poly_published_rows(k, expected):
    assert abs(min_n_gamma_poly(R2, k, 0.01) - expected) <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.floats(0.005, 0.5))
def test_min_n_gamma_poly_tight(k, gamma):
    n = min_n_gamma_poly(R2, k, gamma)
    assert gamma_poly_at(R2, k, n) <= gamma
    if n > 3:
        assert gamma_poly_at(R2, k, n - 1) > gamma


def test_min_n_gamma_poly_with_negative_region():
    fit = QuadraticFit(7.85, 147.69, -2871.02)
    n = min_n_gamma_poly(fit, 64, 0.01)
    assert n >= fit.positive_from()
    assert gamma_poly_at(fit, 64, n) <= 0.01 < gamma_poly_at(fit, 64, n - 1)


def test_min_n_gamma_poly_never_positive():
    with pytest.raises(DomainError):
        min_n_gamma_poly(QuadraticFit(-1, 0, 5), 1, 0.01)
    with pytest.raises(DomainError):
        min_n_gamma_poly(R2, 0, 0.01)


# -- divergence and risk ------------------------------------------------------


def test_divergence_mnist_real():
    r = generalization_divergence(70_000, 0.05, 0.4279751)
    assert r.regime == REAL
    assert r.epsilon == pytest.approx(0.01273957, abs=1e-7)


def test_divergence_vgg16_imaginary():
    r = generalization_divergence(14_197_122, 0.05, 0.01039353)
    assert r.regime == IMAGINARY
    assert r.epsilon == pytest.approx(0.000497280, abs=1e-8)
    assert r.critical_delta == pytest.approx(0.02078706)
    assert r.confidence == pytest.approx(0.9792129, abs=1e-6)


def test_divergence_alexnet_imagenet_imaginary():
    r = generalization_divergence(14_197_122, 0.05, 3.19e-3)
    assert r.regime == IMAGINARY
    assert r.epsilon == pytest.approx(0.0007616277, abs=1e-8)
    assert r.confidence == pytest.approx(0.99362)


@given(st.integers(1, 10**8), st.floats(1e-4, 0.49))
def test_divergence_zero_at_boundary(n, proxy):
    r = generalization_divergence(n, 2 * proxy, proxy)
    assert r.epsilon == 0.0
    assert r.regime == REAL


@settings(max_examples=60)
@given(st.integers(1, 10**8), st.floats(1e-4, 0.45), st.floats(1e-6, 0.04))
def test_regime_flips_at_critical_delta(n, proxy, step):
    below = generalization_divergence(n, 2 * proxy * (1 - step), proxy)
    above = generalization_divergence(n, min(2 * proxy * (1 + step), 0.999), proxy)
    assert below.regime == REAL
    assume(above.delta > above.critical_delta)
    assert above.regime == IMAGINARY
    # continuity: both sides shrink toward zero with the step
    tiny_below = generalization_divergence(n, 2 * proxy * (1 - 1e-9), proxy)
    assert tiny_below.epsilon <= below.epsilon


def test_divergence_rejects_bad_input():
    with pytest.raises(DomainError):
        generalization_divergence(10, 1.0, 0.1)
    with pytest.raises(DomainError):
        generalization_divergence(10, 0.05, 0.0)


def _real(eps):
    return DivergenceResult(eps, REAL, 0.5, 0.5, 0.05, 1000, 0.25)


def test_risk_bound_examples():
    assert risk_bound(0.01, _real(0.01273957)).expected_risk_bound == pytest.approx(0.02273957, abs=1e-12)
    assert risk_bound(0.015, _real(0.01273957 / 2)).expected_risk_bound == pytest.approx(0.021369785, abs=1e-12)
    zero = risk_bound(0.0, _real(0.0))
    assert zero.expected_risk_bound == 0
    assert zero.confidence == pytest.approx(0.95)


def test_risk_bound_imaginary_uses_critical_confidence():
    div = generalization_divergence(14_197_122, 0.05, 0.01039353)
    rb = risk_bound(0.02, div)
    assert rb.expected_risk_bound == 0.02
    assert rb.confidence == pytest.approx(0.9792129, abs=1e-6)


# -- report -------------------------------------------------------------------


def test_convergence_report_alexnet():
    rep = convergence_report(2752, DEFAULT_LOG_LAMBDA, [0.01, 0.1], dataset_size=70_000)
    assert rep.min_n == ((0.01, 4_117_104), (0.1, 343_347))
    assert rep.gamma_at_dataset == pytest.approx(0.4279751, abs=1e-6)
    assert rep.divergence.regime == REAL
    assert rep.verdict.startswith("insufficient sample")
    d = rep.to_dict()
    assert d["min_n"][0] == {"gamma": 0.01, "n": 4_117_104}


def test_convergence_report_without_dataset():
    rep = convergence_report(8960, DEFAULT_LOG_LAMBDA, [0.01])
    assert rep.verdict == "learning guaranteed at gamma=0.01 with n=14713454"
    assert rep.divergence is None


def test_convergence_report_sufficient():
    rep = convergence_report(2, 0.0, [0.01], dataset_size=10**6)
    assert rep.verdict.startswith("learning guaranteed")
