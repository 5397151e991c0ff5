"""Sample-size and generalization bounds driven by shattering coefficients.

All logarithms are natural. Integer searches bracket exponentially and then
bisect, always on the branch where the quantity being bounded is decreasing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError
from .polyfit import evaluate

# Smallest positive double R can print as 1e-323; as a float this is the
# subnormal 9.88e-324, and it is that value whose log we use.
DEFAULT_LAMBDA = 1e-323
DEFAULT_LOG_LAMBDA = math.log(DEFAULT_LAMBDA)

REAL = "real"
IMAGINARY = "imaginary"


@dataclass(frozen=True)
class GammaQuery:
    degree: int
    gamma: float
    log_lambda: float = DEFAULT_LOG_LAMBDA
    include_lambda: bool = True

    def __post_init__(self):
        if self.degree < 0:
            raise DomainError(f"degree must be >= 0, got {self.degree}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")

    @classmethod
    def from_lambda(cls, degree, gamma, lam=DEFAULT_LAMBDA, include_lambda=True):
        if not lam > 0:
            raise DomainError(f"lambda must be > 0, got {lam}")
        return cls(degree, gamma, math.log(lam), include_lambda)

    @property
    def effective_log_lambda(self):
        return self.log_lambda if self.include_lambda else 0.0


@dataclass(frozen=True)
class DivergenceResult:
    epsilon: float
    regime: str
    critical_delta: float
    confidence: float
    delta: float
    n: int
    shatter_proxy: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class RiskBound:
    empirical_risk: float
    divergence: DivergenceResult
    expected_risk_bound: float
    confidence: float

    def to_dict(self):
        return {
            "empirical_risk": self.empirical_risk,
            "expected_risk_bound": self.expected_risk_bound,
            "confidence": self.confidence,
            "divergence": self.divergence.to_dict(),
        }


def _log_fit(fit, n):
    value = evaluate(fit, n)
    if not value > 0:
        raise DomainError(f"fit evaluates to {value:.6g} <= 0 at n={n}")
    return math.log(value)


def _first_true(pred, lo):
    """Smallest integer n >= lo with pred(n), for pred monotone False -> True."""
    if pred(lo):
        return lo
    step = 1
    hi = lo + step
    while not pred(hi):
        lo = hi
        step *= 2
        hi = lo + step
    # pred(lo) False, pred(hi) True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _concave_from(fit):
    """Smallest integer n >= 1 past which log(fit) is positive-valued and concave.

    For a quadratic with a2 > 0, ``(log f)'' <= 0`` iff
    ``(2 a2 n + a1)**2 >= 4 a2 a0 - a1**2``.
    """
    start = fit.positive_from()
    if start is None:
        raise DomainError(f"fit {fit.coefficients} is never eventually positive")
    a2, a1, a0 = fit.coefficients
    if a2 > 0:
        gap = 4 * a2 * a0 - a1 * a1
        if gap > 0:
            start = max(start, math.ceil((math.sqrt(gap) - a1) / (2 * a2)))
    return max(start, 1)


def chernoff_log_probability(fit, k, n, epsilon, quarter_exponent=False):
    """``log(2 * fit(n)**k * exp(-c * n * epsilon**2))``.

    ``c`` is 1, or 1/4 with ``quarter_exponent`` (the symmetrization form).
    """
    c = 0.25 if quarter_exponent else 1.0
    return math.log(2.0) + k * _log_fit(fit, n) - c * n * epsilon * epsilon


def min_n_chernoff(fit, k, epsilon, delta, quarter_exponent=False):
    """Smallest n, past the peak of the bound, with bound(n) <= delta."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    c = 0.25 if quarter_exponent else 1.0
    a2, a1, _ = fit.coefficients
    log_delta = math.log(delta)

    def decreasing(n):
        # derivative of the log-bound: k f'/f - c eps^2
        return k * (2 * a2 * n + a1) / evaluate(fit, n) <= c * epsilon * epsilon

    def done(n):
        return decreasing(n) and chernoff_log_probability(fit, k, n, epsilon, quarter_exponent) <= log_delta

    return _first_true(done, _concave_from(fit))


def gamma_at(n, q):
    """``(log lambda + d log n) / n``, the log lambda term only if included."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return (q.effective_log_lambda + q.degree * math.log(n)) / n


def gamma_peak(q):
    """Where ``gamma_at`` peaks as a function of real n (it decreases after)."""
    if q.degree == 0:
        return 1.0
    return math.exp(1.0 - q.effective_log_lambda / q.degree)


def min_n_gamma(q):
    """Smallest integer n past the peak with ``gamma_at(n, q) <= q.gamma``."""
    start = max(1, math.ceil(gamma_peak(q)))
    return _first_true(lambda n: gamma_at(n, q) <= q.gamma, start)


def gamma_poly_at(fit, k, n):
    return k * _log_fit(fit, n) / n


def min_n_gamma_poly(fit, k, gamma):
    """Smallest n on the decreasing branch with ``k * log(fit(n)) / n <= gamma``.

    Uses the full polynomial rather than its leading-term envelope.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    a2, a1, _ = fit.coefficients

    # where log f is concave, log(f)/n is unimodal: it decreases once
    # n f'/f <= log f
    def decreasing(n):
        value = evaluate(fit, n)
        return n * (2 * a2 * n + a1) / value <= math.log(value)

    def done(n):
        return decreasing(n) and gamma_poly_at(fit, k, n) <= gamma

    return _first_true(done, _concave_from(fit))


def generalization_divergence(n, delta, shatter_proxy):
    """Divergence factor ``sqrt(-(4/n) (log delta - log(2 N)))``.

    When the radicand is negative the result is tagged imaginary and carries
    its magnitude; the bound then holds for any delta below ``2 N``.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not shatter_proxy > 0:
        raise DomainError(f"shatter proxy must be > 0, got {shatter_proxy}")
    critical = 2.0 * shatter_proxy
    eps2 = -(4.0 / n) * (math.log(delta) - math.log(critical))
    regime = REAL if eps2 >= 0 else IMAGINARY
    return DivergenceResult(
        epsilon=math.sqrt(abs(eps2)),
        regime=regime,
        critical_delta=critical,
        confidence=1.0 - critical,
        delta=delta,
        n=n,
        shatter_proxy=shatter_proxy,
    )


def risk_bound(empirical_risk, divergence):
    """Expected-risk bound. In the imaginary regime the bound is quoted at
    ``delta = critical_delta``, where the divergence factor is zero."""
    if divergence.regime == REAL:
        return RiskBound(
            empirical_risk,
            divergence,
            empirical_risk + divergence.epsilon,
            1.0 - divergence.delta,
        )
    return RiskBound(empirical_risk, divergence, empirical_risk, divergence.confidence)


@dataclass(frozen=True)
class ConvergenceReport:
    degree: int
    log_lambda: float
    include_lambda: bool
    min_n: tuple  # (gamma, n)
    dataset_size: int | None = None
    gamma_at_dataset: float | None = None
    divergence: DivergenceResult | None = None
    verdict: str = ""

    def to_dict(self):
        return {
            "degree": self.degree,
            "log_lambda": self.log_lambda,
            "include_lambda": self.include_lambda,
            "min_n": [{"gamma": g, "n": n} for g, n in self.min_n],
            "dataset_size": self.dataset_size,
            "gamma_at_dataset": self.gamma_at_dataset,
            "divergence": None if self.divergence is None else self.divergence.to_dict(),
            "verdict": self.verdict,
        }


def convergence_report(degree, log_lambda, gammas, dataset_size=None, delta=0.05, include_lambda=True):
    """Minimal sample sizes for each gamma and, given a dataset size, the
    gamma reached there and the divergence factor it implies.

    ``min_n`` always includes the lambda term; ``include_lambda`` only governs
    the gamma evaluated at ``dataset_size``.
    """
    min_n = tuple(
        (g, min_n_gamma(GammaQuery(degree, g, log_lambda, include_lambda=True))) for g in gammas
    )
    gamma0, need = min_n[0]
    if dataset_size is None:
        verdict = f"learning guaranteed at gamma={gamma0:g} with n={need}"
        return ConvergenceReport(degree, log_lambda, include_lambda, min_n, verdict=verdict)

    q = GammaQuery(degree, gamma0, log_lambda, include_lambda)
    reached = gamma_at(dataset_size, q)
    div = generalization_divergence(dataset_size, delta, reached) if reached > 0 else None
    if dataset_size >= need:
        verdict = f"learning guaranteed at gamma={gamma0:g} with n={dataset_size} (requires n>={need})"
    else:
        verdict = f"insufficient sample: n={dataset_size} < {need} required for gamma={gamma0:g}"
    return ConvergenceReport(
        degree, log_lambda, include_lambda, min_n, dataset_size, reached, div, verdict
    )
