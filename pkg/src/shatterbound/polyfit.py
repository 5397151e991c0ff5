"""Least-squares quadratic fits with residual diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FitError


@dataclass(frozen=True)
class QuadraticFit:
    """Coefficients of ``a2*x**2 + a1*x + a0`` plus fit diagnostics.

    ``error_pct`` is the mean absolute percentage error with the denominator
    floored at 1, so it stays finite when some targets are zero.
    """

    a2: float
    a1: float
    a0: float
    rss: float = 0.0
    error_pct: float = 0.0
    m: int = 0

    def __call__(self, x):
        return evaluate(self, x)

    @property
    def coefficients(self):
        return (self.a2, self.a1, self.a0)

    def positive_from(self):
        """Smallest integer n >= 1 with ``fit(m) > 0`` for every m >= n.

        Returns None when the polynomial is not eventually positive.
        """
        a2, a1, a0 = self.coefficients
        if a2 < 0 or (a2 == 0 and (a1 < 0 or (a1 == 0 and a0 <= 0))):
            return None
        lower = upper = None  # real roots
        if a2 == 0 and a1 > 0:
            lower = upper = -a0 / a1
        elif a2 > 0 and a1 * a1 - 4 * a2 * a0 >= 0:
            s = math.sqrt(a1 * a1 - 4 * a2 * a0)
            lower, upper = (-a1 - s) / (2 * a2), (-a1 + s) / (2 * a2)
        if upper is None or upper < 1:
            return 1
        n = math.floor(upper) + 1
        # the float root can land one step off either way
        while evaluate(self, n) <= 0:
            n += 1
        while n - 1 >= 1 and n - 1 > lower and evaluate(self, n - 1) > 0:
            n -= 1
        return n

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                a2=float(d["a2"]),
                a1=float(d["a1"]),
                a0=float(d["a0"]),
                rss=float(d.get("rss", 0.0)),
                error_pct=float(d.get("error_pct", 0.0)),
                m=int(d.get("m", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FitError(f"malformed fit record {d!r}: {exc}") from exc


def evaluate(fit, x):
    return (fit.a2 * x + fit.a1) * x + fit.a0


def fit_quadratic(data):
    """Ordinary least-squares degree-2 fit to ``(x, y)`` pairs."""
    arr = np.asarray(list(data), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError("expected a sequence of (x, y) pairs")
    if not np.all(np.isfinite(arr)):
        raise FitError("non-finite values in fit data")
    x, y = arr[:, 0], arr[:, 1]
    if np.unique(x).size < 3:
        raise FitError("need at least 3 distinct x values for a quadratic fit")

    # center and scale x so the Vandermonde columns are well conditioned,
    # then map the coefficients back
    mu = x.mean()
    s = np.abs(x - mu).max()
    t = (x - mu) / s
    design = np.column_stack([t * t, t, np.ones_like(t)])
    q, r = np.linalg.qr(design)
    c2, c1, c0 = np.linalg.solve(r, q.T @ y)
    a2 = c2 / (s * s)
    a1 = c1 / s - 2 * c2 * mu / (s * s)
    a0 = c0 - c1 * mu / s + c2 * mu * mu / (s * s)

    fitted = design @ np.array([c2, c1, c0])
    resid = y - fitted
    rss = float(resid @ resid)
    error_pct = float(100.0 * np.mean(np.abs(resid) / np.maximum(np.abs(y), 1.0)))
    return QuadraticFit(float(a2), float(a1), float(a0), rss, error_pct, len(x))
