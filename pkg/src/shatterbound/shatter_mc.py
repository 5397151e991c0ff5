"""Monte Carlo estimation of the number of linear dichotomies of a point cloud.

A single affine neuron ``sign(x.w + b)`` labels each of ``n`` points; the
estimator draws many random hyperplanes and counts how many distinct label
vectors show up. It can only under-count, so two exact oracles live here too:
Cover's function-counting bound and an exhaustive LP-based enumeration.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError, ResourceError

CHUNK_TRIALS = 4096
MAX_POINT_ELEMENTS = 50_000_000
MAX_BRUTE_FORCE_N = 20

_POINTS_STREAM = 0
_TRIALS_STREAM = 1


@dataclass(frozen=True)
class EstimatorConfig:
    iter: int = 1000
    start: int = 1
    end: int = 100
    dims: int = 2
    average: float = 0.0
    stdev: float = 1.0
    min_value: float = -1.0
    max_value: float = 1.0
    seed: int = 1729
    # trials per sample size: T(n) = ceil(iter * n ** budget_power)
    budget_power: float = 1.5

    def __post_init__(self):
        if not isinstance(self.iter, int) or self.iter <= 0:
            raise ConfigError(f"iter must be a positive integer, got {self.iter!r}")
        if not isinstance(self.start, int) or self.start < 1:
            raise ConfigError(f"start must be >= 1, got {self.start!r}")
        if not isinstance(self.end, int) or self.end < self.start:
            raise ConfigError(f"end must be >= start, got end={self.end!r} start={self.start!r}")
        if not isinstance(self.dims, int) or self.dims < 1:
            raise ConfigError(f"dims must be >= 1, got {self.dims!r}")
        if not (math.isfinite(self.stdev) and self.stdev > 0):
            raise ConfigError(f"stdev must be > 0, got {self.stdev!r}")
        if not math.isfinite(self.average):
            raise ConfigError("average must be finite")
        if not (math.isfinite(self.min_value) and math.isfinite(self.max_value)):
            raise ConfigError("min_value and max_value must be finite")
        if not self.min_value < self.max_value:
            raise ConfigError(
                f"min_value must be < max_value, got {self.min_value!r} >= {self.max_value!r}"
            )
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (math.isfinite(self.budget_power) and self.budget_power >= 0):
            raise ConfigError(f"budget_power must be >= 0, got {self.budget_power!r}")

    def trials(self, n):
        if self.budget_power == 1:
            return self.iter * n
        return max(1, math.ceil(self.iter * n**self.budget_power))

    @property
    def budget_rule(self):
        return f"T(n) = ceil({self.iter} * n ** {self.budget_power:g})"

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ShatterCurve:
    entries: tuple
    dims: int
    config_digest: str
    budget_rule: str = ""
    trials: tuple = field(default=(), compare=False)

    @property
    def ns(self):
        return [n for n, _ in self.entries]

    @property
    def counts(self):
        return [c for _, c in self.entries]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _seed_sequence(seed, *key):
    return np.random.SeedSequence(seed, spawn_key=key)


def sample_points(config, n):
    """The point cloud used for sample size ``n``: n x dims i.i.d. Normal draws."""
    if n * config.dims > MAX_POINT_ELEMENTS:
        raise ResourceError(
            f"point set of {n} x {config.dims} exceeds the {MAX_POINT_ELEMENTS} element limit"
        )
    rng = np.random.Generator(np.random.Philox(_seed_sequence(config.seed, n, _POINTS_STREAM)))
    try:
        return rng.normal(config.average, config.stdev, size=(n, config.dims))
    except MemoryError as exc:
        raise ResourceError(f"cannot allocate point set of {n} x {config.dims}") from exc


def _chunk_patterns(augmented, seed, n, chunk, size, lo, hi):
    # w and b come from one (size, dims + 1) draw so a shorter chunk is a
    # prefix of a longer one; this keeps counts monotone in the trial budget
    rng = np.random.Generator(np.random.Philox(_seed_sequence(seed, n, _TRIALS_STREAM, chunk)))
    planes = rng.uniform(lo, hi, size=(size, augmented.shape[0]))
    return np.packbits(planes @ augmented >= 0, axis=1)


def _unique_rows(packed):
    packed = np.ascontiguousarray(packed)
    view = packed.view(np.dtype((np.void, packed.shape[1])))
    return np.unique(view).size


def count_dichotomies(points, trials, seed, n_key=None, min_value=-1.0, max_value=1.0, threads=1):
    """Number of distinct labelings produced by ``trials`` random hyperplanes.

    Trial ``t`` draws from a stream keyed by ``(seed, n_key, t // CHUNK_TRIALS)``,
    so the count does not depend on ``threads``.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    # rows: coordinates then a row of ones for the bias, contiguous for BLAS
    augmented = np.ascontiguousarray(np.vstack([points.T, np.ones((1, n))]))
    if n_key is None:
        n_key = n
    sizes = [CHUNK_TRIALS] * (trials // CHUNK_TRIALS)
    if trials % CHUNK_TRIALS:
        sizes.append(trials % CHUNK_TRIALS)

    def job(chunk):
        return _chunk_patterns(augmented, seed, n_key, chunk, sizes[chunk], min_value, max_value)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(c) for c in range(len(sizes))]
    if not parts:
        return 0
    return _unique_rows(np.concatenate(parts))


def estimate_shattering(config, threads=1, progress=None):
    """Run the estimator for every n in ``[config.start, config.end]``."""
    entries = []
    trials = []
    for n in range(config.start, config.end + 1):
        points = sample_points(config, n)
        t = config.trials(n)
        count = count_dichotomies(
            points, t, config.seed, n, config.min_value, config.max_value, threads
        )
        entries.append((n, count))
        trials.append(t)
        if progress is not None:
            progress(n, count)
    return ShatterCurve(
        tuple(entries), config.dims, config.digest(), config.budget_rule, tuple(trials)
    )


def cover_bound(n, d):
    """Maximum number of affine dichotomies of n points in general position in R^d.

    ``min(2**n, 2 * sum_{i=0..d} C(n-1, i))``, computed exactly.
    """
    if n < 1 or d < 1:
        raise ConfigError("cover_bound needs n >= 1 and d >= 1")
    if d >= n - 1:
        return 2**n
    return 2 * sum(math.comb(n - 1, i) for i in range(d + 1))


def log_cover_bound(n, d):
    """Natural log of :func:`cover_bound`; finite even when the integer overflows a float."""
    return math.log(cover_bound(n, d))


def is_linearly_separable(points, labels):
    """Exact LP feasibility test for ``y_i (x_i . w + b) >= 1``."""
    points = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float)
    if np.all(y > 0) or np.all(y < 0):
        return True
    n, d = points.shape
    a_ub = -y[:, None] * np.hstack([points, np.ones((n, 1))])
    res = linprog(
        np.zeros(d + 1),
        A_ub=a_ub,
        b_ub=-np.ones(n),
        bounds=[(None, None)] * (d + 1),
        method="highs",
    )
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise RuntimeError(f"LP solver failed: {res.message}")


def brute_force_dichotomy_count(points):
    """Count separable labelings by enumerating all 2**n of them."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n > MAX_BRUTE_FORCE_N:
        raise ResourceError(f"brute force enumeration limited to n <= {MAX_BRUTE_FORCE_N}, got {n}")
    if n == 0:
        return 1
    count = 0
    # a labeling and its complement are separable together, so fix the
    # first label and double
    for rest in product((1, -1), repeat=n - 1):
        if is_linearly_separable(points, (1,) + rest):
            count += 2
    return count
