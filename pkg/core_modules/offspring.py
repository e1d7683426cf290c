# offspring.py
# Critical offspring laws, their derived constants, and exact distributions
# of the left-continuous random walk S_m = (xi_1 - 1) + ... + (xi_m - 1)

import logging
import math
from collections import OrderedDict, namedtuple
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import poisson

from errors import (ConfigurationError, DegenerateError, DomainError,
                    NonCriticalError, ResourceGuardError)

logger = logging.getLogger(__name__)

WALK_GUARD = 10_000
POISSON_TRUNCATION = 64
SUM_TOLERANCE = 1e-12
CRITICALITY_TOLERANCE = 1e-9
WALK_CACHE_SIZE = 64

NAMED_LAWS = {
    'catalan': lambda: [0.25, 0.5, 0.25],
    'full_binary': lambda: [0.5, 0.0, 0.5],
    'poisson1': lambda: poisson.pmf(np.arange(POISSON_TRUNCATION + 1), 1.0),
    'apollonian_ternary': lambda: [2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0],
}

ZkMoments = namedtuple('ZkMoments', ['mean', 'second_factorial_moment'])


@dataclass(frozen=True, eq=False)
class WalkPmf:
    """Exact law of S_m; values[i] = P(S_m = offset + i)"""

    m: int
    offset: int
    values: np.ndarray

    def prob(self, s):
        i = s - self.offset
        if i < 0 or i >= len(self.values):
            return 0.0
        return float(self.values[i])

    def total(self):
        return math.fsum(self.values)

    def support_values(self):
        return np.arange(self.offset, self.offset + len(self.values))


class OffspringDistribution:
    """A critical offspring law p_0..p_K with derived constants"""

    def __init__(self, probs, name='custom'):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise DomainError("offspring weights must be a non-empty sequence")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("offspring weights must be finite and non-negative")

        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise DomainError(f"offspring weights sum to {total!r}, expected 1")

        # Trailing zero weights carry no information
        last = int(np.flatnonzero(probs > 0)[-1])
        probs = probs[:last + 1].copy()
        probs.setflags(write=False)

        degrees = np.arange(probs.size)
        mean = math.fsum(degrees * probs)
        if abs(mean - 1.0) > CRITICALITY_TOLERANCE:
            raise NonCriticalError(f"offspring mean is {mean:.12g}; the law must be critical (mean 1)")

        sigma2 = math.fsum(degrees * degrees * probs) - 1.0
        if not sigma2 > 1e-12 or not math.isfinite(sigma2):
            raise DegenerateError(f"offspring variance is {sigma2:.3g}; need 0 < sigma^2 < inf")

        positive = degrees[(probs > 0) & (degrees > 0)]
        span = int(np.gcd.reduce(positive))

        self.name = name
        self.probs = probs
        self.mean = mean
        self.sigma2 = sigma2
        self.span = span
        self.alpha = span / (math.sqrt(sigma2) * math.sqrt(2.0 * math.pi))
        self._walk_cache = OrderedDict()

    @property
    def max_degree(self):
        return self.probs.size - 1

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @property
    def support(self):
        """Degrees with positive mass"""
        return np.flatnonzero(self.probs > 0)

    def describe(self):
        """Plain dict of the law and its constants (for JSON output)"""
        return {
            'name': self.name,
            'probs': [float(p) for p in self.probs],
            'mean': self.mean,
            'sigma2': self.sigma2,
            'span': self.span,
            'alpha': self.alpha,
        }

    def __eq__(self, other):
        if not isinstance(other, OffspringDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(tuple(self.probs.tolist()))

    def __repr__(self):
        return f"OffspringDistribution(name={self.name!r}, sigma2={self.sigma2:.6g}, span={self.span})"

    def __getstate__(self):
        state = self.__dict__.copy()
        state['_walk_cache'] = OrderedDict()
        return state


def make_named(name):
    """Canonical offspring law by name"""
    if name not in NAMED_LAWS:
        raise ConfigurationError(
            f"unknown distribution {name!r}; choose one of {', '.join(sorted(NAMED_LAWS))}")
    return OffspringDistribution(NAMED_LAWS[name](), name=name)


def from_weights(probs, name='custom'):
    """Validate user weights p_0, p_1, ... and build the law"""
    return OffspringDistribution(probs, name=name)


def parse_weights(text):
    """Parse a "p0,p1,..." string as given to --weights"""
    try:
        return [float(token) for token in text.split(',') if token.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse weights {text!r}: {exc}") from exc


def size_biased(dist):
    """The size-biased law (i p_i)_{i >= 0}"""
    return np.arange(dist.probs.size) * dist.probs


def second_moment(dist):
    """E[xi^2], which is also the mean of the size-biased law"""
    return 1.0 + dist.sigma2


def _convolve_step(values, dist):
    """One more step of the walk: new[j] = sum_d p_d old[j - d], Kahan-summed"""
    width = values.size + dist.max_degree
    total = np.zeros(width)
    compensation = np.zeros(width)
    support = dist.support
    # smallest weights first
    for d in support[np.argsort(dist.probs[support], kind='stable')]:
        term = np.zeros(width)
        term[d:d + values.size] = dist.probs[d] * values
        y = term - compensation
        t = total + y
        compensation = (t - total) - y
        total = t

    # Values beyond the float range underflow to exact zeros; drop them
    nonzero = np.flatnonzero(total)
    if nonzero.size:
        total = total[:nonzero[-1] + 1]
    return total


def walk_pmf(dist, m, guard=WALK_GUARD):
    """Exact law of S_m by iterated convolution of the step law xi - 1"""
    if m < 0:
        raise DomainError(f"step count must be non-negative, got {m}")
    if m > guard:
        raise ResourceGuardError(f"walk of {m} steps exceeds the guard {guard}; raise the guard explicitly")

    cache = dist._walk_cache
    if m in cache:
        cache.move_to_end(m)
        return cache[m]

    start_m, values = 0, np.array([1.0])
    lower = [k for k in cache if k < m]
    if lower:
        start_m = max(lower)
        values = cache[start_m].values

    for _ in range(start_m, m):
        values = _convolve_step(values, dist)

    values.setflags(write=False)
    result = WalkPmf(m=m, offset=-m, values=values)
    cache[m] = result
    if len(cache) > WALK_CACHE_SIZE:
        cache.popitem(last=False)
    return result


def walk_to_csv(walk, path=None):
    """Export a WalkPmf as CSV with columns s, probability"""
    df = pd.DataFrame({'s': walk.support_values(), 'probability': walk.values})
    if path is None:
        return df.to_csv(index=False)
    df.to_csv(path, index=False)
    logger.info("✅ walk pmf (m=%d) exported to %s", walk.m, path)
    return path


def gw_total_size_pmf(dist, n):
    """P(|T| = n) = P(S_n = -1) / n (Dwass)"""
    if n < 1:
        raise DomainError(f"tree size must be at least 1, got {n}")
    return walk_pmf(dist, n).prob(-1) / n


def forest_size_pmf(dist, k, n):
    """P(|T_1| + ... + |T_k| = n) = (k / n) P(S_n = -k)"""
    if k < 1 or n < k:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    return k / n * walk_pmf(dist, n).prob(-k)


def size_support(dist, nmax):
    """Exact I intersected with [1, nmax]

    n is in I iff n - 1 is a sum of positive support values (p_0 > 0 pads the
    remaining slots), so this is a coin-reachability table.
    """
    if nmax < 1:
        raise DomainError(f"nmax must be at least 1, got {nmax}")
    reachable = np.zeros(nmax, dtype=bool)
    reachable[0] = True
    for d in dist.support[dist.support > 0]:
        shift = int(d)
        # closure under +d by doubling the shift
        while shift < nmax:
            reachable[shift:] |= reachable[:-shift]
            shift *= 2
    return set((np.flatnonzero(reachable) + 1).tolist())


def in_support(dist, n):
    """True iff P(|T| = n) > 0"""
    return n >= 1 and n in size_support(dist, n)


def nearest_sizes(dist, n, count=2):
    """Valid sizes closest to n, for error messages"""
    support = sorted(size_support(dist, max(n, 1) + 4 * dist.max_degree + 4))
    return sorted(support, key=lambda s: (abs(s - n), s))[:count]


def require_size(dist, n):
    """Raise DomainError naming I when n is not a possible tree size"""
    if not in_support(dist, n):
        near = ', '.join(str(s) for s in sorted(nearest_sizes(dist, n)))
        raise DomainError(
            f"n={n} is not in I = {{n >= 1 : P(S_n = -1) > 0}} for {dist.name}; nearest valid sizes: {near}")


def expected_zk(dist, n, k):
    """E[Z_k] and E[Z_k (Z_k - 1)] for the conditional tree of size n"""
    if n < 1 or not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    p_n = walk_pmf(dist, n).prob(-1)
    if p_n <= 0:
        require_size(dist, n)

    p_k = walk_pmf(dist, k).prob(-1)
    # divide before multiplying so both factors stay O(1)
    mean = (n / k) * (p_k / p_n) * walk_pmf(dist, n - k).prob(0)

    second = 0.0
    if 2 * k <= n - 1:
        second = (n * (n - 2 * k + 1) / (k * k)) * (p_k / p_n) * p_k * walk_pmf(dist, n - 2 * k).prob(1)
    return ZkMoments(mean, second)


def aldous_fringe_ratio(dist, n, k):
    """E[Z_k] / (n P(|T| = k)); tends to 1 as n grows"""
    return expected_zk(dist, n, k).mean / (n * gw_total_size_pmf(dist, k))


def llt_approximation(dist, m, x):
    """Local-limit approximation (alpha / sqrt m) exp(-x^2 / (2 sigma^2 m))"""
    return dist.alpha / math.sqrt(m) * math.exp(-x * x / (2.0 * dist.sigma2 * m))


def hitting_probabilities(dist, nmax, guard=WALK_GUARD):
    """Array h with h[n] = P(S_n = -1) for n = 0..nmax, one convolution pass"""
    if nmax > guard:
        raise ResourceGuardError(f"walk of {nmax} steps exceeds the guard {guard}")
    out = np.zeros(nmax + 1)
    values = np.array([1.0])
    for m in range(1, nmax + 1):
        values = _convolve_step(values, dist)
        # S_m = -1 sits at index m - 1
        if m - 1 < values.size:
            out[m] = values[m - 1]
    return out


def size_tail(dist, t):
    """Exact P(|T| >= t)"""
    if t <= 1:
        return 1.0
    hits = hitting_probabilities(dist, t - 1)
    sizes = np.arange(1, t)
    return max(0.0, 1.0 - math.fsum(hits[1:] / sizes))


def size_tail_asymptotic(dist, t):
    """2 alpha / (h sqrt t), the tail of the total progeny"""
    return 2.0 * dist.alpha / (dist.span * math.sqrt(t))
