# exact_oracle.py
# Brute-force enumeration of weighted ordered trees of a given size: exact
# conditional laws of tree statistics, used as ground truth in tests

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import heavy_decomp
from errors import ConfigurationError, DomainError, ResourceGuardError
from offspring import expected_zk, gw_total_size_pmf, require_size, size_support
from tree_core import fringe_counts, from_degrees, height

logger = logging.getLogger(__name__)

ENUMERATION_GUARD = 16
IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """Exact law of a statistic under tau_n; total is P(|T| = n)"""

    statistic: str
    n: int
    support: np.ndarray
    probs: np.ndarray
    total: float

    def prob(self, value):
        hit = np.flatnonzero(self.support == value)
        return float(self.probs[hit[0]]) if hit.size else 0.0

    def mean(self):
        return math.fsum(self.support * self.probs)

    def as_dict(self):
        return {int(v): float(p) for v, p in zip(self.support, self.probs)}

    def to_frame(self):
        return pd.DataFrame({'value': self.support, 'probability': self.probs})

    def to_csv(self, path=None):
        df = self.to_frame()
        if path is None:
            return df.to_csv(index=False)
        df.to_csv(path, index=False)
        logger.info("✅ exact law of %s (n=%d) written to %s", self.statistic, self.n, path)
        return path


@dataclass
class IdentityReport:
    dist: str
    nmax: int
    sizes: list
    max_discrepancy: float = 0.0
    failures: list = field(default_factory=list)
    tolerance: float = IDENTITY_TOLERANCE

    @property
    def passed(self):
        return not self.failures

    def as_dict(self):
        return {
            'dist': self.dist,
            'nmax': self.nmax,
            'sizes': self.sizes,
            'max_discrepancy': self.max_discrepancy,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'failures': self.failures,
        }


def _degree_sequences(support, n):
    """Preorder degree sequences of size n by backtracking on the Lukasiewicz walk"""
    seq = []

    def extend(i, walk):
        if i == n:
            yield list(seq)
            return
        remaining = n - i - 1
        for d in support:
            nxt = walk + d - 1
            if remaining == 0:
                ok = nxt == -1
            else:
                # each remaining node lowers the walk by at most one
                ok = 0 <= nxt <= remaining - 1
            if ok:
                seq.append(d)
                yield from extend(i + 1, nxt)
                seq.pop()

    yield from extend(0, 0)


def enumerate_trees(dist, n):
    """Every tree of size n with positive weight prod p_{xi_i}, each exactly once"""
    if n < 1:
        raise DomainError(f"tree size must be at least 1, got {n}")
    if n > ENUMERATION_GUARD:
        raise ResourceGuardError(f"enumeration of n={n} exceeds the guard {ENUMERATION_GUARD}")
    support = dist.support.tolist()
    probs = dist.probs
    for seq in _degree_sequences(support, n):
        weight = math.prod(float(probs[d]) for d in seq)
        yield from_degrees(seq), weight


def _statistic(name):
    """Resolve 'height', 'z_k:3', 'pattern:binary_blocks:1', ... to tree -> value"""
    base, _, arg = name.partition(':')

    def k_arg():
        try:
            k = int(arg)
        except ValueError:
            raise ConfigurationError(f"statistic {base} needs an integer parameter, e.g. {base}:2") from None
        if k < 1:
            raise ConfigurationError(f"statistic parameter must be >= 1, got {k}")
        return k

    if base == 'heavy_path_length':
        return lambda t, dec: heavy_decomp.heavy_path(t, dec).length
    if base == 'two_heavy_size':
        return lambda t, dec: heavy_decomp.k_heavy_size(t, 2, dec)[0]
    if base == 'height':
        return lambda t, dec: height(t)
    if base == 'z_k':
        k = k_arg()
        return lambda t, dec: int(fringe_counts(t)[k - 1]) if k <= t.n else 0
    if base == 'max_distance_k':
        k = k_arg()
        return lambda t, dec: heavy_decomp.max_distance_to_k_heavy(t, k, dec)
    if base == 'n_k_root':
        k = k_arg()
        return lambda t, dec: heavy_decomp.root_order_statistic(t, k, dec)
    if base == 'pattern':
        spec = heavy_decomp.parse_pattern(arg)
        return lambda t, dec: heavy_decomp.pattern_count(t, dec, spec)
    raise ConfigurationError(
        f"unknown statistic {name!r}; choose heavy_path_length, two_heavy_size, height, "
        "z_k:K, max_distance_k:K, n_k_root:K or pattern:P")


def exact_statistic_distribution(dist, n, statistic):
    """Exact conditional law of a named statistic under tau_n"""
    fn = _statistic(statistic)
    require_size(dist, n)

    mass = defaultdict(list)
    weights = []
    for tree, weight in enumerate_trees(dist, n):
        value = fn(tree, heavy_decomp.compute(tree))
        mass[value].append(weight)
        weights.append(weight)

    total = math.fsum(weights)
    support = np.array(sorted(mass))
    probs = np.array([math.fsum(mass[v]) / total for v in sorted(mass)])
    return ExactDistribution(statistic=statistic, n=n, support=support, probs=probs, total=total)


def shape_distribution(dist, n):
    """Exact law of the tree itself, keyed by degree tuple"""
    require_size(dist, n)
    pairs = [(tuple(t.degrees.tolist()), w) for t, w in enumerate_trees(dist, n)]
    total = math.fsum(w for _, w in pairs)
    return {shape: w / total for shape, w in pairs}


def verify_identities(dist, nmax):
    """Compare enumeration with the size law and the exact fringe moments for every n in I up to nmax"""
    if nmax > ENUMERATION_GUARD:
        raise ResourceGuardError(f"nmax={nmax} exceeds the enumeration guard {ENUMERATION_GUARD}")
    sizes = sorted(size_support(dist, nmax))
    report = IdentityReport(dist=dist.name, nmax=nmax, sizes=sizes)

    def check(n, what, got, expected):
        gap = abs(got - expected)
        report.max_discrepancy = max(report.max_discrepancy, gap)
        if gap > IDENTITY_TOLERANCE:
            report.failures.append({'n': n, 'check': what, 'enumerated': got, 'formula': expected})

    for n in sizes:
        weights, fringes = [], []
        for tree, weight in enumerate_trees(dist, n):
            weights.append(weight)
            fringes.append(fringe_counts(tree))
        total = math.fsum(weights)
        check(n, 'size_pmf', total, gw_total_size_pmf(dist, n))

        z = np.array(fringes, dtype=float)
        w = np.array(weights) / total
        for k in range(1, n + 1):
            exact = expected_zk(dist, n, k)
            zk = z[:, k - 1]
            check(n, f'E[Z_{k}]', math.fsum(w * zk), exact.mean)
            check(n, f'E[Z_{k}(Z_{k}-1)]', math.fsum(w * zk * (zk - 1)), exact.second_factorial_moment)

    if report.passed:
        logger.info("✅ identities hold for %s up to n=%d (max gap %.2e)", dist.name, nmax, report.max_discrepancy)
    else:
        logger.warning("⚠️ %d identity checks failed for %s", len(report.failures), dist.name)
    return report
