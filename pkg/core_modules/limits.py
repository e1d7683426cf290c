# limits.py
# Limit-law numerics: the Laplace exponent Phi, moments of the heavy-path
# limit, the theta law of the height and the heavy fragmentation of an excursion

import logging
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from errors import DomainError
from offspring import hitting_probabilities, size_biased

logger = logging.getLogger(__name__)

PHI_EPSABS = 1e-10
PHI_LIMIT = 200
THETA_TERMS = 30
SQRT_PI = math.sqrt(math.pi)

OrderStatisticLimit = namedtuple('OrderStatisticLimit', ['values', 'pmf', 'cdf', 'tail'])


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    n_points: int

    def slope_interval(self, confidence=0.95):
        """Two-sided t interval for the slope"""
        if self.n_points <= 2:
            return (self.slope, self.slope)
        half = stats.t.ppf(0.5 + confidence / 2.0, self.n_points - 2) * self.slope_stderr
        return (self.slope - half, self.slope + half)

    def as_dict(self):
        low, high = self.slope_interval()
        return {
            'slope': self.slope,
            'intercept': self.intercept,
            'r_squared': self.r_squared,
            'slope_stderr': self.slope_stderr,
            'slope_ci95': [low, high],
        }


@dataclass(frozen=True, eq=False)
class FragmentationTrace:
    """Heaviest superlevel component followed through half-integer thresholds"""

    levels: np.ndarray
    measures: np.ndarray
    t_infinity: float

    def zeta(self, ell):
        """First recorded level at which the tracked measure is at most ell"""
        hit = np.flatnonzero(self.measures <= ell)
        return float(self.levels[hit[0]]) if hit.size else self.t_infinity


def _phi_integrand(u, q):
    # x = 1 - u^2 removes the (1 - x)^(-3/2) singularity
    x = 1.0 - u * u
    return -math.expm1(q * math.log1p(-u * u)) * (4.0 / math.sqrt(2.0 * math.pi)) * x ** -1.5 / (u * u)


def phi(q):
    """Phi(q) = int_{1/2}^1 (1 - x^q) 2 (2 pi x^3 (1 - x)^3)^(-1/2) dx by adaptive quadrature"""
    if not q > 0:
        raise DomainError(f"phi needs q > 0, got {q}")
    value, error = integrate.quad(_phi_integrand, 0.0, 1.0 / math.sqrt(2.0), args=(q,),
                                  epsabs=PHI_EPSABS, epsrel=1e-12, limit=PHI_LIMIT)
    if error > 10 * PHI_EPSABS:
        logger.warning("⚠️ phi(%g) quadrature error estimate %.2e", q, error)
    return value


def phi_hypergeometric(q):
    """Closed form (4 / sqrt pi) 2F1(-1/2, 3/2 - q; 1/2; 1/2)"""
    if not q > 0:
        raise DomainError(f"phi needs q > 0, got {q}")
    return 4.0 / SQRT_PI * float(special.hyp2f1(-0.5, 1.5 - q, 0.5, 0.5))


def t_infinity_moment(k):
    """E[T^k] = k! / (Phi(1/2) Phi(1) ... Phi(k/2))"""
    if k < 0 or int(k) != k:
        raise DomainError(f"moment order must be a non-negative integer, got {k}")
    k = int(k)
    denominator = math.prod(phi(j / 2.0) for j in range(1, k + 1))
    return math.factorial(k) / denominator


def heavy_path_moment_limit(dist, k):
    """lim E[(L_n / sqrt n)^k] = (2 / sigma)^k E[T^k]"""
    return (2.0 / dist.sigma) ** k * t_infinity_moment(k)


def theta_cdf(x):
    """CDF of the theta law sum_j (1 - 2 j^2 x^2) exp(-j^2 x^2); accepts scalars or arrays

    Uses the dual series (4 pi^(5/2) / x^3) sum_{j>=1} j^2 exp(-pi^2 j^2 / x^2)
    below sqrt(pi), where the direct series cancels badly.
    """
    values = np.asarray(x, dtype=float)
    if np.any(~(values > 0)):
        raise DomainError("theta_cdf needs x > 0")
    flat = values.reshape(-1, 1)
    j2 = np.arange(1, THETA_TERMS + 1, dtype=float) ** 2

    with np.errstate(over='ignore', under='ignore', divide='ignore'):
        direct = 1.0 + 2.0 * np.sum((1.0 - 2.0 * j2 * flat ** 2) * np.exp(-j2 * flat ** 2), axis=1)
        dual = 4.0 * math.pi ** 2.5 / flat[:, 0] ** 3 * np.sum(j2 * np.exp(-math.pi ** 2 * j2 / flat ** 2), axis=1)
    out = np.clip(np.where(flat[:, 0] >= SQRT_PI, direct, dual), 0.0, 1.0)

    if values.ndim == 0:
        return float(out[0])
    return out.reshape(values.shape)


def _runs(mask):
    """(start, end) index pairs of the maximal True runs"""
    padded = np.r_[False, mask, False].astype(np.int8)
    edges = np.diff(padded)
    return np.flatnonzero(edges == 1), np.flatnonzero(edges == -1) - 1


def heavy_fragmentation(excursion, level_step, dx=1.0):
    """Follow the longest component of {f > t} for t = (i + 1/2) level_step

    A component is measured by the grid cells it meets times dx; on a tree
    contour the component of a depth-d node v above d - 1/2 measures 2 N(v).
    """
    f = np.asarray(excursion, dtype=float)
    if f.ndim != 1 or f.size < 1:
        raise DomainError("excursion must be a non-empty one-dimensional table")
    if f[0] != 0 or f[-1] != 0 or np.any(f < 0) or not np.all(np.isfinite(f)):
        raise DomainError("excursion must be finite, non-negative and start and end at 0")
    if not level_step > 0:
        raise DomainError(f"level_step must be positive, got {level_step}")

    levels = [0.0]
    measures = [(f.size - 1) * dx]
    lo, hi = 0, f.size - 1
    steps = 0
    while True:
        t = (steps + 0.5) * level_step
        starts, ends = _runs(f[lo:hi + 1] > t)
        if not starts.size:
            break
        cells = ends - starts + 2
        best = int(np.argmax(cells))
        levels.append(t)
        measures.append(float(cells[best]) * dx)
        lo, hi = lo + int(starts[best]) - 1, lo + int(ends[best]) + 1
        steps += 1

    return FragmentationTrace(levels=np.asarray(levels), measures=np.asarray(measures),
                              t_infinity=steps * level_step)


def fit_power_law(points):
    """Least squares on (log x, log y)"""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DomainError("fit_power_law needs at least 3 (x, y) pairs")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("fit_power_law needs positive finite points")
    log_x, log_y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(log_x) == 0:
        raise DomainError("fit_power_law needs at least two distinct x values")

    fit = stats.linregress(log_x, log_y)
    return PowerLawFit(slope=float(fit.slope), intercept=float(fit.intercept),
                       r_squared=float(fit.rvalue ** 2), slope_stderr=float(fit.stderr),
                       n_points=int(pts.shape[0]))


def root_order_statistic_limit(dist, i, smax):
    """Law of N_i at the root in the local limit, i >= 2, on 0..smax

    The root of the size-biased tree has zeta children; one carries the
    infinite spine and the other zeta - 1 root independent GW trees, so N_i is
    the (i - 1)-th largest of zeta - 1 i.i.d. total progenies.
    """
    if i < 2:
        raise DomainError(f"the local limit of N_1 is infinite; need i >= 2, got {i}")
    if smax < 1:
        raise DomainError(f"smax must be at least 1, got {smax}")

    hits = hitting_probabilities(dist, smax)
    sizes = np.arange(1, smax + 1)
    # G[s] = P(|T| <= s)
    g = np.clip(np.r_[0.0, np.cumsum(hits[1:] / sizes)], 0.0, 1.0)

    biased = size_biased(dist)
    cdf = np.zeros(smax + 1)
    for z in np.flatnonzero(biased > 0):
        # at most i - 2 of the z - 1 finite subtrees exceed s
        cdf += biased[z] * stats.binom.cdf(i - 2, z - 1, 1.0 - g)
    cdf = np.minimum(cdf, 1.0)
    pmf = np.diff(np.r_[0.0, cdf])
    return OrderStatisticLimit(values=np.arange(smax + 1), pmf=pmf, cdf=cdf, tail=max(0.0, 1.0 - cdf[-1]))
