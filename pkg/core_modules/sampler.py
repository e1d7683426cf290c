# sampler.py
# Exact samplers: unconditional GW trees, conditional (size-n) GW trees and
# the size-biased (Kesten) tree truncated at a given depth

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from errors import DomainError, ResourceGuardError, UnsupportedSupportError, invariant
from offspring import require_size, size_biased
from tree_core import from_degrees

logger = logging.getLogger(__name__)

ALGORITHM_ID = 'PCG64'
MASK64 = (1 << 64) - 1

SAMPLER_DEFAULTS = {
    'max_attempts': 10**7,
    'unconditional_cap': 10**7,
    'multiset_max_support': 3,
}


@dataclass(frozen=True)
class Overflow:
    """Unconditional tree that reached the node cap; its size is at least `size_at_least`"""

    size_at_least: int


@dataclass(frozen=True)
class SizeBiasedTree:
    tree: object
    spine: np.ndarray
    censored: bool


def splitmix64(x):
    """The splitmix64 finaliser on Python ints"""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def substream_seed(master, index):
    """Seed of replication `index` under `master`: splitmix64(splitmix64(master) xor index)"""
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(index) & MASK64))


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def cycle_rotate(increments):
    """The unique rotation of a -1-sum walk whose proper prefix sums stay >= 0"""
    x = np.asarray(increments, dtype=np.int64)
    if x.size == 0 or x.min() < -1:
        raise DomainError("increments must be non-empty with every entry >= -1")
    if x.sum() != -1:
        raise DomainError(f"increments must sum to -1, got {int(x.sum())}")

    # start right after the leftmost minimum of the prefix sums
    start = int(np.argmin(np.cumsum(x))) + 1
    rotated = np.roll(x, -start)

    prefix = np.cumsum(rotated)
    invariant(bool(np.all(prefix[:-1] >= 0)) and prefix[-1] == -1,
              "cycle-lemma rotation is not a valid Lukasiewicz path")
    return rotated


def _tree_from_increments(increments):
    return from_degrees(cycle_rotate(increments) + 1)


def sample_conditional_rejection(dist, n, rng, max_attempts=None):
    """Exact tau_n: draw n i.i.d. degrees until they sum to n - 1, then rotate"""
    require_size(dist, n)
    max_attempts = max_attempts or SAMPLER_DEFAULTS['max_attempts']
    values = np.arange(dist.probs.size)

    for attempt in range(1, max_attempts + 1):
        draws = rng.choice(values, size=n, p=dist.probs)
        if draws.sum() == n - 1:
            logger.debug("rejection sampler accepted after %d attempts (n=%d)", attempt, n)
            return _tree_from_increments(draws - 1)

    raise ResourceGuardError(f"rejection sampler exceeded {max_attempts} attempts for n={n}")


def multiset_count_law(dist, n):
    """Exact law of the degree-count vector of tau_n for supports of <= 3 values

    Returns (support, counts, probabilities) where counts[r] is a vector of
    multiplicities aligned with support.
    """
    support = dist.support
    if support.size > SAMPLER_DEFAULTS['multiset_max_support']:
        raise UnsupportedSupportError(
            f"multiset sampler needs at most 3 support values, {dist.name} has {support.size}")
    require_size(dist, n)

    positive = support[support > 0]
    if positive.size == 1:
        (b,) = positive
        top = np.array([(n - 1) // b])
        counts = np.column_stack([n - top, top])
    else:
        b, c = positive
        # one free parameter: j copies of the largest degree
        j = np.arange((n - 1) // c + 1)
        rest = n - 1 - c * j
        ok = rest % b == 0
        j, middle = j[ok], rest[ok] // b
        zeros = n - middle - j
        ok = zeros >= 0
        counts = np.column_stack([zeros[ok], middle[ok], j[ok]])

    log_p = np.log(dist.probs[support])
    log_w = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + (counts * log_p).sum(axis=1)
    return support, counts, np.exp(log_w - logsumexp(log_w))


def sample_conditional_multiset(dist, n, rng):
    """Exact tau_n from the exact degree-count law, a uniform shuffle and the cycle lemma"""
    support, counts, probs = multiset_count_law(dist, n)
    row = counts[rng.choice(len(probs), p=probs)]
    degrees = np.repeat(support, row)
    rng.shuffle(degrees)
    return _tree_from_increments(degrees - 1)


def sample_conditional(dist, n, rng, method='auto'):
    """Dispatch: multiset for small supports, rejection otherwise"""
    if method == 'auto':
        method = 'multiset' if dist.support.size <= SAMPLER_DEFAULTS['multiset_max_support'] else 'rejection'
    if method == 'multiset':
        return sample_conditional_multiset(dist, n, rng)
    if method == 'rejection':
        return sample_conditional_rejection(dist, n, rng)
    raise UnsupportedSupportError(f"unknown sampling method {method!r}")


def _grow_levels(dist, rng, cap=None, max_depth=None, keep=True):
    """Breadth-first generation, one vectorised draw per level

    Returns (bfs_degrees or None, size, censored); size is None on overflow.
    """
    values = np.arange(dist.probs.size)
    levels = []
    width, total, depth = 1, 1, 0
    censored = False

    while width:
        kids = rng.choice(values, size=width, p=dist.probs)
        if max_depth is not None and depth == max_depth:
            censored = bool(kids.any())
            if keep:
                levels.append(np.zeros(width, dtype=values.dtype))
            break
        if keep:
            levels.append(kids)
        width = int(kids.sum())
        total += width
        depth += 1
        if cap is not None and total >= cap:
            return None, None, censored

    bfs = np.concatenate(levels) if keep else None
    return bfs, total, censored


def _bfs_to_preorder(bfs_degrees):
    """Reorder breadth-first degrees into preorder"""
    degrees = bfs_degrees.tolist()
    first = (np.cumsum(bfs_degrees) - bfs_degrees + 1).tolist()
    order = []
    stack = [0]
    while stack:
        v = stack.pop()
        order.append(v)
        d = degrees[v]
        if d:
            s = first[v]
            stack.extend(range(s + d - 1, s - 1, -1))
    return bfs_degrees[np.asarray(order)]


def sample_unconditional(dist, rng, cap=None):
    """Unconditional GW tree, or Overflow once cap nodes have been generated"""
    cap = cap or SAMPLER_DEFAULTS['unconditional_cap']
    if cap < 1:
        raise DomainError(f"cap must be at least 1, got {cap}")
    bfs, size, _ = _grow_levels(dist, rng, cap=cap)
    if size is None:
        return Overflow(cap)
    return from_degrees(_bfs_to_preorder(bfs))


def unconditional_size(dist, rng, cap=None):
    """Total progeny only; Overflow when it reaches cap"""
    cap = cap or SAMPLER_DEFAULTS['unconditional_cap']
    _, size, _ = _grow_levels(dist, rng, cap=cap, keep=False)
    return Overflow(cap) if size is None else size


def sample_size_biased_truncated(dist, max_depth, rng):
    """Kesten's size-biased tree cut at max_depth, with its spine in preorder"""
    if max_depth < 0:
        raise DomainError(f"max_depth must be non-negative, got {max_depth}")
    biased = size_biased(dist)
    values = np.arange(biased.size)

    spine_degrees, left_sizes, blocks_left, blocks_right = [], [], [], []
    censored = False
    for d in range(max_depth):
        zeta = int(rng.choice(values, p=biased))
        position = int(rng.integers(zeta))
        subtrees = []
        for _ in range(zeta - 1):
            bfs, _, cut = _grow_levels(dist, rng, max_depth=max_depth - d - 1)
            censored |= cut
            subtrees.append(_bfs_to_preorder(bfs))
        spine_degrees.append(zeta)
        blocks_left.append(subtrees[:position])
        blocks_right.append(subtrees[position:])
        left_sizes.append(sum(s.size for s in subtrees[:position]))

    # assemble from the deepest spine node upwards
    pieces = [np.zeros(1, dtype=values.dtype)]
    for d in reversed(range(max_depth)):
        pieces = [np.array([spine_degrees[d]])] + blocks_left[d] + pieces + blocks_right[d]
    tree = from_degrees(np.concatenate(pieces))

    spine = np.zeros(max_depth + 1, dtype=np.int64)
    for d in range(max_depth):
        spine[d + 1] = spine[d] + 1 + left_sizes[d]
    return SizeBiasedTree(tree=tree, spine=spine, censored=censored)
