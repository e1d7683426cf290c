# heavy_decomp.py
# Ranks, k-heavy trees, the heavy path, maximal distances and index-sequence
# pattern counts. Every pass is vectorised over one depth level at a time.

import logging
import re
from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError, DomainError, invariant
from tree_core import height

logger = logging.getLogger(__name__)

HEAVY_PATH = 'heavy_path'
BINARY_BLOCKS = 'binary_blocks'
BLOCKS_THEN_BIG = 'blocks_then_big'
ALL_GE2 = 'all_ge2'

PATTERN_KINDS = (HEAVY_PATH, BINARY_BLOCKS, BLOCKS_THEN_BIG, ALL_GE2)
DEAD = -1


class HeavyDecomposition:
    """Sibling ranks and maximal ancestral ranks of an ordered tree

    rank[v] is the position of v among its siblings sorted by subtree size
    (largest first, ties by preorder); rho_star[v] is the largest rank on the
    path from the root to v. Both are 0 at the root.
    """

    def __init__(self, tree, rank, rho_star):
        self.tree = tree
        self.rank = rank
        self.rho_star = rho_star
        self.rank.setflags(write=False)
        self.rho_star.setflags(write=False)

    def ranks(self):
        """Ranks of the non-root nodes in preorder"""
        return self.rank[1:]

    def __repr__(self):
        return f"HeavyDecomposition(n={self.tree.n}, max_rank={int(self.rank.max(initial=0))})"


@dataclass(frozen=True)
class HeavyPathProfile:
    nodes: np.ndarray
    length: int
    sizes: np.ndarray
    q_values: np.ndarray

    def q(self, ell):
        """Q_n(ell) = min{k : P_n(k) <= ell}, defined for ell >= 1"""
        if ell < 1:
            raise DomainError(f"Q_n is defined for ell >= 1, got {ell}")
        if ell > self.q_values.size:
            return 0
        return int(self.q_values[ell - 1])

    def q_run_lengths(self):
        """Q_n(1..n) as [value, run length] pairs"""
        q = self.q_values
        if q.size == 0:
            return []
        starts = np.flatnonzero(np.r_[True, q[1:] != q[:-1]])
        lengths = np.diff(np.r_[starts, q.size])
        return [[int(q[s]), int(c)] for s, c in zip(starts, lengths)]


@dataclass(frozen=True)
class PatternSpec:
    kind: str
    k: int = 0
    j: int = 3

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ConfigurationError(f"unknown pattern {self.kind!r}; choose one of {', '.join(PATTERN_KINDS)}")
        if self.k < 0:
            raise ConfigurationError(f"pattern block count must be >= 0, got {self.k}")
        if self.kind == BLOCKS_THEN_BIG and self.j < 3:
            raise ConfigurationError(f"blocks_then_big needs j >= 3, got {self.j}")

    @property
    def label(self):
        if self.kind == BINARY_BLOCKS:
            return f"{BINARY_BLOCKS}:{self.k}"
        if self.kind == BLOCKS_THEN_BIG:
            return f"{BLOCKS_THEN_BIG}:{self.k}:{self.j}"
        return self.kind


def parse_pattern(text):
    """'heavy_path', 'binary_blocks:K', 'blocks_then_big:K:J' or 'all_ge2'"""
    match = re.fullmatch(r"([a-z_0-9]+)(?::(\d+))?(?::(\d+))?", text.strip())
    if not match:
        raise ConfigurationError(f"cannot parse pattern {text!r}")
    kind, k, j = match.groups()
    if kind in (ALL_GE2, HEAVY_PATH):
        if k is not None:
            raise ConfigurationError(f"pattern {kind} takes no parameters")
        return PatternSpec(kind)
    if kind == BINARY_BLOCKS:
        if k is None or j is not None:
            raise ConfigurationError("binary_blocks needs exactly one parameter, e.g. binary_blocks:1")
        return PatternSpec(kind, int(k))
    if kind == BLOCKS_THEN_BIG:
        if k is None:
            raise ConfigurationError("blocks_then_big needs parameters, e.g. blocks_then_big:1:3")
        return PatternSpec(kind, int(k), int(j) if j is not None else 3)
    return PatternSpec(kind)


def compute(tree):
    """Ranks and maximal ancestral ranks in O(n log n)"""
    n = tree.n
    rank = np.zeros(n, dtype=np.int32)
    if n > 1:
        nodes = np.arange(1, n)
        sizes = tree.subtree_size[nodes].astype(np.int64)
        # group by parent, then size descending, then preorder
        order = np.lexsort((nodes, -sizes, tree.parent[nodes]))
        sorted_nodes = nodes[order]
        parents = tree.parent[sorted_nodes]
        starts = np.flatnonzero(np.r_[True, parents[1:] != parents[:-1]])
        counts = np.diff(np.r_[starts, sorted_nodes.size])
        rank[sorted_nodes] = np.arange(sorted_nodes.size) - np.repeat(starts, counts) + 1

    rho_star = rank.copy()
    for level in tree.levels()[1:]:
        rho_star[level] = np.maximum(rho_star[tree.parent[level]], rank[level])
    return HeavyDecomposition(tree, rank, rho_star)


def _decomposition(tree, decomposition):
    if decomposition is None:
        return compute(tree)
    invariant(decomposition.tree is tree or decomposition.tree == tree,
              "decomposition belongs to a different tree")
    return decomposition


def _require_k(k):
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")


def k_heavy_size(tree, k, decomposition=None):
    """Size of the k-heavy tree and its (ancestor-closed) membership mask"""
    _require_k(k)
    dec = _decomposition(tree, decomposition)
    mask = dec.rho_star <= k
    return int(mask.sum()), mask


def heavy_path(tree, decomposition=None):
    """Heavy path from the root with L_n, P_n(k) and Q_n(ell)"""
    dec = _decomposition(tree, decomposition)
    heavy_child = np.full(tree.n, -1, dtype=np.int64)
    first_ranked = np.flatnonzero(dec.rank == 1)
    heavy_child[tree.parent[first_ranked]] = first_ranked

    nodes = [0]
    while heavy_child[nodes[-1]] != -1:
        nodes.append(int(heavy_child[nodes[-1]]))
    nodes = np.asarray(nodes, dtype=np.int64)
    sizes = tree.subtree_size[nodes].astype(np.int64)

    # Q_n(ell) counts path levels whose subtree is still larger than ell
    ell = np.arange(1, tree.n + 1)
    q_values = sizes.size - np.searchsorted(sizes[::-1], ell, side='right')
    return HeavyPathProfile(nodes=nodes, length=int(nodes.size - 1), sizes=sizes, q_values=q_values)


def max_distance_to_k_heavy(tree, k, decomposition=None):
    """max over v outside the k-heavy tree of its distance to that tree"""
    _, mask = k_heavy_size(tree, k, decomposition)
    if mask.all():
        return 0
    # depth of the deepest ancestor inside the k-heavy tree
    anchor = np.where(mask, tree.depth, 0).astype(np.int64)
    for level in tree.levels()[1:]:
        outside = level[~mask[level]]
        anchor[outside] = anchor[tree.parent[outside]]
    return int((tree.depth[~mask] - anchor[~mask]).max())


def max_kth_subtree(tree, k, decomposition=None):
    """(max_v N_k(v), max_v N_{k+}(v)); N_{k+}(v) sums the child subtrees of rank >= k"""
    _require_k(k)
    dec = _decomposition(tree, decomposition)
    sizes = tree.subtree_size.astype(np.int64)

    kth = dec.rank == k
    max_nk = int(sizes[kth].max()) if kth.any() else 0

    tail = dec.rank >= k
    tail[0] = False
    if not tail.any():
        return max_nk, 0
    totals = np.bincount(tree.parent[tail], weights=sizes[tail], minlength=tree.n)
    return max_nk, int(totals.max())


def root_order_statistic(tree, k, decomposition=None):
    """N_k at the root (0 when the root has fewer than k children)"""
    _require_k(k)
    dec = _decomposition(tree, decomposition)
    hit = np.flatnonzero((dec.rank == k) & (tree.parent == 0))
    return int(tree.subtree_size[hit[0]]) if hit.size else 0


def _step(spec, state, rank):
    """Advance the pattern automaton one symbol down the tree"""
    alive = state != DEAD
    if spec.kind == ALL_GE2:
        return np.where(alive & (rank >= 2), 0, DEAD)

    k = spec.k
    accept = k + 1
    counting = alive & (state <= k)
    nxt = np.full(state.shape, DEAD, dtype=state.dtype)
    nxt = np.where(counting & (rank == 1), state, nxt)
    nxt = np.where(counting & (rank == 2) & (state + 1 <= k), state + 1, nxt)
    if spec.kind == BLOCKS_THEN_BIG:
        nxt = np.where(counting & (state == k) & (rank >= spec.j), accept, nxt)
        nxt = np.where(alive & (state == accept), accept, nxt)
    return nxt


def pattern_mask(tree, decomposition, pattern):
    """Boolean mask of nodes whose index sequence lies in the pattern language"""
    spec = parse_pattern(pattern) if isinstance(pattern, str) else pattern
    if not isinstance(spec, PatternSpec):
        raise ConfigurationError(f"unknown pattern {pattern!r}")
    dec = _decomposition(tree, decomposition)
    if spec.kind == HEAVY_PATH:
        spec = PatternSpec(BINARY_BLOCKS, 0)

    state = np.zeros(tree.n, dtype=np.int64)
    for level in tree.levels()[1:]:
        state[level] = _step(spec, state[tree.parent[level]], dec.rank[level])

    if spec.kind == ALL_GE2:
        return state == 0
    if spec.kind == BLOCKS_THEN_BIG:
        return state == spec.k + 1
    return state == spec.k


def pattern_count(tree, decomposition, pattern):
    return int(pattern_mask(tree, decomposition, pattern).sum())


def summarize(tree, kmax=4, patterns=None, decomposition=None):
    """Plain dict of the heavy statistics of one tree (CLI and experiment output)"""
    dec = _decomposition(tree, decomposition)
    profile = heavy_path(tree, dec)
    b, _ = k_heavy_size(tree, 2, dec)
    h = height(tree)
    patterns = patterns or ['heavy_path', 'binary_blocks:1', 'all_ge2']

    report = {
        'n': tree.n,
        'B': b,
        'L': profile.length,
        'H': h,
        'P': profile.sizes.tolist(),
        'Q': profile.q_run_lengths(),
        'maxdist': {str(k): max_distance_to_k_heavy(tree, k, dec) for k in range(1, kmax + 1)},
        'max_nk': {str(k): max_kth_subtree(tree, k, dec)[0] for k in range(2, kmax + 1)},
        'patterns': {parse_pattern(p).label: pattern_count(tree, dec, p) for p in patterns},
    }
    invariant(report['L'] <= h, "heavy path longer than the height")
    logger.debug("heavy summary: B=%d L=%d H=%d", b, profile.length, h)
    return report
