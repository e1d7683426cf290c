# tree_core.py
# Ordered rooted trees stored as preorder degree sequences, with derived
# arrays (parent, depth, subtree size) and the Lukasiewicz / contour encodings

import logging
import re

import numpy as np

from errors import ConfigurationError, MalformedTreeError

logger = logging.getLogger(__name__)

INDEX_DTYPE = np.int32
GWTREE_HEADER = re.compile(r"^# gwtree v1 n=(\d+) dist=(\S+) seed=(\d+)(?: algorithm=(\S+))?\s*$")


class OrderedTree:
    """Ordered rooted tree in preorder (structure-of-arrays)

    Node i is the i-th node in preorder (0-based); parent[0] = -1.
    """

    def __init__(self, degrees, parent, depth, subtree_size):
        self.degrees = degrees
        self.parent = parent
        self.depth = depth
        self.subtree_size = subtree_size
        self.n = int(degrees.size)
        self._levels = None

        for array in (self.degrees, self.parent, self.depth, self.subtree_size):
            array.setflags(write=False)

        self.first_child = np.where(degrees > 0, np.arange(1, self.n + 1), -1).astype(INDEX_DTYPE)
        following = np.arange(self.n) + subtree_size
        sibling = np.full(self.n, -1, dtype=INDEX_DTYPE)
        inside = following < self.n
        candidates = np.flatnonzero(inside)
        same_parent = parent[following[candidates]] == parent[candidates]
        sibling[candidates[same_parent]] = following[candidates[same_parent]]
        sibling[0] = -1
        self.next_sibling = sibling

    @classmethod
    def from_degrees(cls, seq):
        return from_degrees(seq)

    def children(self, v):
        """Children of v in preorder"""
        out = []
        child = int(self.first_child[v])
        while child != -1:
            out.append(child)
            child = int(self.next_sibling[child])
        return out

    def levels(self):
        """Node indices grouped by depth, each group in preorder"""
        if self._levels is None:
            order = np.argsort(self.depth, kind='stable')
            counts = np.bincount(self.depth)
            self._levels = np.split(order, np.cumsum(counts)[:-1])
        return self._levels

    def __eq__(self, other):
        if not isinstance(other, OrderedTree):
            return NotImplemented
        return np.array_equal(self.degrees, other.degrees)

    def __hash__(self):
        return hash(self.degrees.tobytes())

    def __repr__(self):
        return f"OrderedTree(n={self.n}, height={height(self)})"


def from_degrees(seq):
    """Validate a preorder degree sequence and build the tree in O(n)"""
    degrees = np.asarray(seq)
    if degrees.ndim != 1 or degrees.size == 0:
        raise MalformedTreeError("degree sequence must be non-empty", index=None)
    if not np.issubdtype(degrees.dtype, np.integer):
        if not np.all(np.equal(np.mod(degrees, 1), 0)):
            raise MalformedTreeError("degrees must be integers", index=None)
    degrees = degrees.astype(INDEX_DTYPE)
    n = degrees.size

    negative = np.flatnonzero(degrees < 0)
    if negative.size:
        raise MalformedTreeError(f"negative degree at node {negative[0]}", index=int(negative[0]))

    walk = np.cumsum(degrees.astype(np.int64) - 1)
    early = np.flatnonzero(walk[:-1] < 0)
    if early.size:
        i = int(early[0])
        raise MalformedTreeError(
            f"Lukasiewicz path reaches -1 after node {i}, before the last node {n - 1}", index=i)
    if walk[-1] != -1:
        raise MalformedTreeError(
            f"degrees sum to {int(walk[-1]) + n}, expected n - 1 = {n - 1}", index=n - 1)

    parent, depth = _scan_preorder(degrees.tolist())
    parent = np.asarray(parent, dtype=INDEX_DTYPE)
    depth = np.asarray(depth, dtype=INDEX_DTYPE)
    subtree_size = _subtree_sizes(parent, depth)
    return OrderedTree(degrees, parent, depth, subtree_size)


def _scan_preorder(degrees):
    """Parent and depth of every node in one pass with an explicit stack"""
    n = len(degrees)
    parent = [-1] * n
    depth = [0] * n
    open_nodes = []
    slots = []
    for i in range(n):
        if i:
            p = open_nodes[-1]
            parent[i] = p
            depth[i] = depth[p] + 1
            slots[-1] -= 1
            if not slots[-1]:
                open_nodes.pop()
                slots.pop()
        if degrees[i]:
            open_nodes.append(i)
            slots.append(degrees[i])
    return parent, depth


def _subtree_sizes(parent, depth):
    """N(v) by accumulating levels from the deepest one up"""
    n = parent.size
    size = np.ones(n, dtype=np.int64)
    order = np.argsort(depth, kind='stable')
    levels = np.split(order, np.cumsum(np.bincount(depth))[:-1])
    for level in reversed(levels[1:]):
        # parents of a preorder-sorted level are sorted too
        parents = parent[level]
        starts = np.flatnonzero(np.r_[True, parents[1:] != parents[:-1]])
        size[parents[starts]] += np.add.reduceat(size[level], starts)
    return size.astype(INDEX_DTYPE)


def lukasiewicz_path(tree):
    """S_0..S_n with S_i = (xi_1 - 1) + ... + (xi_i - 1)"""
    return np.concatenate([[0], np.cumsum(tree.degrees.astype(np.int64) - 1)])


def contour_process(tree):
    """Depths D_0..D_{2n-2} along the depth-first walk"""
    depth = tree.depth.tolist()
    out = [0]
    for i in range(1, tree.n):
        out.extend(range(depth[i - 1] - 1, depth[i] - 2, -1))
        out.append(depth[i])
    out.extend(range(depth[-1] - 1, -1, -1))
    return np.asarray(out, dtype=np.int64)


def subtree_order_stats(tree, v):
    """(N_1(v), N_2(v), ...): child subtree sizes, largest first, ties in preorder"""
    kids = tree.children(v)
    sizes = [int(tree.subtree_size[c]) for c in kids]
    return tuple(sorted(sizes, key=lambda s: -s))


def fringe_counts(tree):
    """Z_1..Z_n where Z_k counts nodes whose subtree has k nodes"""
    return np.bincount(tree.subtree_size, minlength=tree.n + 1)[1:]


def height(tree):
    return int(tree.depth.max())


def format_gwtree(tree, dist_name, seed, algorithm_id=None):
    """The "gwtree v1" text: header line, then the preorder degrees"""
    if not re.fullmatch(r"\S+", str(dist_name)):
        raise ConfigurationError(f"distribution name {dist_name!r} must not contain whitespace")
    header = f"# gwtree v1 n={tree.n} dist={dist_name} seed={int(seed)}"
    if algorithm_id is not None:
        header += f" algorithm={algorithm_id}"
    return header + "\n" + ' '.join(map(str, tree.degrees.tolist())) + "\n"


def write_gwtree(path, tree, dist_name, seed, algorithm_id=None):
    """Write the "gwtree v1" format (header + preorder degrees)"""
    text = format_gwtree(tree, dist_name, seed, algorithm_id)
    with open(path, 'w') as f:
        f.write(text)
    logger.info("✅ tree of size %d written to %s", tree.n, path)


def read_gwtree(path):
    """Read a "gwtree v1" file; returns (tree, header dict)"""
    with open(path) as f:
        header = f.readline()
        body = f.readline()
    match = GWTREE_HEADER.match(header)
    if not match:
        raise ConfigurationError(f"{path}: not a gwtree v1 file (header {header.strip()!r})")
    n, dist_name, seed, algorithm_id = int(match.group(1)), match.group(2), int(match.group(3)), match.group(4)
    try:
        degrees = [int(token) for token in body.split()]
    except ValueError as exc:
        raise ConfigurationError(f"{path}: bad degree token: {exc}") from exc
    if len(degrees) != n:
        raise ConfigurationError(f"{path}: header says n={n} but {len(degrees)} degrees follow")
    return from_degrees(degrees), {'n': n, 'dist': dist_name, 'seed': seed, 'algorithm_id': algorithm_id}
