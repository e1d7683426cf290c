# apollonian.py
# Uniform random Apollonian networks built from their ternary dual tree, and
# long simple paths that follow the 2-heavy part of the subdivision tree

import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np
import pandas as pd

from errors import DomainError, invariant
from offspring import make_named
from sampler import sample_conditional_multiset
from tree_core import from_degrees

logger = logging.getLogger(__name__)

ROOT_CORNERS = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class ApollonianNetwork:
    """Triangulation with one row of `triangles` per dual-tree node

    triangles[v] holds the sorted corners of the triangle of dual node v;
    centers[v] is the vertex inserted into it, or -1 for a leaf.
    """

    m: int
    num_vertices: int
    edges: np.ndarray
    triangles: np.ndarray
    centers: np.ndarray
    dual: object

    def graph(self):
        return to_networkx(self)


@dataclass(frozen=True)
class SimplePath:
    vertices: tuple
    selected_internal: int

    def __len__(self):
        return len(self.vertices)


def build_from_dual(tree):
    """Replay the subdivisions of a {0,3}-degree dual tree in preorder"""
    degrees = tree.degrees
    bad = np.flatnonzero((degrees != 0) & (degrees != 3))
    if bad.size:
        raise DomainError(f"dual tree must have degrees in {{0, 3}}; node {bad[0]} has {degrees[bad[0]]}")

    n = tree.n
    size = tree.subtree_size.tolist()
    triangles = np.zeros((n, 3), dtype=np.int64)
    centers = np.full(n, -1, dtype=np.int64)
    triangles[0] = ROOT_CORNERS
    edges = [(1, 2), (1, 3), (2, 3)]

    next_vertex = 4
    for v in np.flatnonzero(degrees == 3).tolist():
        a, b, c = triangles[v].tolist()
        d = next_vertex
        next_vertex += 1
        centers[v] = d
        edges.extend([(a, d), (b, d), (c, d)])

        first = v + 1
        second = first + size[first]
        third = second + size[second]
        # corners stay sorted because d is the newest vertex
        triangles[first] = (a, b, d)
        triangles[second] = (b, c, d)
        triangles[third] = (a, c, d)

    m = next_vertex - 4
    net = ApollonianNetwork(
        m=m,
        num_vertices=3 + m,
        edges=np.asarray(edges, dtype=np.int64),
        triangles=triangles,
        centers=centers,
        dual=tree,
    )
    invariant(net.edges.shape[0] == 3 + 3 * m, "edge count differs from 3 + 3m")
    return net


def sample_uniform(m, rng):
    """Uniform Apollonian network with m subdivisions (dual tree of size 3m + 1)"""
    if m < 0:
        raise DomainError(f"subdivision count must be non-negative, got {m}")
    tree = sample_conditional_multiset(make_named('apollonian_ternary'), 3 * m + 1, rng)
    return build_from_dual(tree)


def dual_tree(net):
    return net.dual


def internal_tree(net):
    """The subtree of subdivided triangles (None when m = 0)"""
    if net.m == 0:
        return None
    dual = net.dual
    internal = dual.degrees == 3
    kids = np.bincount(dual.parent[1:][internal[1:]], minlength=dual.n)
    return from_degrees(kids[internal])


def heavy_simple_path(net):
    """Simple path through the centers of the two heaviest children of every visited triangle

    Inside a subdivided triangle with endpoints a -> b and center c the path
    runs a -> c in one child and c -> b in another; every pair of children can
    be chained this way, so the two children with most subdivisions are kept.
    """
    dual = net.dual
    size = dual.subtree_size.tolist()
    degrees = dual.degrees.tolist()
    triangles = net.triangles.tolist()
    centers = net.centers.tolist()

    a0, b0 = ROOT_CORNERS[0], ROOT_CORNERS[1]
    path = [a0]
    selected = 0
    stack = [(0, a0, b0)]
    while stack:
        t, a, b = stack.pop()
        if not degrees[t]:
            path.append(b)
            continue

        selected += 1
        c = centers[t]
        first_child = t + 1
        kids = [first_child, first_child + size[first_child]]
        kids.append(kids[1] + size[kids[1]])

        # drop the lightest child; among equals the later one in preorder
        skipped = min(reversed(kids), key=lambda u: size[u])
        both = with_a = with_b = None
        for u in kids:
            corners = triangles[u]
            if a in corners and b in corners:
                both = u
            elif a in corners:
                with_a = u
            else:
                with_b = u

        first = with_a if with_a != skipped else both
        second = with_b if with_b != skipped else both
        stack.append((second, c, b))
        stack.append((first, a, c))

    result = SimplePath(vertices=tuple(path), selected_internal=selected)
    invariant(len(result.vertices) == 2 + selected,
              f"path has {len(result.vertices)} vertices, expected 2 + {selected}")
    return result


def to_networkx(net):
    graph = nx.Graph()
    graph.add_nodes_from(range(1, net.num_vertices + 1))
    graph.add_edges_from(map(tuple, net.edges.tolist()))
    return graph


def verify_simple_path(net, path, graph=None):
    """True iff the vertices are distinct network vertices joined by edges"""
    vertices = list(path.vertices if isinstance(path, SimplePath) else path)
    if not vertices:
        return False
    if not all(isinstance(v, (int, np.integer)) and 1 <= v <= net.num_vertices for v in vertices):
        return False
    graph = graph if graph is not None else to_networkx(net)
    return nx.is_simple_path(graph, vertices)


def edges_to_csv(net, path=None):
    """Edge list as CSV with columns u, v"""
    df = pd.DataFrame(net.edges, columns=['u', 'v'])
    if path is None:
        return df.to_csv(index=False)
    df.to_csv(path, index=False)
    logger.info("✅ %d edges written to %s", len(df), path)
    return path
