# test_apollonian.py

import networkx as nx
import pytest

from apollonian import (build_from_dual, dual_tree, edges_to_csv, heavy_simple_path, internal_tree, sample_uniform,
                        verify_simple_path)
from errors import DomainError
from heavy_decomp import k_heavy_size
from sampler import make_rng, substream_seed
from tree_core import from_degrees

TWO_SUBDIVISIONS = [3, 3, 0, 0, 0, 0, 0]


def test_triangle():
    net = build_from_dual(from_degrees([0]))
    assert net.m == 0
    assert net.num_vertices == 3
    assert sorted(map(tuple, net.edges.tolist())) == [(1, 2), (1, 3), (2, 3)]
    path = heavy_simple_path(net)
    assert path.vertices == (1, 2)
    assert path.selected_internal == 0
    assert internal_tree(net) is None


def test_k4():
    net = build_from_dual(from_degrees([3, 0, 0, 0]))
    assert net.num_vertices == 4
    assert len(net.edges) == 6
    assert nx.is_isomorphic(net.graph(), nx.complete_graph(4))
    path = heavy_simple_path(net)
    assert path.vertices == (1, 4, 2)
    assert len(path) == 3
    assert verify_simple_path(net, path)


def test_two_subdivisions():
    net = build_from_dual(from_degrees(TWO_SUBDIVISIONS))
    assert net.triangles.tolist() == [[1, 2, 3], [1, 2, 4], [1, 2, 5], [2, 4, 5], [1, 4, 5], [2, 3, 4], [1, 3, 4]]
    assert net.centers.tolist() == [4, 5, -1, -1, -1, -1, -1]
    path = heavy_simple_path(net)
    assert path.vertices == (1, 5, 4, 2)
    assert path.selected_internal == 2
    assert internal_tree(net).degrees.tolist() == [1, 0]
    assert dual_tree(net) is net.dual


def test_verify_rejects_bad_paths():
    net = build_from_dual(from_degrees(TWO_SUBDIVISIONS))
    assert not verify_simple_path(net, [])
    assert not verify_simple_path(net, [1, 1])
    assert not verify_simple_path(net, [1, 6])
    assert not verify_simple_path(net, [3, 5])
    assert not verify_simple_path(net, [1, 4, 1])
    assert verify_simple_path(net, [3, 4, 5])


def test_dual_must_be_ternary():
    with pytest.raises(DomainError):
        build_from_dual(from_degrees([2, 0, 0]))
    with pytest.raises(DomainError):
        sample_uniform(-1, make_rng(1))


@pytest.mark.parametrize('m', [1, 2, 5, 40, 300])
def test_random_networks(m):
    rng = make_rng(substream_seed(17, m))
    for _ in range(5):
        net = sample_uniform(m, rng)
        graph = net.graph()
        assert graph.number_of_nodes() == 3 + m
        assert graph.number_of_edges() == 3 + 3 * m
        assert nx.check_planarity(graph)[0]

        path = heavy_simple_path(net)
        assert len(path.vertices) == 2 + path.selected_internal
        assert path.vertices[0] == 1 and path.vertices[-1] == 2
        assert verify_simple_path(net, path, graph)
        assert path.selected_internal == k_heavy_size(internal_tree(net), 2)[0]
        assert internal_tree(net).n == m


def test_edges_to_csv(tmp_path):
    net = build_from_dual(from_degrees([3, 0, 0, 0]))
    text = edges_to_csv(net)
    lines = text.strip().splitlines()
    assert lines[0] == 'u,v'
    assert len(lines) == 7
    target = tmp_path / 'edges.csv'
    assert edges_to_csv(net, target) == target
    assert target.read_text() == text


@pytest.mark.slow
def test_many_random_networks():
    rng = make_rng(substream_seed(2024, 0))
    for _ in range(10_000):
        m = int(rng.integers(1, 400))
        net = sample_uniform(m, rng)
        graph = net.graph()
        path = heavy_simple_path(net)
        assert verify_simple_path(net, path, graph)
        assert len(path.vertices) == 2 + path.selected_internal
        assert path.selected_internal == k_heavy_size(internal_tree(net), 2)[0]
        assert nx.check_planarity(graph)[0]
