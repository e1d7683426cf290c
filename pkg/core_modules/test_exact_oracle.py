# test_exact_oracle.py

import math

import pytest

from errors import ConfigurationError, DomainError, ResourceGuardError
from exact_oracle import (ENUMERATION_GUARD, enumerate_trees, exact_statistic_distribution, shape_distribution,
                          verify_identities)
from offspring import gw_total_size_pmf, make_named


@pytest.mark.parametrize('n,count', [(1, 1), (2, 1), (3, 2), (4, 5), (5, 14), (6, 42), (7, 132)])
def test_catalan_counts(n, count):
    trees = list(enumerate_trees(make_named('catalan'), n))
    assert len(trees) == count
    assert len({t for t, _ in trees}) == count


def test_enumeration_weights_sum_to_size_pmf():
    dist = make_named('apollonian_ternary')
    for n in (1, 4, 7, 10):
        total = math.fsum(w for _, w in enumerate_trees(dist, n))
        assert total == pytest.approx(gw_total_size_pmf(dist, n), rel=1e-12)
    assert list(enumerate_trees(dist, 5)) == []


def test_enumeration_guard():
    with pytest.raises(ResourceGuardError):
        list(enumerate_trees(make_named('catalan'), ENUMERATION_GUARD + 1))
    with pytest.raises(DomainError):
        list(enumerate_trees(make_named('catalan'), 0))


def test_heavy_path_law_catalan_n3():
    law = exact_statistic_distribution(make_named('catalan'), 3, 'heavy_path_length')
    assert law.as_dict() == pytest.approx({1: 1 / 5, 2: 4 / 5})
    assert law.total == pytest.approx(5 / 64)
    assert law.mean() == pytest.approx(9 / 5)
    assert law.prob(7) == 0.0


@pytest.mark.parametrize('statistic,expected', [
    ('height', {1: 1 / 5, 2: 4 / 5}),
    ('z_k:1', {1: 4 / 5, 2: 1 / 5}),
    ('z_k:3', {1: 1.0}),
    ('n_k_root:2', {0: 4 / 5, 1: 1 / 5}),
    ('two_heavy_size', {3: 1.0}),
    ('max_distance_k:1', {0: 4 / 5, 1: 1 / 5}),
    ('pattern:all_ge2', {1: 4 / 5, 2: 1 / 5}),
])
def test_statistics_catalan_n3(statistic, expected):
    law = exact_statistic_distribution(make_named('catalan'), 3, statistic)
    assert law.as_dict() == pytest.approx(expected)


def test_full_binary_is_uniform():
    shapes = shape_distribution(make_named('full_binary'), 7)
    assert len(shapes) == 5
    assert all(p == pytest.approx(0.2) for p in shapes.values())


def test_shape_distribution_normalised():
    shapes = shape_distribution(make_named('poisson1'), 6)
    assert len(shapes) == 42
    assert math.fsum(shapes.values()) == pytest.approx(1.0)


@pytest.mark.parametrize('statistic', ['depth', 'z_k:x', 'z_k:0', 'pattern:zigzag'])
def test_unknown_statistics(statistic):
    with pytest.raises(ConfigurationError):
        exact_statistic_distribution(make_named('catalan'), 3, statistic)


def test_impossible_size():
    with pytest.raises(DomainError):
        exact_statistic_distribution(make_named('full_binary'), 4, 'height')


def test_frame_and_csv(tmp_path):
    law = exact_statistic_distribution(make_named('catalan'), 4, 'heavy_path_length')
    assert list(law.to_frame().columns) == ['value', 'probability']
    assert law.to_csv().splitlines()[0] == 'value,probability'
    assert law.to_frame()['probability'].sum() == pytest.approx(1.0)
    target = tmp_path / 'law.csv'
    law.to_csv(target)
    assert target.read_text() == law.to_csv()


@pytest.mark.parametrize('name,nmax', [('catalan', 9), ('full_binary', 13), ('apollonian_ternary', 13),
                                       ('poisson1', 7)])
def test_verify_identities(name, nmax):
    report = verify_identities(make_named(name), nmax)
    assert report.passed, report.failures
    assert report.max_discrepancy <= 1e-12
    assert report.as_dict()['passed'] is True


def test_verify_identities_guard():
    with pytest.raises(ResourceGuardError):
        verify_identities(make_named('catalan'), ENUMERATION_GUARD + 1)


@pytest.mark.parametrize('m,count', [(0, 1), (1, 1), (2, 2), (3, 5), (4, 14), (5, 42), (6, 132), (7, 429)])
def test_full_binary_counts(m, count):
    assert sum(1 for _ in enumerate_trees(make_named('full_binary'), 2 * m + 1)) == count


@pytest.mark.parametrize('name,n', [('catalan', 6), ('full_binary', 9), ('apollonian_ternary', 10), ('poisson1', 5)])
def test_whole_tree_is_a_single_fringe_subtree(name, n):
    law = exact_statistic_distribution(make_named(name), n, f'z_k:{n}')
    assert law.as_dict() == pytest.approx({1: 1.0})
