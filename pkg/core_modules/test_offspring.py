# test_offspring.py

import math

import numpy as np
import pytest

from errors import ConfigurationError, DegenerateError, DomainError, NonCriticalError, ResourceGuardError
from offspring import (WALK_GUARD, aldous_fringe_ratio, expected_zk, forest_size_pmf, from_weights,
                       gw_total_size_pmf, hitting_probabilities, in_support, llt_approximation, make_named,
                       nearest_sizes, parse_weights, require_size, second_moment, size_biased, size_support,
                       size_tail, size_tail_asymptotic, walk_pmf, walk_to_csv)

NAMES = ['catalan', 'full_binary', 'poisson1', 'apollonian_ternary']


@pytest.mark.parametrize('name,sigma2,span,alpha', [
    ('catalan', 0.5, 1, 1 / math.sqrt(math.pi)),
    ('full_binary', 1.0, 2, 2 / math.sqrt(2 * math.pi)),
    ('apollonian_ternary', 2.0, 3, 3 / (2 * math.sqrt(math.pi))),
])
def test_named_constants(name, sigma2, span, alpha):
    dist = make_named(name)
    assert dist.sigma2 == pytest.approx(sigma2, abs=1e-15)
    assert dist.span == span
    assert dist.alpha == pytest.approx(alpha, rel=1e-14)


def test_poisson_is_critical_with_unit_variance():
    dist = make_named('poisson1')
    assert dist.max_degree == 64
    assert dist.mean == pytest.approx(1.0, abs=1e-12)
    assert dist.sigma2 == pytest.approx(1.0, abs=1e-9)
    assert dist.span == 1


def test_unknown_name():
    with pytest.raises(ConfigurationError, match="unknown distribution"):
        make_named('geometric')


def test_from_weights_validation():
    with pytest.raises(NonCriticalError):
        from_weights([0.5, 0.5])
    with pytest.raises(DegenerateError):
        from_weights([0.0, 1.0])
    with pytest.raises(DomainError):
        from_weights([0.3, 0.3, 0.3])
    with pytest.raises(DomainError):
        from_weights([-0.25, 1.5, -0.25])


def test_from_weights_trims_trailing_zeros():
    dist = from_weights([0.25, 0.5, 0.25, 0.0, 0.0])
    assert dist.probs.size == 3
    assert dist == make_named('catalan')


def test_parse_weights():
    assert parse_weights("0.5, 0, 0.5") == [0.5, 0.0, 0.5]
    with pytest.raises(ConfigurationError):
        parse_weights("a,b")


def test_size_biased_and_second_moment():
    dist = make_named('catalan')
    np.testing.assert_allclose(size_biased(dist), [0.0, 0.5, 0.5])
    assert second_moment(dist) == pytest.approx(1.5)
    np.testing.assert_allclose(size_biased(make_named('apollonian_ternary')), [0, 0, 0, 1.0])


@pytest.mark.parametrize('name', NAMES)
def test_walk_pmf_is_normalised(name):
    dist = make_named(name)
    for m in (0, 1, 7, 50, 200):
        walk = walk_pmf(dist, m)
        assert walk.offset == -m
        assert 1 - 1e-10 <= walk.total() <= 1 + 1e-12


def test_walk_pmf_small_values():
    dist = make_named('catalan')
    walk = walk_pmf(dist, 2)
    assert walk.prob(-2) == pytest.approx(1 / 16)
    assert walk.prob(-1) == pytest.approx(1 / 4)
    assert walk.prob(0) == pytest.approx(3 / 8)
    assert walk.prob(5) == 0.0
    assert walk_pmf(dist, 3).prob(-1) == pytest.approx(15 / 64, abs=1e-16)


def test_walk_pmf_cache_reuses_lower_steps():
    dist = make_named('catalan')
    direct = walk_pmf(make_named('catalan'), 40).values
    walk_pmf(dist, 25)
    np.testing.assert_allclose(walk_pmf(dist, 40).values, direct, rtol=0, atol=1e-16)


def test_walk_guard():
    with pytest.raises(ResourceGuardError):
        walk_pmf(make_named('catalan'), WALK_GUARD + 1)
    with pytest.raises(DomainError):
        walk_pmf(make_named('catalan'), -1)


def test_gw_total_size_pmf():
    dist = make_named('catalan')
    assert gw_total_size_pmf(dist, 1) == pytest.approx(0.25)
    assert gw_total_size_pmf(dist, 2) == pytest.approx(1 / 8)
    assert gw_total_size_pmf(dist, 3) == pytest.approx(5 / 64)
    assert gw_total_size_pmf(make_named('full_binary'), 4) == 0.0
    with pytest.raises(DomainError):
        gw_total_size_pmf(dist, 0)


def test_forest_size_pmf():
    dist = make_named('catalan')
    assert forest_size_pmf(dist, 1, 5) == pytest.approx(gw_total_size_pmf(dist, 5), rel=1e-14)
    assert forest_size_pmf(dist, 2, 2) == pytest.approx(1 / 16)
    with pytest.raises(DomainError):
        forest_size_pmf(dist, 3, 2)
    assert forest_size_pmf(make_named('full_binary'), 2, 2) == pytest.approx(1 / 4)


@pytest.mark.parametrize('name', ['catalan', 'apollonian_ternary'])
@pytest.mark.parametrize('n', range(2, 9))
def test_forest_size_pmf_matches_enumerated_pairs(name, n):
    from exact_oracle import enumerate_trees

    dist = make_named(name)
    by_size = {a: [w for _, w in enumerate_trees(dist, a)] for a in range(1, n)}
    # ordered pairs (T_1, T_2) with |T_1| + |T_2| = n
    total = sum(w1 * w2 for a in range(1, n) for w1 in by_size[a] for w2 in by_size[n - a])
    assert forest_size_pmf(dist, 2, n) == pytest.approx(total, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize('name,nmax,expected', [
    ('full_binary', 6, {1, 3, 5}),
    ('apollonian_ternary', 10, {1, 4, 7, 10}),
    ('catalan', 4, {1, 2, 3, 4}),
])
def test_size_support_examples(name, nmax, expected):
    assert size_support(make_named(name), nmax) == expected


@pytest.mark.parametrize('name', NAMES)
def test_size_support_matches_size_pmf(name):
    dist = make_named(name)
    exact = {n for n in range(1, 41) if gw_total_size_pmf(dist, n) > 0}
    assert size_support(dist, 40) == exact


def test_size_support_with_gap_in_support():
    # p_0, p_3, p_5: sizes are 1 + sums of 3s and 5s
    dist = from_weights([1 - 1 / 6 - 0.1, 0.0, 0.0, 1 / 6, 0.0, 0.1])
    support = size_support(dist, 30)
    assert not {2, 3, 5, 8} & support
    assert {1, 4, 6, 7, 9, 10, 11, 12} <= support
    assert dist.span == 1
    assert {n for n in range(1, 31) if gw_total_size_pmf(dist, n) > 0} == support


def test_require_size_lists_nearest():
    dist = make_named('full_binary')
    assert nearest_sizes(dist, 4) == [3, 5]
    with pytest.raises(DomainError, match="nearest valid sizes: 3, 5"):
        require_size(dist, 4)
    assert in_support(dist, 7)
    assert not in_support(dist, 0)


def test_expected_zk_catalan_n3():
    moments = expected_zk(make_named('catalan'), 3, 1)
    assert moments.mean == pytest.approx(6 / 5, rel=1e-13)
    assert moments.second_factorial_moment == pytest.approx(2 / 5, rel=1e-13)
    assert expected_zk(make_named('catalan'), 3, 3).mean == pytest.approx(1.0)
    assert expected_zk(make_named('catalan'), 3, 2).second_factorial_moment == 0.0


def test_expected_zk_full_binary_counts_leaves():
    # a full binary tree of size 2m + 1 has m + 1 leaves
    moments = expected_zk(make_named('full_binary'), 11, 1)
    assert moments.mean == pytest.approx(6.0, rel=1e-13)
    assert moments.second_factorial_moment == pytest.approx(30.0, rel=1e-13)
    assert expected_zk(make_named('full_binary'), 11, 2).mean == 0.0


def test_fringe_ratio_tends_to_one():
    dist = make_named('catalan')
    for k in range(1, 6):
        assert aldous_fringe_ratio(dist, 4001, k) == pytest.approx(1.0, abs=0.01)


def test_local_limit_envelope():
    dist = make_named('catalan')
    m = 4000
    walk = walk_pmf(dist, m)
    bound = 0.25 * dist.alpha / math.sqrt(m)
    for x in range(-int(math.sqrt(m)), int(math.sqrt(m)) + 1, 7):
        assert abs(walk.prob(x) - llt_approximation(dist, m, x)) <= bound


def test_hitting_probabilities_match_walk():
    dist = make_named('poisson1')
    hits = hitting_probabilities(dist, 30)
    for n in (1, 2, 10, 30):
        assert hits[n] == pytest.approx(walk_pmf(dist, n).prob(-1), rel=1e-12)


def test_size_tail():
    dist = make_named('catalan')
    assert size_tail(dist, 1) == 1.0
    assert size_tail(dist, 2) == pytest.approx(0.75)
    assert size_tail(dist, 4) == pytest.approx(1 - 0.25 - 1 / 8 - 5 / 64)
    assert size_tail(dist, 3000) == pytest.approx(size_tail_asymptotic(dist, 3000), rel=0.05)


def test_walk_to_csv():
    text = walk_to_csv(walk_pmf(make_named('full_binary'), 2))
    lines = text.strip().splitlines()
    assert lines[0] == 's,probability'
    assert len(lines) == 1 + 5
    assert lines[1].startswith('-2,')


def test_distribution_pickles_without_cache():
    import pickle

    dist = make_named('catalan')
    walk_pmf(dist, 10)
    clone = pickle.loads(pickle.dumps(dist))
    assert clone == dist
    assert len(clone._walk_cache) == 0
