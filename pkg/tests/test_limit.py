import math
from collections import Counter
from fractions import Fraction

import pytest

from _stats import chi2_pvalue, within_sigma
from degtree import limit
from degtree.errors import DomainError, ResourceLimitError
from degtree.forests import DecoratedForest
from degtree.trees import RootedBall, rooted_trees

SMALLEST_L2 = RootedBall.from_nested((((),),), depth=2)  # root - child - grandchild


def star(d):
    return RootedBall.from_nested(((),) * d, depth=1)


# -- probabilities -------------------------------------------------------------


def test_root_degree_examples():
    assert [limit.root_degree_pmf(d) for d in (1, 2, 3)] == [Fraction(4, 9), Fraction(8, 27), Fraction(4, 27)]
    assert limit.root_degree_pmf(0) == 0
    assert [limit.limit_ball_probability(star(d)) for d in (1, 2, 3)] == [Fraction(4, 9), Fraction(8, 27), Fraction(4, 27)]


def test_root_degree_mass_and_shape():
    assert 1 - sum(limit.root_degree_pmf(d) for d in range(1, 61)) < Fraction(1, 10**25)
    pmf = [limit.root_degree_pmf(d) for d in range(1, 40)]
    assert pmf[0] > pmf[1] and all(a > b for a, b in zip(pmf[1:], pmf[2:]))
    # the geometric identity behind the total mass
    assert 1 - sum(limit.root_degree_pmf(d) for d in range(1, 61)) == limit.root_degree_tail(60)


def test_smallest_depth_two_ball():
    assert limit.limit_ball_probability(SMALLEST_L2) == Fraction(32, 243)


def test_depth_zero_and_short_balls():
    assert limit.limit_ball_probability(RootedBall((-1,), 0)) == 1
    assert limit.limit_ball_probability(RootedBall.from_nested(((),), depth=2)) == 0


def test_probabilities_are_rational_and_match_log_route():
    for b in rooted_trees(7):
        if b.depth == 0:
            continue
        p = limit.limit_ball_probability(b)
        assert isinstance(p, Fraction) and 0 < p <= 1
        assert limit.limit_ball_log_probability(b).rel_diff(p) < 1e-12


def test_interior_leaf_flag():
    assert not limit.has_interior_leaf(SMALLEST_L2)
    b = RootedBall.from_nested((((),), ()), depth=2)
    assert limit.has_interior_leaf(b)
    assert limit.limit_ball(b).interior_leaf


# -- enumeration ---------------------------------------------------------------


def test_enumeration_examples():
    assert [b.level_sizes[1] for b in limit.enumerate_balls(1, 3)] and len(limit.enumerate_balls(1, 3)) == 3
    # degrees <= 2: the root has 1 or 2 children, each with at most one child,
    # and at least one grandchild.  Up to symmetry: a path, a root with two
    # children of which one or both have a child.
    got = limit.enumerate_balls(2, 2)
    assert sorted(b.describe() for b in got) == sorted(["[[*]]", "[[*] *]", "[[*] [*]]"])


def test_enumeration_matches_brute_force():
    for l in (1, 2, 3):
        for D in range(1, 5):
            brute = {b.key for b in rooted_trees(10) if b.depth == l
                     and all(b.degree(v) <= D for v in range(b.size) if b.node_level[v] < l)}
            got = limit.enumerate_balls(l, D)
            if limit.count_balls(l, D) and max(b.size for b in got) > 10:
                continue
            assert {b.key for b in got} == brute
            assert len(got) == limit.count_balls(l, D)


def test_enumeration_sorted_and_monotone():
    prev = 0
    for D in range(1, 7):
        balls = limit.enumerate_balls(2, D)
        assert [b.key for b in balls] == sorted(b.key for b in balls)
        assert len(balls) >= prev
        prev = len(balls)
    assert limit.count_balls(3, 4) >= limit.count_balls(2, 4)


def test_enumeration_guard():
    with pytest.raises(ResourceLimitError):
        limit.enumerate_balls(3, 12, limit=1000)


# -- consistency ---------------------------------------------------------------


def test_consistency_root_degree_one():
    res = limit.consistency_check(star(1), 40)
    assert res.lhs == Fraction(4, 9)
    assert abs(res.residual) < 1e-12 and res.ok


def test_consistency_closed_form():
    # sum_j j (j+1) x^j = 2x/(1-x)^3, so the untruncated extension sum of the
    # degree-1 root is exactly (16/81) * (9/4) = 4/9
    x = Fraction(1, 3)
    total = Fraction(16, 81) * (2 * x / (1 - x) ** 3)
    assert total == Fraction(4, 9)


def test_consistency_depth_one_balls_d60():
    for d in range(1, 8):
        res = limit.consistency_check(star(d), 60)
        assert abs(res.residual) < 1e-20 and res.ok


def test_consistency_all_small_balls():
    worst = 0
    for b in rooted_trees(6):
        res = limit.consistency_check(b, 25)
        assert res.ok
        assert res.residual < 1e-8
        worst = max(worst, res.residual)
    assert worst > 0


def test_orbit_formula_equals_class_enumeration():
    for b in rooted_trees(5):
        res = limit.consistency_check(b, 6)
        lhs, rhs = limit.consistency_by_classes(b, 6)
        assert lhs == res.lhs and rhs == res.rhs


def test_tail_bound_is_tight_for_one_bottom_node():
    for b in (star(1), SMALLEST_L2):
        res = limit.consistency_check(b, 10)
        assert res.residual == res.bound


def test_automorphism_factorization_every_enumerated_ball():
    from degtree.trees import colored_aut_count

    for l in (1, 2):
        for b in limit.enumerate_balls(l, 4):
            top = b.truncate(l - 1)
            colors = [b.child_counts[v] for v in range(top.size)]
            cs = [b.child_counts[v] for v in b.levels[l - 1]]
            assert b.aut == colored_aut_count(top, colors) * math.prod(math.factorial(c) for c in cs)


# -- normalization -------------------------------------------------------------


def test_mass_examples():
    assert 1 - limit.normalization_mass(1, 60) < Fraction(1, 10**25)
    m = limit.normalization_mass(2, 20)
    assert Fraction(999, 1000) < m <= 1
    masses = [limit.normalization_mass(2, D) for D in range(1, 15)]
    assert all(a <= b for a, b in zip(masses, masses[1:]))


def test_mass_matches_class_sum():
    for l, D in ((1, 5), (2, 4), (2, 6), (3, 3)):
        assert limit.normalization_mass(l, D) == limit.normalization_mass_by_classes(l, D)


# -- sampler -------------------------------------------------------------------


def test_sampler_root_degree():
    draws = Counter(b.level_sizes[1] for b in limit.sample_limit_balls(1, 40, 100_000, seed=1))
    ds = range(1, 13)
    probs = [float(limit.root_degree_pmf(d)) for d in ds]
    rest = 1 - sum(probs)
    counts = [draws[d] for d in ds] + [sum(c for d, c in draws.items() if d > 12)]
    assert chi2_pvalue(counts, probs + [rest]) > 0.001
    for d in ds:
        assert within_sigma(draws[d], 100_000, float(limit.root_degree_pmf(d)))


def test_sampler_smallest_class_frequency():
    balls = limit.sample_limit_balls(2, 15, 100_000, seed=2)
    sampler = limit.LimitBallSampler(2, 15)
    p = float(Fraction(32, 243) / sampler.mass)
    hits = sum(b.key == SMALLEST_L2.key for b in balls)
    assert within_sigma(hits, len(balls), p)
    assert within_sigma(hits, len(balls), 32 / 243)


def test_sampler_matches_class_table():
    # pooled chi-square against the exact truncated table
    l, D = 2, 4
    table = {b.key: limit.limit_ball_probability(b) for b in limit.enumerate_balls(l, D)}
    mass = sum(table.values())
    sampler = limit.LimitBallSampler(l, D, eps=0.5)
    draws = Counter(b.key for b in limit.sample_limit_balls(l, D, 60_000, seed=3, eps=0.5))
    assert set(draws) <= set(table)
    keys = sorted(table)
    probs = [float(table[k] / mass) for k in keys]
    assert chi2_pvalue([draws[k] for k in keys], probs) > 0.001
    assert sampler.metadata()["eps"] == 0.5


def test_sampler_determinism_and_deficit_error():
    a = limit.sample_limit_balls(2, 15, 50, seed=9)
    assert a == limit.sample_limit_balls(2, 15, 50, seed=9)
    assert limit.sample_limit_ball(2, 15, seed=9) == a[0]
    with pytest.raises(DomainError, match="increase D"):
        limit.LimitBallSampler(2, 5)


# -- decorated sums ------------------------------------------------------------


def test_decorated_sum_root_degree_one():
    res = limit.decorated_sum_check(star(1), 40)
    assert abs(res.gap) < 1e-12
    assert res.direct == Fraction(4, 9)


def test_decorated_sum_gap_decreases():
    gaps = [limit.decorated_sum_check(SMALLEST_L2, D).gap for D in range(2, 20, 3)]
    assert all(a > b > 0 for a, b in zip(gaps, gaps[1:]))


def test_decorated_sum_smallest_depth_two():
    res = limit.decorated_sum_check(SMALLEST_L2, 25)
    assert 0 <= res.gap <= res.bound and res.gap < 1e-8


def test_decorated_sum_bounds_hold():
    for b in rooted_trees(5):
        if b.depth == 0 or b.level_sizes[b.depth] > 2:
            continue
        res = limit.decorated_sum_check(b, 12)
        assert 0 <= res.gap <= res.bound


def test_ball_as_pattern():
    f = limit.ball_as_pattern(SMALLEST_L2, [2])
    assert isinstance(f, DecoratedForest) and f.r == (0, 0, 2)
