from fractions import Fraction

import pytest

from degtree import oracle, weights
from degtree.errors import DomainError, ResourceLimitError
from degtree.trees import PruferCode


def test_sizes_and_totals():
    assert len(oracle.enumerate_all(3)) == 3
    e4 = oracle.enumerate_all(4)
    assert len(e4) == 16 and e4.total == 72
    e5 = oracle.enumerate_all(5)
    assert len(e5) == 125 and e5.total == 1320 == 6 * 220
    for n in range(2, 8):
        assert oracle.enumerate_all(n).total == weights.constant_C(n)


@pytest.mark.slow
def test_total_n8():
    e = oracle.enumerate_all(8)
    assert len(e) == 8**6 and e.total == weights.constant_C(8)


def test_limits():
    with pytest.raises(ResourceLimitError):
        oracle.enumerate_all(9)
    with pytest.raises(DomainError):
        oracle.enumerate_all(1)
    with pytest.raises(ResourceLimitError):
        oracle.exact_kernel_analysis(7)


def test_every_tree_once_in_rank_order():
    e = oracle.enumerate_all(5)
    assert len(set(e.edge_sets)) == 125
    for rank in (0, 17, 124):
        code = PruferCode.unrank(5, rank).code
        assert tuple(e.codes[rank].tolist()) == code


def test_statistics():
    e = oracle.enumerate_all(4)
    assert oracle.exact_statistic(e, lambda t: max(t.degrees)) == Fraction(7, 3)
    assert oracle.exact_statistic(e, lambda t: int(t.degrees[0] == 1)) == Fraction(7, 12)
    assert oracle.exact_statistic(e, lambda t: 1) == 1
    dist = oracle.exact_statistic(e, lambda t: max(t.degrees), kind="distribution")
    assert dist == {2: Fraction(2, 3), 3: Fraction(1, 3)}
    with pytest.raises(DomainError):
        oracle.exact_statistic(e, lambda t: 1, kind="median")


def test_kernel_n4():
    rep = oracle.exact_kernel_analysis(4)
    assert rep["stationary"] and rep["aperiodic"] and rep["min_self_loop"] > 0
    assert rep["states"] == 16


def test_kernel_n5_detailed_balance():
    rep = oracle.exact_kernel_analysis(5)
    assert rep["detailed_balance"] and rep["detailed_balance_failures"] == 0


@pytest.mark.slow
def test_kernel_n6():
    rep = oracle.exact_kernel_analysis(6)
    assert rep["stationary"] and rep["detailed_balance"] and rep["irreducible"]


def test_spot_checks_n7():
    e = oracle.enumerate_all(7)
    for f in oracle.forest_fixtures()[:6]:
        from degtree.forests import forest_probability

        assert forest_probability(7, f) == oracle.oracle_forest_probability(e, f)
    for x in range(1, 7):
        assert weights.degree_pmf(7, x) == oracle.exact_probability(e, lambda r: e.degrees[r, 3] == x)


def test_fixture_library():
    fx = oracle.forest_fixtures()
    assert len(fx) >= 20
    assert any(f.c >= 2 for f in fx) and any(not f.is_tree() for f in fx)
    assert all(max(f.labels) < 6 for f in fx)
