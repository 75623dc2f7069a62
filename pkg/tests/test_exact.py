import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from degtree.errors import DomainError
from degtree.exact import (
    LogWeight,
    binomial,
    binomial_ratio,
    composition_product_sum,
    factorial_ratio,
    format_q,
    parse_q,
    rising_product,
)
from degtree import forests, weights
from degtree.forests import DecoratedForest


def test_binomial_examples():
    assert binomial(6, 1) == 6
    assert binomial(9, 2) == 36
    assert binomial(3, 5) == 0
    assert binomial(3, -1) == 0
    with pytest.raises(DomainError):
        binomial(-1, 0)


def test_rising_product_examples():
    assert rising_product(2, 2) == 2
    assert rising_product(2, 1) == 1
    assert rising_product(2, 4) == 24
    with pytest.raises(DomainError):
        rising_product(0, 3)
    with pytest.raises(DomainError):
        rising_product(3, 1)


@given(st.integers(0, 60), st.integers(0, 60))
def test_factorial_ratio(a, b):
    assert factorial_ratio(a, b) == Fraction(math.factorial(a), math.factorial(b))


@given(st.integers(0, 40), st.integers(-3, 40), st.integers(0, 40), st.integers(0, 40))
def test_binomial_ratio(a1, b1, a2, b2):
    if b2 > a2:
        with pytest.raises(DomainError):
            binomial_ratio(a1, b1, a2, b2)
        return
    assert binomial_ratio(a1, b1, a2, b2) == Fraction(binomial(a1, b1), binomial(a2, b2))


def test_composition_product_sum_edges():
    assert composition_product_sum(0, 0) == 1
    assert composition_product_sum(0, 3) == 0
    assert composition_product_sum(2, 4) == 10


def test_q_format():
    assert format_q(Fraction(3, 6)) == "1/2"
    assert format_q(Fraction(4)) == "4/1"
    assert parse_q("7/12") == Fraction(7, 12)


def test_fraction_arithmetic_is_exact():
    a, b, c = Fraction(1, 3), Fraction(2, 7), Fraction(5, 11)
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a


def test_logweight_basics():
    assert float(LogWeight.of(0)) == 0.0
    assert float(LogWeight.of(Fraction(1, 4)) * 8) == pytest.approx(2.0)
    assert float(LogWeight.of(3) ** 2 / 9) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        LogWeight.of(-1)
    assert LogWeight.of(10**400).rel_diff(Fraction(10**400)) < 1e-12


def test_logweight_agrees_with_exact_on_formulas():
    """1000 formula evaluations with n <= 50, log domain vs exact rationals."""
    import random

    rng = random.Random(11)
    worst = 0.0
    for _ in range(1000):
        n = rng.randint(4, 50)
        kind = rng.randrange(3)
        if kind == 0:
            x = rng.randint(1, 6)
            y = rng.randint(1, 6)
            args = (n, [(0, x), (1, y)])
            ex = weights.joint_degree_probability(*args, exact=True)
            lw = weights.joint_degree_probability(*args, exact=False)
        elif kind == 1:
            f = DecoratedForest.path(tuple(rng.randint(0, 3) for _ in range(rng.randint(1, 3))))
            ex = forests.forest_probability(n, f, exact=True)
            lw = forests.forest_probability(n, f, exact=False)
        else:
            f = DecoratedForest.star(0, tuple(rng.randint(0, 3) for _ in range(rng.randint(1, 3))))
            if f.m >= n:
                continue
            ex = forests.expected_subtree_count(n, f, exact=True)
            lw = forests.expected_subtree_count(n, f, exact=False)
        worst = max(worst, lw.rel_diff(ex))
    assert worst < 1e-9
