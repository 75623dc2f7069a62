import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degtree import census, oracle, samplers
from degtree.errors import DomainError, ResourceLimitError
from degtree.forests import DecoratedForest as F, expected_subtree_count
from degtree.limit import root_degree_pmf
from degtree.samplers import SamplerConfig
from degtree.trees import LabeledTree, RootedBall, extract_ball, prufer_decode

STAR2 = RootedBall.from_nested(((), ()), depth=1)
LEAF = RootedBall.from_nested(((),), depth=1)


def relabel(t: LabeledTree, perm) -> LabeledTree:
    return LabeledTree(t.n, tuple((perm[u], perm[v]) for u, v in t.edges))


def test_path_three():
    c = census.ball_census([LabeledTree.path(3)], 1)
    assert c.counts == {STAR2.key: 1, LEAF.key: 2}
    assert c.total == 3 and c.frequency(STAR2.key) == pytest.approx(1 / 3)


def test_star_four():
    c = census.ball_census([LabeledTree.star(4, 0)], 1)
    assert c.counts == {RootedBall.from_nested(((),) * 3).key: 1, LEAF.key: 3}


def test_frequencies_partition():
    b = samplers.sample_direct(SamplerConfig(40, seed=1, count=30))
    for radius in range(4):
        c = census.ball_census(b, radius)
        assert c.total == 40 * 30 == sum(c.counts.values())
        assert sum(c.frequencies().values()) == pytest.approx(1.0)


def test_absent_key_is_zero():
    c = census.ball_census([LabeledTree.path(3)], 1)
    assert census.empirical_neighborhood_prob(c, RootedBall.from_nested(((),) * 5)) == 0


def test_message_passing_matches_ball_extraction():
    b = samplers.sample_direct(SamplerConfig(60, seed=2, count=20))
    for radius in (1, 2, 3, 4):
        got = census.ball_census(b, radius)
        want = Counter()
        for t in b:
            for v in range(t.n):
                want[extract_ball(t, v, radius).key] += 1
        assert got.counts == dict(want)


def test_sources_agree(tmp_path):
    b = samplers.sample_direct(SamplerConfig(25, seed=3, count=200))
    path = tmp_path / "b.jsonl"
    b.write_jsonl(path)
    a = census.ball_census(b, 2)
    assert census.ball_census(path, 2).counts == a.counts
    assert census.ball_census(list(b), 2).counts == a.counts
    assert census.ball_census(b, 2, workers=2, chunk=16).counts == a.counts


@given(st.integers(3, 25), st.integers(0, 10**6), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_label_invariance(n, seed, radius):
    rng = random.Random(seed)
    t = prufer_decode([rng.randrange(n) for _ in range(n - 2)], n)
    perm = list(range(n))
    rng.shuffle(perm)
    assert census.ball_census([t], radius).counts == census.ball_census([relabel(t, perm)], radius).counts


def test_large_radius_gives_full_shapes():
    t = prufer_decode((3, 3, 0, 5, 5, 1), 8)
    full = census.ball_census([t], 8)
    assert full.total == 8
    assert census.ball_census([t], 20).counts == full.counts
    assert all(RootedBall.from_key(k).size == 8 for k in full.counts)


def test_merge_is_associative():
    b = samplers.sample_direct(SamplerConfig(20, seed=4, count=90))
    parts = [census.ball_census(list(b)[i:i + 30], 2) for i in (0, 30, 60)]
    left = parts[0].merge(parts[1]).merge(parts[2])
    right = parts[0].merge(parts[1].merge(parts[2]))
    assert left.counts == right.counts == census.ball_census(b, 2).counts
    with pytest.raises(DomainError):
        parts[0].merge(census.ball_census(b, 1))


def test_root_degree_frequencies_large_n():
    b = samplers.sample_direct(SamplerConfig(10_000, seed=5, count=60))
    c = census.ball_census(b, 1)
    for d in (1, 2):
        key = RootedBall.from_nested(((),) * d).key
        assert abs(c.frequency(key) - float(root_degree_pmf(d))) < 0.02


# -- subgraph counts -----------------------------------------------------------


def test_subgraph_count_examples():
    t = prufer_decode((3, 3, 0, 5), 6)
    for d in range(1, 5):
        assert census.labeled_subgraph_count(t, F.single(d)) == t.degrees.count(d)
    assert census.labeled_subgraph_count(t, F.path((0, 0))) == 0
    with pytest.raises(ResourceLimitError):
        census.labeled_subgraph_count(t, F.path((0,) * 9))
    with pytest.raises(DomainError):
        census.labeled_subgraph_count(t, F(2, (), (1, 1)))


def test_subgraph_count_oracle_n6():
    e = oracle.enumerate_all(6)
    for f in (F.path((1, 1)), F.path((0, 1, 0)), F.star(1, (0, 1)), F.path((2, 0, 1))):
        acc = sum(w * census.labeled_subgraph_count(adj, f) for w, adj in zip(e.weights, e.adjacencies))
        assert Fraction(acc, e.total) == expected_subtree_count(6, f)
        assert Fraction(acc, e.total) == oracle.oracle_expected_count(e, f)


def test_subgraph_count_matches_brute_force():
    b = samplers.sample_direct(SamplerConfig(9, seed=6, count=40))
    patterns = [F.path((1, 0)), F.path((0, 1, 1)), F.star(0, (0, 1, 2)), F.path((1, 1, 1, 1))]
    for i in range(len(b)):
        adj = b.adjacency(i)
        for f in patterns:
            assert census.labeled_subgraph_count(adj, f) == oracle.brute_force_count(adj, f)


def test_constraint_marginalization():
    # summing over every remainder vector recovers the plain embedding count
    b = samplers.sample_direct(SamplerConfig(30, seed=7, count=10))
    for i in range(len(b)):
        adj = b.adjacency(i)
        D = max(map(len, adj))
        for shape in ((0, 1), (0, 1, 2)):
            m = len(shape)
            plain = sum(
                census.labeled_subgraph_count(adj, F.path(r))
                for r in np.ndindex(*([D] * m))
            )
            # ordered injective homomorphisms of a path with m nodes
            paths = 0
            if m == 2:
                paths = sum(len(a) for a in adj)
            else:
                paths = sum(len(a) * (len(a) - 1) for a in adj)
            assert plain == paths


# -- concentration -------------------------------------------------------------


def test_concentration_small():
    rep = census.concentration_experiment(F.path((1, 1)), [50, 100], samples=300, seed=1)
    assert [r["n"] for r in rep["rows"]] == [50, 100]
    for r in rep["rows"]:
        assert abs(r["z"]) < 3
        assert Fraction(r["exact_mean_q"]) == expected_subtree_count(r["n"], F.path((1, 1))) / r["n"]
    assert rep["rows"][0]["var"] > rep["rows"][1]["var"]
    assert rep == census.concentration_experiment(F.path((1, 1)), [50, 100], samples=300, seed=1)
