"""Ground truth by brute force: every labeled tree on n <= 8 nodes.

Trees are visited in lexicographic order of their Prufer codes; the rank of
a code (c_0, ..., c_{n-3}) is sum_j c_j n^(n-3-j), so a failing check can
name a tree by its rank (see :meth:`PruferCode.unrank`).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import permutations, product
from typing import Callable

import numpy as np

from .errors import DomainError, ResourceLimitError
from .forests import DecoratedForest
from .samplers import transition_matrix
from .trees import LabeledTree, decode_edges

MAX_N = 8
KERNEL_MAX_N = 6


@dataclass
class ExactEnsemble:
    n: int
    codes: np.ndarray  # (n^(n-2), n-2), row index = rank
    degrees: np.ndarray  # (n^(n-2), n)
    weights: list[int]  # prod d_i! per tree
    total: int = field(init=False)

    def __post_init__(self):
        self.total = sum(self.weights)

    def __len__(self) -> int:
        return len(self.weights)

    def probability(self, rank: int) -> Fraction:
        return Fraction(self.weights[rank], self.total)

    def tree(self, rank: int) -> LabeledTree:
        return LabeledTree(self.n, tuple(decode_edges(self.codes[rank].tolist(), self.n)))

    @cached_property
    def edge_sets(self) -> list[frozenset]:
        n = self.n
        return [frozenset((min(u, v), max(u, v)) for u, v in decode_edges(c, n)) for c in self.codes.tolist()]

    @cached_property
    def adjacencies(self) -> list[list[list[int]]]:
        out = []
        for edges in self.edge_sets:
            adj: list[list[int]] = [[] for _ in range(self.n)]
            for u, v in edges:
                adj[u].append(v)
                adj[v].append(u)
            out.append(adj)
        return out

    def trees(self):
        for rank in range(len(self)):
            yield self.tree(rank)


def enumerate_all(n: int, max_n: int = MAX_N) -> ExactEnsemble:
    """All n^(n-2) labeled trees with their weights prod d_i!."""
    if n < 2:
        raise DomainError("need n >= 2")
    if n > max_n:
        raise ResourceLimitError(f"enumerating {n}^{n - 2} trees exceeds the n <= {max_n} limit")
    codes = np.array(list(product(range(n), repeat=n - 2)), dtype=np.int64).reshape(n ** (n - 2), n - 2)
    degrees = np.ones((codes.shape[0], n), dtype=np.int64)
    for j in range(n - 2):
        np.add.at(degrees, (np.arange(codes.shape[0]), codes[:, j]), 1)
    fact = [math.factorial(k) for k in range(n)]
    weights = [math.prod(fact[d] for d in row) for row in degrees.tolist()]
    return ExactEnsemble(n, codes, degrees, weights)


def exact_statistic(e: ExactEnsemble, f: Callable[[LabeledTree], object], kind: str = "expectation"):
    """Pi-weighted expectation (``kind="expectation"``) or full distribution
    (``kind="distribution"``, a dict value -> probability) of ``f``."""
    values = [f(t) for t in e.trees()]
    if kind == "expectation":
        acc = sum((w * Fraction(v) for w, v in zip(e.weights, values)), Fraction(0))
        return acc / e.total
    if kind == "distribution":
        out: dict = {}
        for w, v in zip(e.weights, values):
            out[v] = out.get(v, 0) + w
        return {v: Fraction(w, e.total) for v, w in sorted(out.items())}
    raise DomainError(f"unknown statistic kind {kind!r}")


def exact_probability(e: ExactEnsemble, event: Callable[[int], bool]) -> Fraction:
    """Pi-probability of an event given as a predicate on the tree rank."""
    return Fraction(sum(w for r, w in enumerate(e.weights) if event(r)), e.total)


# ---------------------------------------------------------------------------
# decorated patterns


def _event(e: ExactEnsemble, f: DecoratedForest, labels) -> Callable[[int], bool]:
    labels = tuple(labels)
    need = f.host_degrees
    pattern_edges = [(min(labels[u], labels[v]), max(labels[u], labels[v])) for u, v in f.edges]
    degrees = e.degrees

    def holds(rank):
        row = degrees[rank]
        if any(row[s] != d for s, d in zip(labels, need)):
            return False
        edges = e.edge_sets[rank]
        return all(pe in edges for pe in pattern_edges)

    return holds


def oracle_forest_probability(e: ExactEnsemble, f: DecoratedForest, labels=None) -> Fraction:
    """P(all pattern edges are present and every image has host degree d^F + r)."""
    labels = labels if labels is not None else (f.labels or tuple(range(f.m)))
    return exact_probability(e, _event(e, f, labels))


def oracle_conditional_probability(e: ExactEnsemble, f1: DecoratedForest, f2: DecoratedForest) -> Fraction:
    a, b = _event(e, f1, f1.labels), _event(e, f2, f2.labels)
    num = den = 0
    for r, w in enumerate(e.weights):
        if b(r):
            den += w
            if a(r):
                num += w
    if den == 0:
        raise DomainError("conditioning event has probability 0")
    return Fraction(num, den)


def brute_force_count(adj, f: DecoratedForest) -> int:
    """Ordered injective tuples S with the decorated event, by trying them all."""
    n = len(adj)
    need = f.host_degrees
    edge_sets = {(u, v) for u in range(n) for v in adj[u]}
    count = 0
    for S in permutations(range(n), f.m):
        if all(len(adj[s]) == d for s, d in zip(S, need)) and all((S[u], S[v]) in edge_sets for u, v in f.edges):
            count += 1
    return count


def oracle_expected_count(e: ExactEnsemble, f: DecoratedForest) -> Fraction:
    """Exact E(X_n^F) by brute-force counting in every tree."""
    acc = sum(w * brute_force_count(adj, f) for w, adj in zip(e.weights, e.adjacencies))
    return Fraction(acc, e.total)


# ---------------------------------------------------------------------------
# Markov kernel


def exact_kernel_analysis(n: int, max_n: int = KERNEL_MAX_N) -> dict:
    """Row sums, stationarity, detailed balance, irreducibility, aperiodicity
    of the rewiring chain, all in exact arithmetic."""
    if n > max_n:
        raise ResourceLimitError(f"kernel analysis is limited to n <= {max_n}")
    e = enumerate_all(n)
    P = transition_matrix(n, max_n=max_n)
    pi = [Fraction(w, e.total) for w in e.weights]
    N = len(pi)

    rows_ok = all(sum(row.values()) == 1 for row in P.values())
    flow = [Fraction(0)] * N
    for i, row in P.items():
        for j, p in row.items():
            flow[j] += pi[i] * p
    stationary = flow == pi
    balance_failures = 0
    for i, row in P.items():
        for j, p in row.items():
            if pi[i] * p != pi[j] * P[j].get(i, 0):
                balance_failures += 1
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in P[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    min_self = min(P[i].get(i, Fraction(0)) for i in range(N))
    return {
        "n": n,
        "states": N,
        "nonzero_entries": sum(len(r) for r in P.values()),
        "rows_sum_to_one": rows_ok,
        "stationary": stationary,
        "detailed_balance": balance_failures == 0,
        "detailed_balance_failures": balance_failures,
        "irreducible": len(seen) == N,
        "aperiodic": min_self > 0,
        "min_self_loop": min_self,
    }


def forest_fixtures() -> list[DecoratedForest]:
    """A library of labeled decorated forests on labels < 6: paths, stars,
    multi-component forests and overlapping label sets."""
    F = DecoratedForest
    return [
        F.single(1, 0),
        F.single(2, 0),
        F.single(3, 1),
        F.path((1, 1), (0, 1)),
        F.path((1, 0), (2, 4)),
        F.path((0, 1), (1, 0)),
        F.path((2, 0), (3, 0)),
        F.path((1, 1), (1, 2)),
        F.path((0, 0), (0, 1)),
        F.path((0, 1, 0), (0, 1, 2)),
        F.path((1, 1, 1), (1, 2, 3)),
        F.path((1, 0, 0, 0, 0), (5, 4, 3, 2, 1)),
        F.path((0, 0, 0, 0, 0, 0), (0, 1, 2, 3, 4, 5)),
        F.star(0, (1, 0, 0), (0, 1, 2, 3)),
        F.star(1, (0, 0), (2, 0, 1)),
        F.star(0, (1, 1), (1, 3, 4)),
        F(2, (), (1, 1), (0, 1)),
        F(2, (), (2, 3), (4, 5)),
        F(3, (), (1, 1, 1), (0, 2, 4)),
        F(3, ((0, 1),), (1, 1, 2), (0, 1, 5)),
        F(4, ((0, 1), (2, 3)), (1, 0, 0, 2), (0, 1, 2, 3)),
        F(4, ((0, 1), (2, 3)), (0, 1, 1, 0), (3, 2, 1, 0)),
    ]
