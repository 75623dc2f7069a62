"""Decorated forests: patterns with remainder degrees, and their probabilities.

A decorated forest F on nodes ``0..m-1`` carries a remainder degree r_j
at every node.  Placed on an ordered vertex tuple S of the host tree, the
event X_S^F = 1 means every edge of F is present and every s_j has host
degree d_j^F + r_j exactly.  Embeddings are *ordered*: X_n^T sums over
ordered tuples S and so counts each unlabeled copy |Aut| times.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from .errors import DomainError, InvalidTreeError
from .exact import (
    LogWeight,
    binomial,
    binomial_ratio,
    composition_product_sum,
    factorial_ratio,
    log_binomial,
    log_factorial,
    rising_product,
    use_exact,
)


@dataclass(frozen=True)
class DecoratedForest:
    m: int
    edges: tuple[tuple[int, int], ...]
    r: tuple[int, ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.m < 1:
            raise InvalidTreeError("a decorated forest needs at least one node")
        edges = []
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v or not (0 <= u < self.m and 0 <= v < self.m):
                raise InvalidTreeError(f"bad forest edge ({u}, {v})")
            edges.append((min(u, v), max(u, v)))
        edges.sort()
        if len(set(edges)) != len(edges):
            raise InvalidTreeError("duplicate forest edge")
        r = tuple(int(x) for x in self.r)
        if len(r) != self.m or any(x < 0 for x in r):
            raise InvalidTreeError("need one remainder degree >= 0 per node")
        if self.labels is not None:
            labels = tuple(int(x) for x in self.labels)
            if len(labels) != self.m or len(set(labels)) != self.m:
                raise InvalidTreeError("labels must be injective, one per node")
            object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "r", r)
        if len(self.components) != self.m - len(edges):
            raise InvalidTreeError("pattern contains a cycle")

    @cached_property
    def forest_degrees(self) -> tuple[int, ...]:
        deg = [0] * self.m
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return tuple(deg)

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        parent = list(range(self.m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.edges:
            parent[find(u)] = find(v)
        groups: dict[int, list[int]] = {}
        for x in range(self.m):
            groups.setdefault(find(x), []).append(x)
        return tuple(sorted(tuple(g) for g in groups.values()))

    @property
    def c(self) -> int:
        return len(self.components)

    @property
    def component_sums(self) -> tuple[int, ...]:
        return tuple(sum(self.r[j] for j in comp) for comp in self.components)

    @property
    def R(self) -> int:
        return sum(self.r)

    @property
    def host_degrees(self) -> tuple[int, ...]:
        return tuple(d + r for d, r in zip(self.forest_degrees, self.r))

    def is_tree(self) -> bool:
        return self.c == 1

    def with_labels(self, labels: Sequence[int]) -> DecoratedForest:
        return DecoratedForest(self.m, self.edges, self.r, tuple(labels))

    def to_json(self) -> dict:
        out = {"m": self.m, "edges": [list(e) for e in self.edges], "r": list(self.r)}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_json(cls, obj: dict | str) -> DecoratedForest:
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            labels = obj.get("labels")
            return cls(obj["m"], tuple(tuple(e) for e in obj["edges"]), tuple(obj["r"]),
                       tuple(labels) if labels is not None else None)
        except (KeyError, TypeError) as exc:
            raise InvalidTreeError(f"malformed decorated forest JSON: {exc}") from None

    @classmethod
    def single(cls, r: int, label: int | None = None) -> DecoratedForest:
        return cls(1, (), (r,), None if label is None else (label,))

    @classmethod
    def path(cls, r: Sequence[int], labels: Sequence[int] | None = None) -> DecoratedForest:
        m = len(r)
        return cls(m, tuple((i, i + 1) for i in range(m - 1)), tuple(r),
                   None if labels is None else tuple(labels))

    @classmethod
    def star(cls, r_center: int, r_leaves: Sequence[int], labels=None) -> DecoratedForest:
        m = len(r_leaves) + 1
        return cls(m, tuple((0, i) for i in range(1, m)), (r_center, *r_leaves),
                   None if labels is None else tuple(labels))


# ---------------------------------------------------------------------------
# gluing


@dataclass(frozen=True)
class GluedForest:
    result: DecoratedForest
    map1: tuple[int, ...]
    map2: tuple[int, ...]


@dataclass(frozen=True)
class InvalidGluing:
    reason: str

    def __bool__(self):
        return False


def glue(f1: DecoratedForest, f2: DecoratedForest) -> GluedForest | InvalidGluing:
    """Identify equally labeled nodes of two labeled decorated forests.

    The glued forest describes the joint event X_{S1}^{F1} = X_{S2}^{F2} = 1:
    edges are the union, and a shared node keeps its host degree, so its
    remainder is the host degree minus its degree in the union.  The gluing
    is invalid when the union has a cycle or the two patterns demand
    different host degrees at a shared node.  When a shared node has the same
    incident pattern edges in both inputs this is just "matched remainder
    degrees must agree".
    """
    if f1.labels is None or f2.labels is None:
        raise DomainError("gluing needs labeled forests")
    index = {s: i for i, s in enumerate(f1.labels)}
    labels = list(f1.labels)
    map2 = []
    for s in f2.labels:
        if s not in index:
            index[s] = len(labels)
            labels.append(s)
        map2.append(index[s])
    map1 = list(range(f1.m))
    m = len(labels)

    host = [None] * m
    for i, h in enumerate(f1.host_degrees):
        host[map1[i]] = h
    for j, h in enumerate(f2.host_degrees):
        g = map2[j]
        if host[g] is not None and host[g] != h:
            return InvalidGluing(f"label {labels[g]}: host degree {host[g]} vs {h}")
        host[g] = h

    edges = {tuple(sorted((map1[u], map1[v]))) for u, v in f1.edges}
    edges |= {tuple(sorted((map2[u], map2[v]))) for u, v in f2.edges}
    if not _acyclic(m, edges):
        return InvalidGluing("union of the patterns contains a cycle")
    deg = [0] * m
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    r = [host[i] - deg[i] for i in range(m)]
    if any(x < 0 for x in r):
        return InvalidGluing("glued pattern exceeds a prescribed host degree")
    result = DecoratedForest(m, tuple(sorted(edges)), tuple(r), tuple(labels))
    return GluedForest(result, tuple(map1), tuple(map2))


def _acyclic(m, edges) -> bool:
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        a, b = find(u), find(v)
        if a == b:
            return False
        parent[a] = b
    return True


# ---------------------------------------------------------------------------
# probabilities


def h_constant(f: DecoratedForest) -> int:
    """H(r, F) = prod over components of R_i * prod_j (d_j^F + r_j)! / r_j!."""
    out = 1
    deg = f.forest_degrees
    for comp, Ri in zip(f.components, f.component_sums):
        out *= Ri
        for j in comp:
            out *= rising_product(f.r[j] + 1, deg[j] + f.r[j])
    return out


def _spanning_tree_case(n, f):
    # the pattern is the whole host tree; every remainder must be 0
    if f.R != 0:
        return Fraction(0)
    weight = math.prod(math.factorial(d) for d in f.forest_degrees)
    return Fraction(weight, math.factorial(n - 2) * binomial(3 * n - 3, n - 2))


def forest_probability(n: int, f: DecoratedForest, exact: bool | None = None):
    """P(X_S^F = 1) for one fixed ordered vertex tuple S.

        (n-m+c-2)!/(n-2)! * C(3n-R-3m+2c-3, n-R-m+2c-2) / C(3n-3, n-2) * H(r, F)

    Unrealizable configurations (a vanishing binomial) give 0.
    """
    m, c, R = f.m, f.c, f.R
    if n < 2:
        raise DomainError("n must be >= 2")
    if n < m:
        raise DomainError(f"pattern with {m} nodes does not fit in n={n}")
    exact = use_exact(n, exact)
    if n == m and c == 1:
        p = _spanning_tree_case(n, f)
        return p if exact else LogWeight.of(p)
    H = h_constant(f)
    parts, total = n - m, 2 * n - 2 - 2 * (m - c) - R
    if H == 0 or total < parts or (parts == 0 and total != 0):
        return Fraction(0) if exact else LogWeight(0.0, True)
    if exact:
        if parts == 0:
            comb = Fraction(1, binomial(3 * n - 3, n - 2))
        else:
            comb = binomial_ratio(3 * n - R - 3 * m + 2 * c - 3, n - R - m + 2 * c - 2, 3 * n - 3, n - 2)
        return factorial_ratio(n - m + c - 2, n - 2) * comb * H
    lw = log_factorial(n - m + c - 2) - log_factorial(n - 2) - log_binomial(3 * n - 3, n - 2)
    if parts:
        lw += log_binomial(3 * n - R - 3 * m + 2 * c - 3, n - R - m + 2 * c - 2)
    return LogWeight.from_log(lw) * H


def conditional_forest_probability(n: int, f1: DecoratedForest, f2: DecoratedForest) -> Fraction:
    """P(X_{S1}^{F1} = 1 | X_{S2}^{F2} = 1) with S1, S2 the forests' labels.

    Evaluated as

        (n-m12+c12-2)!/(n-m2+c2-2)! * B(F12)/B(F2) * H(r12, F12)/H(r', F2)

    where B(F) is the binomial C(3n-R-3m+2c-3, n-R-m+2c-2) of the forest.
    Returns 0 when no valid gluing exists.
    """
    p2 = forest_probability(n, f2, exact=True)
    if p2 == 0:
        raise DomainError("conditioning event has probability 0")
    g = glue(f1, f2)
    if not g:
        return Fraction(0)
    f12 = g.result
    if n < f12.m:
        return Fraction(0)
    if (n == f12.m and f12.c == 1) or (n == f2.m and f2.c == 1):
        return forest_probability(n, f12, exact=True) / p2
    H12 = h_constant(f12)
    if H12 == 0:
        return Fraction(0)
    b12 = composition_product_sum(n - f12.m, 2 * n - 2 - 2 * (f12.m - f12.c) - f12.R)
    b2 = composition_product_sum(n - f2.m, 2 * n - 2 - 2 * (f2.m - f2.c) - f2.R)
    return (
        factorial_ratio(n - f12.m + f12.c - 2, n - f2.m + f2.c - 2)
        * Fraction(b12, b2)
        * Fraction(H12, h_constant(f2))
    )


def expected_subtree_count(n: int, t: DecoratedForest, exact: bool | None = None):
    """E(X_n^T) = n (n-1)/(n-k) * C(3n-R-3k-1, n-R-k) / C(3n-3, n-2) * H(r, T)
    for a connected pattern T on k < n nodes (ordered embeddings)."""
    if not t.is_tree():
        raise DomainError("expected_subtree_count needs a connected pattern")
    k, R = t.m, t.R
    if n <= k:
        raise DomainError(f"need n > k (n={n}, k={k})")
    H = h_constant(t)
    exact = use_exact(n, exact)
    if H == 0 or n - R - k < 0:
        return Fraction(0) if exact else LogWeight(0.0, True)
    if exact:
        return (Fraction(n * (n - 1), n - k)
                * binomial_ratio(3 * n - R - 3 * k - 1, n - R - k, 3 * n - 3, n - 2) * H)
    lw = (math.log(n) + math.log(n - 1) - math.log(n - k)
          + log_binomial(3 * n - R - 3 * k - 1, n - R - k) - log_binomial(3 * n - 3, n - 2))
    return LogWeight.from_log(lw) * H


def tree_levels(t: DecoratedForest, root: int) -> list[int]:
    """BFS distance of every pattern node from ``root``."""
    if not t.is_tree():
        raise DomainError("pattern must be connected")
    adj: list[list[int]] = [[] for _ in range(t.m)]
    for u, v in t.edges:
        adj[u].append(v)
        adj[v].append(u)
    level = [-1] * t.m
    level[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if level[w] < 0:
                level[w] = level[u] + 1
                queue.append(w)
    return level


def limit_decorated_density(t: DecoratedForest, root: int = 0) -> Fraction:
    """lim E(X_n^T)/n for a pattern rooted at ``root`` whose remainder
    degrees vanish off the bottom level T_l:

        9 (4/27)^k * (sum_{T_l} r_i) * prod_{T_l} (r_i + 1) / 3^(sum r_i) * prod_{j not in T_l} d_j!
    """
    level = tree_levels(t, root)
    depth = max(level)
    if depth < 1:
        raise DomainError("the pattern needs depth >= 1 (at least one edge)")
    bottom = [i for i in range(t.m) if level[i] == depth]
    if any(t.r[i] for i in range(t.m) if level[i] != depth):
        raise DomainError("remainder degrees must be 0 off the bottom level")
    rb = [t.r[i] for i in bottom]
    R = sum(rb)
    inner = math.prod(math.factorial(t.forest_degrees[j]) for j in range(t.m) if level[j] != depth)
    return 9 * Fraction(4, 27) ** t.m * Fraction(R * math.prod(x + 1 for x in rb), 3**R) * inner
