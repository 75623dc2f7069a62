"""Empirical local statistics of sampled trees.

The ball census tallies, over every vertex of every tree, the canonical key
of its radius-l ball.  Keys are built by message passing on directed edges:
the level-j message from w towards a neighbor u is the truncated rooted
subtree hanging at w away from u.  Messages are interned as small integers
and only rendered to AHU bytes once per distinct class.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ResourceLimitError
from .forests import DecoratedForest, expected_subtree_count
from .samplers import SampleBatch, SamplerConfig, sample_direct, stream_jsonl
from .trees import LabeledTree, RootedBall, decode_adjacency

MAX_PATTERN_NODES = 8


@dataclass
class BallCensus:
    radius: int
    counts: dict[bytes, int] = field(default_factory=dict)
    total: int = 0
    trees: int = 0
    # per-key sums of the per-tree proportion q and of q^2 (for standard errors)
    sum_q: dict[bytes, float] = field(default_factory=dict)
    sum_q2: dict[bytes, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add_tree(self, n: int, tree_counts: dict[bytes, int]) -> None:
        for key, c in tree_counts.items():
            self.counts[key] = self.counts.get(key, 0) + c
            q = c / n
            self.sum_q[key] = self.sum_q.get(key, 0.0) + q
            self.sum_q2[key] = self.sum_q2.get(key, 0.0) + q * q
        self.total += n
        self.trees += 1

    def merge(self, other: BallCensus) -> BallCensus:
        if other.radius != self.radius:
            raise DomainError("cannot merge censuses of different radii")
        out = BallCensus(self.radius, dict(self.counts), self.total + other.total,
                         self.trees + other.trees, dict(self.sum_q), dict(self.sum_q2), dict(self.meta))
        for key, c in other.counts.items():
            out.counts[key] = out.counts.get(key, 0) + c
            out.sum_q[key] = out.sum_q.get(key, 0.0) + other.sum_q[key]
            out.sum_q2[key] = out.sum_q2.get(key, 0.0) + other.sum_q2[key]
        return out

    def frequency(self, key: bytes) -> float:
        return self.counts.get(key, 0) / self.total if self.total else 0.0

    def frequencies(self) -> dict[bytes, float]:
        return {k: c / self.total for k, c in sorted(self.counts.items())}

    def sigma(self, key: bytes) -> float:
        """Standard error of the frequency, treating trees as i.i.d. units
        (meaningful when all trees have the same n)."""
        T = self.trees
        if T < 2:
            return math.inf
        mean = self.sum_q.get(key, 0.0) / T
        var = max(self.sum_q2.get(key, 0.0) / T - mean * mean, 0.0) * T / (T - 1)
        return math.sqrt(var / T)


# ---------------------------------------------------------------------------
# per-tree ball keys


class _Interner:
    def __init__(self):
        self.ids: dict[tuple, int] = {(): 0}
        self.items: list[tuple] = [()]
        self._bytes: dict[int, bytes] = {0: b"()"}

    def get(self, children: tuple) -> int:
        i = self.ids.get(children)
        if i is None:
            i = self.ids[children] = len(self.items)
            self.items.append(children)
        return i

    def render(self, i: int) -> bytes:
        out = self._bytes.get(i)
        if out is None:
            out = b"(" + b"".join(sorted(self.render(c) for c in self.items[i])) + b")"
            self._bytes[i] = out
        return out


def _ball_ids(adj: Sequence[Sequence[int]], radius: int, interner: _Interner) -> list[int]:
    n = len(adj)
    if radius == 0:
        return [0] * n
    # rev[v][k]: position of v in adj[adj[v][k]]
    pos = [{u: k for k, u in enumerate(a)} for a in adj]
    rev = [[pos[u][v] for u in adj[v]] for v in range(n)]
    out_msg = [[0] * len(a) for a in adj]  # level 0: everything is a bare node
    get = interner.get
    for _ in range(radius - 1):
        new = []
        for w in range(n):
            incoming = [out_msg[u][rev[w][k]] for k, u in enumerate(adj[w])]
            s = sorted(incoming)
            row = []
            for x in incoming:
                rest = list(s)
                rest.remove(x)
                row.append(get(tuple(rest)))
            new.append(row)
        out_msg = new
    return [get(tuple(sorted(out_msg[u][rev[v][k]] for k, u in enumerate(adj[v])))) for v in range(n)]


def tree_ball_counts(adj: Sequence[Sequence[int]], radius: int, interner: _Interner | None = None) -> dict[bytes, int]:
    """Counts of radius-``radius`` ball keys over all vertices of one tree."""
    interner = interner or _Interner()
    counts = Counter(_ball_ids(adj, radius, interner))
    return {interner.render(i): c for i, c in counts.items()}


def _star_key(d: int) -> bytes:
    return b"(" + b"()" * d + b")"


def _census_codes(codes: np.ndarray, n: int, radius: int) -> BallCensus:
    census = BallCensus(radius)
    if radius == 1:
        # the 1-ball is determined by the degree, 1 + multiplicity in the code
        for row in codes:
            deg_hist = np.bincount(np.bincount(row, minlength=n) + 1)
            census.add_tree(n, {_star_key(d): int(c) for d, c in enumerate(deg_hist) if c})
        return census
    interner = _Interner()
    for row in codes:
        adj = decode_adjacency(row.tolist(), n)
        census.add_tree(n, tree_ball_counts(adj, radius, interner))
    return census


def _census_trees(trees: Iterable[LabeledTree], radius: int) -> BallCensus:
    census = BallCensus(radius)
    interner = _Interner()
    for t in trees:
        census.add_tree(t.n, tree_ball_counts(t.adjacency, radius, interner))
    return census


def ball_census(source, radius: int, workers: int = 1, chunk: int = 64) -> BallCensus:
    """Census of radius-``radius`` balls around every vertex.

    ``source`` is a :class:`SampleBatch`, a path to a JSONL batch (streamed),
    or any iterable of :class:`LabeledTree`.
    """
    if radius < 0:
        raise DomainError("radius must be >= 0")
    if isinstance(source, SampleBatch):
        n, codes = source.n, source.codes
        if n == 2 or radius == 0:
            return _census_trees(iter(source), radius)
        parts = [codes[i:i + chunk] for i in range(0, len(codes), chunk)]
        if workers > 1 and len(parts) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_census_codes, parts, [n] * len(parts), [radius] * len(parts)))
        else:
            results = [_census_codes(p, n, radius) for p in parts]
        out = BallCensus(radius)
        for r in results:
            out = out.merge(r)
        out.meta = {"n": n, "source": "batch", "config": source.config.to_json()}
        return out
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        header, trees = stream_jsonl(source)
        out = _census_trees(trees, radius)
        out.meta = {"source": str(source), "config": header.get("config")}
        return out
    return _census_trees(source, radius)


def empirical_neighborhood_prob(c: BallCensus, ball: RootedBall | bytes) -> float:
    key = ball if isinstance(ball, bytes) else ball.key
    return c.frequency(key)


# ---------------------------------------------------------------------------
# decorated subtree counts


def labeled_subgraph_count(t: LabeledTree | Sequence[Sequence[int]], pattern: DecoratedForest,
                           max_nodes: int = MAX_PATTERN_NODES) -> int:
    """Ordered injective embeddings of ``pattern`` into the tree with host
    degree d_j^F + r_j at every image, by backtracking along a BFS order of
    the pattern."""
    if not pattern.is_tree():
        raise DomainError("pattern must be connected")
    if pattern.m > max_nodes:
        raise ResourceLimitError(f"patterns are limited to {max_nodes} nodes")
    adj = t.adjacency if isinstance(t, LabeledTree) else t
    need = pattern.host_degrees
    # BFS order of the pattern and each node's parent in it
    padj: list[list[int]] = [[] for _ in range(pattern.m)]
    for u, v in pattern.edges:
        padj[u].append(v)
        padj[v].append(u)
    order, parent = [0], {0: -1}
    for u in order:
        for w in padj[u]:
            if w not in parent:
                parent[w] = u
                order.append(w)
    pos = {p: i for i, p in enumerate(order)}
    par_pos = [pos[parent[p]] if parent[p] >= 0 else -1 for p in order]
    need_ord = [need[p] for p in order]
    image = [0] * pattern.m
    used = set()

    def extend(i):
        if i == len(order):
            return 1
        total = 0
        for w in adj[image[par_pos[i]]]:
            if len(adj[w]) == need_ord[i] and w not in used:
                image[i] = w
                used.add(w)
                total += extend(i + 1)
                used.discard(w)
        return total

    count = 0
    for v in range(len(adj)):
        if len(adj[v]) == need_ord[0]:
            image[0] = v
            used.add(v)
            count += extend(1)
            used.discard(v)
    return count


# ---------------------------------------------------------------------------
# concentration


def _derived_seed(seed: int, n: int) -> int:
    words = np.random.SeedSequence(seed, spawn_key=(n,)).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def concentration_experiment(pattern: DecoratedForest, ns: Sequence[int], samples: int, seed: int,
                             eps: float = 0.05, degree_method: str = "bars") -> dict:
    """Mean and variance of X_n^T / n over direct samples at each n, against
    the exact E(X_n^T)/n; reports the least-squares slope of log Var vs log n."""
    rows = []
    for n in ns:
        cfg = SamplerConfig(n, "direct", seed=_derived_seed(seed, n), count=samples, degree_method=degree_method)
        batch = sample_direct(cfg)
        x = np.array([labeled_subgraph_count(batch.adjacency(i), pattern) for i in range(len(batch))], float) / n
        exact = expected_subtree_count(n, pattern, exact=True) / n
        mean, var = float(x.mean()), float(x.var(ddof=1))
        se = math.sqrt(var / samples)
        rows.append({
            "n": n,
            "samples": samples,
            "mean": mean,
            "var": var,
            "se": se,
            "exact_mean": float(exact),
            "exact_mean_q": f"{exact.numerator}/{exact.denominator}",
            "z": (mean - float(exact)) / se if se > 0 else 0.0,
            "deviation_freq": float(np.mean(np.abs(x - float(exact)) > eps)),
            "seed": cfg.seed,
        })
    slope = math.nan
    good = [r for r in rows if r["var"] > 0]
    if len(good) >= 2:
        slope = float(np.polyfit(np.log([r["n"] for r in good]), np.log([r["var"] for r in good]), 1)[0])
    return {"pattern": pattern.to_json(), "eps": eps, "rows": rows, "var_exponent": slope}
