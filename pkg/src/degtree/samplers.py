"""Samplers for the degree-factorial tree model.

Two routes to the same law:

* the edge-rewiring Markov chain (``chain_step``, ``sample_chain``), and
* exact i.i.d. draws (``sample_direct``): a degree sequence with
  probability prod d_i / C(3n-3, n-2), then a uniformly shuffled Prufer
  code with node i repeated d_i - 1 times.

Randomness comes from numpy's Philox generator (counter based).  Direct
draws are produced in fixed-size blocks, block b seeded by
``SeedSequence(seed, spawn_key=(b,))``, so output does not depend on the
number of workers.
"""
from __future__ import annotations

import json
import logging
import math
from bisect import insort
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import DomainError, InvalidTreeError, ResourceLimitError
from .trees import LabeledTree, decode_adjacency, decode_edges, prufer_encode

log = logging.getLogger(__name__)

RNG_NAME = "numpy.random.Philox (4x64, counter based)"
BLOCK_SIZE = 1024
DP_MAX_N = 2000
CHECK_EVERY = 1 << 16
DEGREE_METHODS = ("bars", "dp", "rejection")


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def default_burn_in(n: int) -> int:
    """50 n ln n steps; a heuristic, the chain has no proven mixing bound."""
    return int(50 * n * math.log(n)) if n > 1 else 0


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    method: str = "direct"
    seed: int = 0
    count: int = 1
    # chain
    steps: int | None = None
    burn_in: int | None = None
    thin: int = 1
    chains: int = 1
    debug: bool = False
    # direct
    degree_method: str = "bars"

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("samplers need n >= 2")
        if self.method not in ("chain", "direct"):
            raise DomainError(f"unknown method {self.method!r}")
        if self.degree_method not in DEGREE_METHODS:
            raise DomainError(f"unknown degree method {self.degree_method!r}")
        if self.count < 0 or self.thin < 1 or self.chains < 1:
            raise DomainError("need count >= 0, thin >= 1, chains >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.method == "chain":
            burn = self.resolved_burn_in
            if self.steps is not None and burn >= self.steps:
                raise DomainError(f"burn-in ({burn}) must be < steps ({self.steps})")

    @property
    def resolved_burn_in(self) -> int:
        return default_burn_in(self.n) if self.burn_in is None else self.burn_in

    @property
    def resolved_steps(self) -> int:
        if self.steps is not None:
            return self.steps
        return self.resolved_burn_in + self.count * self.thin

    @property
    def samples_per_chain(self) -> int:
        return (self.resolved_steps - self.resolved_burn_in) // self.thin

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> SamplerConfig:
        return cls(**obj)


# ---------------------------------------------------------------------------
# sample batches


@dataclass
class SampleBatch:
    """Sampled trees stored as an (count, n-2) array of Prufer codes."""

    config: SamplerConfig
    codes: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.config.n

    def __len__(self) -> int:
        return int(self.codes.shape[0])

    def code(self, i: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.codes[i])

    def tree(self, i: int) -> LabeledTree:
        return LabeledTree(self.n, tuple(decode_edges(self.codes[i].tolist(), self.n)))

    def adjacency(self, i: int) -> list[list[int]]:
        return decode_adjacency(self.codes[i].tolist(), self.n)

    def __iter__(self) -> Iterator[LabeledTree]:
        for i in range(len(self)):
            yield self.tree(i)

    def header(self) -> dict:
        return {"config": self.config.to_json(), "count": len(self), "meta": self.meta}

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for i in range(len(self)):
                edges = decode_edges(self.codes[i].tolist(), self.n)
                fh.write(json.dumps({"n": self.n, "edges": [sorted(e) for e in sorted(map(sorted, edges))]}) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> SampleBatch:
        header, trees = stream_jsonl(path)
        config = SamplerConfig.from_json(header["config"])
        rows = [prufer_encode(t).code for t in trees]
        codes = np.array(rows, dtype=np.int64).reshape(len(rows), max(config.n - 2, 0))
        return cls(config, codes, header.get("meta", {}))


def stream_jsonl(path) -> tuple[dict, Iterator[LabeledTree]]:
    """Header plus a lazy iterator of trees; nothing else is held in memory."""
    fh = open(path)
    first = fh.readline()
    if not first:
        fh.close()
        raise DomainError(f"{path}: empty batch file")
    header = json.loads(first)

    def trees():
        with fh:
            for line in fh:
                if line.strip():
                    yield LabeledTree.from_json(line)

    return header, trees()


# ---------------------------------------------------------------------------
# the Markov chain


@dataclass(frozen=True)
class ChainState:
    """One state of the rewiring chain.

    ``edges`` keeps the walker's edge order (each pair sorted); the oriented
    edge with index 2e (2e+1) is edge e read as (X, V_old) = (small, large)
    ((large, small)).  The neighbor of V_old is chosen from its sorted
    neighbor list.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    step: int
    rng: np.random.Generator

    @classmethod
    def start(cls, n: int, seed: int, chain: int = 0) -> ChainState:
        """The path 0-1-...-(n-1), generator keyed by (seed, chain)."""
        if n < 2:
            raise DomainError("the chain needs n >= 2")
        return cls(n, tuple((i, i + 1) for i in range(n - 1)), 0, make_rng(seed, chain))

    @property
    def tree(self) -> LabeledTree:
        return LabeledTree(self.n, self.edges)


def _copy_rng(rng: np.random.Generator) -> np.random.Generator:
    bg = np.random.Philox()
    bg.state = rng.bit_generator.state
    return np.random.Generator(bg)


def _move(edges, adj, u1: float, u2: float):
    """Apply one kernel step in place; returns True when the tree changed."""
    idx = int(u1 * 2 * len(edges))
    e, flip = divmod(idx, 2)
    a, b = edges[e]
    x, v_old = (b, a) if flip else (a, b)
    nbrs = adj[v_old]
    v_new = nbrs[int(u2 * len(nbrs))]
    if v_new == x:
        return False
    nbrs.remove(x)
    adj[x].remove(v_old)
    insort(adj[x], v_new)
    insort(adj[v_new], x)
    edges[e] = (x, v_new) if x < v_new else (v_new, x)
    return True


def _adjacency(n, edges):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for lst in adj:
        lst.sort()
    return adj


def chain_step(s: ChainState) -> ChainState:
    """One transition: uniform oriented edge (X, V_old), uniform neighbor
    V_new of V_old; if V_new != X the edge X-V_old becomes X-V_new.
    The input state (including its generator) is left untouched."""
    rng = _copy_rng(s.rng)
    u1, u2 = rng.random(2)
    edges = list(s.edges)
    _move(edges, _adjacency(s.n, edges), u1, u2)
    return ChainState(s.n, tuple(edges), s.step + 1, rng)


def _check_tree(n, edges):
    if len(edges) != n - 1:
        raise InvalidTreeError("chain invariant violated: wrong edge count")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        a, b = find(u), find(v)
        if a == b:
            raise InvalidTreeError("chain invariant violated: cycle")
        parent[a] = b


class ChainWalker:
    """Fast in-place walker producing the same trajectory as repeated
    :func:`chain_step` from the same starting state."""

    def __init__(self, state: ChainState, debug: bool = False, block: int = 8192):
        self.n = state.n
        self.edges = list(state.edges)
        self.adj = _adjacency(self.n, self.edges)
        self.step = state.step
        self.rng = _copy_rng(state.rng)
        self.debug = debug
        self.block = block
        self.checks = 0

    def run(self, k: int) -> None:
        edges, adj = self.edges, self.adj
        while k > 0:
            take = min(k, self.block)
            # draw exactly what this chunk consumes so the generator position
            # always matches `step`
            buf = self.rng.random(2 * take).tolist()
            start = self.step
            for i in range(take):
                _move(edges, adj, buf[2 * i], buf[2 * i + 1])
                if self.debug or not (start + i + 1) % CHECK_EVERY:
                    self._check()
            self.step += take
            k -= take

    def _check(self):
        _check_tree(self.n, self.edges)
        self.checks += 1

    def state(self) -> ChainState:
        return ChainState(self.n, tuple(self.edges), self.step, _copy_rng(self.rng))


def _check_transition_n(n, max_n):
    if n < 2:
        raise DomainError("need n >= 2")
    if n > max_n:
        raise ResourceLimitError(f"transition matrix over {n}^{n - 2} trees exceeds the n <= {max_n} limit")


def transition_matrix(n: int, max_n: int = 7) -> dict[int, dict[int, Fraction]]:
    """Exact one-step kernel as a sparse matrix indexed by Prufer rank."""
    _check_transition_n(n, max_n)
    from itertools import product

    trees = []
    index = {}
    for rank, code in enumerate(product(range(n), repeat=n - 2)):
        edges = frozenset(tuple(sorted(e)) for e in decode_edges(code, n))
        trees.append(edges)
        index[edges] = rank
    base = Fraction(1, 2 * (n - 1))
    out: dict[int, dict[int, Fraction]] = {}
    for rank, edges in enumerate(trees):
        adj = _adjacency(n, edges)
        row: dict[int, Fraction] = {}
        for a, b in edges:
            for x, v_old in ((a, b), (b, a)):
                p = base / len(adj[v_old])
                for v_new in adj[v_old]:
                    if v_new == x:
                        target = rank
                    else:
                        new = set(edges)
                        new.remove((a, b))
                        new.add((min(x, v_new), max(x, v_new)))
                        target = index[frozenset(new)]
                    row[target] = row.get(target, 0) + p
        out[rank] = row
    return out


def _chain_codes(cfg: SamplerConfig, chain: int):
    n = cfg.n
    walker = ChainWalker(ChainState.start(n, cfg.seed, chain), debug=cfg.debug)
    walker.run(cfg.resolved_burn_in)
    count = cfg.samples_per_chain
    codes = np.empty((count, n - 2), dtype=np.int32)
    cache: dict | None = {} if n <= 8 else None
    for i in range(count):
        walker.run(cfg.thin)
        if cache is not None:
            key = frozenset(walker.edges)
            code = cache.get(key)
            if code is None:
                code = cache[key] = prufer_encode(LabeledTree(n, tuple(walker.edges))).code
        else:
            code = prufer_encode(LabeledTree(n, tuple(walker.edges))).code
        codes[i] = code
    walker._check()
    return codes, walker.checks


def sample_chain(cfg: SamplerConfig, workers: int = 1) -> SampleBatch:
    """Run ``cfg.chains`` independent chains from the path 0-1-...-(n-1);
    chain c draws from ``SeedSequence(seed, spawn_key=(c,))``.  After burn-in
    every ``thin``-th state is emitted, up to ``steps`` total steps."""
    if cfg.method != "chain":
        raise DomainError("sample_chain needs method='chain'")
    if workers > 1 and cfg.chains > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chain_codes, [cfg] * cfg.chains, range(cfg.chains)))
    else:
        parts = [_chain_codes(cfg, c) for c in range(cfg.chains)]
    codes = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, cfg.n - 2), np.int32)
    meta = {
        "rng": RNG_NAME,
        "start": "path",
        "burn_in": cfg.resolved_burn_in,
        "burn_in_heuristic": cfg.burn_in is None,
        "steps_per_chain": cfg.resolved_steps,
        "invariant_checks": sum(p[1] for p in parts),
    }
    return SampleBatch(cfg, codes, meta)


# ---------------------------------------------------------------------------
# exact degree sequences


def degree_dp_table(n: int) -> list[list[int]]:
    """f[i][s] = sum over compositions of s into i positive parts of the
    product of the parts, by the recursion f(i, s) = sum_d d f(i-1, s-d)."""
    S = 2 * n - 2
    f = [[0] * (S + 1) for _ in range(n + 1)]
    f[0][0] = 1
    for i in range(1, n + 1):
        prev, row = f[i - 1], f[i]
        for s in range(i, S + 1):
            row[s] = sum(d * prev[s - d] for d in range(1, s - i + 2))
    return f


def _randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrarily large ``bound``."""
    bits = bound.bit_length()
    words = (bits + 63) // 64
    shift = 64 * words - bits
    while True:
        v = 0
        for w in rng.bit_generator.random_raw(words).tolist():
            v = (v << 64) | w
        v >>= shift
        if v < bound:
            return v


def _dp_degrees(n: int, rng) -> list[int]:
    # P(next degree = x | i nodes left, sum S) = x f(i-1, S-x) / f(i, S) with
    # f(i, s) = C(i+s-1, s-i); consecutive binomials are updated by ratios
    S = 2 * n - 2
    total = math.comb(3 * n - 3, n - 2)  # f(n, 2n-2)
    out = []
    for i in range(n, 1, -1):
        u = _randbelow(rng, total)
        M, K = i + S - 1, S - i
        F = total * (M - K) * (M - K - 1) // (M * (M - 1))  # f(i-1, S-1)
        x, N = 1, M - 2
        acc = F
        while u >= acc:
            F = F * K // N
            N -= 1
            K -= 1
            x += 1
            acc += x * F
        out.append(x)
        S -= x
        total = F
    out.append(S)
    return out


def _rejection_degrees(n: int, rng) -> list[int]:
    # d-1 i.i.d. with P(k) = (k+1) (1/3)^k (2/3)^2 (mean 1), accepted on sum n-2
    batch = max(4, int(3 * math.sqrt(n)))
    while True:
        g = rng.negative_binomial(2, 2 / 3, size=(batch, n))
        hit = np.flatnonzero(g.sum(axis=1) == n - 2)
        if hit.size:
            return (g[hit[0]] + 1).tolist()


def _bars_codes(n: int, count: int, rng) -> np.ndarray:
    """``count`` sorted Prufer multisets from uniform weak compositions of n-2
    into 2n parts (g_i = a_i + b_i gives weight prod (g_i + 1) = prod d_i)."""
    slots = 3 * n - 3
    keys = rng.random((count, slots))
    stars = np.zeros((count, slots), dtype=bool)
    pick = np.argpartition(keys, n - 3, axis=1)[:, : n - 2] if n > 2 else np.empty((count, 0), int)
    np.put_along_axis(stars, pick, True, axis=1)
    bars_before = np.cumsum(~stars, axis=1)
    part = bars_before[stars].reshape(count, n - 2)
    return (part // 2).astype(np.int32)


def sample_degree_sequence(n: int, seed: int | None = None, method: str | None = None, rng=None) -> tuple[int, ...]:
    """Degrees with probability prod d_i / C(3n-3, n-2).

    ``dp`` (default up to n = 2000) is exact sequential conditioning on
    integer counts; ``rejection`` is the i.i.d. tilted fallback; ``bars``
    reads the degrees off a uniform weak composition.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    if method is None:
        method = "dp" if n <= DP_MAX_N else "rejection"
    if method == "dp":
        return tuple(_dp_degrees(n, rng))
    if method == "rejection":
        return tuple(_rejection_degrees(n, rng))
    if method == "bars":
        return tuple(int(x) + 1 for x in np.bincount(_bars_codes(n, 1, rng)[0], minlength=n))
    raise DomainError(f"unknown degree method {method!r}")


def _code_from_degrees(degrees, rng) -> np.ndarray:
    multiset = np.repeat(np.arange(len(degrees), dtype=np.int32), np.asarray(degrees) - 1)
    return rng.permutation(multiset)


def _direct_block(n: int, count: int, seed: int, block: int, method: str) -> np.ndarray:
    rng = make_rng(seed, block)
    if method == "bars":
        return rng.permuted(_bars_codes(n, count, rng), axis=1)
    out = np.empty((count, n - 2), dtype=np.int32)
    for i in range(count):
        d = _dp_degrees(n, rng) if method == "dp" else _rejection_degrees(n, rng)
        out[i] = _code_from_degrees(d, rng)
    return out


def sample_direct(cfg: SamplerConfig, workers: int = 1) -> SampleBatch:
    """``cfg.count`` i.i.d. exact draws, in blocks of ``BLOCK_SIZE``."""
    if cfg.method != "direct":
        raise DomainError("sample_direct needs method='direct'")
    n, method = cfg.n, cfg.degree_method
    if method == "dp" and n > DP_MAX_N:
        log.info("n=%d above the dp limit; using rejection", n)
        method = "rejection"
    nblocks = -(-cfg.count // BLOCK_SIZE)
    jobs = [(n, min(BLOCK_SIZE, cfg.count - b * BLOCK_SIZE), cfg.seed, b, method) for b in range(nblocks)]
    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _direct_block(*a), jobs))
    else:
        parts = [_direct_block(*a) for a in jobs]
    codes = np.concatenate(parts) if parts else np.empty((0, n - 2), np.int32)
    meta = {"rng": RNG_NAME, "block_size": BLOCK_SIZE, "degree_method": method}
    return SampleBatch(cfg, codes, meta)


def sample(cfg: SamplerConfig, workers: int = 1) -> SampleBatch:
    return sample_chain(cfg, workers) if cfg.method == "chain" else sample_direct(cfg, workers)
