"""Labeled trees, the Prufer bijection, rooted balls and their canonical keys.

Nodes are 0-based.  A :class:`RootedBall` is stored as a parent array in
breadth-first order (``parent[0] == -1`` is the root), which makes levels,
child lists and bottom-up passes trivial.

Canonical keys are AHU strings: a leaf is ``()`` and an internal node is
``(`` + the sorted keys of its children + ``)``.  Two rooted trees get the
same key exactly when they are rooted-isomorphic.
"""
from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import DomainError, InvalidTreeError, MalformedCodeError

LEAF_KEY = b"()"


# ---------------------------------------------------------------------------
# labeled trees


@dataclass(frozen=True)
class LabeledTree:
    """A tree on nodes ``0..n-1``; edges are stored as sorted ``(min, max)`` pairs."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidTreeError(f"n must be >= 1, got {self.n}")
        norm = []
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise InvalidTreeError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidTreeError(f"edge ({u}, {v}) out of range for n={self.n}")
            norm.append((u, v) if u < v else (v, u))
        norm.sort()
        if len(norm) != self.n - 1:
            raise InvalidTreeError(f"a tree on {self.n} nodes has {self.n - 1} edges, got {len(norm)}")
        if any(a == b for a, b in zip(norm, norm[1:])):
            raise InvalidTreeError("duplicate edge")
        if not _is_connected(self.n, norm):
            raise InvalidTreeError("edge list is not connected")
        object.__setattr__(self, "edges", tuple(norm))

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.adjacency)

    def relabel(self, perm: Sequence[int]) -> LabeledTree:
        """Image of the tree under the node map ``i -> perm[i]``."""
        return LabeledTree(self.n, tuple((perm[u], perm[v]) for u, v in self.edges))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj: dict | str) -> LabeledTree:
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            n = obj["n"]
            edges = obj["edges"]
        except (KeyError, TypeError) as exc:
            raise InvalidTreeError(f"tree JSON needs 'n' and 'edges': {exc}") from None
        if not isinstance(n, int) or any(len(e) != 2 for e in edges):
            raise InvalidTreeError("malformed tree JSON")
        return cls(n, tuple(tuple(e) for e in edges))

    @classmethod
    def path(cls, n: int) -> LabeledTree:
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def star(cls, n: int, center: int = 0) -> LabeledTree:
        return cls(n, tuple((center, i) for i in range(n) if i != center))


def _is_connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comps = n
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            return False
        parent[ru] = rv
        comps -= 1
    return comps == 1


def degree_sequence(t: LabeledTree) -> tuple[int, ...]:
    return t.degrees


# ---------------------------------------------------------------------------
# Prufer codes


@dataclass(frozen=True)
class PruferCode:
    n: int
    code: tuple[int, ...]

    def __post_init__(self):
        if self.n < 2:
            raise MalformedCodeError(f"Prufer codes need n >= 2, got {self.n}")
        code = tuple(int(x) for x in self.code)
        if len(code) != self.n - 2:
            raise MalformedCodeError(f"code length must be n-2={self.n - 2}, got {len(code)}")
        for x in code:
            if not 0 <= x < self.n:
                raise MalformedCodeError(f"label {x} out of range 0..{self.n - 1}")
        object.__setattr__(self, "code", code)

    def rank(self) -> int:
        """Position of the code in lexicographic order over ``range(n)**(n-2)``."""
        r = 0
        for x in self.code:
            r = r * self.n + x
        return r

    @classmethod
    def unrank(cls, n: int, rank: int) -> PruferCode:
        digits = []
        for _ in range(n - 2):
            rank, x = divmod(rank, n)
            digits.append(x)
        return cls(n, tuple(reversed(digits)))


def decode_edges(code: Sequence[int], n: int) -> list[tuple[int, int]]:
    """Linear-time Prufer decoding (smallest-leaf convention), no validation."""
    degree = [1] * n
    for x in code:
        degree[x] += 1
    ptr = 0
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    edges = []
    for x in code:
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1 and x < ptr:
            leaf = x
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    edges.append((leaf, n - 1))
    return edges


def decode_adjacency(code: Sequence[int], n: int) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in decode_edges(code, n):
        adj[u].append(v)
        adj[v].append(u)
    return adj


def prufer_decode(code: PruferCode | Sequence[int], n: int | None = None) -> LabeledTree:
    if not isinstance(code, PruferCode):
        if n is None:
            n = len(code) + 2
        code = PruferCode(n, tuple(code))
    return LabeledTree(code.n, tuple(decode_edges(code.code, code.n)))


def prufer_encode(t: LabeledTree) -> PruferCode:
    n = t.n
    if n < 2:
        raise DomainError("Prufer encoding needs n >= 2")
    adj = t.adjacency
    parent = [-1] * n
    stack = [n - 1]
    seen = [False] * n
    seen[n - 1] = True
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                parent[w] = u
                stack.append(w)
    degree = list(t.degrees)
    ptr = 0
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    code = []
    for _ in range(n - 2):
        nxt = parent[leaf]
        code.append(nxt)
        degree[nxt] -= 1
        if degree[nxt] == 1 and nxt < ptr:
            leaf = nxt
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    return PruferCode(n, tuple(code))


# ---------------------------------------------------------------------------
# rooted balls


@dataclass(frozen=True)
class RootedBall:
    """A rooted tree of bounded depth, nodes in BFS order.

    ``depth`` is the radius the ball was cut at; it may exceed the height of
    the stored tree when the ball exhausted a finite host tree.
    """

    parent: tuple[int, ...]
    depth: int = field(default=-1)

    def __post_init__(self):
        parent = tuple(int(p) for p in self.parent)
        if not parent or parent[0] != -1:
            raise InvalidTreeError("node 0 must be the root (parent -1)")
        level = [0] * len(parent)
        for i in range(1, len(parent)):
            p = parent[i]
            if not 0 <= p < i:
                raise InvalidTreeError("parents must precede children (BFS order)")
            level[i] = level[p] + 1
            if level[i] < level[i - 1]:
                raise InvalidTreeError("nodes must be listed level by level")
        height = level[-1]
        depth = height if self.depth < 0 else self.depth
        if depth < height:
            raise InvalidTreeError(f"depth {depth} is smaller than the tree height {height}")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "_level", tuple(level))

    # -- structure -----------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def node_level(self) -> tuple[int, ...]:
        return self._level

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch: list[list[int]] = [[] for _ in self.parent]
        for i, p in enumerate(self.parent[1:], start=1):
            ch[p].append(i)
        return tuple(tuple(c) for c in ch)

    @cached_property
    def child_counts(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.children)

    @cached_property
    def levels(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.depth + 1)]
        for i, lv in enumerate(self._level):
            out[lv].append(i)
        return tuple(tuple(x) for x in out)

    @property
    def level_sizes(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.levels)

    def degree(self, v: int) -> int:
        """Degree inside the ball; the true host degree for nodes above the bottom level."""
        return self.child_counts[v] + (0 if v == 0 else 1)

    # -- canonical form ------------------------------------------------------

    @cached_property
    def node_keys(self) -> tuple[bytes, ...]:
        keys: list[bytes] = [b""] * self.size
        for v in range(self.size - 1, -1, -1):
            keys[v] = b"(" + b"".join(sorted(keys[c] for c in self.children[v])) + b")"
        return tuple(keys)

    @property
    def key(self) -> bytes:
        return self.node_keys[0]

    @cached_property
    def aut(self) -> int:
        return aut_count(self)

    def describe(self) -> str:
        """Bracket notation: ``*`` is a childless node, ``[..]`` lists children."""
        return describe_key(self.key)

    # -- conversions ---------------------------------------------------------

    def to_nested(self, v: int = 0) -> dict:
        return {"children": [self.to_nested(c) for c in self.children[v]]}

    def to_json(self) -> dict:
        out = self.to_nested()
        out["depth"] = self.depth
        return out

    @classmethod
    def from_json(cls, obj: dict | str) -> RootedBall:
        if isinstance(obj, str):
            obj = json.loads(obj)
        depth = obj.get("depth", -1) if isinstance(obj, dict) else -1
        return cls.from_nested(obj, depth=depth)

    @classmethod
    def from_nested(cls, obj, depth: int = -1) -> RootedBall:
        """Build from ``{"children": [...]}`` dicts or from nested tuples/lists."""

        def kids(x):
            if isinstance(x, dict):
                if "children" not in x:
                    raise InvalidTreeError("ball JSON nodes need a 'children' list")
                return x["children"]
            if isinstance(x, (list, tuple)):
                return x
            raise InvalidTreeError(f"cannot read ball node {x!r}")

        parent = [-1]
        queue = deque([(obj, 0)])
        while queue:
            node, idx = queue.popleft()
            for c in kids(node):
                parent.append(idx)
                queue.append((c, len(parent) - 1))
        return cls(tuple(parent), depth)

    @classmethod
    def from_key(cls, key: bytes, depth: int = -1) -> RootedBall:
        return cls.from_nested(key_to_nested(key), depth)

    def canonical(self) -> RootedBall:
        """Same class, relabeled so that children are ordered by key."""
        return RootedBall.from_key(self.key, self.depth)

    def truncate(self, depth: int) -> RootedBall:
        keep = [i for i, lv in enumerate(self._level) if lv <= depth]
        return RootedBall(tuple(self.parent[i] for i in keep), depth)

    def __eq__(self, other):
        if not isinstance(other, RootedBall):
            return NotImplemented
        return self.depth == other.depth and self.key == other.key

    def __hash__(self):
        return hash((self.depth, self.key))


def canonical_key(b: RootedBall) -> bytes:
    return b.key


def aut_count(b: RootedBall) -> int:
    """Number of rooted automorphisms, as a product of factorials of
    multiplicities of identical child subtrees, taken bottom-up."""
    keys = b.node_keys
    total = 1
    for v in range(b.size):
        ch = b.children[v]
        if len(ch) > 1:
            for mult in Counter(keys[c] for c in ch).values():
                total *= math.factorial(mult)
    return total


def colored_aut_count(b: RootedBall, colors: Sequence) -> int:
    """Automorphisms of ``b`` that preserve a per-node color."""
    keys: list[bytes] = [b""] * b.size
    total = 1
    for v in range(b.size - 1, -1, -1):
        ch = sorted(keys[c] for c in b.children[v])
        keys[v] = repr(colors[v]).encode() + b"(" + b"".join(ch) + b")"
        for mult in Counter(ch).values():
            total *= math.factorial(mult)
    return total


def key_to_nested(key: bytes) -> tuple:
    """Parse an AHU key into nested tuples (children in key order)."""
    stack: list[list] = [[]]
    for ch in key:
        if ch == 0x28:  # "("
            stack.append([])
        elif ch == 0x29:  # ")"
            node = tuple(stack.pop())
            stack[-1].append(node)
        else:
            raise InvalidTreeError(f"bad character in key: {chr(ch)!r}")
    if len(stack) != 1 or len(stack[0]) != 1:
        raise InvalidTreeError("unbalanced key")
    return stack[0][0]


def nested_to_key(nested: tuple) -> bytes:
    return b"(" + b"".join(sorted(nested_to_key(c) for c in nested)) + b")"


def describe_key(key: bytes) -> str:
    def render(node):
        if not node:
            return "*"
        return "[" + " ".join(render(c) for c in node) + "]"

    return render(key_to_nested(key))


def extract_ball(t: LabeledTree, v: int, radius: int) -> RootedBall:
    """The radius-``radius`` ball around ``v``, rooted at ``v``."""
    if not 0 <= v < t.n:
        raise DomainError(f"node {v} out of range")
    if radius < 0:
        raise DomainError("radius must be >= 0")
    return _ball_from_adjacency(t.adjacency, v, radius)


def _ball_from_adjacency(adj, v: int, radius: int) -> RootedBall:
    index = {v: 0}
    parent = [-1]
    frontier = [v]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            iu = index[u]
            for w in adj[u]:
                if w not in index:
                    index[w] = len(parent)
                    parent.append(iu)
                    nxt.append(w)
        if not nxt:
            break
        frontier = nxt
    return RootedBall(tuple(parent), radius)


def rooted_trees(max_nodes: int) -> Iterable[RootedBall]:
    """All rooted trees with 1..max_nodes nodes, one per isomorphism class."""
    by_size: dict[int, list[tuple]] = {1: [()]}
    for size in range(2, max_nodes + 1):
        found = set()
        for forest in _forests(size - 1, by_size):
            found.add(tuple(sorted(forest)))
        by_size[size] = sorted(found)
    for size in range(1, max_nodes + 1):
        for nested in by_size[size]:
            yield RootedBall.from_nested(nested)


def _forests(total: int, by_size, max_part=None):
    # multisets of rooted trees with `total` nodes in all, parts in nonincreasing order
    if total == 0:
        yield []
        return
    for size in range(min(total, max_part[0] if max_part else total), 0, -1):
        for tree in by_size[size]:
            if max_part and size == max_part[0] and tree > max_part[1]:
                continue
            for rest in _forests(total - size, by_size, (size, tree)):
                yield [tree] + rest
