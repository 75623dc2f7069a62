"""The local limit: exact ball probabilities, consistency, enumeration, sampling.

For a ball b of depth l with level sizes t_0..t_l,

    p(b) = 9 (4/27)^(t_0+...+t_{l-1}) * t_l / 3^t_l / |Aut(b)| * prod_{depth < l} d_j!

where d_j is the degree of a node above the bottom level (root: child count,
others: child count + 1).

Truncation bounds use x = 1/3 and the series
    A = sum_c c (c+1) x^c = 9/4,   B = sum_c (c+1) x^c = 9/4,
    S1(D) = sum_{c>=D} (c+1) x^c,  S2(D) = sum_{c>=D} c (c+1) x^c.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement, product

from .errors import DomainError, ResourceLimitError
from .exact import LogWeight, binomial
from .forests import DecoratedForest, limit_decorated_density
from .samplers import make_rng
from .trees import RootedBall

A_WEIGHT = Fraction(4, 27)
X = Fraction(1, 3)
SERIES_A = Fraction(9, 4)
SERIES_B = Fraction(9, 4)
MAX_CLASSES = 200_000


@dataclass(frozen=True)
class LimitBallProb:
    ball: RootedBall
    probability: Fraction
    max_degree: int | None = None
    interior_leaf: bool = False

    def to_row(self) -> dict:
        p = self.probability
        return {
            "key": self.ball.key.hex(),
            "ball": self.ball.describe(),
            "p": f"{p.numerator}/{p.denominator}",
            "p_decimal": float(p),
            "interior_leaf": self.interior_leaf,
        }


def _inner_factorials(b: RootedBall) -> int:
    l = b.depth
    out = 1
    for v in range(b.size):
        if b.node_level[v] < l:
            out *= math.factorial(b.degree(v))
    return out


def has_interior_leaf(b: RootedBall) -> bool:
    """A non-root node above the bottom level with no children.

    Such a node is a leaf of the infinite tree; the formula still reads T_l
    as "nodes at distance exactly l", and these balls are flagged."""
    return any(
        v != 0 and b.node_level[v] < b.depth and not b.child_counts[v] for v in range(b.size)
    )


def limit_ball_probability(b: RootedBall) -> Fraction:
    """Exact p(b) for the limit measure; p = 1 for the depth-0 ball and 0
    when the ball does not reach its stated depth."""
    l = b.depth
    if l == 0:
        return Fraction(1)
    sizes = b.level_sizes
    t_l = sizes[l]
    if t_l == 0:
        return Fraction(0)
    upper = sum(sizes[:l])
    return 9 * A_WEIGHT**upper * Fraction(t_l, 3**t_l) * _inner_factorials(b) / b.aut


def limit_ball_log_probability(b: RootedBall) -> LogWeight:
    """The same value evaluated in the log domain."""
    l = b.depth
    if l == 0:
        return LogWeight(0.0)
    sizes = b.level_sizes
    t_l = sizes[l]
    if t_l == 0:
        return LogWeight(0.0, True)
    lw = (math.log(9) + sum(sizes[:l]) * math.log(4 / 27) + math.log(t_l) - t_l * math.log(3)
          + sum(math.lgamma(b.degree(v) + 1) for v in range(b.size) if b.node_level[v] < l)
          - math.log(b.aut))
    return LogWeight(lw)


def limit_ball(b: RootedBall, max_degree: int | None = None) -> LimitBallProb:
    return LimitBallProb(b, limit_ball_probability(b), max_degree, has_interior_leaf(b))


def root_degree_pmf(d: int) -> Fraction:
    """(4/3) d / 3^d."""
    if d < 1:
        return Fraction(0)
    return Fraction(4 * d, 3 ** (d + 1))


# ---------------------------------------------------------------------------
# enumeration


def _multichoose(m: int, c: int) -> int:
    return binomial(m + c - 1, c) if m > 0 else int(c == 0)


def count_balls(l: int, D: int) -> int:
    """Number of classes of depth exactly ``l`` with every degree <= D."""
    if l < 1 or D < 1:
        raise DomainError("need l >= 1 and D >= 1")

    def at_most(h):
        # classes of rooted trees of height <= h: the root has <= D children,
        # other nodes <= D-1
        sub = 1  # height <= 0 below a non-root node
        for _ in range(h - 1):
            sub = sum(_multichoose(sub, c) for c in range(D))
        return sum(_multichoose(sub, c) for c in range(D + 1)) if h > 0 else 1

    return at_most(l) - at_most(l - 1)


def _height(nested) -> int:
    return 1 + max(map(_height, nested)) if nested else 0


def enumerate_balls(l: int, D: int, limit: int = MAX_CLASSES) -> list[RootedBall]:
    """One representative per class of depth-exactly-l balls with degrees
    <= D, sorted by canonical key."""
    total = count_balls(l, D)
    if total > limit:
        raise ResourceLimitError(f"{total} classes at l={l}, D={D} exceed the limit {limit}")
    subs = [()]  # subtrees of height <= h hanging below a non-root node
    for _ in range(l - 1):
        subs = [tuple(c) for k in range(D) for c in combinations_with_replacement(subs, k)]
    out = []
    for k in range(1, D + 1):
        for kids in combinations_with_replacement(subs, k):
            if _height(kids) == l:
                out.append(RootedBall.from_nested(kids, depth=l))
    out.sort(key=lambda b: b.key)
    return out


def limit_table(l: int, D: int, limit: int = MAX_CLASSES) -> list[LimitBallProb]:
    return [limit_ball(b, D) for b in enumerate_balls(l, D, limit)]


# ---------------------------------------------------------------------------
# truncation tails


def tail_S1(D: int) -> Fraction:
    """sum_{c >= D} (c+1) x^c."""
    return X**D * ((D + 1) / (1 - X) + X / (1 - X) ** 2)


def tail_S2(D: int) -> Fraction:
    """sum_{c >= D} c (c+1) x^c."""
    return X**D * (X * (1 + X) / (1 - X) ** 3 + (2 * D + 1) * X / (1 - X) ** 2 + Fraction(D * (D + 1)) / (1 - X))


def _truncated_series(cutoff: int) -> tuple[Fraction, Fraction]:
    a = sum((Fraction(c * (c + 1)) * X**c for c in range(cutoff)), Fraction(0))
    b = sum((Fraction(c + 1) * X**c for c in range(cutoff)), Fraction(0))
    return a, b


def product_tail_bound(K: Fraction, t: int, cutoff: int) -> Fraction:
    """Bound on K * sum over (c_1..c_t) with some c_i >= cutoff of
    (sum c) prod (c_i + 1) x^c_i, by a union bound over the index that
    overflows.  Exact (not just a bound) when t = 1."""
    bound = t * tail_S2(cutoff) * SERIES_B ** (t - 1)
    if t >= 2:
        bound += t * (t - 1) * tail_S1(cutoff) * SERIES_A * SERIES_B ** (t - 2)
    return K * bound


def root_degree_tail(D: int) -> Fraction:
    """sum_{d > D} (4/3) d 3^-d."""
    return Fraction(4, 3) * X * tail_S1(D)


# ---------------------------------------------------------------------------
# consistency


@dataclass(frozen=True)
class ConsistencyResult:
    lhs: Fraction
    rhs: Fraction
    bound: Fraction
    classes: int | None = None

    @property
    def residual(self) -> Fraction:
        return self.lhs - self.rhs

    @property
    def ok(self) -> bool:
        return 0 <= self.residual <= self.bound


def _extension_constant(b: RootedBall) -> tuple[Fraction, int]:
    """K and t such that the class sum over depth-(l) extensions of ``b``
    (bottom nodes get c_i children) equals K * sum_c (sum c) prod (c_i+1) x^c_i."""
    depth = b.depth
    bottom = b.levels[depth]
    inner = 1
    for v in range(b.size):
        if b.node_level[v] < depth:
            inner *= math.factorial(b.degree(v))
    return 9 * A_WEIGHT**b.size * inner / b.aut, len(bottom)


def consistency_check(b: RootedBall, D: int) -> ConsistencyResult:
    """lhs = p(b); rhs = total probability of the depth-(l+1) extensions of
    ``b`` whose new degrees are <= D; bound covers the omitted extensions.

    Classes of extensions are counted through the child-count vectors c on
    the bottom level: a vector's class has |Aut(ext)| = |Aut_c(b)| prod c_i!
    (Aut_c preserves c) and the vector orbit has |Aut(b)|/|Aut_c(b)| members,
    so the class sum factorizes.
    """
    if D < 1:
        raise DomainError("D must be >= 1")
    lhs = limit_ball_probability(b)
    if b.depth == 0:
        rhs = sum((root_degree_pmf(d) for d in range(1, D + 1)), Fraction(0))
        return ConsistencyResult(lhs, rhs, root_degree_tail(D))
    if b.level_sizes[b.depth] == 0:
        raise DomainError("the ball does not reach its stated depth")
    K, t = _extension_constant(b)
    a, s = _truncated_series(D)
    rhs = K * t * a * s ** (t - 1)
    return ConsistencyResult(lhs, rhs, product_tail_bound(K, t, D))


def extensions(b: RootedBall, D: int, limit: int = MAX_CLASSES) -> list[RootedBall]:
    """Distinct classes of depth-(l+1) extensions of ``b`` with new degrees <= D."""
    depth = b.depth
    bottom = b.levels[depth]
    choices = range(1, D + 1) if depth == 0 else range(D)
    if len(choices) ** len(bottom) > limit:
        raise ResourceLimitError("too many child-count vectors")
    seen = {}
    for cs in product(choices, repeat=len(bottom)):
        if not any(cs):
            continue
        parent = list(b.parent)
        for v, c in zip(bottom, cs):
            parent.extend([v] * c)
        ext = RootedBall(tuple(parent), depth + 1)
        seen.setdefault(ext.key, ext)
    return [seen[k] for k in sorted(seen)]


def consistency_by_classes(b: RootedBall, D: int) -> tuple[Fraction, Fraction]:
    """(p(b), sum of p over explicitly enumerated extension classes)."""
    return limit_ball_probability(b), sum((limit_ball_probability(e) for e in extensions(b, D)), Fraction(0))


# ---------------------------------------------------------------------------
# total mass


def normalization_mass(l: int, D: int) -> Fraction:
    """Total p over all depth-l classes with degrees <= D.

    Summing p over classes equals summing over plane trees (ordered children)
    the weight 9 t_l prod(4/27 per node above level l) prod(c+1 per non-root
    node above level l) prod(1/3 per bottom node).  With the bottom weight as
    a variable y this is 9 y G_0'(y) at y = 1/3, where G_l = y,
    G_j = (4/27) sum_{c<D} (c+1) G_{j+1}^c and G_0 = (4/27) sum_{d<=D} G_1^d.
    Evaluated with exact dual numbers (value, derivative).
    """
    if l < 1 or D < 1:
        raise DomainError("need l >= 1 and D >= 1")
    g, dg = X, Fraction(1)
    for _ in range(l - 1):
        g, dg = _dual_series(g, dg, [Fraction(c + 1) for c in range(D)])
    g0, dg0 = _dual_series(g, dg, [Fraction(1)] * (D + 1))
    return 9 * X * dg0


def _dual_series(g, dg, coeffs):
    # (4/27) sum_c coeffs[c] g^c and its derivative
    val, der = Fraction(0), Fraction(0)
    power = Fraction(1)  # g^c
    prev = Fraction(0)  # g^(c-1)
    for c, a in enumerate(coeffs):
        val += a * power
        if c:
            der += a * c * prev * dg
        prev, power = power, power * g
    return A_WEIGHT * val, A_WEIGHT * der


def normalization_mass_by_classes(l: int, D: int) -> Fraction:
    return sum((limit_ball_probability(b) for b in enumerate_balls(l, D)), Fraction(0))


# ---------------------------------------------------------------------------
# sampling


def _level_values(l: int, D: int) -> list[float]:
    # g[j] = weight of an unconstrained subtree rooted at depth j (1 <= j <= l)
    g = [0.0] * (l + 1)
    g[l] = 1 / 3
    for j in range(l - 1, 0, -1):
        g[j] = 4 / 27 * sum((c + 1) * g[j + 1] ** c for c in range(D))
    return g


def _cdf(weights):
    total = 0.0
    out = []
    for w in weights:
        total += w
        out.append(total)
    return [x / total for x in out]


class LimitBallSampler:
    """Exact draws from the limit's l-ball law restricted to degrees <= D
    and renormalized.

    The class law is proportional to t_l times a product of per-node plane
    tree weights, so a draw marks one bottom node: the root-to-mark path is
    chosen first (root degree d with weight d g_1^(d-1), a path node at
    depth j with c children with weight (c+1) c g_{j+1}^(c-1), the path child
    uniform), and every other node at depth j independently gets c children
    with weight (c+1) g_{j+1}^c.
    """

    def __init__(self, l: int, D: int, eps: float = 1e-4):
        if l < 1 or D < 1:
            raise DomainError("need l >= 1 and D >= 1")
        self.l, self.D, self.eps = l, D, eps
        self.mass = normalization_mass(l, D)
        if 1 - self.mass > eps:
            raise DomainError(
                f"truncation at D={D} leaves mass deficit {float(1 - self.mass):.3g} > eps={eps}; increase D"
            )
        g = _level_values(l, D)
        self._root = _cdf([d * g[1] ** (d - 1) for d in range(1, D + 1)])  # index -> d-1
        self._spine = {j: _cdf([0.0] + [(c + 1) * c * g[j + 1] ** (c - 1) for c in range(1, D)]) for j in range(1, l)}
        self._free = {j: _cdf([(c + 1) * g[j + 1] ** c for c in range(D)]) for j in range(1, l)}

    def draw(self, rng) -> RootedBall:
        l = self.l
        parent = [-1]
        d = bisect_right(self._root, rng.random()) + 1
        spine_child = int(rng.random() * d)
        frontier = []  # (node, is_spine)
        for k in range(d):
            parent.append(0)
            frontier.append((len(parent) - 1, k == spine_child))
        for j in range(1, l):
            nxt = []
            for v, on_spine in frontier:
                if on_spine:
                    c = bisect_right(self._spine[j], rng.random())
                    s = int(rng.random() * c)
                else:
                    c = bisect_right(self._free[j], rng.random())
                    s = -1
                for k in range(c):
                    parent.append(v)
                    nxt.append((len(parent) - 1, k == s))
            frontier = nxt
        return RootedBall(tuple(parent), l)

    def metadata(self) -> dict:
        return {"l": self.l, "max_degree": self.D, "eps": self.eps, "mass": float(self.mass),
                "mass_deficit": float(1 - self.mass)}


def sample_limit_balls(l: int, D: int, count: int, seed: int, eps: float = 1e-4) -> list[RootedBall]:
    sampler = LimitBallSampler(l, D, eps)
    rng = make_rng(seed)
    return [sampler.draw(rng) for _ in range(count)]


def sample_limit_ball(l: int, D: int, seed: int, eps: float = 1e-4) -> RootedBall:
    return sample_limit_balls(l, D, 1, seed, eps)[0]


# ---------------------------------------------------------------------------
# decorated sum


def ball_as_pattern(b: RootedBall, r_bottom) -> DecoratedForest:
    bottom = b.levels[b.depth]
    r = [0] * b.size
    for v, x in zip(bottom, r_bottom):
        r[v] = x
    return DecoratedForest(b.size, tuple((b.parent[v], v) for v in range(1, b.size)), tuple(r))


@dataclass(frozen=True)
class DecoratedSum:
    direct: Fraction
    summed: Fraction
    bound: Fraction

    @property
    def gap(self) -> Fraction:
        return self.direct - self.summed


def decorated_sum_check(b: RootedBall, D: int, limit: int = 200_000) -> DecoratedSum:
    """direct = p(b); summed = (1/|Aut|) sum over bottom remainder vectors
    with r_i <= D of the decorated limit density; bound is the omitted tail."""
    if b.depth < 1:
        raise DomainError("need a ball of depth >= 1")
    t = b.level_sizes[b.depth]
    if t == 0:
        raise DomainError("the ball does not reach its stated depth")
    if (D + 1) ** t > limit:
        raise ResourceLimitError(f"{(D + 1) ** t} remainder vectors exceed the limit {limit}")
    summed = Fraction(0)
    for r in product(range(D + 1), repeat=t):
        if any(r):
            summed += limit_decorated_density(ball_as_pattern(b, r), 0)
    summed /= b.aut
    K = 9 * A_WEIGHT**b.size * _inner_factorials(b) / b.aut
    return DecoratedSum(limit_ball_probability(b), summed, product_tail_bound(K, t, D + 1))
