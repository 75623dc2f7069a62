"""Closed-form probabilities of the degree-factorial tree model.

A labeled tree T on n nodes has probability  prod_i d_i! / C  with
C = (n-2)! * C(3n-3, n-2).  Everything here is exact unless the name says
``bound``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DomainError
from .exact import (
    LogWeight,
    binomial,
    binomial_ratio,
    composition_product_sum,
    log_binomial,
    use_exact,
)
from .trees import LabeledTree

try:  # GMP multiplication is an order of magnitude faster on these sizes
    from gmpy2 import mpz as _bigint
except ImportError:  # pragma: no cover
    _bigint = int

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"the model needs n >= 2, got {self.n}")


def tree_weight(t: LabeledTree) -> int:
    """prod_i d_i!"""
    return math.prod(math.factorial(d) for d in t.degrees)


def weight_from_degrees(degrees: Iterable[int]) -> int:
    return math.prod(math.factorial(d) for d in degrees)


def constant_C(n: int) -> int:
    """Normalizing constant (n-2)! * C(3n-3, n-2)."""
    if n < 2:
        raise DomainError("constant_C needs n >= 2")
    return math.factorial(n - 2) * binomial(3 * n - 3, n - 2)


def tree_probability(t: LabeledTree) -> Fraction:
    if t.n < 2:
        raise DomainError("the model needs n >= 2")
    return Fraction(tree_weight(t), constant_C(t.n))


def _check_degree_sequence(d: Sequence[int]) -> int:
    n = len(d)
    if n < 2:
        raise DomainError("a degree sequence needs n >= 2 entries")
    if any(x < 1 for x in d):
        raise DomainError("degrees must be >= 1")
    if sum(d) != 2 * n - 2:
        raise DomainError(f"degrees must sum to 2n-2={2 * n - 2}, got {sum(d)}")
    return n


def degree_sequence_probability(d: Sequence[int]) -> Fraction:
    """P(the labeled degree sequence is exactly d) = prod d_i / C(3n-3, n-2)."""
    n = _check_degree_sequence(d)
    return Fraction(math.prod(d), binomial(3 * n - 3, n - 2))


def count_trees_with_degrees(d: Sequence[int]) -> int:
    """Multinomial (n-2; d_1-1, ..., d_n-1): trees realizing the degree sequence."""
    n = _check_degree_sequence(d)
    out = math.factorial(n - 2)
    for x in d:
        out //= math.factorial(x - 1)
    return out


def product_sum_dp(n: int, m: int) -> int:
    """Sum over compositions of m into n positive parts of the product of the
    parts, by explicit dynamic programming (no closed form used)."""
    if n < 0 or m < 0:
        raise DomainError("n and m must be >= 0")
    row = [1] + [0] * m  # zero parts
    for _ in range(n):
        new = [0] * (m + 1)
        for s in range(1, m + 1):
            new[s] = sum(d * row[s - d] for d in range(1, s + 1))
        row = new
    return row[m]


def product_sum_identity(n: int, m: int) -> tuple[int, int]:
    """(DP value, C(n+m-1, m-n)); both 0 when m < n."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if m < n:
        return 0, 0
    return product_sum_dp(n, m), binomial(n + m - 1, m - n)


def joint_degree_probability(n: int, assignments, exact: bool | None = None):
    """P(d_v = x_v for every (v, x_v) in ``assignments``).

    Equals C(3n-M-k-3, n-M+k-2) / C(3n-3, n-2) * prod x_v with M = sum x_v.
    Outside the hypothesis M <= n+k-2 no tree realizes the event and 0 is
    returned (logged at debug level).
    """
    pairs = list(assignments.items()) if isinstance(assignments, dict) else list(assignments)
    k = len(pairs)
    if n < 2:
        raise DomainError("n must be >= 2")
    verts = [v for v, _ in pairs]
    if len(set(verts)) != k or any(not 0 <= v < n for v in verts):
        raise DomainError("vertices must be distinct and in 0..n-1")
    xs = [x for _, x in pairs]
    if any(x < 1 for x in xs):
        raise DomainError("prescribed degrees must be >= 1")
    M = sum(xs)
    exact = use_exact(n, exact)
    if M > n + k - 2:
        log.debug("joint degree event outside M <= n+k-2 (n=%d, M=%d, k=%d): probability 0", n, M, k)
        return Fraction(0) if exact else LogWeight(0.0, True)
    rest_parts, rest_total = n - k, 2 * n - 2 - M
    if exact:
        return Fraction(
            composition_product_sum(rest_parts, rest_total) * math.prod(xs),
            binomial(3 * n - 3, n - 2),
        )
    if rest_parts == 0:
        return LogWeight.of(Fraction(math.prod(xs) * (rest_total == 0), binomial(3 * n - 3, n - 2)))
    lw = log_binomial(rest_parts + rest_total - 1, rest_total - rest_parts) - log_binomial(3 * n - 3, n - 2)
    return LogWeight.from_log(lw) * math.prod(xs)


def degree_pmf(n: int, x: int) -> Fraction:
    """P(d_v = x) for a single fixed vertex."""
    if x < 1:
        return Fraction(0)
    return joint_degree_probability(n, [(0, x)], exact=True)


def degree_pmf_fast(n: int, x: int) -> Fraction:
    """Same value as :func:`degree_pmf`, via a short binomial ratio (large n)."""
    if x < 1 or x > n - 1:
        return Fraction(0)
    return x * binomial_ratio(3 * n - x - 4, n - x - 1, 3 * n - 3, n - 2)


# ---------------------------------------------------------------------------
# maximum degree


def max_degree_upper_tail_bound(n: int, k: int, delta: float) -> float:
    """Bound (1+delta) * (4/3) * (k / 3^k) * n on P(D > k); not clamped to [0, 1]."""
    if k < 1 or delta <= 0:
        raise DomainError("need k >= 1 and delta > 0")
    return (1 + delta) * (4 / 3) * (k / 3.0**k) * n


def max_degree_lower_tail_bound(n: int, k: int) -> float:
    """Bound (1/9) sqrt(n) exp(-n (4/9) (k+1) / 3^k) on P(D <= k); not clamped."""
    if k < 1:
        raise DomainError("need k >= 1")
    return math.sqrt(n) / 9 * math.exp(-n * (4 / 9) * (k + 1) / 3.0**k)


def upper_tail_premise(n: int, k: int, delta: float) -> dict:
    """Check, at this finite n, the two inequalities the upper-tail bound rests on.

    The bound is asymptotic (valid for n beyond an unspecified n_0(delta));
    this reports whether its ingredients actually hold here:

    * ``pmf_ok``:  P(d_v = k) < (4/3)(1+delta) k / 3^k
    * ``tail_ok``: P(d_v > k) < (1+delta)(2k+3) / 3^(k+1)
    """
    pmf = degree_pmf_fast(n, k)
    pmf_cap = Fraction(4, 3) * (1 + Fraction(delta)) * k / 3**k
    tail = 1 - sum(degree_pmf_fast(n, x) for x in range(1, k + 1))
    tail_cap = (1 + Fraction(delta)) * Fraction(2 * k + 3, 3 ** (k + 1))
    return {
        "n": n,
        "k": k,
        "delta": delta,
        "pmf": float(pmf),
        "pmf_cap": float(pmf_cap),
        "pmf_ok": pmf < pmf_cap,
        "tail": float(tail),
        "tail_cap": float(tail_cap),
        "tail_ok": tail < tail_cap,
    }


def max_degree_cdf(n: int, k: int) -> Fraction:
    """Exact P(D <= k): the x^(n-2) coefficient of (1 + 2x + ... + k x^(k-1))^n
    divided by C(3n-3, n-2).

    Polynomials are packed into big integers (Kronecker substitution) so the
    power costs a handful of big-integer multiplications.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    if k < 1:
        return Fraction(0)
    deg = n - 2
    total = binomial(3 * n - 3, n - 2)
    k = min(k, n - 1)
    # every coefficient of any truncated partial power is <= sum of all
    # coefficients of (sum_{i<=n-1} i x^(i-1))^n up to degree n-2, which is <= total
    bits = total.bit_length() + 2
    base_poly = [i + 1 for i in range(min(k, deg + 1))]
    coef = _kron_power(base_poly, n, deg, bits)
    return Fraction(coef, total)


def _kron_pack(coeffs, bits):
    out = 0
    for c in reversed(coeffs):
        out = (out << bits) | c
    return out


def _kron_power(poly, e, deg, bits):
    """Coefficient of x^deg in poly**e, truncating at degree ``deg`` throughout."""
    keep = deg + 1
    limit_mask = _bigint((1 << (bits * keep)) - 1)
    result = _bigint(1)  # the polynomial "1"
    base = _bigint(_kron_pack(poly[:keep], bits))
    while e:
        if e & 1:
            result = (result * base) & limit_mask
        e >>= 1
        if e:
            base = (base * base) & limit_mask
    return int((result >> (bits * deg)) & ((1 << bits) - 1))


def max_degree_distribution(n: int, tail_eps: float = 1e-15) -> dict[int, Fraction]:
    """Exact P(D = k), for k up to the point where P(D > k) < tail_eps."""
    out = {}
    prev = Fraction(0)
    for k in range(1, n):
        cdf = max_degree_cdf(n, k)
        if cdf != prev:
            out[k] = cdf - prev
        prev = cdf
        if 1 - cdf < tail_eps:
            break
    return out


def expected_max_degree(n: int, tail_eps: float = 1e-15) -> Fraction:
    """E(D) truncated where P(D > k) < tail_eps (the omitted mass is < n * tail_eps)."""
    return sum((k * p for k, p in max_degree_distribution(n, tail_eps).items()), Fraction(0))
