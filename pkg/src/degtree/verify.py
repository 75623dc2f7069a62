"""Self-check harness behind ``degtree verify``.

Each check compares an implementation against an independent route (the
brute-force oracle, a second formula, or exact distributions for Monte
Carlo runs) and reports what it expected, what it got and at what tolerance.
Formula modules are called through their module objects so that patched
values are picked up.
"""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import forests, limit, oracle, samplers, weights
from .exact import format_q
from .trees import RootedBall, rooted_trees

SUITES = ("exact", "montecarlo")
TIERS = ("fast", "slow")


@dataclass
class CheckResult:
    name: str
    formula: str
    suite: str
    tier: str
    ok: bool
    expected: str
    got: str
    tolerance: str
    seconds: float = 0.0

    def to_json(self) -> dict:
        # wall time is left out so that reports are reproducible
        out = asdict(self)
        del out["seconds"]
        return out


@dataclass(frozen=True)
class Check:
    name: str
    formula: str
    suite: str
    tier: str
    run: Callable[[int], tuple[bool, str, str, str]]


_REGISTRY: list[Check] = []


def check(name, formula, suite, tier="fast"):
    def wrap(fn):
        _REGISTRY.append(Check(name, formula, suite, tier, fn))
        return fn

    return wrap


def _mismatches(pairs) -> tuple[bool, str, str]:
    bad = [(k, a, b) for k, a, b in pairs if a != b]
    if not bad:
        return True, "all equal", "all equal"
    k, a, b = bad[0]
    return False, f"{k}: {a}", f"{k}: {b} ({len(bad)} mismatches)"


# ---------------------------------------------------------------------------
# exact suite


def _normalization(ns):
    pairs = []
    for n in ns:
        e = oracle.enumerate_all(n)
        pairs.append((f"n={n}", e.total, weights.constant_C(n)))
    ok, exp, got = _mismatches(pairs)
    return ok, exp, got, "exact"


@check("normalization", "sum_T prod d_i! = (n-2)! C(3n-3, n-2)", "exact")
def _norm_fast(seed):
    return _normalization(range(2, 7))


@check("normalization_large", "sum_T prod d_i! = (n-2)! C(3n-3, n-2), n = 7, 8", "exact", "slow")
def _norm_slow(seed):
    return _normalization((7, 8))


@check("degree_sequence_law", "P(d) = prod d_i / C(3n-3, n-2)", "exact")
def _degseq(seed):
    pairs = []
    for n in range(2, 7):
        e = oracle.enumerate_all(n)
        acc: dict = {}
        for row, w in zip(e.degrees.tolist(), e.weights):
            acc[tuple(row)] = acc.get(tuple(row), 0) + w
        for d, w in acc.items():
            pairs.append((f"n={n} d={d}", Fraction(w, e.total), weights.degree_sequence_probability(d)))
    return (*_mismatches(pairs), "exact")


@check("joint_degree_law", "P(d_v = x_v, v in V) = C(3n-M-k-3, n-M+k-2)/C(3n-3, n-2) prod x_v", "exact")
def _joint(seed):
    pairs = []
    for n in range(2, 7):
        e = oracle.enumerate_all(n)
        deg = e.degrees
        for v in range(min(n, 2)):
            for x in range(1, n + 1):
                o = Fraction(sum(w for row, w in zip(deg.tolist(), e.weights) if row[v] == x), e.total)
                pairs.append((f"n={n} d_{v}={x}", o, weights.joint_degree_probability(n, [(v, x)], exact=True)))
        if n >= 2:
            for x in range(1, n + 1):
                for y in range(1, n + 1):
                    o = Fraction(sum(w for row, w in zip(deg.tolist(), e.weights) if row[0] == x and row[1] == y), e.total)
                    pairs.append((f"n={n} d_0={x} d_1={y}", o,
                                  weights.joint_degree_probability(n, [(0, x), (1, y)], exact=True)))
    return (*_mismatches(pairs), "exact")


@check("product_sum_identity", "sum over compositions of prod d_i = C(n+m-1, m-n)", "exact")
def _prodsum(seed):
    pairs = []
    for n in range(1, 7):
        for m in range(n, 17):
            lhs, rhs = weights.product_sum_identity(n, m)
            pairs.append((f"n={n} m={m}", lhs, rhs))
    return (*_mismatches(pairs), "exact")


@check("forest_probability", "P(X_S^F = 1) = (n-m+c-2)!/(n-2)! B(F)/C(3n-3,n-2) H(r,F)", "exact")
def _forest(seed):
    pairs = []
    for n in (5, 6):
        e = oracle.enumerate_all(n)
        for i, f in enumerate(oracle.forest_fixtures()):
            if f.m <= n and max(f.labels) < n:
                pairs.append((f"n={n} fixture {i}", oracle.oracle_forest_probability(e, f),
                              forests.forest_probability(n, f, exact=True)))
    return (*_mismatches(pairs), "exact")


@check("conditional_forest_probability", "glued-to-conditioning ratio with H(r12,F12)/H(r',F2)", "exact")
def _cond(seed):
    e = oracle.enumerate_all(6)
    pairs = []
    fx = oracle.forest_fixtures()
    for i, f1 in enumerate(fx):
        for j, f2 in enumerate(fx):
            if forests.forest_probability(6, f2, exact=True) == 0:
                continue
            pairs.append((f"fixtures ({i}, {j})", oracle.oracle_conditional_probability(e, f1, f2),
                          forests.conditional_forest_probability(6, f1, f2)))
    return (*_mismatches(pairs), "exact")


@check("expected_subtree_count", "E(X_n^T) = n(n-1)/(n-k) C(3n-R-3k-1, n-R-k)/C(3n-3,n-2) H(r,T)", "exact")
def _expected(seed):
    pairs = []
    for n in (5, 6):
        e = oracle.enumerate_all(n)
        for i, f in enumerate(oracle.forest_fixtures()):
            if f.is_tree() and f.m < n and f.m <= 4:
                pairs.append((f"n={n} fixture {i}", oracle.oracle_expected_count(e, f),
                              forests.expected_subtree_count(n, f, exact=True)))
    return (*_mismatches(pairs), "exact")


def _kernel(ns):
    bad = []
    for n in ns:
        rep = oracle.exact_kernel_analysis(n)
        for key in ("rows_sum_to_one", "stationary", "detailed_balance", "irreducible", "aperiodic"):
            if not rep[key]:
                bad.append(f"n={n} {key}")
    return not bad, "all kernel properties hold", ", ".join(bad) or "all kernel properties hold", "exact"


@check("chain_kernel", "Pi P = Pi, Pi(T)P(T,T') = Pi(T')P(T',T), irreducible, P(T,T) > 0", "exact")
def _kernel_fast(seed):
    return _kernel((3, 4, 5))


@check("chain_kernel_n6", "same kernel properties at n = 6", "exact", "slow")
def _kernel_slow(seed):
    return _kernel((6,))


@check("limit_root_degree", "(4/3) d / 3^d sums to 1 (tail below 1e-25 at d <= 60)", "exact")
def _root(seed):
    mass = limit.normalization_mass(1, 60)
    return 1 - mass < Fraction(1, 10**25), "1 - mass < 1e-25", f"{float(1 - mass):.3e}", "1e-25"


@check("limit_small_ball", "root degree 1, child degree 2, depth 2 -> 32/243", "exact")
def _small(seed):
    p = limit.limit_ball_probability(RootedBall.from_nested((((),),), depth=2))
    return p == Fraction(32, 243), "32/243", format_q(p), "exact"


@check("limit_consistency", "p(b) = sum of p over depth+1 extensions, residual within the tail bound", "exact")
def _consist(seed):
    worst = Fraction(0)
    bad = []
    for b in rooted_trees(6):
        r = limit.consistency_check(b, 25)
        worst = max(worst, r.residual)
        if not (r.ok and r.residual < Fraction(1, 10**8)):
            bad.append(b.describe())
    return not bad, "residual < 1e-8 and <= bound", f"worst {float(worst):.3e}" + (f"; failing {bad[:3]}" if bad else ""), "1e-8"


@check("limit_mass_by_classes", "generating-function mass = sum over enumerated classes", "exact")
def _mass(seed):
    pairs = [(f"l={l} D={D}", limit.normalization_mass_by_classes(l, D), limit.normalization_mass(l, D))
             for l, D in ((1, 6), (2, 3), (2, 5), (3, 3))]
    return (*_mismatches(pairs), "exact")


# ---------------------------------------------------------------------------
# Monte Carlo suite


def _tv_codes(codes: np.ndarray, n: int) -> float:
    """TV distance between the empirical law of Prufer codes and exact Pi_n."""
    e = oracle.enumerate_all(n)
    ranks = codes.astype(np.int64) @ (n ** np.arange(n - 3, -1, -1, dtype=np.int64))
    freq = np.bincount(ranks, minlength=len(e)) / len(codes)
    exact = np.array(e.weights, dtype=float) / e.total
    return 0.5 * float(np.abs(freq - exact).sum())


@check("direct_sampler_n5", "direct draws vs exact Pi_5, 2e5 draws", "montecarlo")
def _direct5(seed):
    batch = samplers.sample_direct(samplers.SamplerConfig(5, seed=seed, count=200_000))
    tv = _tv_codes(batch.codes, 5)
    return tv < 0.02, "TV < 0.02", f"TV = {tv:.4f}", "0.02"


@check("chain_sampler_n5", "chain states vs exact Pi_5, 4e5 steps, thin 1", "montecarlo")
def _chain5(seed):
    batch = samplers.sample_chain(samplers.SamplerConfig(5, "chain", seed=seed, steps=400_000))
    tv = _tv_codes(batch.codes, 5)
    return tv < 0.03, "TV < 0.03", f"TV = {tv:.4f}", "0.03"


@check("degree_marginal", "empirical P(d_0 = x) vs x C(3n-x-4, n-x-1)/C(3n-3, n-2), n = 10", "montecarlo")
def _marginal(seed):
    N = 100_000
    batch = samplers.sample_direct(samplers.SamplerConfig(10, seed=seed, count=N))
    deg0 = 1 + (batch.codes == 0).sum(axis=1)
    worst = 0.0
    for x in range(1, 9):
        p = float(weights.degree_pmf(10, x))
        z = abs((deg0 == x).mean() - p) / math.sqrt(p * (1 - p) / N)
        worst = max(worst, z)
    return worst < 4.5, "|z| < 4.5 for x <= 8", f"max |z| = {worst:.2f}", "4.5 sigma (8 tests)"


@check("limit_sampler_root_degree", "sampled l=1 root degree vs (4/3) d / 3^d", "montecarlo")
def _limit_root(seed):
    N = 50_000
    balls = limit.sample_limit_balls(1, 30, N, seed)
    c = Counter(b.size - 1 for b in balls)
    worst = max(abs(c.get(d, 0) / N - float(limit.root_degree_pmf(d)))
                / math.sqrt(float(limit.root_degree_pmf(d)) * (1 - float(limit.root_degree_pmf(d))) / N)
                for d in range(1, 7))
    return worst < 4.5, "|z| < 4.5 for d <= 6", f"max |z| = {worst:.2f}", "4.5 sigma (6 tests)"


@check("direct_sampler_n6", "direct draws vs exact Pi_6, 4e6 draws", "montecarlo", "slow")
def _direct6(seed):
    batch = samplers.sample_direct(samplers.SamplerConfig(6, seed=seed, count=4_000_000))
    tv = _tv_codes(batch.codes, 6)
    return tv < 0.01, "TV < 0.01", f"TV = {tv:.4f}", "0.01"


# ---------------------------------------------------------------------------


def registry() -> list[Check]:
    return list(_REGISTRY)


def run_verify(suite: str = "all", tier: str = "fast", seed: int = 7, names=None) -> list[CheckResult]:
    """Run every registered check in ``suite`` up to ``tier`` (slow includes fast)."""
    if suite not in SUITES + ("all",):
        raise ValueError(f"unknown suite {suite!r}")
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}")
    out = []
    for c in _REGISTRY:
        if suite != "all" and c.suite != suite:
            continue
        if tier == "fast" and c.tier != "fast":
            continue
        if names and c.name not in names:
            continue
        t0 = time.perf_counter()
        try:
            ok, expected, got, tol = c.run(seed)
        except Exception as exc:  # a crash is a failed check, reported as such
            ok, expected, got, tol = False, "no exception", f"{type(exc).__name__}: {exc}", "-"
        out.append(CheckResult(c.name, c.formula, c.suite, c.tier, bool(ok), expected, got, tol,
                               round(time.perf_counter() - t0, 3)))
    return out
