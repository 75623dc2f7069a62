"""Command line entry point: ``degtree <subcommand> ...``.

Exit codes: 0 ok, 1 verification failure, 2 usage error, 3 resource limit.
Every run writes a manifest (``--manifest PATH``, else ``<out>.manifest.json``
next to the output, else to stderr).
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time
from collections import Counter
from datetime import datetime, timezone
from fractions import Fraction

from . import __version__
from .errors import DomainError, ResourceLimitError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("DEGTREE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"DEGTREE_THREADS must be an integer, got {env!r}") from None
    return 1


def _open_out(path):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args) -> int:
    from .samplers import SamplerConfig, sample

    method = "chain" if args.method in ("mcmc", "chain") else "direct"
    cfg = SamplerConfig(
        n=args.n, method=method, seed=args.seed, count=args.count, steps=args.steps,
        burn_in=args.burnin, thin=args.thin, chains=args.chains, debug=args.debug,
        degree_method=args.degree_method,
    )
    batch = sample(cfg, workers=_threads(args))
    if args.out:
        batch.write_jsonl(args.out)
    else:
        sys.stdout.write(json.dumps(batch.header(), sort_keys=True) + "\n")
        for t in batch:
            sys.stdout.write(json.dumps(t.to_json()) + "\n")
    args._meta = batch.meta
    return EXIT_OK


def cmd_enumerate(args) -> int:
    from .oracle import enumerate_all, exact_statistic

    e = enumerate_all(args.n)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        if args.stat == "maxdeg":
            dist = exact_statistic(e, lambda t: max(t.degrees), kind="distribution")
            w.writerow(["max_degree", "probability", "decimal"])
            for k, p in dist.items():
                w.writerow([k, _q(p), f"{float(p):.17g}"])
        elif args.stat == "degree-hist":
            # expected number of vertices of each degree, and P(d_v = x) for a fixed v
            acc: Counter = Counter()
            for row, wt in zip(e.degrees.tolist(), e.weights):
                for d in row:
                    acc[d] += wt
            w.writerow(["degree", "expected_count", "vertex_probability", "decimal"])
            for d in sorted(acc):
                ec = Fraction(acc[d], e.total)
                w.writerow([d, _q(ec), _q(ec / args.n), f"{float(ec / args.n):.17g}"])
        else:  # class-dist: law of the sorted degree sequence
            acc = Counter()
            for row, wt in zip(e.degrees.tolist(), e.weights):
                acc[tuple(sorted(row, reverse=True))] += wt
            w.writerow(["degree_class", "trees", "probability", "decimal"])
            sizes = Counter(tuple(sorted(row, reverse=True)) for row in e.degrees.tolist())
            for cls in sorted(acc, reverse=True):
                p = Fraction(acc[cls], e.total)
                w.writerow([" ".join(map(str, cls)), sizes[cls], _q(p), f"{float(p):.17g}"])
    return EXIT_OK


def cmd_census(args) -> int:
    from .census import ball_census
    from .limit import limit_ball_probability
    from .samplers import SampleBatch
    from .trees import RootedBall, describe_key

    if args.threads_used > 1:
        census = ball_census(SampleBatch.read_jsonl(args.input), args.radius, workers=args.threads_used)
    else:
        census = ball_census(args.input, args.radius)
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["key_hex", "ball", "count", "frequency", "sigma", "limit_probability", "z"])
        for key, count in sorted(census.counts.items(), key=lambda kv: (-kv[1], kv[0])):
            freq = count / census.total
            sigma = census.sigma(key)
            lim, z = "", ""
            if 1 <= args.radius <= args.limit_depth:
                p = float(limit_ball_probability(RootedBall.from_key(key, args.radius)))
                lim = f"{p:.10g}"
                if sigma and sigma != float("inf") and sigma > 0:
                    z = f"{(freq - p) / sigma:.3f}"
            w.writerow([key.hex(), describe_key(key), count, f"{freq:.10g}",
                        f"{sigma:.3g}" if sigma != float("inf") else "", lim, z])
    args._meta = {"trees": census.trees, "vertices": census.total, "classes": len(census.counts)}
    return EXIT_OK


def cmd_limit(args) -> int:
    from . import limit

    if args.action == "table":
        rows = limit.limit_table(args.l, args.max_degree)
        mass = limit.normalization_mass(args.l, args.max_degree)
        with _open_out(args.out) as fh:
            w = csv.writer(fh)
            w.writerow(["key_hex", "ball", "p", "p_decimal", "aut", "interior_leaf"])
            for r in rows:
                row = r.to_row()
                w.writerow([row["key"], row["ball"], row["p"], f"{row['p_decimal']:.17g}", r.ball.aut,
                            int(row["interior_leaf"])])
        args._meta = {"classes": len(rows), "mass": _q(mass), "mass_deficit": float(1 - mass)}
        return EXIT_OK
    if args.action == "check":
        from .trees import RootedBall

        mass = limit.normalization_mass(args.l, args.max_degree)
        if args.l == 1:
            bases = [RootedBall((-1,), 0)]
        else:
            bases = limit.enumerate_balls(args.l - 1, args.max_degree)
        failures = 0
        with _open_out(args.out) as fh:
            w = csv.writer(fh)
            w.writerow(["key_hex", "ball", "lhs", "rhs", "residual", "bound", "ok"])
            for b in bases:
                r = limit.consistency_check(b, args.max_degree)
                failures += not r.ok
                w.writerow([b.key.hex(), b.describe(), f"{float(r.lhs):.17g}", f"{float(r.rhs):.17g}",
                            f"{float(r.residual):.6e}", f"{float(r.bound):.6e}", int(r.ok)])
        print(f"normalization_mass(l={args.l}, D={args.max_degree}) = {float(mass):.17g}"
              f" (deficit {float(1 - mass):.3e}); {len(bases)} base balls, {failures} failures", file=sys.stderr)
        args._meta = {"bases": len(bases), "failures": failures, "mass": _q(mass)}
        return EXIT_FAIL if failures else EXIT_OK
    # sample
    sampler = limit.LimitBallSampler(args.l, args.max_degree, args.eps)
    from .samplers import make_rng

    rng = make_rng(args.seed)
    counts = Counter(sampler.draw(rng).key for _ in range(args.count))
    from .trees import RootedBall, describe_key

    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["key_hex", "ball", "count", "frequency", "p_renormalized"])
        for key, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            p = limit.limit_ball_probability(RootedBall.from_key(key, args.l)) / sampler.mass
            w.writerow([key.hex(), describe_key(key), c, f"{c / args.count:.10g}", f"{float(p):.10g}"])
    args._meta = sampler.metadata()
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .weights import max_degree_lower_tail_bound, max_degree_upper_tail_bound, upper_tail_premise

    up = max_degree_upper_tail_bound(args.n, args.k, args.delta)
    low = max_degree_lower_tail_bound(args.n, args.k)
    prem = upper_tail_premise(args.n, args.k, args.delta)
    w = csv.writer(sys.stdout)
    w.writerow(["n", "k", "delta", "upper_tail_bound", "lower_tail_bound", "premise_pmf_ok", "premise_tail_ok"])
    w.writerow([args.n, args.k, args.delta, f"{up:.10g}", f"{low:.10g}", int(prem["pmf_ok"]), int(prem["tail_ok"])])
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_verify

    results = run_verify(args.suite, args.tier, args.seed)
    failed = [r for r in results if not r.ok]
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: expected {r.expected}; got {r.got}; tol {r.tolerance}"
              f"  [{r.formula}]")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({"suite": args.suite, "tier": args.tier, "seed": args.seed,
                       "checks": [r.to_json() for r in results]}, fh, indent=2, sort_keys=True)
    args._meta = {"checks": len(results), "failed": len(failed)}
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="degtree", description="Degree-factorial random trees: exact formulas, samplers, limits.")
    p.add_argument("--version", action="version", version=f"degtree {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (default: $DEGTREE_THREADS or 1); results do not depend on it")
    p.add_argument("--manifest", default=None, help="where to write the run manifest JSON")
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--manifest", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("sample", parents=[common], help="draw trees from the model (JSONL)")
    s.add_argument("method", choices=["mcmc", "chain", "direct"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--count", type=int, default=1, help="samples (chain: per chain, unless --steps is given)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--steps", type=int, default=None, help="chain: total steps per chain")
    s.add_argument("--burnin", type=int, default=None, help="chain: default 50 n ln n (heuristic)")
    s.add_argument("--thin", type=int, default=1)
    s.add_argument("--chains", type=int, default=1)
    s.add_argument("--degree-method", choices=["bars", "dp", "rejection"], default="bars")
    s.add_argument("--debug", action="store_true", help="chain: check the tree invariant every step")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("enumerate", parents=[common], help="exact statistics over all labeled trees (n <= 8)")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--stat", choices=["maxdeg", "degree-hist", "class-dist"], default="maxdeg")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_enumerate)

    c = sub.add_parser("census", parents=[common], help="ball census of a JSONL batch")
    c.add_argument("--radius", type=int, required=True)
    c.add_argument("--input", required=True)
    c.add_argument("--out", default=None)
    c.add_argument("--limit-depth", type=int, default=3, help="report limit probabilities up to this radius")
    c.set_defaults(func=cmd_census)

    lim = sub.add_parser("limit", parents=[common], help="the local limit: table, consistency check, sampler")
    lim.add_argument("action", choices=["table", "check", "sample"])
    lim.add_argument("--l", type=int, required=True)
    lim.add_argument("--max-degree", type=int, required=True)
    lim.add_argument("--count", type=int, default=1000)
    lim.add_argument("--seed", type=int, default=0)
    lim.add_argument("--eps", type=float, default=1e-4, help="sample: allowed truncated mass")
    lim.add_argument("--out", default=None)
    lim.set_defaults(func=cmd_limit)

    b = sub.add_parser("bounds", parents=[common], help="maximum-degree tail bounds as CSV")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--delta", type=float, default=0.1)
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("verify", parents=[common], help="run the self-check suites")
    v.add_argument("--suite", choices=["exact", "montecarlo", "all"], default="all")
    v.add_argument("--tier", choices=["fast", "slow"], default="fast")
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--report", default=None, help="write the JSON report here")
    v.set_defaults(func=cmd_verify)
    return p


def _write_manifest(args, argv, status, wall, started):
    params = {k: v for k, v in vars(args).items() if not k.startswith("_") and k not in ("func",)}
    manifest = {
        "subcommand": args.command,
        "argv": list(argv),
        "parameters": params,
        "seed": params.get("seed"),
        "version": __version__,
        "inputs": [params["input"]] if params.get("input") else [],
        "outputs": [p for p in (params.get("out"), params.get("report")) if p],
        "exit_status": status,
        "started": started,
        "wall_time_s": round(wall, 3),
        "result": getattr(args, "_meta", {}),
    }
    text = json.dumps(manifest, indent=2, sort_keys=True, default=str)
    path = args.manifest or (f"{params['out']}.manifest.json" if params.get("out") else None)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.threads_used = _threads(args)
    except UsageError as exc:
        print(f"degtree: usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    try:
        status = args.func(args)
    except ResourceLimitError as exc:
        print(f"degtree: resource limit: {exc}", file=sys.stderr)
        status = EXIT_RESOURCE
    except (DomainError, UsageError) as exc:
        print(f"degtree: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    _write_manifest(args, argv, status, time.perf_counter() - t0, started)
    return status


if __name__ == "__main__":
    sys.exit(main())
