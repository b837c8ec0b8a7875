"""Command-line interface.

Exit codes: 0 success, 2 infeasible target, 3 configuration error,
4 I/O error, 1 anything else.
"""

from __future__ import annotations

import argparse
import re
import sys

import numpy as np

from .errors import ConfigurationError, FairClusterError, FirstStageDegenerate, InfeasibleTarget, UnsupportedConfiguration
from .experiments import bench, make_record, sweep_tradeoff
from .fairlet import get_fairlet_integers
from .framework import ALGORITHMS, RunConfig, run_multi
from .io import emit_results, gen_synthetic, ingest_csv, read_labels, render_fraction, write_dataset_csv, write_labels
from .metrics import (
    FairnessSpec,
    as_fraction,
    balance_report,
    clustering_cost,
    dataset_balance,
    feasible_balance,
    resolve_targets,
)

EXIT_OK, EXIT_OTHER, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"10"`` -> 0..9, ``"3-7"`` -> 3..7, ``"1,5,9"`` -> those seeds."""
    text = text.strip()
    span = re.fullmatch(r"(\d+)-(\d+)", text)
    try:
        if "," in text:
            return tuple(int(s) for s in text.split(",") if s.strip())
        if span:
            return tuple(range(int(span[1]), int(span[2]) + 1))
        n = int(text)
    except ValueError:
        raise ConfigurationError(f"cannot parse seeds {text!r}") from None
    if n < 1:
        raise ConfigurationError("seed count must be >= 1")
    return tuple(range(n))


def _floats(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_data_args(p):
    p.add_argument("data", help="input CSV (header row, numeric feature columns)")
    p.add_argument("--sensitive", action="append", required=True, help="sensitive column (repeatable)")
    p.add_argument("--id-column", default=None, help="column to ignore as an identifier")


def _add_run_args(p, algo=True):
    if algo:
        p.add_argument("--algo", choices=ALGORITHMS, default="mpfc")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seeds", default="1", help="count N, range a-b, or list a,b,c (default 1 seed: 0)")
    p.add_argument("--max-time", type=float, default=None, help="total time budget in seconds")
    p.add_argument("--delta", type=float, default=0.001)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--r", type=int, default=100, help="representatives for smpfc")
    p.add_argument("--batch-seed", type=int, default=0)
    p.add_argument("--time-cap", type=float, default=None, help="per assignment-solve cap in seconds")
    p.add_argument("--workers", type=int, default=1)


def _add_fairness_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", default=None, help="tolerance in [0, 1]")
    g.add_argument("--target", default=None, help="explicit target(s), comma separated, one per feature")
    p.add_argument("--basis", choices=("feasible", "dataset"), default="feasible")


def _spec(args, required=True):
    if args.lam is not None:
        return FairnessSpec.from_tolerance(as_fraction(args.lam), basis=args.basis)
    if args.target is not None:
        return FairnessSpec.explicit([as_fraction(t) for t in _floats(args.target)])
    if required:
        raise ConfigurationError("give --lambda or --target")
    return None


def _config(args, algorithm=None) -> RunConfig:
    return RunConfig(
        k=args.k,
        max_time=args.max_time,
        delta=args.delta,
        max_iter=args.max_iter,
        seeds=parse_seeds(args.seeds),
        algorithm=algorithm or args.algo,
        r=args.r,
        batch_seed=args.batch_seed,
        time_cap=args.time_cap,
        workers=args.workers,
    )


def _load(args):
    return ingest_csv(args.data, args.sensitive, args.id_column)


def cmd_gen(args):
    ds = gen_synthetic(args.kind, args.n, args.d, args.groups, args.seed, args.spread, args.separation)
    write_dataset_csv(ds, args.out)
    print(f"wrote {ds.n} objects, d={ds.d}, groups={ds.feature(0).counts().tolist()} to {args.out}")


def cmd_cluster(args):
    ds = _load(args)
    spec = _spec(args, required=args.algo != "lloyd")
    cfg = _config(args)
    if spec is not None:
        for w in resolve_targets(spec, ds, cfg.k).warnings:
            print(f"warning: {w}", file=sys.stderr)
    result = run_multi(ds, cfg, spec)
    best = result.best
    print(f"algorithm {cfg.algorithm}  k={cfg.k}  runs={len(result.runs)}  best seed={best.seed}")
    print(f"cost {best.cost:.3f}  iterations {best.iterations}  time {result.elapsed:.2f} s")
    for f, b, t, ok in zip(ds.sensitive_features, best.balances, best.targets, best.target_met):
        print(f"feature {f.name}: balance {b:.3f}  target {render_fraction(t)} ({float(t):.3f})  met={ok}")
    if cfg.algorithm == "flow":
        print(f"epsilon adjustments {best.epsilon_adjustments}")
    if args.out:
        write_labels(best.labels, args.out)
    if args.results:
        emit_results([make_record(ds, cfg, spec, result)], args.results, args.format)


def cmd_eval(args):
    ds = _load(args)
    labels = read_labels(args.labels, ds.n)
    k = args.k if args.k is not None else int(labels.max()) + 1
    rep = balance_report(labels, ds, k)
    centers = np.stack([ds.points[labels == j].mean(axis=0) for j in range(k)])
    print(f"n={ds.n} d={ds.d} k={k}")
    print(f"cost {clustering_cost(ds.points, labels, centers):.3f}")
    for s, f in enumerate(ds.sensitive_features):
        print(
            f"feature {f.name}: clustering balance {rep.per_feature_clustering_balance[s]:.3f}  "
            f"dataset balance {dataset_balance(ds, s):.3f}  feasible balance {feasible_balance(ds, s, k):.3f}"
        )
        print("  per cluster: " + " ".join(f"{b:.3f}" for b in rep.per_cluster[s]))


def cmd_sweep(args):
    ds = _load(args)
    lams = [float(as_fraction(v)) for v in _floats(args.lambdas)]
    cfg = _config(args)
    records = sweep_tradeoff(ds, cfg.algorithm, cfg.k, lams, cfg, basis=args.basis)
    for rec in records:
        print(f"lambda {rec.lam:.3f}  target {','.join(rec.resolved_targets)}  cost {rec.best_cost:.3f}  balance "
              + ",".join(f"{b:.3f}" for b in rec.balances))
    if args.out:
        emit_results(records, args.out, args.format)


def cmd_bench(args):
    ds = _load(args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algos:
        if a not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {a!r}")
    spec = _spec(args)
    cfg = _config(args, algorithm=algos[0])
    records = bench(ds, algos, cfg.k, spec, cfg, baseline=args.baseline)
    for rec in records:
        gap = "".join(f"  gap vs {b} {g:.2f}%" for b, g in rec.gaps.items())
        print(f"{rec.algorithm:6s} cost {rec.best_cost:.3f}  time {rec.total_time:.2f} s{gap}")
    emit_results(records, args.out, args.format)


def cmd_fairlet(args):
    res = get_fairlet_integers(as_fraction(args.target))
    p, q = res.reduced
    print(f"p={res.p} q={res.q} achieved={float(res.achieved):.6f} reduced={p}/{q}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faircluster", description="Fair k-means clustering with balance constraints")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p.add_argument("--kind", choices=("a", "b"), default="b")
    p.add_argument("--n", type=int, default=21)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--groups", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("cluster", help="cluster a CSV dataset")
    _add_data_args(p)
    _add_run_args(p)
    _add_fairness_args(p)
    p.add_argument("--out", default=None, help="labels CSV (index,cluster)")
    p.add_argument("--results", default=None, help="results file")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="metrics of an existing labeling")
    _add_data_args(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="cost/balance trade-off over lambda values")
    _add_data_args(p)
    _add_run_args(p)
    p.add_argument("--lambdas", default="0,0.25,0.5,0.75,1")
    p.add_argument("--basis", choices=("feasible", "dataset"), default="feasible")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="compare algorithms on one instance")
    _add_data_args(p)
    _add_run_args(p, algo=False)
    _add_fairness_args(p)
    p.add_argument("--algos", default="lloyd,mpfc,flow,smpfc")
    p.add_argument("--baseline", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fairlet-params", help="integer pair p/q approximating a target from below")
    p.add_argument("target", help="target balance, e.g. 0.9 or 6395/13607")
    p.set_defaults(func=cmd_fairlet)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except InfeasibleTarget as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        for key, val in exc.diagnostics.items():
            print(f"  {key}: {val}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigurationError, UnsupportedConfiguration, FirstStageDegenerate) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FairClusterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
