"""Experiment drivers: cost/fairness trade-off sweeps and algorithm comparisons."""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .batching import build_batches
from .data import Dataset
from .errors import ConfigurationError
from .framework import MultiRunResult, RunConfig, run_multi
from .io import ExperimentRecord, render_fraction
from .metrics import FairnessSpec, as_fraction, resolve_targets

__all__ = ["make_record", "sweep_tradeoff", "bench", "gap_percent"]


def gap_percent(cost: float, baseline_cost: float) -> float:
    """Relative cost gap ``100 * (cost / baseline - 1)``."""
    return 100.0 * (cost / baseline_cost - 1.0)


def make_record(dataset: Dataset, config: RunConfig, spec: FairnessSpec | None, result: MultiRunResult) -> ExperimentRecord:
    best = result.best
    if spec is None:
        lam, explicit = None, None
    elif spec.mode == "tolerance":
        lam, explicit = float(as_fraction(spec.tolerance)), None
    else:
        lam, explicit = None, [render_fraction(t) for t in spec.targets]
    return ExperimentRecord(
        dataset=dataset.name,
        algorithm=config.algorithm,
        k=config.k,
        n=dataset.n,
        d=dataset.d,
        lam=lam,
        explicit_targets=explicit,
        resolved_targets=[render_fraction(t) for t in best.targets],
        best_cost=best.cost,
        best_seed=best.seed,
        per_seed_costs=[r.cost for r in result.runs],
        seeds=[r.seed for r in result.runs],
        balances=list(best.balances),
        target_met=list(best.target_met),
        total_time=result.elapsed,
        per_run_time=[r.elapsed for r in result.runs],
        batching_time=result.batching_time,
        iterations=best.iterations,
        epsilon=best.epsilon_adjustments,
        failures=len(result.failures),
    )


def sweep_tradeoff(
    dataset: Dataset,
    algorithm: str,
    k: int,
    lambdas: Sequence[float],
    config: RunConfig | None = None,
    basis: str = "feasible",
) -> list[ExperimentRecord]:
    """One best-of-seeds run per tolerance value, for cost/balance trade-off curves."""
    config = replace(config or RunConfig(k=k), k=k, algorithm=algorithm)
    lambdas = list(lambdas)
    if not lambdas:
        raise ConfigurationError("at least one lambda value is required")
    batches = None
    if algorithm == "smpfc":
        batches = build_batches(dataset, config.r, np.random.default_rng(config.batch_seed), k=k)
    records = []
    for lam in lambdas:
        spec = FairnessSpec.from_tolerance(lam, basis=basis)
        result = run_multi(dataset, config, spec, batches)
        records.append(make_record(dataset, config, spec, result))
    return records


def bench(
    dataset: Dataset,
    algorithms: Sequence[str],
    k: int,
    spec: FairnessSpec,
    config: RunConfig | None = None,
    baseline: str | None = None,
) -> list[ExperimentRecord]:
    """Run several algorithms on one instance; gaps are relative to ``baseline``'s best cost."""
    algorithms = list(algorithms)
    if not algorithms:
        raise ConfigurationError("at least one algorithm is required")
    if baseline is not None and baseline not in algorithms:
        raise ConfigurationError(f"baseline {baseline!r} is not among the benchmarked algorithms")
    base = replace(config or RunConfig(k=k), k=k)
    # validate the spec once, before spending time on runs
    resolve_targets(spec, dataset, k)
    records = []
    for algo in algorithms:
        cfg = replace(base, algorithm=algo)
        records.append(make_record(dataset, cfg, spec, run_multi(dataset, cfg, spec)))
    if baseline is not None:
        ref = next(r for r in records if r.algorithm == baseline).best_cost
        for r in records:
            if ref > 0:
                r.gaps[baseline] = gap_percent(r.best_cost, ref)
    return records
