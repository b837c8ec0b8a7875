"""The alternating assign/update scheme shared by all algorithms.

Every run starts from k-means++ centers, then repeats an assignment step
(dispatched by algorithm) and a center update until the relative cost
improvement drops below ``delta``, ``max_iter`` iterations are done or the
time budget is spent. The solution returned is the iterate at termination.

Algorithms:

``mpfc``
    exact fairness-constrained assignment of all objects
``flow``
    staged min-cost-flow assignment (one sensitive feature only); with a
    zero target it is the plain nearest-center step
``smpfc``
    exact weighted assignment of batch representatives, labels mapped back
``lloyd``
    nearest center with non-emptiness repair (fairness ignored)
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .assignment import AssignmentProblem, nearest_nonempty, solve_assignment
from .batching import DEFAULT_R, BatchSet, build_batches, map_back, weighted_update
from .data import Dataset
from .errors import ConfigurationError, FairClusterError, InfeasibleTarget, TimeCapNoIncumbent, UnsupportedConfiguration
from .flow import DEFAULT_COST_SCALE, DEFAULT_REINIT_CAP, staged_assign, stage_plan
from .kmeans import kmeanspp_init, sq_dists, update_centers
from .metrics import (
    FairnessSpec,
    as_fraction,
    ResolvedTargets,
    clustering_balance,
    clustering_cost,
    feasible_balance,
    meets_targets,
    resolve_targets,
)

__all__ = [
    "ALGORITHMS",
    "RunConfig",
    "ClusteringSolution",
    "MultiRunResult",
    "AssignStep",
    "kmeanspp_init",
    "update_centers",
    "improvement",
    "initial_centers",
    "assign_step",
    "run_once",
    "run_multi",
]

ALGORITHMS = ("mpfc", "flow", "smpfc", "lloyd")


@dataclass(frozen=True)
class RunConfig:
    k: int
    max_time: float | None = None
    delta: float = 0.001
    max_iter: int = 100
    seeds: tuple[int, ...] = (0,)
    algorithm: str = "mpfc"
    r: int = DEFAULT_R
    batch_seed: int = 0
    time_cap: float | None = None
    workers: int = 1
    cost_scale: float = DEFAULT_COST_SCALE
    reinit_cap: int = DEFAULT_REINIT_CAP

    def __post_init__(self):
        seeds = tuple(int(s) for s in self.seeds)
        object.__setattr__(self, "seeds", seeds)
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.delta < 0:
            raise ConfigurationError("delta must be >= 0")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if not seeds:
            raise ConfigurationError("at least one seed is required")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_time is not None and self.max_time <= 0:
            raise ConfigurationError("max_time must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


@dataclass(frozen=True)
class ClusteringSolution:
    labels: np.ndarray
    centers: np.ndarray
    cost: float
    balances: tuple[float, ...]
    iterations: int
    seed: int
    elapsed: float
    target_met: tuple[bool, ...]
    epsilon_adjustments: int = 0
    targets: tuple[Fraction, ...] = ()
    algorithm: str = ""
    history: tuple[float, ...] = ()
    capped: bool = False
    stop_reason: str = ""


@dataclass(frozen=True)
class MultiRunResult:
    best: ClusteringSolution
    runs: tuple[ClusteringSolution, ...]
    failures: tuple[tuple[int, str], ...] = ()
    elapsed: float = 0.0
    batching_time: float = 0.0

    @property
    def costs(self) -> tuple[float, ...]:
        return tuple(r.cost for r in self.runs)


def improvement(cost_prev: float, cost_now: float) -> float:
    """Relative improvement ``1 - now / prev``; 0 when ``prev`` is 0."""
    if cost_prev == 0:
        return 0.0
    return 1.0 - cost_now / cost_prev


@dataclass(frozen=True)
class AssignStep:
    labels: np.ndarray  # per object
    centers: np.ndarray  # centers the labels refer to (flow may re-seed)
    cost: float  # assignment-step objective at those centers, object level
    epsilon: int = 0
    optimal: bool = True
    row_labels: np.ndarray | None = None  # representative labels for smpfc


def _targets_for(spec, dataset, k) -> ResolvedTargets:
    if isinstance(spec, ResolvedTargets):
        return spec
    if spec is None:
        return ResolvedTargets(tuple(Fraction(0) for _ in range(dataset.n_features)))
    if isinstance(spec, FairnessSpec):
        return resolve_targets(spec, dataset, k)
    return ResolvedTargets(tuple(as_fraction(t) for t in spec))


def _onehots(dataset: Dataset):
    out = []
    for f in dataset.sensitive_features:
        w = np.zeros((dataset.n, f.n_groups), dtype=np.int64)
        w[np.arange(dataset.n), f.membership] = 1
        out.append(w)
    return tuple(out)


class _Engine:
    """Assignment, update and cost for one algorithm on one dataset."""

    def __init__(self, dataset: Dataset, config: RunConfig, targets: ResolvedTargets, batches: BatchSet | None):
        self.ds = dataset
        self.cfg = config
        self.targets = tuple(targets)
        self.algo = config.algorithm
        self.k = config.k
        if self.algo == "flow" and dataset.n_features != 1:
            raise UnsupportedConfiguration(
                f"the flow algorithm needs exactly one sensitive feature, dataset has {dataset.n_features}"
            )
        if self.algo == "smpfc":
            if batches is None:
                batches = build_batches(dataset, config.r, np.random.default_rng(config.batch_seed), k=config.k)
            if batches.r < self.k:
                raise ConfigurationError(f"r={batches.r} is smaller than k={self.k}")
            self.batches = batches
        elif self.algo == "mpfc":
            self.weights = _onehots(dataset)

    def init_centers(self, rng) -> np.ndarray:
        x = self.ds.points
        if self.algo == "smpfc":
            return kmeanspp_init(self.batches.representatives, self.k, rng)
        if self.algo == "flow":
            # seeds come from the group the first stage assigns
            f = self.ds.feature(0)
            first = stage_plan(f.membership, f.n_groups).members[0]
            if self.k > len(first):
                raise ConfigurationError(f"k={self.k} exceeds the largest group size {len(first)}")
            return kmeanspp_init(x[first], self.k, rng)
        return kmeanspp_init(x, self.k, rng)

    def assign(self, centers, rng) -> AssignStep:
        x = self.ds.points
        if self.algo == "flow" and any(self.targets):
            f = self.ds.feature(0)
            st = staged_assign(
                x, f.membership, centers, self.targets[0], rng, f.n_groups, self.cfg.cost_scale, self.cfg.reinit_cap
            )
            return AssignStep(st.labels, st.centers, clustering_cost(x, st.labels, st.centers), st.epsilon_total)
        if self.algo == "smpfc":
            b = self.batches
            costs = sq_dists(b.representatives, centers)
            prob = AssignmentProblem(costs, self.targets, b.weights)
            sol = solve_assignment(prob, self.cfg.time_cap)
            labels = map_back(b, sol.row_to_cluster)
            return AssignStep(labels, centers, clustering_cost(x, labels, centers), 0, sol.optimal, sol.row_to_cluster)
        costs = sq_dists(x, centers)
        # vacuous targets reduce every algorithm to nearest center with non-empty clusters
        if self.algo in ("lloyd", "flow"):
            labels = nearest_nonempty(costs)
            optimal = True
        else:
            sol = solve_assignment(AssignmentProblem(costs, self.targets, self.weights), self.cfg.time_cap)
            labels, optimal = sol.row_to_cluster, sol.optimal
        return AssignStep(labels, centers, clustering_cost(x, labels, centers), 0, optimal)

    def update(self, step: AssignStep):
        """New centers and the object-level cost at them."""
        if self.algo == "smpfc":
            b = self.batches
            centers = weighted_update(b.representatives, b.sizes, step.row_labels, self.k)
            return centers, clustering_cost(self.ds.points, step.labels, centers)
        centers = update_centers(self.ds.points, step.labels, self.k)
        return centers, clustering_cost(self.ds.points, step.labels, centers)


def initial_centers(dataset: Dataset, config: RunConfig, seed: int, batches: BatchSet | None = None) -> np.ndarray:
    """The k-means++ centers a run with ``seed`` starts from."""
    eng = _Engine(dataset, config, _targets_for(None, dataset, config.k), batches)
    return eng.init_centers(np.random.default_rng(seed))


def assign_step(dataset: Dataset, centers, config: RunConfig, spec=None, seed: int = 0, batches: BatchSet | None = None) -> AssignStep:
    """One assignment step at fixed ``centers`` (useful for inspecting the algorithms)."""
    targets = _targets_for(spec, dataset, config.k)
    eng = _Engine(dataset, config, targets, batches)
    return eng.assign(np.array(centers, dtype=float), np.random.default_rng(seed))


def _diagnostics(dataset: Dataset, k: int, targets) -> dict:
    return {
        "targets": [str(t) for t in targets],
        "group_counts": [f.counts().tolist() for f in dataset.sensitive_features],
        "feasible_balance": [str(feasible_balance(dataset, s, k, exact=True)) for s in range(dataset.n_features)],
        "k": k,
    }


def run_once(
    dataset: Dataset,
    config: RunConfig,
    spec=None,
    seed: int | None = None,
    batches: BatchSet | None = None,
    deadline: float | None = None,
) -> ClusteringSolution:
    """One run of the decomposition scheme from the k-means++ start of ``seed``.

    ``spec`` is a :class:`FairnessSpec`, resolved targets or ``None`` (no
    fairness). The time budget is checked between iterations; when it runs
    out the last completed iterate is returned.
    """
    start = time.perf_counter()
    seed = config.seeds[0] if seed is None else int(seed)
    if config.k > dataset.n:
        raise ConfigurationError(f"k={config.k} exceeds n={dataset.n}")
    targets = _targets_for(spec, dataset, config.k)
    if len(targets) != dataset.n_features:
        raise ConfigurationError(f"{len(targets)} targets for {dataset.n_features} sensitive features")
    if deadline is None and config.max_time is not None:
        deadline = start + config.max_time
    eng = _Engine(dataset, config, targets, batches)
    rng = np.random.default_rng(seed)
    centers = eng.init_centers(rng)

    history = []
    prev = None
    labels = None
    epsilon = 0
    capped = False
    stop = "max_iter"
    t = 0
    while t < config.max_iter:
        try:
            step = eng.assign(centers, rng)
        except InfeasibleTarget as exc:
            if labels is not None:
                raise
            diag = _diagnostics(dataset, config.k, targets)
            diag.update(exc.diagnostics)
            hint = " (try a larger r)" if config.algorithm == "smpfc" else ""
            raise InfeasibleTarget(f"{exc}{hint}", diag) from None
        except TimeCapNoIncumbent:
            if labels is None:
                raise
            stop, capped = "time_cap", True
            break
        t += 1
        if t == 1:
            prev = step.cost
        new_centers, cost = eng.update(step)
        labels, centers, epsilon = step.labels, new_centers, step.epsilon
        capped = capped or not step.optimal
        history.append(cost)
        gain = improvement(prev, cost)
        prev = cost
        if gain < config.delta:
            stop = "delta"
            break
        if deadline is not None and time.perf_counter() >= deadline:
            stop = "max_time"
            break

    cost = clustering_cost(dataset.points, labels, centers)
    k = config.k
    balances = tuple(clustering_balance(labels, dataset, s, k) for s in range(dataset.n_features))
    met = tuple(meets_targets(labels, dataset, k, targets))
    return ClusteringSolution(
        labels=np.asarray(labels, dtype=np.int64),
        centers=centers,
        cost=cost,
        balances=balances,
        iterations=t,
        seed=seed,
        elapsed=time.perf_counter() - start,
        target_met=met,
        epsilon_adjustments=int(epsilon),
        targets=tuple(targets),
        algorithm=config.algorithm,
        history=tuple(history),
        capped=capped,
        stop_reason=stop,
    )


def _run_seed(args):
    dataset, config, targets, seed, batches, deadline = args
    if deadline is not None and time.time() >= deadline:
        return seed, None, "skipped: time budget exhausted"
    try:
        sol = run_once(dataset, config, targets, seed, batches, _to_perf(deadline))
        return seed, sol, None
    except InfeasibleTarget as exc:
        return seed, exc, str(exc)
    except FairClusterError as exc:
        return seed, exc, f"{type(exc).__name__}: {exc}"


def _to_perf(wall_deadline):
    if wall_deadline is None:
        return None
    return time.perf_counter() + (wall_deadline - time.time())


def run_multi(
    dataset: Dataset,
    config: RunConfig,
    spec=None,
    batches: BatchSet | None = None,
) -> MultiRunResult:
    """Best-of-seeds driver.

    Seeds run in order (or on ``config.workers`` processes) until they are
    exhausted or ``config.max_time`` has passed. The best run is the
    lowest-cost one, ties to the smaller seed; every run is kept for
    distribution plots.
    """
    start = time.perf_counter()
    wall_start = time.time()
    targets = _targets_for(spec, dataset, config.k)
    batch_time = 0.0
    if config.algorithm == "smpfc" and batches is None:
        t0 = time.perf_counter()
        batches = build_batches(dataset, config.r, np.random.default_rng(config.batch_seed), k=config.k)
        batch_time = time.perf_counter() - t0
    deadline = None if config.max_time is None else wall_start + config.max_time
    jobs = [(dataset, config, targets, s, batches, deadline) for s in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_seed(job))
    runs = [sol for _, sol, _ in results if isinstance(sol, ClusteringSolution)]
    failures = tuple((seed, msg) for seed, sol, msg in results if msg is not None)
    if not runs:
        errors = [sol for _, sol, _ in results if isinstance(sol, Exception)]
        infeasible = [e for e in errors if isinstance(e, InfeasibleTarget)]
        if infeasible:
            raise infeasible[0]
        if errors:
            raise errors[0]
        raise TimeoutError("time budget exhausted before any run completed")
    best = min(runs, key=lambda s: (s.cost, s.seed))
    return MultiRunResult(best, tuple(runs), failures, time.perf_counter() - start, batch_time)
