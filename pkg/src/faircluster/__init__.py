"""Fair k-means clustering under per-cluster balance constraints.

Three heuristics share one assign/update loop: ``mpfc`` (exact constrained
assignment), ``flow`` (staged min-cost flow, one sensitive feature) and
``smpfc`` (constrained assignment of batch representatives).
"""

from .assignment import AssignmentProblem, AssignmentSolution, lower_bound, nearest_nonempty, solve_assignment
from .batching import BatchSet, build_batches, map_back, weighted_update
from .data import Dataset, SensitiveFeature, group_counts, scale_minmax
from .errors import (
    ConfigurationError,
    DatasetError,
    FairClusterError,
    FirstStageDegenerate,
    Infeasible,
    InfeasibleTarget,
    TimeCapNoIncumbent,
    UnsupportedConfiguration,
)
from .experiments import bench, sweep_tradeoff
from .fairlet import FairletIntegers, get_fairlet_integers
from .flow import adjust_parameters, build_network, first_stage_assign, solve_min_cost_flow, stage_bounds, staged_assign
from .framework import ClusteringSolution, MultiRunResult, RunConfig, improvement, run_multi, run_once
from .io import ExperimentRecord, emit_results, gen_synthetic, ingest_csv
from .kmeans import kmeanspp_init, update_centers
from .metrics import (
    BalanceReport,
    FairnessSpec,
    ResolvedTargets,
    balance_report,
    cluster_balance,
    clustering_balance,
    clustering_cost,
    dataset_balance,
    feasible_balance,
    resolve_targets,
)
from .oracle import OracleResult, exact_fair_assignment, exact_fair_kmeans

__version__ = "0.1.0"
