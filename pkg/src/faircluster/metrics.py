"""Balance metrics, target resolution and the k-means cost.

Balances are ratios of integer counts, so they are computed as
:class:`fractions.Fraction` and only turned into floats on request.
Targets are kept rational for the same reason: every fairness check in the
package is an exact integer comparison ``q * count_g >= p * count_g'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigurationError

__all__ = [
    "as_fraction",
    "cluster_balance",
    "clustering_balance",
    "dataset_balance",
    "feasible_balance",
    "FairnessSpec",
    "ResolvedTargets",
    "resolve_targets",
    "clustering_cost",
    "cluster_group_counts",
    "meets_targets",
    "BalanceReport",
    "balance_report",
]


def as_fraction(value) -> Fraction:
    """Exact rational for ``value``.

    Floats are read through their shortest decimal repr, so ``0.01`` becomes
    ``1/100`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    f = float(value)
    if not math.isfinite(f):
        raise ConfigurationError(f"non-finite value {value!r}")
    return Fraction(repr(f))


def _ratio(counts) -> Fraction:
    counts = [int(c) for c in counts]
    if len(counts) < 2:
        raise ConfigurationError("balance needs at least two groups")
    hi = max(counts)
    if hi <= 0:
        raise ConfigurationError("empty cluster has no balance")
    # min over ordered pairs of c_g / c_g' is min/max; an absent group gives 0
    return Fraction(min(counts), hi)


def cluster_balance(member_group_counts: Mapping | Sequence, exact: bool = False):
    """Balance of a single cluster from its per-group member counts.

    >>> cluster_balance({"A": 2, "B": 1})
    0.5
    """
    counts = member_group_counts.values() if isinstance(member_group_counts, Mapping) else member_group_counts
    r = _ratio(counts)
    return r if exact else float(r)


def cluster_group_counts(labels, membership, k: int, n_groups: int) -> np.ndarray:
    """k x G matrix of member counts per (cluster, group)."""
    labels = np.asarray(labels, dtype=np.int64)
    membership = np.asarray(membership, dtype=np.int64)
    flat = np.bincount(labels * n_groups + membership, minlength=k * n_groups)
    return flat.reshape(k, n_groups)


def _check_labels(labels, n, k):
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ConfigurationError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ConfigurationError(f"labels must lie in [0, {k})")
    sizes = np.bincount(labels.astype(np.int64), minlength=k)
    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        raise ConfigurationError(f"cluster {int(empty[0])} is empty")
    return labels.astype(np.int64)


def clustering_balance(labels, dataset: Dataset, feature_index: int, k: int, exact: bool = False):
    """Minimum cluster balance over all k clusters for one sensitive feature."""
    labels = _check_labels(labels, dataset.n, k)
    feat = dataset.feature(feature_index)
    counts = cluster_group_counts(labels, feat.membership, k, feat.n_groups)
    r = min(_ratio(row) for row in counts)
    return r if exact else float(r)


def dataset_balance(dataset: Dataset, feature_index: int, exact: bool = False):
    """Balance of the whole dataset, i.e. smallest over largest group size."""
    r = _ratio(dataset.feature(feature_index).counts())
    return r if exact else float(r)


def feasible_balance(dataset: Dataset, feature_index: int, k: int, exact: bool = False):
    """Balance that k clusters can always reach: floor(min/k) / ceil(max/k)."""
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    counts = dataset.feature(feature_index).counts()
    num = int(counts.min()) // k
    den = -(-int(counts.max()) // k)
    r = Fraction(num, den) if num > 0 else Fraction(0)
    return r if exact else float(r)


@dataclass(frozen=True)
class FairnessSpec:
    """How targets are set: a tolerance lambda, or explicit per-feature targets.

    ``basis`` selects what lambda scales: ``"feasible"`` (default, the
    k-dependent achievable balance) or ``"dataset"`` (the raw dataset balance).
    """

    tolerance: float | Fraction | None = None
    targets: tuple | None = None
    basis: str = "feasible"

    def __post_init__(self):
        if (self.tolerance is None) == (self.targets is None):
            raise ConfigurationError("give exactly one of tolerance or explicit targets")
        if self.basis not in ("feasible", "dataset"):
            raise ConfigurationError(f"unknown basis {self.basis!r}")
        if self.tolerance is not None:
            lam = as_fraction(self.tolerance)
            if not 0 <= lam <= 1:
                raise ConfigurationError(f"tolerance must lie in [0, 1], got {self.tolerance}")
        else:
            ts = tuple(as_fraction(t) for t in self.targets)
            if any(not 0 <= t <= 1 for t in ts):
                raise ConfigurationError(f"targets must lie in [0, 1], got {self.targets}")
            object.__setattr__(self, "targets", ts)

    @classmethod
    def from_tolerance(cls, lam, basis: str = "feasible") -> "FairnessSpec":
        return cls(tolerance=lam, basis=basis)

    @classmethod
    def explicit(cls, *targets) -> "FairnessSpec":
        if len(targets) == 1 and isinstance(targets[0], (list, tuple)):
            targets = tuple(targets[0])
        return cls(targets=tuple(targets))

    @property
    def mode(self) -> str:
        return "tolerance" if self.tolerance is not None else "explicit"

    def describe(self) -> str:
        if self.mode == "tolerance":
            return f"lambda={float(as_fraction(self.tolerance)):g}"
        return "target=" + ",".join(f"{float(t):g}" for t in self.targets)


@dataclass(frozen=True)
class ResolvedTargets:
    targets: tuple[Fraction, ...]
    warnings: tuple[str, ...] = field(default=())

    def __iter__(self):
        return iter(self.targets)

    def __len__(self):
        return len(self.targets)

    def __getitem__(self, i):
        return self.targets[i]

    def as_floats(self) -> tuple[float, ...]:
        return tuple(float(t) for t in self.targets)


def resolve_targets(spec: FairnessSpec, dataset: Dataset, k: int) -> ResolvedTargets:
    """Per-feature target balance for ``k`` clusters.

    Tolerance mode gives ``(1 - lambda) * basis``. Explicit targets pass
    through untouched; ones above the feasible balance only produce a warning,
    since the solver is the authority on infeasibility.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    m = dataset.n_features
    if spec.mode == "tolerance":
        lam = as_fraction(spec.tolerance)
        if spec.basis == "feasible":
            base = [feasible_balance(dataset, s, k, exact=True) for s in range(m)]
        else:
            base = [dataset_balance(dataset, s, exact=True) for s in range(m)]
        return ResolvedTargets(tuple((1 - lam) * b for b in base))
    if len(spec.targets) != m:
        raise ConfigurationError(f"{len(spec.targets)} explicit targets for {m} sensitive features")
    warnings = []
    for s, t in enumerate(spec.targets):
        fb = feasible_balance(dataset, s, k, exact=True)
        if t > fb:
            warnings.append(
                f"target {float(t):.4f} for feature {dataset.feature(s).name!r} exceeds the "
                f"feasible balance {float(fb):.4f} at k={k}; the instance is likely infeasible"
            )
    return ResolvedTargets(tuple(spec.targets), tuple(warnings))


def clustering_cost(points, labels, centers) -> float:
    """Sum of squared Euclidean distances from each point to its center."""
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    diff = points - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def meets_targets(labels, dataset: Dataset, k: int, targets) -> list[bool]:
    """Exact per-feature check that every cluster reaches its target."""
    labels = _check_labels(labels, dataset.n, k)
    out = []
    for s, t in enumerate(targets):
        t = as_fraction(t)
        feat = dataset.feature(s)
        counts = cluster_group_counts(labels, feat.membership, k, feat.n_groups)
        # min_g c_g >= t * max_g c_g covers every ordered pair at once
        out.append(bool(all(t.denominator * int(row.min()) >= t.numerator * int(row.max()) for row in counts)))
    return out


@dataclass(frozen=True)
class BalanceReport:
    per_cluster: tuple[tuple[float, ...], ...]
    per_feature_clustering_balance: tuple[float, ...]
    dataset_balance: tuple[float, ...]


def balance_report(labels, dataset: Dataset, k: int) -> BalanceReport:
    """Per-cluster balances (one tuple per feature) and their minima."""
    labels = _check_labels(labels, dataset.n, k)
    per_cluster = []
    for f in dataset.sensitive_features:
        counts = cluster_group_counts(labels, f.membership, k, f.n_groups)
        per_cluster.append(tuple(float(_ratio(row)) for row in counts))
    return BalanceReport(
        per_cluster=tuple(per_cluster),
        per_feature_clustering_balance=tuple(min(b) for b in per_cluster),
        dataset_balance=tuple(dataset_balance(dataset, s) for s in range(dataset.n_features)),
    )
