"""Aggregation of a dataset into weighted representatives for S-MPFC.

A vanilla k-means run with ``r`` clusters splits the objects into batches.
Each batch is replaced by its centroid, its size and, per sensitive feature,
the number of members of every protected group. Clustering the
representatives under group-weighted fairness constraints and copying each
representative's label to its members keeps the targets exact on the objects.

Batch sets can be cached as ``.npz`` files. The archive holds the arrays
``representatives`` (r x d), ``sizes`` (r), ``membership`` (n),
``scatter`` (scalar), ``weights_0 .. weights_{m-1}`` (r x G_s) and a ``key``
string; a file is reused only if its key matches the dataset fingerprint,
``r``, the seed and the k-means budget.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError
from .kmeans import lloyd, update_centers

__all__ = [
    "BatchSet",
    "build_batches",
    "weighted_update",
    "map_back",
    "dataset_fingerprint",
    "save_batches",
    "load_batches",
    "cached_batches",
]

DEFAULT_R = 100
KMEANS_ITERS = 25
KMEANS_TOL = 1e-4
SUBSAMPLE_THRESHOLD = 10**6
SUBSAMPLE_SIZE = 200_000


@dataclass(frozen=True)
class BatchSet:
    representatives: np.ndarray
    sizes: np.ndarray
    weights: tuple[np.ndarray, ...]  # per feature, r x G_s
    membership: np.ndarray  # batch index per object
    scatter: float  # sum of squared distances of objects to their representative

    @property
    def r(self) -> int:
        return self.representatives.shape[0]

    def weighted_cost(self, rep_labels, centers) -> float:
        """Size-weighted representative cost; adding ``scatter`` gives the object-level cost."""
        diff = self.representatives - np.asarray(centers)[np.asarray(rep_labels)]
        return float(np.einsum("i,ij,ij->", self.sizes.astype(float), diff, diff))


def _summarize(points, membership, r, dataset: Dataset) -> BatchSet:
    sizes = np.bincount(membership, minlength=r)
    reps = update_centers(points, membership, r)
    weights = []
    for f in dataset.sensitive_features:
        flat = np.bincount(membership * f.n_groups + f.membership, minlength=r * f.n_groups)
        weights.append(flat.reshape(r, f.n_groups))
    diff = points - reps[membership]
    scatter = float(np.einsum("ij,ij->", diff, diff))
    return BatchSet(reps, sizes, tuple(weights), np.asarray(membership, dtype=np.int64), scatter)


def build_batches(
    dataset: Dataset,
    r: int = DEFAULT_R,
    rng: np.random.Generator | int | None = None,
    kmeans_iters: int = KMEANS_ITERS,
    k: int | None = None,
    tol: float = KMEANS_TOL,
    subsample: int | None = SUBSAMPLE_SIZE,
) -> BatchSet:
    """Split ``dataset`` into ``r`` non-empty batches with vanilla k-means.

    For ``n >= 10**6`` the batch centers are fitted on a uniform subsample of
    ``subsample`` objects (pass ``None`` to disable) before one assignment
    pass over all objects.
    """
    n = dataset.n
    if r < 1 or r > n:
        raise ConfigurationError(f"r must lie in [1, n={n}], got {r}")
    if k is not None and r < k:
        raise ConfigurationError(f"r={r} is smaller than k={k}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x = dataset.points
    if r == n:
        return _summarize(x, np.arange(n), r, dataset)
    fit = None
    if subsample is not None and n >= SUBSAMPLE_THRESHOLD and subsample < n:
        fit = x[np.sort(rng.choice(n, size=subsample, replace=False))]
    membership, _ = lloyd(x, r, rng, max_iter=kmeans_iters, tol=tol, fit_points=fit)
    return _summarize(x, membership, r, dataset)


def weighted_update(representatives, sizes, rep_labels, k: int) -> np.ndarray:
    """Cluster centers as size-weighted means of the assigned representatives."""
    return update_centers(representatives, rep_labels, k, weights=sizes)


def map_back(batch_set: BatchSet, rep_labels) -> np.ndarray:
    """Per-object labels: each object takes its batch's label."""
    rep_labels = np.asarray(rep_labels, dtype=np.int64)
    if rep_labels.shape != (batch_set.r,):
        raise ConfigurationError(f"expected {batch_set.r} representative labels, got {rep_labels.shape}")
    return rep_labels[batch_set.membership]


def dataset_fingerprint(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dataset.points).tobytes())
    h.update(str(dataset.points.shape).encode())
    for f in dataset.sensitive_features:
        h.update(f.name.encode())
        h.update(np.ascontiguousarray(f.membership).tobytes())
    return h.hexdigest()


def _cache_key(dataset, r, seed, kmeans_iters, subsample) -> str:
    return f"{dataset_fingerprint(dataset)}:r={r}:seed={seed}:iters={kmeans_iters}:sub={subsample}"


def save_batches(batch_set: BatchSet, path, key: str = "") -> None:
    arrays = {
        "representatives": batch_set.representatives,
        "sizes": batch_set.sizes,
        "membership": batch_set.membership,
        "scatter": np.array(batch_set.scatter),
        "key": np.array(key),
    }
    for s, w in enumerate(batch_set.weights):
        arrays[f"weights_{s}"] = w
    tmp = f"{path}.tmp.npz"
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def load_batches(path, key: str | None = None) -> BatchSet | None:
    """Batch set stored at ``path``; ``None`` if the file's key does not match."""
    with np.load(path, allow_pickle=False) as z:
        if key is not None and str(z["key"]) != key:
            return None
        n_feat = sum(1 for name in z.files if name.startswith("weights_"))
        return BatchSet(
            z["representatives"],
            z["sizes"],
            tuple(z[f"weights_{s}"] for s in range(n_feat)),
            z["membership"],
            float(z["scatter"]),
        )


def cached_batches(
    dataset: Dataset,
    r: int,
    seed: int,
    cache_dir,
    kmeans_iters: int = KMEANS_ITERS,
    subsample: int | None = SUBSAMPLE_SIZE,
) -> BatchSet:
    """:func:`build_batches` behind an on-disk cache in ``cache_dir``."""
    key = _cache_key(dataset, r, seed, kmeans_iters, subsample)
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, hashlib.sha256(key.encode()).hexdigest()[:24] + ".npz")
    if os.path.exists(path):
        found = load_batches(path, key)
        if found is not None:
            return found
    batch_set = build_batches(dataset, r, np.random.default_rng(seed), kmeans_iters, subsample=subsample)
    save_batches(batch_set, path, key)
    return batch_set
