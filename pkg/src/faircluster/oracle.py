"""Brute-force exact solvers for tiny instances.

These are ground truth for the tests. They share no code with the
heuristics beyond the dataset type: partitions are enumerated directly, the
fairness constraints are checked with integer arithmetic and the cost of a
partition uses its centroids.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, Infeasible
from .metrics import as_fraction

__all__ = [
    "OracleResult",
    "exact_fair_kmeans",
    "exact_fair_kmeans_grouped",
    "exact_fair_assignment",
    "restricted_growth_strings",
]

MAX_N = 14
MAX_K = 3
MAX_ROWS = 12
_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleResult:
    best_labels: np.ndarray
    best_cost: float
    feasible_count: int
    evaluated_count: int


def restricted_growth_strings(n: int, k: int):
    """Yield chunks (B x n int8) of all partitions of n items into exactly k blocks.

    A string a_0..a_{n-1} with a_0 = 0 and a_i <= 1 + max(a_0..a_{i-1}) names
    each set partition exactly once.
    """
    if n < k or k < 1:
        return
    # all strings with a_0 = 0 over k symbols, then keep the growth-restricted, surjective ones
    tail = n - 1
    total = k**tail
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        digits = np.zeros((idx.size, n), dtype=np.int8)
        rem = idx.copy()
        for pos in range(n - 1, 0, -1):
            digits[:, pos] = rem % k
            rem //= k
        running = np.maximum.accumulate(digits, axis=1)
        ok = (digits[:, 1:] <= running[:, :-1] + 1).all(axis=1) & (running[:, -1] == k - 1)
        if ok.any():
            yield digits[ok]


def _fair_mask(onehot_counts, targets):
    """Rows (B) whose every cluster meets every target; onehot_counts[s] is B x k x G."""
    ok = None
    for counts, t in zip(onehot_counts, targets):
        if t == 0:
            continue
        p, q = t.numerator, t.denominator
        good = (q * counts.min(axis=2) >= p * counts.max(axis=2)).all(axis=1)
        ok = good if ok is None else ok & good
    return ok


def _centroid_cost(points, labels, k) -> float:
    cost = 0.0
    for j in range(k):
        member = points[labels == j]
        if len(member):
            diff = member - member.mean(axis=0)
            cost += float(np.einsum("ij,ij->", diff, diff))
    return cost


def exact_fair_kmeans(dataset: Dataset, k: int, targets) -> OracleResult:
    """Minimum k-means cost over every fair partition into k non-empty clusters."""
    n = dataset.n
    if n > MAX_N or k > MAX_K:
        raise ConfigurationError(f"oracle limited to n <= {MAX_N}, k <= {MAX_K} (got n={n}, k={k})")
    if k < 1 or k > n:
        raise ConfigurationError(f"k must lie in [1, n], got {k}")
    targets = [as_fraction(t) for t in targets]
    if len(targets) != dataset.n_features:
        raise ConfigurationError("one target per sensitive feature required")
    x = dataset.points
    sqnorm = float(np.einsum("ij,ij->", x, x))
    onehots = [np.eye(f.n_groups, dtype=np.int64)[f.membership] for f in dataset.sensitive_features]
    best_cost, best_labels = math.inf, None
    feasible = evaluated = 0
    for block in restricted_growth_strings(n, k):
        evaluated += block.shape[0]
        masks = np.stack([(block == j) for j in range(k)], axis=1).astype(np.int64)  # B x k x n
        ok = _fair_mask([masks @ oh for oh in onehots], targets)
        if ok is not None:
            block, masks = block[ok], masks[ok]
        feasible += block.shape[0]
        if not block.shape[0]:
            continue
        sums = masks.astype(float) @ x  # B x k x d
        sizes = masks.sum(axis=2)
        cost = sqnorm - (np.einsum("bkd,bkd->bk", sums, sums) / sizes).sum(axis=1)
        i = int(np.argmin(cost))
        if cost[i] < best_cost - 1e-12:
            best_cost, best_labels = float(cost[i]), block[i].astype(np.int64)
    if best_labels is None:
        raise Infeasible(
            "no partition meets the targets",
            {"targets": [str(t) for t in targets], "evaluated": evaluated},
        )
    return OracleResult(best_labels, _centroid_cost(x, best_labels, k), feasible, evaluated)


def _splits(n_items, counts):
    """All labelings (M x n_items) of n_items objects with exactly counts[j] in cluster j."""
    out = []

    def rec(prefix, free, j):
        if j == len(counts) - 1:
            lab = prefix.copy()
            lab[list(free)] = j
            out.append(lab)
            return
        for chosen in itertools.combinations(free, counts[j]):
            lab = prefix.copy()
            lab[list(chosen)] = j
            rest = tuple(i for i in free if i not in chosen)
            rec(lab, rest, j + 1)

    rec(np.zeros(n_items, dtype=np.int64), tuple(range(n_items)), 0)
    return np.array(out, dtype=np.int64)


def _count_matrices(sizes, k, t):
    """k x G non-negative integer matrices with column sums ``sizes``, non-empty fair rows."""
    p, q = t.numerator, t.denominator
    G = len(sizes)

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    per_group = [list(compositions(s, k)) for s in sizes]
    for cols in itertools.product(*per_group):
        A = np.array(cols, dtype=np.int64).T  # k x G
        if (A.sum(axis=1) == 0).any():
            continue
        if t > 0 and not all(q * int(r.min()) >= p * int(r.max()) for r in A):
            continue
        yield A


def exact_fair_kmeans_grouped(dataset: Dataset, k: int, target, max_combos: int = 2 * 10**8) -> OracleResult:
    """Exact optimum for a single sensitive feature at sizes beyond :func:`exact_fair_kmeans`.

    Instead of all partitions it enumerates the fair cluster-by-group count
    matrices and, for each, every split of each group's objects into those
    counts. Feasible only when groups are small; ``max_combos`` caps the
    total number of labelings.
    """
    if dataset.n_features != 1:
        raise ConfigurationError("grouped oracle supports exactly one sensitive feature")
    t = as_fraction(target)
    feat = dataset.feature(0)
    x = dataset.points
    G = feat.n_groups
    members = [np.flatnonzero(feat.membership == g) for g in range(G)]
    sizes = [len(m) for m in members]
    matrices = list(_count_matrices(sizes, k, t))
    total = 0
    for A in matrices:
        total += math.prod(math.factorial(s) // math.prod(math.factorial(int(a)) for a in A[:, g]) for g, s in enumerate(sizes))
    if total > max_combos:
        raise ConfigurationError(f"grouped oracle would enumerate {total} labelings (cap {max_combos})")
    if not matrices:
        raise Infeasible("no count matrix meets the target", {"target": str(t), "group_sizes": sizes})

    sqnorm = float(np.einsum("ij,ij->", x, x))
    best_cost, best = math.inf, None
    for A in matrices:
        n_j = A.sum(axis=1).astype(float)
        labelings, partial = [], []
        for g in range(G):
            lab = _splits(sizes[g], [int(a) for a in A[:, g]])
            onehot = (lab[:, None, :] == np.arange(k)[None, :, None]).astype(float)  # M x k x n_g
            labelings.append(lab)
            partial.append(onehot @ x[members[g]])  # M x k x d
        # vectorize over the first two groups, loop over the rest
        base = partial[0][:, None] + partial[1][None, :] if G > 1 else partial[0][:, None]
        for rest in itertools.product(*[range(len(p)) for p in partial[2:]]):
            s = base
            for g, idx in enumerate(rest, start=2):
                s = s + partial[g][idx]
            cost = sqnorm - (np.einsum("abkd,abkd->abk", s, s) / n_j).sum(axis=2)
            flat = int(np.argmin(cost))
            a, b = np.unravel_index(flat, cost.shape)
            if cost[a, b] < best_cost - 1e-12:
                best_cost = float(cost[a, b])
                best = (A, (int(a), int(b)) + tuple(rest), [lab for lab in labelings])
    A, picks, labelings = best
    labels = np.empty(dataset.n, dtype=np.int64)
    for g in range(G):
        labels[members[g]] = labelings[g][picks[g]] if g < len(picks) else labelings[g][0]
    return OracleResult(labels, _centroid_cost(x, labels, k), total, total)


def exact_fair_assignment(costs, groups, k: int, targets, require_nonempty: bool = True) -> OracleResult:
    """Minimum assignment objective over all k^rows assignments meeting the constraints.

    ``groups`` holds one entry per sensitive feature: either a per-row group
    index vector or a rows x G matrix of non-negative integer weights.
    """
    costs = np.asarray(costs, dtype=float)
    R = costs.shape[0]
    if costs.shape[1] != k:
        raise ConfigurationError("costs must have k columns")
    if R > MAX_ROWS or k > MAX_K:
        raise ConfigurationError(f"oracle limited to rows <= {MAX_ROWS}, k <= {MAX_K}")
    targets = [as_fraction(t) for t in targets]
    weights = []
    for g in groups:
        g = np.asarray(g, dtype=np.int64)
        if g.ndim == 1:
            g = np.eye(int(g.max()) + 1, dtype=np.int64)[g]
        weights.append(g)
    labels = np.indices((k,) * R).reshape(R, -1).T if R else np.zeros((1, 0), dtype=np.int64)
    evaluated = labels.shape[0]
    masks = np.stack([(labels == j) for j in range(k)], axis=1).astype(np.int64)  # B x k x R
    keep = np.ones(evaluated, dtype=bool)
    if require_nonempty:
        keep &= (masks.sum(axis=2) > 0).all(axis=1)
    fair = _fair_mask([masks @ w for w in weights], targets)
    if fair is not None:
        keep &= fair
    labels = labels[keep]
    if not labels.shape[0]:
        raise Infeasible("no assignment meets the constraints", {"targets": [str(t) for t in targets]})
    obj = costs[np.arange(R)[None, :], labels].sum(axis=1)
    # settle near-ties with exactly rounded sums
    near = np.flatnonzero(obj <= obj.min() + 1e-9 * max(1.0, abs(obj.min())))
    exact = [(math.fsum(costs[np.arange(R), labels[i]].tolist()), int(i)) for i in near]
    value, i = min(exact)
    return OracleResult(labels[i].astype(np.int64), value, int(labels.shape[0]), evaluated)
