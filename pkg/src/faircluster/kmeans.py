"""Vanilla k-means building blocks: distances, k-means++ seeding, Lloyd."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

# elements per temporary block in the chunked distance routines
_BLOCK = 1 << 22


def sq_dists(points, centers, fast: bool = False) -> np.ndarray:
    """n x k matrix of squared Euclidean distances.

    The default forms explicit differences, which keeps exact zeros and
    reproducible ties. ``fast=True`` uses the ||x||^2 - 2 x.c + ||c||^2
    expansion (BLAS); it is only used where ties do not matter.
    """
    x = np.asarray(points, dtype=float)
    c = np.asarray(centers, dtype=float)
    n, d = x.shape
    k = c.shape[0]
    out = np.empty((n, k))
    if fast:
        cc = np.einsum("ij,ij->i", c, c)
        step = max(1, _BLOCK // max(k, 1))
        for s in range(0, n, step):
            xs = x[s : s + step]
            block = np.einsum("ij,ij->i", xs, xs)[:, None] - 2.0 * xs @ c.T + cc[None, :]
            np.maximum(block, 0.0, out=block)
            out[s : s + step] = block
        return out
    step = max(1, _BLOCK // max(k * d, 1))
    for s in range(0, n, step):
        diff = x[s : s + step, None, :] - c[None, :, :]
        out[s : s + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def nearest(points, centers, fast: bool = False):
    """Index of the nearest center (lowest index on ties) and its squared distance."""
    d2 = sq_dists(points, centers, fast=fast)
    lab = np.argmin(d2, axis=1)
    return lab, d2[np.arange(d2.shape[0]), lab]


def kmeanspp_init(points, k: int, rng: np.random.Generator, return_index: bool = False):
    """k-means++ seeding: first object uniform, then D^2-weighted.

    Returns copies of the positions of ``k`` distinct objects. When every
    remaining object coincides with a chosen center the next pick is uniform
    over the objects not yet chosen.
    """
    x = np.asarray(points, dtype=float)
    n = x.shape[0]
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if k > n:
        raise ConfigurationError(f"cannot seed {k} centers from {n} objects")
    chosen = [int(rng.integers(n))]
    d2 = sq_dists(x, x[chosen[0]][None])[:, 0]
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    for _ in range(1, k):
        w = np.where(taken, 0.0, d2)
        total = w.sum()
        if total > 0:
            idx = int(rng.choice(n, p=w / total))
        else:
            idx = int(rng.choice(np.flatnonzero(~taken)))
        chosen.append(idx)
        taken[idx] = True
        np.minimum(d2, sq_dists(x, x[idx][None])[:, 0], out=d2)
    centers = x[chosen].copy()
    return (centers, np.array(chosen)) if return_index else centers


def update_centers(points, labels, k: int, weights=None) -> np.ndarray:
    """Per-cluster (optionally weighted) arithmetic mean."""
    x = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    mass = np.bincount(labels, weights=w, minlength=k)
    empty = np.flatnonzero(mass == 0)
    if empty.size:
        raise ConfigurationError(f"cluster {int(empty[0])} is empty; cannot update its center")
    sums = np.column_stack([np.bincount(labels, weights=x[:, c] * w, minlength=k) for c in range(x.shape[1])])
    return sums / mass[:, None]


def lloyd(points, k: int, rng: np.random.Generator, max_iter: int = 25, tol: float = 1e-4, fit_points=None):
    """Plain Lloyd iterations from a k-means++ start.

    ``fit_points`` (optional) is the sample the centers are fitted on; the
    returned labels always refer to ``points``. Empty clusters are re-seeded
    at the point farthest from its center. Returns ``(labels, centers)``.
    """
    x = np.asarray(points, dtype=float)
    fit = x if fit_points is None else np.asarray(fit_points, dtype=float)
    centers = kmeanspp_init(fit, k, rng)
    prev = np.inf
    for _ in range(max_iter):
        lab, d2 = nearest(fit, centers, fast=True)
        lab, d2 = _fill_empty(fit, lab, d2, centers, k)
        centers = update_centers(fit, lab, k)
        cost = float(d2.sum())
        if prev < np.inf and (prev == 0 or 1.0 - cost / prev < tol):
            break
        prev = cost
    lab, d2 = nearest(x, centers, fast=True)
    lab, _ = _fill_empty(x, lab, d2, centers, k)
    return lab, update_centers(x, lab, k)


def _fill_empty(x, lab, d2, centers, k):
    lab = lab.copy()
    d2 = d2.copy()
    sizes = np.bincount(lab, minlength=k)
    for j in np.flatnonzero(sizes == 0):
        # farthest point among clusters that can spare one
        order = np.argsort(-d2, kind="stable")
        for i in order:
            if sizes[lab[i]] > 1:
                sizes[lab[i]] -= 1
                lab[i] = j
                sizes[j] = 1
                d2[i] = 0.0
                centers[j] = x[i]
                break
    return lab, d2
