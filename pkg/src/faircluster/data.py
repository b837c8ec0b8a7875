"""Datasets, protected-group membership and feature scaling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DatasetError


def scale_minmax(raw) -> np.ndarray:
    """Min-max scale every column of ``raw`` to [0, 1].

    Constant columns map to 0. Raises :class:`DatasetError` naming the
    first non-finite cell.
    """
    x = np.array(raw, dtype=float)
    if x.ndim != 2:
        raise DatasetError(f"expected a 2-D matrix, got shape {x.shape}")
    bad = ~np.isfinite(x)
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        raise DatasetError(f"non-finite value at row {row}, column {col}")
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    out = np.zeros_like(x)
    nz = span > 0
    out[:, nz] = (x[:, nz] - lo[nz]) / span[nz]
    # guard against 1 + eps from rounding
    np.clip(out, 0.0, 1.0, out=out)
    return out


@dataclass(frozen=True)
class SensitiveFeature:
    """One sensitive attribute: group identifiers plus a dense label per object."""

    name: str
    groups: tuple[str, ...]
    membership: np.ndarray

    def __post_init__(self):
        membership = np.asarray(self.membership, dtype=np.int64)
        groups = tuple(str(g) for g in self.groups)
        if len(groups) < 2:
            raise DatasetError(f"sensitive feature {self.name!r} needs at least 2 groups, got {len(groups)}")
        if len(set(groups)) != len(groups):
            raise DatasetError(f"duplicate group identifiers in {self.name!r}")
        if membership.ndim != 1:
            raise DatasetError("membership must be one-dimensional")
        if membership.size and (membership.min() < 0 or membership.max() >= len(groups)):
            raise DatasetError(f"membership of {self.name!r} references an undeclared group")
        counts = np.bincount(membership, minlength=len(groups))
        empty = [groups[g] for g in np.flatnonzero(counts == 0)]
        if empty:
            raise DatasetError(f"protected group(s) {empty} of {self.name!r} have no members")
        membership = membership.copy()
        membership.setflags(write=False)
        object.__setattr__(self, "membership", membership)
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_labels(cls, name: str, labels: Sequence, groups: Sequence | None = None) -> "SensitiveFeature":
        """Build from raw per-object labels; group order follows first appearance unless given."""
        labels = [str(v) for v in labels]
        if groups is None:
            groups = list(dict.fromkeys(labels))
        else:
            groups = [str(g) for g in groups]
        index = {g: i for i, g in enumerate(groups)}
        try:
            membership = np.array([index[v] for v in labels], dtype=np.int64)
        except KeyError as exc:
            raise DatasetError(f"label {exc.args[0]!r} of {name!r} is not a declared group") from None
        return cls(name, tuple(groups), membership)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def counts(self) -> np.ndarray:
        return np.bincount(self.membership, minlength=self.n_groups)


@dataclass(frozen=True)
class Dataset:
    """Immutable n x d matrix of scaled features plus sensitive features.

    Objects are identified by their 0-based row index; all tie-breaking in
    the package refers to that index.
    """

    points: np.ndarray
    sensitive_features: tuple[SensitiveFeature, ...] = field(default=())
    name: str = "dataset"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DatasetError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            row, col = map(int, np.argwhere(~np.isfinite(pts))[0])
            raise DatasetError(f"non-finite value at row {row}, column {col}")
        feats = tuple(self.sensitive_features)
        for f in feats:
            if f.membership.shape[0] != pts.shape[0]:
                raise DatasetError(
                    f"feature {f.name!r} labels {f.membership.shape[0]} objects, dataset has {pts.shape[0]}"
                )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "sensitive_features", feats)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_features(self) -> int:
        return len(self.sensitive_features)

    def feature(self, index: int) -> SensitiveFeature:
        if not 0 <= index < len(self.sensitive_features):
            raise IndexError(f"sensitive feature index {index} out of range")
        return self.sensitive_features[index]

    def memberships(self) -> list[np.ndarray]:
        return [f.membership for f in self.sensitive_features]

    def subset(self, rows) -> "Dataset":
        """Dataset restricted to ``rows``; groups that vanish are dropped."""
        rows = np.asarray(rows)
        feats = []
        for f in self.sensitive_features:
            sub = f.membership[rows]
            present = np.unique(sub)
            remap = {int(g): i for i, g in enumerate(present)}
            feats.append(
                SensitiveFeature(f.name, tuple(f.groups[g] for g in present), np.array([remap[int(g)] for g in sub]))
            )
        return Dataset(self.points[rows], tuple(feats), name=f"{self.name}[subset]")


def group_counts(dataset: Dataset, feature_index: int) -> dict[str, int]:
    """Number of objects per protected group of one sensitive feature."""
    feat = dataset.feature(feature_index)
    return {g: int(c) for g, c in zip(feat.groups, feat.counts())}
