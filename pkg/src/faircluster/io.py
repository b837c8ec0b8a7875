"""CSV ingestion, synthetic generators, labels files and result emission.

Input CSV files are UTF-8 with a header row, ``,`` as delimiter and ``.``
as decimal point. Every column that is neither sensitive nor the id column
must be numeric; those columns are min-max scaled on ingestion.

Results are written either as a JSON document::

    {"schema_version": 1, "records": [{...}, ...]}

or as CSV with one row per record (list fields joined by ``;``). The record
keys and their order are :data:`RECORD_FIELDS`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .data import Dataset, SensitiveFeature, scale_minmax
from .errors import ConfigurationError, DatasetError

__all__ = [
    "SCHEMA_VERSION",
    "RECORD_FIELDS",
    "ingest_csv",
    "write_dataset_csv",
    "gen_synthetic",
    "write_labels",
    "read_labels",
    "ExperimentRecord",
    "emit_results",
    "render_fraction",
]

SCHEMA_VERSION = 1


def ingest_csv(path, sensitive_columns: Sequence[str], id_column: str | None = None, scale: bool = True) -> Dataset:
    """Read a dataset; sensitive columns become string-labelled groups."""
    sensitive_columns = list(sensitive_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected a header row") from None
        rows = list(reader)
    for col in sensitive_columns + ([id_column] if id_column else []):
        if col not in header:
            raise DatasetError(f"{path}: column {col!r} not found in header {header}")
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate column names in header")
    skip = set(sensitive_columns) | ({id_column} if id_column else set())
    numeric = [i for i, h in enumerate(header) if h not in skip]
    if not numeric:
        raise DatasetError(f"{path}: no numeric feature columns left after removing sensitive/id columns")
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    values = np.empty((len(rows), len(numeric)))
    for r, row in enumerate(rows):
        line = r + 2  # 1-based, header is line 1
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {line} has {len(row)} fields, header has {len(header)}")
        for c, i in enumerate(numeric):
            cell = row[i].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DatasetError(f"{path}: row {line}, column {header[i]!r}: {cell!r} is not numeric") from None
            if not math.isfinite(v):
                raise DatasetError(f"{path}: row {line}, column {header[i]!r}: non-finite value {cell!r}")
            values[r, c] = v
    feats = []
    for col in sensitive_columns:
        i = header.index(col)
        labels = [row[i].strip() for row in rows]
        if len(set(labels)) < 2:
            raise DatasetError(f"{path}: sensitive column {col!r} has a single group {labels[0]!r}; need at least 2")
        feats.append(SensitiveFeature.from_labels(col, labels, sorted(set(labels))))
    points = scale_minmax(values) if scale else values
    name = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return Dataset(points, tuple(feats), name=name)


def write_dataset_csv(dataset: Dataset, path, columns: Sequence[str] | None = None) -> None:
    """Write points and group labels; floats use their shortest round-trip form."""
    cols = list(columns) if columns is not None else [f"x{i}" for i in range(dataset.d)]
    header = cols + [f.name for f in dataset.sensitive_features]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        groups = [np.asarray(f.groups)[f.membership] for f in dataset.sensitive_features]
        for i, row in enumerate(dataset.points.tolist()):
            w.writerow([repr(v) for v in row] + [g[i] for g in groups])


def _simplex_means(groups: int, d: int, separation: float) -> np.ndarray:
    """Group means with all pairwise distances equal to ``separation`` when d >= groups - 1."""
    if d >= groups - 1:
        centered = np.eye(groups) - 1.0 / groups
        # orthonormal basis of the (groups - 1)-dim span of the centered vertices
        q, _ = np.linalg.qr(centered.T)
        coords = centered @ q[:, : groups - 1]
        coords *= separation / np.sqrt(2.0)
        out = np.zeros((groups, d))
        out[:, : groups - 1] = coords
        return out
    # not enough dimensions for a regular simplex: evenly spaced on the first axis
    out = np.zeros((groups, d))
    out[:, 0] = separation * np.arange(groups)
    return out


def gen_synthetic(
    kind: str = "b",
    n: int = 21,
    d: int = 2,
    groups: int = 3,
    seed: int | np.random.Generator = 0,
    spread: float = 1.0,
    separation: float = 6.0,
) -> Dataset:
    """Gaussian test data, min-max scaled.

    ``kind="a"``: one isotropic Gaussian, groups assigned round-robin.
    ``kind="b"``: one Gaussian per group (std ``spread``) with means
    ``separation * spread`` apart; groups are near-equal sized, the first
    ``n % groups`` groups one larger.
    """
    if groups < 2:
        raise ConfigurationError("need at least 2 groups")
    if n < groups or d < 1:
        raise ConfigurationError(f"need n >= groups and d >= 1 (got n={n}, d={d}, groups={groups})")
    if kind not in ("a", "b"):
        raise ConfigurationError(f"unknown synthetic kind {kind!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kind == "a":
        raw = rng.normal(0.0, spread, size=(n, d))
        membership = np.arange(n) % groups
    else:
        sizes = [n // groups + (1 if g < n % groups else 0) for g in range(groups)]
        means = _simplex_means(groups, d, separation * spread)
        raw = np.concatenate([rng.normal(means[g], spread, size=(sizes[g], d)) for g in range(groups)])
        membership = np.repeat(np.arange(groups), sizes)
    names = tuple(f"g{g}" for g in range(groups))
    feat = SensitiveFeature("group", names, membership)
    return Dataset(scale_minmax(raw), (feat,), name=f"synthetic-{kind}")


def write_labels(labels, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("index,cluster\n")
        for i, c in enumerate(np.asarray(labels, dtype=np.int64).tolist()):
            fh.write(f"{i},{c}\n")


def read_labels(path, n: int | None = None) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["index", "cluster"]:
            raise DatasetError(f"{path}: expected header 'index,cluster'")
        pairs = []
        for r, row in enumerate(reader, start=2):
            try:
                pairs.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError):
                raise DatasetError(f"{path}: row {r} is not an 'index,cluster' integer pair") from None
    idx = np.array([p[0] for p in pairs], dtype=np.int64)
    labels = np.empty(len(pairs), dtype=np.int64)
    if sorted(idx.tolist()) != list(range(len(pairs))):
        raise DatasetError(f"{path}: indices must cover 0..{len(pairs) - 1} exactly once")
    labels[idx] = [p[1] for p in pairs]
    if n is not None and labels.size != n:
        raise DatasetError(f"{path}: {labels.size} labels for a dataset of {n} objects")
    return labels


def render_fraction(value) -> str:
    f = Fraction(value)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


@dataclass
class ExperimentRecord:
    dataset: str
    algorithm: str
    k: int
    n: int
    d: int
    lam: float | None
    explicit_targets: list[str] | None
    resolved_targets: list[str]
    best_cost: float
    best_seed: int
    per_seed_costs: list[float]
    seeds: list[int]
    balances: list[float]
    target_met: list[bool]
    total_time: float
    per_run_time: list[float]
    batching_time: float
    iterations: int
    epsilon: int
    gaps: dict = field(default_factory=dict)
    failures: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.per_seed_costs and not math.isclose(self.best_cost, min(self.per_seed_costs), rel_tol=0, abs_tol=1e-12):
            raise ConfigurationError("best_cost must equal the minimum per-seed cost")


RECORD_FIELDS = tuple(ExperimentRecord.__dataclass_fields__)

_PRECISION = {
    "best_cost": 3,
    "per_seed_costs": 3,
    "balances": 3,
    "total_time": 2,
    "per_run_time": 2,
    "batching_time": 2,
    "lam": 3,
}


def _rounded(rec: ExperimentRecord) -> dict:
    out = {}
    raw = asdict(rec)
    for key in RECORD_FIELDS:
        v = raw[key]
        digits = _PRECISION.get(key)
        if key == "gaps":
            v = {b: round(g, 2) for b, g in sorted(v.items())}
        elif digits is not None and v is not None:
            v = [round(x, digits) for x in v] if isinstance(v, list) else round(v, digits)
        out[key] = v
    return out


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, dict):
        return ";".join(f"{k}={_csv_cell(x)}" for k, x in v.items())
    if isinstance(v, list):
        return ";".join(_csv_cell(x) for x in v)
    return str(v)


def emit_results(records: Sequence[ExperimentRecord], path, fmt: str = "json") -> None:
    """Write records with fixed field order and rounding (costs/balances 3 dp, times/gaps 2 dp)."""
    records = list(records)
    if not records:
        raise ConfigurationError("no records to emit")
    rows = [_rounded(r) for r in records]
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "records": rows}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_FIELDS)
            for row in rows:
                w.writerow([_csv_cell(row[k]) for k in RECORD_FIELDS])
    else:
        raise ConfigurationError(f"unknown results format {fmt!r} (json or csv)")
