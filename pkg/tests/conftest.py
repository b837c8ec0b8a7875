from __future__ import annotations

import pathlib

import numpy as np
import pytest

from faircluster import Dataset, SensitiveFeature, gen_synthetic

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# criterion id -> "PASS"/"FAIL", filled by the acceptance tests
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def record(criterion: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[criterion] = ("PASS" if ok else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{status} criterion {key}" + (f": {detail}" if detail else ""))


def make_dataset(points, *memberships, names=None) -> Dataset:
    """Dataset with one sensitive feature per membership vector."""
    feats = []
    for s, m in enumerate(memberships):
        m = np.asarray(m)
        groups = tuple(f"g{g}" for g in range(int(m.max()) + 1))
        feats.append(SensitiveFeature((names or [f"s{i}" for i in range(len(memberships))])[s], groups, m))
    return Dataset(np.asarray(points, dtype=float), tuple(feats))


def random_membership(rng, n: int, groups: int) -> np.ndarray:
    """Random labels in 0..groups-1 with every group present (needs n >= groups)."""
    m = np.concatenate([np.arange(groups), rng.integers(0, groups, n - groups)])
    return rng.permutation(m)


def random_dataset(rng, n: int, d: int = 2, groups=(2,)) -> Dataset:
    pts = rng.random((n, d))
    return make_dataset(pts, *(random_membership(rng, n, g) for g in groups))


@pytest.fixture(scope="session")
def fixture21() -> Dataset:
    return gen_synthetic("b", 21, 2, 3, seed=0)
