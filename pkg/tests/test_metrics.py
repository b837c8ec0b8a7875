from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircluster import (
    ConfigurationError,
    Dataset,
    DatasetError,
    FairnessSpec,
    SensitiveFeature,
    balance_report,
    cluster_balance,
    clustering_balance,
    clustering_cost,
    dataset_balance,
    feasible_balance,
    group_counts,
    resolve_targets,
    scale_minmax,
)
from faircluster.metrics import as_fraction, meets_targets

from conftest import make_dataset


def _groups(sizes):
    return np.repeat(np.arange(len(sizes)), sizes)


def _sized(sizes):
    n = sum(sizes)
    return make_dataset(np.zeros((n, 1)), _groups(sizes))


class TestScaling:
    def test_affine_endpoints(self):
        assert scale_minmax([[2], [4], [6]])[:, 0].tolist() == [0, 0.5, 1]

    def test_constant_column(self):
        assert scale_minmax([[5], [5], [5]])[:, 0].tolist() == [0, 0, 0]

    def test_columns_independent(self):
        assert scale_minmax([[0, 10], [1, 20]]).tolist() == [[0, 0], [1, 1]]

    def test_non_finite_named(self):
        with pytest.raises(DatasetError, match="row 1, column 0"):
            scale_minmax([[0.0], [np.nan]])


class TestDataset:
    def test_group_counts_equal(self):
        ds = make_dataset(np.zeros((21, 2)), _groups([7, 7, 7]))
        assert group_counts(ds, 0) == {"g0": 7, "g1": 7, "g2": 7}

    def test_bank_like_counts(self):
        ds = _sized([27214, 12790])
        assert group_counts(ds, 0) == {"g0": 27214, "g1": 12790}

    def test_single_group_rejected(self):
        with pytest.raises(DatasetError):
            SensitiveFeature("s", ("A",), np.zeros(4, dtype=int))

    def test_empty_declared_group_rejected(self):
        with pytest.raises(DatasetError):
            SensitiveFeature("s", ("A", "B"), np.zeros(4, dtype=int))

    def test_length_mismatch(self):
        f = SensitiveFeature("s", ("A", "B"), [0, 1])
        with pytest.raises(DatasetError):
            Dataset(np.zeros((3, 1)), (f,))

    def test_immutable_points(self):
        ds = _sized([2, 2])
        with pytest.raises(ValueError):
            ds.points[0, 0] = 1.0


class TestBalances:
    def test_cluster_balance_examples(self):
        assert cluster_balance({"A": 2, "B": 1}) == 0.5
        assert cluster_balance({"A": 3, "B": 0}) == 0
        assert cluster_balance([7, 7, 7], exact=True) == Fraction(1)

    def test_clustering_balance_vanilla_and_fair(self):
        ds = _sized([2, 2])
        assert clustering_balance([0, 0, 1, 1], ds, 0, 2) == 0
        assert clustering_balance([0, 1, 0, 1], ds, 0, 2) == 1

    def test_k1_equals_dataset_balance(self):
        ds = _sized([5, 3, 4])
        assert clustering_balance(np.zeros(12, dtype=int), ds, 0, 1, exact=True) == dataset_balance(ds, 0, exact=True)

    def test_dataset_balance_examples(self):
        assert dataset_balance(_sized([7, 7, 7]), 0) == 1
        assert dataset_balance(_sized([27214, 12790]), 0, exact=True) == Fraction(12790, 27214)
        assert dataset_balance(_sized([890298, 54584]), 0) == pytest.approx(0.0613, abs=5e-5)

    def test_feasible_balance_examples(self):
        assert feasible_balance(_sized([7, 7, 7]), 0, 3, exact=True) == Fraction(2, 3)
        assert feasible_balance(_sized([27214, 12790]), 0, 2, exact=True) == Fraction(6395, 13607)
        assert feasible_balance(_sized([3, 9]), 0, 4, exact=True) == 0

    def test_balance_report(self):
        ds = _sized([2, 2])
        rep = balance_report([0, 1, 0, 0], ds, 2)
        assert rep.per_cluster[0] == (0.5, 0.0)
        assert rep.per_feature_clustering_balance == (0.0,)
        assert rep.dataset_balance == (1.0,)

    def test_meets_targets_is_exact(self):
        ds = _sized([3, 1])
        # balance of the single cluster is exactly 1/3
        assert meets_targets(np.zeros(4, dtype=int), ds, 1, [Fraction(1, 3)]) == [True]
        assert meets_targets(np.zeros(4, dtype=int), ds, 1, [Fraction(1, 3) + Fraction(1, 10**12)]) == [False]


class TestTargets:
    def test_lambda_one_zero(self):
        assert resolve_targets(FairnessSpec.from_tolerance(1), _sized([4, 2]), 2).targets == (0,)

    def test_lambda_zero_equal_groups(self):
        assert resolve_targets(FairnessSpec.from_tolerance(0), _sized([7, 7, 7]), 3).targets == (Fraction(2, 3),)

    def test_bank_lambda_001(self):
        t = resolve_targets(FairnessSpec.from_tolerance(0.01), _sized([27214, 12790]), 2)[0]
        assert t == Fraction(99, 100) * Fraction(6395, 13607)
        assert round(float(t), 2) == 0.47

    def test_dataset_basis(self):
        t = resolve_targets(FairnessSpec.from_tolerance(0, basis="dataset"), _sized([3, 9]), 4)[0]
        assert t == Fraction(1, 3)

    def test_explicit_above_feasible_warns(self):
        res = resolve_targets(FairnessSpec.explicit([1]), _sized([3, 5]), 2)
        assert res.targets == (1,) and res.warnings

    def test_explicit_count_mismatch(self):
        with pytest.raises(ConfigurationError):
            resolve_targets(FairnessSpec.explicit([0.5, 0.5]), _sized([3, 5]), 2)

    @pytest.mark.parametrize("bad", [-0.1, 1.5])
    def test_tolerance_range(self, bad):
        with pytest.raises(ConfigurationError):
            FairnessSpec.from_tolerance(bad)

    def test_as_fraction_reads_decimals(self):
        assert as_fraction(0.1) == Fraction(1, 10)
        assert as_fraction("6395/13607") == Fraction(6395, 13607)


class TestCost:
    def test_zero(self):
        assert clustering_cost([[1.0], [2.0]], [0, 1], [[1.0], [2.0]]) == 0

    def test_two_points(self):
        assert clustering_cost([[0.0], [2.0]], [0, 0], [[1.0]]) == 2.0


@settings(max_examples=60, deadline=None)
@given(
    sizes=st.lists(st.integers(1, 40), min_size=2, max_size=4),
    k=st.integers(1, 6),
)
def test_feasible_balance_is_attainable(sizes, k):
    """Round-robin dealing of each group attains the feasible balance."""
    ds = _sized(sizes)
    fb = feasible_balance(ds, 0, k, exact=True)
    assert fb <= dataset_balance(ds, 0, exact=True)
    if min(sizes) >= k:
        labels = np.concatenate([np.arange(s) % k for s in sizes])
        assert clustering_balance(labels, ds, 0, k, exact=True) >= fb
