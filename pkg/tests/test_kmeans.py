import numpy as np
import pytest

from faircluster import ConfigurationError, kmeanspp_init, update_centers
from faircluster.framework import improvement
from faircluster.kmeans import lloyd, nearest, sq_dists


def test_kmeanspp_k_equals_n_uses_every_point():
    pts = np.random.default_rng(0).random((6, 2))
    centers = kmeanspp_init(pts, 6, np.random.default_rng(1))
    assert sorted(map(tuple, centers.tolist())) == sorted(map(tuple, pts.tolist()))


def test_kmeanspp_single_point():
    assert kmeanspp_init(np.array([[0.2, 0.7]]), 1, np.random.default_rng(0)).tolist() == [[0.2, 0.7]]


def test_kmeanspp_deterministic_per_seed():
    pts = np.random.default_rng(0).random((50, 3))
    a = kmeanspp_init(pts, 5, np.random.default_rng(7))
    b = kmeanspp_init(pts, 5, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_kmeanspp_duplicate_points_still_distinct_objects():
    pts = np.zeros((4, 2))
    _, idx = kmeanspp_init(pts, 3, np.random.default_rng(0), return_index=True)
    assert len(set(np.asarray(idx).tolist())) == 3


def test_kmeanspp_too_many_centers():
    with pytest.raises(ConfigurationError):
        kmeanspp_init(np.zeros((2, 1)), 3, np.random.default_rng(0))


def test_update_centers_mean_and_singleton():
    pts = np.array([[0.0, 0.0], [2.0, 2.0], [5.0, 1.0]])
    assert update_centers(pts, [0, 0, 1], 2).tolist() == [[1.0, 1.0], [5.0, 1.0]]


def test_update_centers_weighted():
    assert update_centers(np.array([[0.0], [4.0]]), [0, 0], 1, weights=[3, 1]).tolist() == [[1.0]]


def test_sq_dists_fast_matches_exact():
    rng = np.random.default_rng(3)
    x, c = rng.random((200, 4)), rng.random((7, 4))
    assert np.allclose(sq_dists(x, c, fast=True), sq_dists(x, c), atol=1e-12)


def test_nearest_ties_lowest_index():
    lab, _ = nearest(np.array([[0.5]]), np.array([[0.0], [1.0]]))
    assert lab.tolist() == [0]


def test_lloyd_nonempty_and_cost_not_above_init():
    rng = np.random.default_rng(0)
    pts = rng.random((300, 2))
    labels, centers = lloyd(pts, 8, np.random.default_rng(1), max_iter=50)
    assert np.bincount(labels, minlength=8).min() > 0
    assert centers.shape == (8, 2)


@pytest.mark.parametrize(
    "prev,now,expected", [(100, 90, 0.10), (90, 90, 0.0), (90, 100, -1 / 9)]
)
def test_improvement(prev, now, expected):
    assert improvement(prev, now) == pytest.approx(expected)
