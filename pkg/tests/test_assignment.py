from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircluster import ConfigurationError, Infeasible
from faircluster.assignment import (
    balance_incumbent,
    AssignmentProblem,
    box_incumbent,
    is_feasible,
    lower_bound,
    nearest_nonempty,
    solve_assignment,
)
from faircluster.oracle import exact_fair_assignment

from conftest import random_membership


def _four_rows():
    x = np.array([0.0, 1.0, 10.0, 11.0])
    costs = (x[:, None] - np.array([0.5, 10.5])[None]) ** 2
    return AssignmentProblem.from_memberships(costs, [[0, 1, 0, 1]], [1])


def _random_problem(rng, rows, k, n_feat=1, weighted=False):
    costs = rng.random((rows, k)) * 10
    targets, weights = [], []
    for _ in range(n_feat):
        g = int(rng.integers(2, 4))
        if weighted:
            w = rng.integers(0, 4, size=(rows, g))
            w[np.arange(rows), rng.integers(0, g, rows)] += 1
        else:
            w = np.eye(g, dtype=np.int64)[random_membership(rng, rows, g)]
        weights.append(w)
        targets.append(Fraction(int(rng.integers(0, 4)), 4))
    return AssignmentProblem(costs, tuple(targets), tuple(weights))


def _feasible(mem, k):
    sizes = np.bincount(mem)
    return Fraction(int(sizes.min()) // k, -(-int(sizes.max()) // k))


def _oracle(problem):
    try:
        return exact_fair_assignment(problem.costs, list(problem.group_weights), problem.k, problem.targets).best_cost
    except Infeasible:
        return None


class TestExamples:
    def test_vacuous_is_nearest(self):
        costs = np.array([[1.0, 3.0], [2.0, 0.5], [0.1, 4.0]])
        sol = solve_assignment(AssignmentProblem.from_memberships(costs, [[0, 1, 0]], [0]))
        assert sol.row_to_cluster.tolist() == [0, 1, 0]
        assert sol.objective == pytest.approx(1.6) and sol.optimal

    def test_vacuous_repairs_empty_cluster(self):
        costs = np.array([[0.0, 1.0], [0.0, 5.0], [0.0, 2.0]])
        sol = solve_assignment(AssignmentProblem.from_memberships(costs, [[0, 1, 0]], [0]))
        assert sol.row_to_cluster.tolist() == [1, 0, 0]
        assert sol.objective == pytest.approx(1.0)

    @pytest.mark.parametrize("method", ["bnb", "milp"])
    def test_four_alternating_rows(self, method):
        sol = solve_assignment(_four_rows(), method=method)
        assert sol.row_to_cluster.tolist() == [0, 0, 1, 1]
        assert sol.objective == pytest.approx(1.0)
        assert sol.optimal

    def test_pigeonhole_infeasible(self):
        p = AssignmentProblem.from_memberships(np.ones((4, 2)), [[0, 1, 1, 1]], [1])
        with pytest.raises(Infeasible):
            solve_assignment(p)

    @pytest.mark.parametrize("method", ["bnb", "milp"])
    def test_infeasible_without_precheck_shortcut(self, method):
        # every group has >= k members but 3 A vs 2 B can never split into two balance-1 clusters
        p = AssignmentProblem.from_memberships(np.ones((5, 2)), [[0, 0, 0, 1, 1]], [1])
        with pytest.raises(Infeasible):
            solve_assignment(p, method=method)

    def test_too_many_clusters(self):
        with pytest.raises(Infeasible):
            solve_assignment(AssignmentProblem.from_memberships(np.ones((2, 3)), [[0, 1]], [Fraction(1, 2)]))

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            AssignmentProblem(-np.ones((2, 2)), (0,), (np.eye(2, dtype=int),))
        with pytest.raises(ConfigurationError):
            AssignmentProblem(np.ones((2, 2)), (Fraction(3, 2),), (np.eye(2, dtype=int),))


class TestLowerBound:
    def test_no_rows_fixed(self):
        p = _four_rows()
        assert lower_bound(p, [-1] * 4) == pytest.approx(p.costs.min(axis=1).sum())

    def test_all_rows_fixed(self):
        p = _four_rows()
        assert lower_bound(p, [0, 1, 1, 0]) == pytest.approx(0.25 + 90.25 + 0.25 + 110.25)


@pytest.mark.parametrize("method", ["bnb", "milp"])
@pytest.mark.parametrize("weighted", [False, True])
def test_matches_oracle(method, weighted):
    rng = np.random.default_rng(11 + weighted)
    for _ in range(40):
        rows = int(rng.integers(3, 10))
        k = int(rng.integers(2, 4))
        p = _random_problem(rng, rows, k, n_feat=int(rng.integers(1, 3)), weighted=weighted)
        expect = _oracle(p)
        if expect is None:
            with pytest.raises(Infeasible):
                solve_assignment(p, method=method)
            continue
        sol = solve_assignment(p, method=method)
        assert sol.optimal and is_feasible(p, sol.row_to_cluster)
        assert sol.objective == pytest.approx(expect, abs=1e-9)


def test_milp_cap_returns_feasible_incumbent():
    rng = np.random.default_rng(5)
    rows, k = 400, 8
    mem = random_membership(rng, rows, 2)
    pts, centers = rng.random((rows, 2)), rng.random((k, 2))
    costs = ((pts[:, None, :] - centers[None]) ** 2).sum(-1)
    p = AssignmentProblem.from_memberships(costs, [mem], [Fraction(9, 10) * _feasible(mem, k)])
    sol = solve_assignment(p, time_cap=0.5)
    assert is_feasible(p, sol.row_to_cluster)
    assert sol.objective >= lower_bound(p, [-1] * rows) - 1e-9


def test_box_incumbent_feasible():
    rng = np.random.default_rng(2)
    for _ in range(30):
        rows, k = int(rng.integers(20, 200)), int(rng.integers(2, 7))
        mem = random_membership(rng, rows, int(rng.integers(2, 4)))
        t = _feasible(mem, k) * Fraction(int(rng.integers(0, 5)), 4)
        p = AssignmentProblem.from_memberships(rng.random((rows, k)), [mem], [t])
        if p.vacuous or np.bincount(mem).min() < k:
            continue
        labels = box_incumbent(p)
        assert labels is not None and is_feasible(p, labels)


def test_nearest_nonempty_infeasible_k_gt_rows():
    with pytest.raises(Infeasible):
        nearest_nonempty(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), rows=st.integers(3, 9), k=st.integers(1, 3))
def test_solution_feasible_and_above_bound(seed, rows, k):
    rng = np.random.default_rng(seed)
    p = _random_problem(rng, rows, k, weighted=bool(seed % 2))
    try:
        sol = solve_assignment(p)
    except Infeasible:
        assert _oracle(p) is None
        return
    assert is_feasible(p, sol.row_to_cluster)
    assert sol.objective >= lower_bound(p, [-1] * rows) - 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_balance_incumbent_weighted_feasible(seed):
    rng = np.random.default_rng(seed)
    R, k = 60, 4
    w1 = rng.integers(0, 6, (R, 2))
    w1[w1.sum(axis=1) == 0, 0] = 1
    w2 = np.array([rng.multinomial(n, [0.3, 0.3, 0.4]) for n in w1.sum(axis=1)])
    problem = AssignmentProblem(rng.random((R, k)), (Fraction(4, 5), Fraction(1, 2)), (w1, w2))
    labels = balance_incumbent(problem)
    assert labels is not None and is_feasible(problem, labels)


def test_balance_incumbent_gives_up_quietly():
    # 3 vs 1 points cannot reach balance 1 in any split
    problem = AssignmentProblem(np.zeros((2, 2)), (Fraction(1),), (np.array([[3, 0], [0, 1]]),))
    assert balance_incumbent(problem) is None
