"""Fairness-constrained assignment of rows (objects or representatives) to fixed centers.

The problem solved here is

    min  sum_ij c_ij x_ij
    s.t. every row in exactly one cluster, no cluster empty,
         sum_i w_igs x_ij >= t_s * sum_i w_ig's x_ij   for all j, s, g != g'
         x binary

with unit one-hot weights when rows are objects and batch group counts when
rows are representatives. Targets are rationals ``t_s = p_s / q_s`` and all
fairness checks are done as ``q_s * count_g >= p_s * count_g'`` in integers.

Two exact engines are available. ``"bnb"`` is a depth-first branch and bound
written for small problems (it also serves as the reference in tests);
``"milp"`` hands the model to HiGHS.
``"auto"`` picks by size. All-zero targets short-circuit to a bounded
nearest-center assignment.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, Infeasible, TimeCapNoIncumbent
from .flow import bounded_assignment
from .metrics import as_fraction

__all__ = [
    "AssignmentProblem",
    "AssignmentSolution",
    "solve_assignment",
    "lower_bound",
    "nearest_nonempty",
    "is_feasible",
    "box_incumbent",
    "balance_incumbent",
]

# problems up to this many binaries go to the branch and bound under "auto"
BNB_MAX_VARS = 60


@dataclass(frozen=True)
class AssignmentProblem:
    """Costs, per-feature group weights and per-feature targets.

    ``group_weights[s]`` is a rows x G_s non-negative integer matrix.
    """

    costs: np.ndarray
    targets: tuple[Fraction, ...]
    group_weights: tuple[np.ndarray, ...]
    require_nonempty: bool = True

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        if costs.ndim != 2:
            raise ConfigurationError("costs must be a rows x k matrix")
        if not np.isfinite(costs).all() or (costs < 0).any():
            raise ConfigurationError("costs must be finite and non-negative")
        targets = tuple(as_fraction(t) for t in self.targets)
        weights = tuple(np.asarray(w, dtype=np.int64) for w in self.group_weights)
        if len(weights) != len(targets):
            raise ConfigurationError(f"{len(weights)} weight matrices for {len(targets)} targets")
        for w in weights:
            if w.ndim != 2 or w.shape[0] != costs.shape[0]:
                raise ConfigurationError("each weight matrix must be rows x groups")
            if (w < 0).any():
                raise ConfigurationError("weights must be non-negative")
        if any(not 0 <= t <= 1 for t in targets):
            raise ConfigurationError("targets must lie in [0, 1]")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "group_weights", weights)

    @classmethod
    def from_memberships(cls, costs, memberships: Sequence, targets, n_groups: Sequence[int] | None = None):
        """Plain (object-level) problem from per-feature group labels."""
        weights = []
        for s, mem in enumerate(memberships):
            mem = np.asarray(mem, dtype=np.int64)
            g = int(mem.max()) + 1 if n_groups is None else int(n_groups[s])
            w = np.zeros((mem.shape[0], g), dtype=np.int64)
            w[np.arange(mem.shape[0]), mem] = 1
            weights.append(w)
        return cls(costs, tuple(targets), tuple(weights))

    @property
    def rows(self) -> int:
        return self.costs.shape[0]

    @property
    def k(self) -> int:
        return self.costs.shape[1]

    @property
    def vacuous(self) -> bool:
        return all(t == 0 for t in self.targets)


@dataclass(frozen=True)
class AssignmentSolution:
    row_to_cluster: np.ndarray
    objective: float
    optimal: bool
    nodes_explored: int = 0
    method: str = ""


def _objective(costs, labels) -> float:
    return math.fsum(costs[np.arange(costs.shape[0]), labels].tolist())


def is_feasible(problem: AssignmentProblem, labels) -> bool:
    """Exact check of all constraints for a complete assignment."""
    labels = np.asarray(labels, dtype=np.int64)
    k = problem.k
    if labels.shape != (problem.rows,) or labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        return False
    if problem.require_nonempty and (np.bincount(labels, minlength=k) == 0).any():
        return False
    onehot = np.zeros((problem.rows, k), dtype=np.int64)
    onehot[np.arange(problem.rows), labels] = 1
    for t, w in zip(problem.targets, problem.group_weights):
        if t == 0:
            continue
        counts = onehot.T @ w  # k x G
        p, q = t.numerator, t.denominator
        for row in counts.tolist():
            if q * min(row) < p * max(row):
                return False
    return True


def lower_bound(problem: AssignmentProblem, partial) -> float:
    """Cost of the fixed rows plus the cheapest cluster of every free row (-1)."""
    partial = np.asarray(partial, dtype=np.int64)
    fixed = partial >= 0
    c = problem.costs
    return math.fsum(c[np.flatnonzero(fixed), partial[fixed]].tolist()) + math.fsum(
        c[~fixed].min(axis=1).tolist() if (~fixed).any() else []
    )


def nearest_nonempty(costs) -> np.ndarray:
    """Cheapest assignment in which every cluster receives at least one row."""
    costs = np.asarray(costs, dtype=float)
    m, k = costs.shape
    if k > m:
        raise Infeasible(f"{k} clusters cannot all be non-empty with {m} rows")
    assign, _ = bounded_assignment(costs, np.ones(k, dtype=np.int64), np.full(k, m, dtype=np.int64))
    return np.asarray(assign, dtype=np.int64)


def _precheck(problem: AssignmentProblem):
    k = problem.k
    if problem.require_nonempty and k > problem.rows:
        raise Infeasible(f"{k} clusters cannot all be non-empty with {problem.rows} rows")
    for s, (t, w) in enumerate(zip(problem.targets, problem.group_weights)):
        if t > 0:
            totals = w.sum(axis=0)
            # with a positive target every cluster holds every group
            if (totals < k).any():
                raise Infeasible(
                    f"feature {s}: a group has total weight {int(totals.min())} < k={k}; "
                    "no cluster arrangement can contain it everywhere",
                    {"feature": s, "group_totals": totals.tolist(), "target": str(t)},
                )


def solve_assignment(
    problem: AssignmentProblem,
    time_cap: float | None = None,
    method: str = "auto",
    mip_gap: float = 0.0,
) -> AssignmentSolution:
    """Exact solution of the fair assignment problem.

    With ``time_cap`` the best incumbent found so far is returned with
    ``optimal=False`` once the cap expires. ``mip_gap`` (HiGHS only) accepts
    a relative optimality gap; any positive value also yields
    ``optimal=False``.
    """
    if problem.vacuous:
        labels = nearest_nonempty(problem.costs) if problem.require_nonempty else problem.costs.argmin(axis=1)
        return AssignmentSolution(labels, _objective(problem.costs, labels), True, 0, "nearest")
    _precheck(problem)
    if method == "auto":
        method = "bnb" if problem.rows * problem.k <= BNB_MAX_VARS else "milp"
    if method == "bnb":
        return _BranchAndBound(problem, time_cap).solve()
    if method == "milp":
        return _solve_milp(problem, time_cap, mip_gap)
    raise ConfigurationError(f"unknown assignment method {method!r}")


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------


class _Timeout(Exception):
    pass


class _BranchAndBound:
    """Depth-first search over rows in decreasing-regret order.

    A node is pruned when its cost bound cannot beat the incumbent or when a
    counting relaxation shows the remaining group weight cannot lift every
    cluster to its required minimum.
    """

    def __init__(self, problem: AssignmentProblem, time_cap):
        self.p = problem
        self.time_cap = time_cap
        c = problem.costs
        R, k = c.shape
        self.R, self.k = R, k
        self.c = c.tolist()
        srt = np.sort(c, axis=1)
        regret = srt[:, 1] - srt[:, 0] if k > 1 else np.zeros(R)
        self.order = sorted(range(R), key=lambda i: (-regret[i], i))
        self.choices = [np.argsort(c[i], kind="stable").tolist() for i in self.order]
        minc = c.min(axis=1)
        suffix = [0.0] * (R + 1)
        for pos in range(R - 1, -1, -1):
            suffix[pos] = suffix[pos + 1] + float(minc[self.order[pos]])
        self.suffix = suffix
        self.feats = [
            (t.numerator, t.denominator, w.shape[1], w.tolist())
            for t, w in zip(problem.targets, problem.group_weights)
            if t > 0
        ]
        self.nodes = 0

    def _deficits(self, cnt, p, q, G):
        # per group, the weight still missing summed over clusters
        need = [0] * G
        for row in cnt:
            mx = max(row)
            floor_need = max(1, -((-p * mx) // q))
            for g in range(G):
                d = floor_need - row[g]
                if d > 0:
                    need[g] += d
        return need

    def _ok(self, state, free_rows):
        used, cnts, rems = state
        if self.p.require_nonempty and sum(1 for u in used if u == 0) > free_rows:
            return False
        for (p, q, G, _), cnt, rem in zip(self.feats, cnts, rems):
            need = self._deficits(cnt, p, q, G)
            for g in range(G):
                if need[g] > rem[g]:
                    return False
        return True

    def _greedy(self):
        """Nearest assignment repaired by single-row moves that reduce the violation."""
        R, k = self.R, self.k
        c = self.c
        labels = [min(range(k), key=lambda j: (c[i][j], j)) for i in range(R)]

        def violation(lab):
            used = [0] * k
            for j in lab:
                used[j] += 1
            v = sum(1 for u in used if u == 0) * 10**6 if self.p.require_nonempty else 0
            for p, q, G, w in self.feats:
                cnt = [[0] * G for _ in range(k)]
                for i, j in enumerate(lab):
                    row = cnt[j]
                    for g, x in enumerate(w[i]):
                        row[g] += x
                v += sum(self._deficits(cnt, p, q, G))
            return v

        cur = violation(labels)
        for _ in range(R * k):
            if cur == 0:
                return labels
            best = None
            for i in range(R):
                old = labels[i]
                for j in range(k):
                    if j == old:
                        continue
                    labels[i] = j
                    v = violation(labels)
                    key = (v, c[i][j] - c[i][old], i, j)
                    if v < cur and (best is None or key < best):
                        best = key
                labels[i] = old
            if best is None:
                return None
            cur = best[0]
            labels[best[2]] = best[3]
        return labels if cur == 0 else None

    def solve(self) -> AssignmentSolution:
        p = self.p
        self.start = time.perf_counter()
        self.best_cost = math.inf
        self.best = None
        greedy = self._greedy()
        if greedy is not None and is_feasible(p, greedy):
            self.best = list(greedy)
            self.best_cost = math.fsum(self.c[i][j] for i, j in enumerate(greedy))
        used = [0] * self.k
        cnts = [[[0] * G for _ in range(self.k)] for _, _, G, _ in self.feats]
        rems = [[sum(w[i][g] for i in range(self.R)) for g in range(G)] for _, _, G, w in self.feats]
        self.labels = [-1] * self.R
        optimal = True
        if not self._ok((used, cnts, rems), self.R):
            raise Infeasible("fairness targets cannot be met", {"targets": [str(t) for t in p.targets]})
        try:
            self._dfs(0, 0.0, used, cnts, rems)
        except _Timeout:
            optimal = False
        if self.best is None:
            if not optimal:
                raise TimeCapNoIncumbent(f"no feasible assignment within {self.time_cap} s")
            raise Infeasible("fairness targets cannot be met", {"targets": [str(t) for t in p.targets]})
        labels = np.array(self.best, dtype=np.int64)
        return AssignmentSolution(labels, _objective(p.costs, labels), optimal, self.nodes, "bnb")

    def _dfs(self, pos, cost, used, cnts, rems):
        self.nodes += 1
        if self.time_cap is not None and self.nodes % 1024 == 0:
            if time.perf_counter() - self.start > self.time_cap:
                raise _Timeout
        if pos == self.R:
            if cost < self.best_cost:
                self.best_cost = cost
                self.best = list(self.labels)
            return
        i = self.order[pos]
        ci = self.c[i]
        rest = self.suffix[pos + 1]
        free_after = self.R - pos - 1
        for j in self.choices[pos]:
            new_cost = cost + ci[j]
            if new_cost + rest >= self.best_cost:
                # choices are sorted by cost, later ones are no better
                break
            used[j] += 1
            for (_, _, G, w), cnt, rem in zip(self.feats, cnts, rems):
                wi = w[i]
                row = cnt[j]
                for g in range(G):
                    row[g] += wi[g]
                    rem[g] -= wi[g]
            self.labels[i] = j
            if self._ok((used, cnts, rems), free_after):
                self._dfs(pos + 1, new_cost, used, cnts, rems)
            self.labels[i] = -1
            used[j] -= 1
            for (_, _, G, w), cnt, rem in zip(self.feats, cnts, rems):
                wi = w[i]
                row = cnt[j]
                for g in range(G):
                    row[g] -= wi[g]
                    rem[g] += wi[g]


# ---------------------------------------------------------------------------
# HiGHS
# ---------------------------------------------------------------------------


def _csc(n_cols, rows, cols, vals):
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.lexsort((rows, cols))
    starts = np.concatenate(([0], np.cumsum(np.bincount(cols, minlength=n_cols))))
    return starts, rows[order], vals[order]


def _highs(cost, col_upper, integer, rows, cols, vals, row_lo, row_hi, time_cap, mip_gap, start=None, first_only=False):
    import highspy

    n_cols = len(cost)
    lp = highspy.HighsLp()
    lp.num_col_ = n_cols
    lp.num_row_ = len(row_lo)
    lp.col_cost_ = np.asarray(cost, dtype=float)
    lp.col_lower_ = np.zeros(n_cols)
    lp.col_upper_ = np.asarray(col_upper, dtype=float)
    lp.row_lower_ = np.asarray(row_lo, dtype=float)
    lp.row_upper_ = np.asarray(row_hi, dtype=float)
    starts, index, value = _csc(n_cols, rows, cols, vals)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = starts.astype(np.int32)
    lp.a_matrix_.index_ = index.astype(np.int32)
    lp.a_matrix_.value_ = value.astype(float)
    kinds = (highspy.HighsVarType.kContinuous, highspy.HighsVarType.kInteger)
    lp.integrality_ = [kinds[int(b)] for b in integer]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("mip_rel_gap", float(mip_gap))
    if time_cap is not None:
        h.setOptionValue("time_limit", max(float(time_cap), 1e-3))
    if first_only:
        h.setOptionValue("mip_max_improving_sols", 1)
    h.passModel(lp)
    if start is not None:
        sol = highspy.HighsSolution()
        sol.col_value = np.asarray(start, dtype=float)
        h.setSolution(sol)
    h.run()
    status = h.getModelStatus()
    info = h.getInfo()
    has_point = info.primal_solution_status == 2  # feasible point available
    x = np.asarray(h.getSolution().col_value) if has_point else None
    return status, x, int(info.mip_node_count), highspy.HighsModelStatus


def _unit_cells(problem: AssignmentProblem):
    """Cell index per row (distinct combination of groups) when all weights are one-hot."""
    for w in problem.group_weights:
        if not ((w.sum(axis=1) == 1).all() and w.max(initial=0) <= 1):
            return None
    if not problem.group_weights:
        return None
    groups = np.stack([w.argmax(axis=1) for w in problem.group_weights], axis=1)
    cell_groups, cell = np.unique(groups, axis=0, return_inverse=True)
    return cell.reshape(-1), cell_groups


def box_incumbent(problem: AssignmentProblem):
    """Feasible assignment for one feature of unit weights, or ``None``.

    Any per-(cluster, group) count box ``[L, U]`` with ``L >= t * U`` is fair,
    and inside one box the groups decouple into bounded assignments. A few
    boxes between the tightest and the widest admissible one are tried and
    the cheapest result kept.
    """
    if len(problem.targets) != 1 or _unit_cells(problem) is None:
        return None
    t = problem.targets[0]
    w = problem.group_weights[0]
    mem = w.argmax(axis=1)
    sizes = w.sum(axis=0)
    k = problem.k
    if t == 0 or (sizes == 0).any():
        return None
    lo_max = int(sizes.min()) // k
    hi_need = -(-int(sizes.max()) // k)
    lo_min = math.ceil(t * hi_need)
    if lo_max < 1 or lo_min > lo_max:
        return None
    candidates = sorted(set(np.linspace(lo_min, lo_max, num=min(8, lo_max - lo_min + 1)).round().astype(int).tolist()))
    best = None
    for L in candidates:
        U = math.floor(Fraction(L) / t)
        labels = np.empty(problem.rows, dtype=np.int64)
        for g in range(w.shape[1]):
            rows = np.flatnonzero(mem == g)
            a, _ = bounded_assignment(problem.costs[rows], np.full(k, L), np.full(k, min(U, len(rows))))
            labels[rows] = a
        cost = _objective(problem.costs, labels)
        if best is None or cost < best[0]:
            best = (cost, labels)
    if best is None or not is_feasible(problem, best[1]):
        return None
    return best[1]


def _violation(W, p, q):
    """Sum over ordered group pairs of ``max(0, p * W_h - q * W_g)``; W is (..., G)."""
    d = p * W[..., None, :] - q * W[..., :, None]
    return np.maximum(d, 0).sum(axis=(-1, -2))


SWAP_MAX_ROWS = 500
MAX_KICKS = 30


def balance_incumbent(problem: AssignmentProblem, seed: int = 0):
    """Feasible assignment for arbitrary (weighted, multi-feature) rows, or ``None``.

    Rows are dealt largest first to the cluster whose group loads stay most
    even, then single moves and pairwise swaps that lower the integer
    violation are applied; when neither helps, a few random moves out of
    violated clusters restart the descent. Costs only break ties.
    """
    c = problem.costs
    R, k = c.shape
    feats = [(t.numerator, t.denominator, w) for t, w in zip(problem.targets, problem.group_weights) if t > 0]
    if not feats or (problem.require_nonempty and k > R):
        return None
    rng = np.random.default_rng(seed)
    size = sum(w.sum(axis=1) for _, _, w in feats)
    share = [np.maximum(w.sum(axis=0) / k, 1e-9) for _, _, w in feats]
    W = [np.zeros((k, w.shape[1]), dtype=np.int64) for _, _, w in feats]
    lab = np.empty(R, dtype=np.int64)
    cnt = np.zeros(k, dtype=np.int64)
    placed = 0
    for i in np.argsort(-size, kind="stable"):
        empty = np.flatnonzero(cnt == 0)
        cand = empty if problem.require_nonempty and len(empty) >= R - placed else np.arange(k)
        score = np.zeros(len(cand))
        for Wf, sh, (_, _, w) in zip(W, share, feats):
            score = np.maximum(score, ((Wf[cand] + w[i]) / sh).max(axis=1))
        j = cand[np.lexsort((c[i, cand], score))[0]]
        lab[i] = j
        cnt[j] += 1
        placed += 1
        for Wf, (_, _, w) in zip(W, feats):
            Wf[j] += w[i]

    def move(i, j):
        a = lab[i]
        for Wf, (_, _, w) in zip(W, feats):
            Wf[a] -= w[i]
            Wf[j] += w[i]
        cnt[a] -= 1
        cnt[j] += 1
        lab[i] = j

    kicks = 0
    rows = np.arange(R)
    for _ in range(20 * R):
        v = sum(_violation(Wf, p, q) for Wf, (p, q, _) in zip(W, feats))
        if v.sum() == 0:
            return lab if is_feasible(problem, lab) else None
        # single moves
        delta = np.zeros((R, k))
        for Wf, (p, q, w) in zip(W, feats):
            base = _violation(Wf, p, q)
            delta += (_violation(Wf[lab] - w, p, q) - base[lab])[:, None]
            delta += _violation(Wf[None] + w[:, None], p, q) - base[None]
        delta[rows, lab] = np.inf
        if problem.require_nonempty:
            delta[cnt[lab] == 1] = np.inf
        best = delta.min()
        if best < 0:
            cand = np.argwhere(delta == best)
            extra = c[cand[:, 0], cand[:, 1]] - c[cand[:, 0], lab[cand[:, 0]]]
            move(*cand[np.argmin(extra)])
            continue
        # pairwise swaps
        if R <= SWAP_MAX_ROWS:
            delta = np.zeros((R, R))
            for Wf, (p, q, w) in zip(W, feats):
                base = _violation(Wf, p, q)
                D = w[None] - w[:, None]  # D[i, h] = w[h] - w[i]
                delta += _violation(Wf[lab][:, None] + D, p, q) - base[lab][:, None]
                delta += _violation(Wf[lab][None] - D, p, q) - base[lab][None]
            delta[lab[:, None] == lab[None]] = np.inf
            best = delta.min()
            if best < 0:
                cand = np.argwhere(delta == best)
                i_, h_ = cand[:, 0], cand[:, 1]
                extra = c[i_, lab[h_]] + c[h_, lab[i_]] - c[i_, lab[i_]] - c[h_, lab[h_]]
                i, h = cand[np.argmin(extra)]
                a, b = lab[i], lab[h]
                move(i, b)
                move(h, a)
                continue
        kicks += 1
        if kicks > MAX_KICKS:
            return None
        for _ in range(3):
            src = rng.choice(np.flatnonzero(v > 0))
            members = np.flatnonzero(lab == src)
            j = int(rng.integers(k))
            if len(members) > 1 and j != src:
                move(rng.choice(members), j)
    return None


def _fairness_rows(problem, k, col_of, row0):
    """Integer fairness rows ``q * w_g - p * w_h >= 0`` per cluster; col_of(j) -> (cols, weights matrix)."""
    rows, cols, vals = [], [], []
    r = row0
    for s, (t, _) in enumerate(zip(problem.targets, problem.group_weights)):
        if t == 0:
            continue
        p, q = t.numerator, t.denominator
        for j in range(k):
            idx, w = col_of(j, s)
            G = w.shape[1]
            for g in range(G):
                for h in range(G):
                    if g == h:
                        continue
                    coef = q * w[:, g] - p * w[:, h]
                    nz = np.flatnonzero(coef)
                    rows.append(np.full(nz.size, r))
                    cols.append(idx[nz])
                    vals.append(coef[nz].astype(float))
                    r += 1
    return rows, cols, vals, r


@dataclass
class _Model:
    """A HiGHS model in column-wise triplet form, plus how to read labels back."""

    cost: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    rows: list
    cols: list
    vals: list
    row_lo: list
    row_hi: list

    def solve(self, time_cap, mip_gap, start=None, first_only=False):
        return _highs(
            self.cost, self.upper, self.integer, self.rows, self.cols, self.vals,
            self.row_lo, self.row_hi, time_cap, mip_gap, start, first_only,
        )


def _add_fairness(model_parts, problem, k, col_of, r):
    rows, cols, vals, row_lo, row_hi = model_parts
    fr, fc, fv, r2 = _fairness_rows(problem, k, col_of, r)
    rows += fr
    cols += fc
    vals += fv
    row_lo += [0.0] * (r2 - r)
    row_hi += [math.inf] * (r2 - r)


def _nonempty_rows(model_parts, k, cols_of_cluster, r):
    rows, cols, vals, row_lo, row_hi = model_parts
    for j in range(k):
        idx = cols_of_cluster(j)
        rows.append(np.full(idx.size, r + j))
        cols.append(idx)
        vals.append(np.ones(idx.size))
    row_lo += [1.0] * k
    row_hi += [math.inf] * k
    return r + k


def _count_model(problem: AssignmentProblem, cell, cell_groups) -> _Model:
    """Integer (cluster, cell) counts only; a cell's rows are costed at their mean.

    Any feasible point converts to a feasible assignment by one bounded
    assignment per cell, which makes this the cheap source of incumbents.
    """
    k = problem.k
    C = cell_groups.shape[0]
    sizes = np.bincount(cell, minlength=C)
    mean_cost = np.stack([problem.costs[cell == i].mean(axis=0) for i in range(C)], axis=1)
    ncol = np.arange(k * C).reshape(k, C)
    # each cell's counts sum to its size
    parts = (
        [np.full(k, i) for i in range(C)],
        [ncol[:, i] for i in range(C)],
        [np.ones(k)] * C,
        sizes.astype(float).tolist(),
        sizes.astype(float).tolist(),
    )
    r = C
    if problem.require_nonempty:
        r = _nonempty_rows(parts, k, lambda j: ncol[j], r)
    onehots = [np.eye(w.shape[1], dtype=np.int64)[cell_groups[:, s]] for s, w in enumerate(problem.group_weights)]
    _add_fairness(parts, problem, k, lambda j, s: (ncol[j], onehots[s]), r)
    rows, cols, vals, row_lo, row_hi = parts
    return _Model(
        mean_cost.ravel() * np.tile(sizes, k), np.tile(sizes, k).astype(float), np.ones(k * C, dtype=bool),
        rows, cols, vals, row_lo, row_hi,
    )


def _cell_model(problem: AssignmentProblem, cell, cell_groups) -> _Model:
    """Continuous x plus integer (cluster, cell) counts.

    For fixed counts each cell is a transportation problem, so the counts
    carry all the integrality.
    """
    c = problem.costs
    R, k = c.shape
    nx = R * k
    var = np.arange(nx).reshape(R, k)
    C = cell_groups.shape[0]
    members = [np.flatnonzero(cell == i) for i in range(C)]
    ncol = nx + np.arange(k * C).reshape(k, C)
    parts = ([np.repeat(np.arange(R), k)], [var.ravel()], [np.ones(nx)], [1.0] * R, [1.0] * R)
    rows, cols, vals, row_lo, row_hi = parts
    r = R
    for i in range(C):
        for j in range(k):
            rows.append(np.full(members[i].size + 1, r))
            cols.append(np.append(var[members[i], j], ncol[j, i]))
            vals.append(np.append(np.ones(members[i].size), -1.0))
            row_lo.append(0.0)
            row_hi.append(0.0)
            r += 1
    if problem.require_nonempty:
        r = _nonempty_rows(parts, k, lambda j: ncol[j], r)
    onehots = [np.eye(w.shape[1], dtype=np.int64)[cell_groups[:, s]] for s, w in enumerate(problem.group_weights)]
    _add_fairness(parts, problem, k, lambda j, s: (ncol[j], onehots[s]), r)
    sizes = np.array([m.size for m in members], dtype=float)
    return _Model(
        np.concatenate([c.ravel(), np.zeros(k * C)]),
        np.concatenate([np.ones(nx), np.tile(sizes, k)]),
        np.concatenate([np.zeros(nx, dtype=bool), np.ones(k * C, dtype=bool)]),
        rows, cols, vals, row_lo, row_hi,
    )


def _binary_model(problem: AssignmentProblem) -> _Model:
    c = problem.costs
    R, k = c.shape
    nx = R * k
    var = np.arange(nx).reshape(R, k)
    parts = ([np.repeat(np.arange(R), k)], [var.ravel()], [np.ones(nx)], [1.0] * R, [1.0] * R)
    r = R
    if problem.require_nonempty:
        r = _nonempty_rows(parts, k, lambda j: var[:, j], r)
    _add_fairness(parts, problem, k, lambda j, s: (var[:, j], problem.group_weights[s]), r)
    rows, cols, vals, row_lo, row_hi = parts
    return _Model(c.ravel(), np.ones(nx), np.ones(nx, dtype=bool), rows, cols, vals, row_lo, row_hi)


def _labels_from_counts(costs, cell, counts):
    """Cheapest assignment with exactly ``counts[j, i]`` rows of cell i in cluster j."""
    labels = np.empty(costs.shape[0], dtype=np.int64)
    for i in range(counts.shape[1]):
        rows = np.flatnonzero(cell == i)
        a, _ = bounded_assignment(costs[rows], counts[:, i], counts[:, i])
        labels[rows] = a
    return labels


def _start_vector(problem, labels, n_cols, cells):
    R, k = problem.costs.shape
    start = np.zeros(n_cols)
    start[np.arange(R) * k + labels] = 1.0
    if cells is not None:
        counts = np.zeros((k, cells[1].shape[0]))
        np.add.at(counts, (labels, cells[0]), 1.0)
        start[R * k:] = counts.ravel()
    return start


def _solve_milp(problem: AssignmentProblem, time_cap, mip_gap: float = 0.0) -> AssignmentSolution:
    """HiGHS on the cell-count model for unit weights, else on the binary model.

    Without a box incumbent a feasibility pass runs first: the count model
    for unit weights, otherwise :func:`balance_incumbent` and, if that fails,
    the binary model stopped at its first solution. The point found seeds
    the main solve and backs it up if the time cap expires.
    """
    c = problem.costs
    R, k = c.shape
    began = time.perf_counter()
    cells = _unit_cells(problem)
    incumbent = box_incumbent(problem)
    model = _cell_model(problem, *cells) if cells is not None else _binary_model(problem)

    def remaining():
        return None if time_cap is None else time_cap - (time.perf_counter() - began)

    if incumbent is None:
        if cells is not None:
            status, x, _, S = _count_model(problem, *cells).solve(remaining(), 0.0, first_only=True)
            if x is not None:
                counts = np.rint(x).astype(np.int64).reshape(k, -1)
                incumbent = _labels_from_counts(c, cells[0], counts)
            if status == S.kInfeasible:
                raise Infeasible("fairness targets cannot be met", {"targets": [str(t) for t in problem.targets]})
        else:
            incumbent = balance_incumbent(problem)
            if incumbent is None:
                status, x, _, S = model.solve(remaining(), 0.0, first_only=True)
                if status == S.kInfeasible:
                    raise Infeasible("fairness targets cannot be met", {"targets": [str(t) for t in problem.targets]})
                if x is not None:
                    incumbent = np.argmax(x.reshape(R, k), axis=1).astype(np.int64)
        if incumbent is not None and not is_feasible(problem, incumbent):
            incumbent = None

    start = None if incumbent is None else _start_vector(problem, incumbent, len(model.cost), cells)
    cap = remaining()
    if cap is not None and cap <= 0:
        status, x, nodes, S = None, None, 0, None
    else:
        status, x, nodes, S = model.solve(cap, mip_gap, start)
        if status == S.kInfeasible:
            raise Infeasible("fairness targets cannot be met", {"targets": [str(t) for t in problem.targets]})
    if x is None:
        if incumbent is not None:
            return AssignmentSolution(incumbent, _objective(c, incumbent), False, nodes, "incumbent")
        if S is None or status == S.kTimeLimit:
            raise TimeCapNoIncumbent(f"no feasible assignment within {time_cap} s")
        raise RuntimeError(f"HiGHS stopped with status {status}")

    if cells is not None:
        counts = np.rint(x[R * k:]).astype(np.int64).reshape(k, -1)
        labels = _labels_from_counts(c, cells[0], counts)
    else:
        labels = np.argmax(x[: R * k].reshape(R, k), axis=1).astype(np.int64)
    if not is_feasible(problem, labels):
        raise RuntimeError("HiGHS returned an assignment that fails the exact constraint check")
    optimal = status == S.kOptimal and mip_gap == 0
    return AssignmentSolution(labels, _objective(c, labels), optimal, nodes, "milp")
