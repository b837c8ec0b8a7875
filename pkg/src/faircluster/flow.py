"""Staged minimum-cost-flow assignment (MS-FlowFC).

Objects of one sensitive feature are assigned group by group, largest group
first. The first stage is a plain nearest-center assignment; every later
stage solves a min-cost flow problem on the network

    object v (supply 1) --[cost c_vw, cap 1]--> center w (demand h_w)
    center w --[cost 0, cap u_w]--> sink (demand h_sink)

whose demands and capacities encode how many objects of the current group a
center may receive without breaking the target balance against the groups
already placed there.

Every such network is a bipartite transportation problem with per-center
receive ranges ``[-h_w, -h_w + u_w]``. :func:`solve_min_cost_flow` exploits
that: it runs successive shortest paths on the residual graph after
contracting object nodes into center-to-center exchange arcs, so the path
search works on k + 1 nodes regardless of the number of objects.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import FirstStageDegenerate, Infeasible
from .kmeans import nearest, sq_dists
from .metrics import as_fraction

DEFAULT_COST_SCALE = 10**6
DEFAULT_REINIT_CAP = 50

__all__ = [
    "StagePlan",
    "StageBounds",
    "FlowNetwork",
    "FlowSolution",
    "StagedAssignment",
    "stage_plan",
    "first_stage_assign",
    "stage_bounds",
    "build_network",
    "solve_min_cost_flow",
    "bounded_assignment",
    "adjust_parameters",
    "needs_adjustment",
    "staged_assign",
]


# ---------------------------------------------------------------------------
# bounded assignment solver
# ---------------------------------------------------------------------------


class _ExchangeArcs:
    """Cheapest way to move one object from center a to center b.

    For each ordered pair the members of ``a`` (at construction) are kept
    sorted by ``c[i, b] - c[i, a]`` with a read pointer; objects that arrive
    later go into a small heap. Stale entries (object no longer in ``a``) are
    skipped lazily.
    """

    def __init__(self, costs, assign, k):
        self.costs = costs
        self.assign = assign
        self.k = k
        self.sorted = {}
        self.heaps = {(a, b): [] for a in range(k) for b in range(k) if a != b}
        for a in range(k):
            mem = np.flatnonzero(assign == a)
            for b in range(k):
                if a == b:
                    continue
                delta = costs[mem, b] - costs[mem, a]
                order = np.argsort(delta, kind="stable")
                self.sorted[a, b] = [delta[order], mem[order], 0]

    def top(self, a, b):
        assign = self.assign
        arr = self.sorted[a, b]
        deltas, idx, ptr = arr
        while ptr < len(idx) and assign[idx[ptr]] != a:
            ptr += 1
        arr[2] = ptr
        best = (deltas[ptr].item(), int(idx[ptr])) if ptr < len(idx) else None
        heap = self.heaps[a, b]
        while heap and assign[heap[0][1]] != a:
            heapq.heappop(heap)
        if heap and (best is None or heap[0] < best):
            best = heap[0]
        return best

    def move(self, i, a, b):
        self.assign[i] = b
        row = self.costs[i].tolist()
        for b2 in range(self.k):
            if b2 != b:
                heapq.heappush(self.heaps[b, b2], (row[b2] - row[b], i))


def bounded_assignment(costs, lo, hi):
    """Minimum-cost assignment of every row to one column with column counts in ``[lo, hi]``.

    Exact for integer costs. Starts from the nearest-column assignment (an
    optimal pseudo-flow once bounds are dropped) and repairs the bound
    violations with unit augmentations along shortest residual paths.

    Returns ``(assign, counts)``; raises :class:`Infeasible` when
    ``sum(lo) > rows`` or ``sum(hi) < rows``.
    """
    costs = np.asarray(costs)
    m, k = costs.shape
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    if (hi < lo).any() or lo.sum() > m or hi.sum() < m or (hi < 0).any():
        raise Infeasible(
            "no assignment meets the per-center bounds",
            {"rows": m, "lower": lo.tolist(), "upper": hi.tolist()},
        )
    assign = np.argmin(costs, axis=1) if m else np.zeros(0, dtype=np.int64)
    count = np.bincount(assign, minlength=k).astype(np.int64)
    if ((count >= lo) & (count <= hi)).all():
        return assign, count

    flow = np.clip(count, lo, hi)
    # excess per center; the sink sits at index k
    excess = (count - flow).tolist()
    excess.append(int(flow.sum()) - m)
    flow = flow.tolist()
    lo_l, hi_l = lo.tolist(), hi.tolist()
    arcs = _ExchangeArcs(costs, assign, k)
    sink = k
    inf = math.inf

    while True:
        src = next((v for v in range(k + 1) if excess[v] > 0), None)
        if src is None:
            break
        edges = []
        for a in range(k):
            for b in range(k):
                if a != b:
                    t = arcs.top(a, b)
                    if t is not None:
                        edges.append((a, b, t[0], t[1]))
            if flow[a] < hi_l[a]:
                edges.append((a, sink, 0, -1))
            if flow[a] > lo_l[a]:
                edges.append((sink, a, 0, -1))
        dist = [inf] * (k + 1)
        pred = [None] * (k + 1)
        dist[src] = 0
        for _ in range(k + 1):
            changed = False
            for a, b, w, obj in edges:
                da = dist[a]
                if da != inf and da + w < dist[b]:
                    dist[b] = da + w
                    pred[b] = (a, obj)
                    changed = True
            if not changed:
                break
        dst = None
        for v in range(k + 1):
            if excess[v] < 0 and dist[v] != inf and (dst is None or dist[v] < dist[dst]):
                dst = v
        if dst is None:
            raise Infeasible("no augmenting path; bounds cannot be met", {"lower": lo_l, "upper": hi_l})
        path = []
        v = dst
        while v != src:
            a, obj = pred[v]
            path.append((a, v, obj))
            v = a
        for a, b, obj in path:
            if a == sink:
                flow[b] -= 1
            elif b == sink:
                flow[a] += 1
            else:
                arcs.move(obj, a, b)
                count[a] -= 1
                count[b] += 1
        excess[src] -= 1
        excess[dst] += 1
    return assign, count


# ---------------------------------------------------------------------------
# network and stage bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StagePlan:
    """Groups in assignment order (descending size, ties by group index)."""

    order: tuple[int, ...]
    members: tuple[np.ndarray, ...]


def stage_plan(membership, n_groups: int) -> StagePlan:
    membership = np.asarray(membership, dtype=np.int64)
    sizes = np.bincount(membership, minlength=n_groups)
    order = tuple(int(g) for g in sorted(range(n_groups), key=lambda g: (-sizes[g], g)))
    return StagePlan(order, tuple(np.flatnonzero(membership == g) for g in order))


@dataclass(frozen=True)
class StageBounds:
    """Per-center bounds on how many objects of the current group it may receive."""

    lb: tuple[Fraction, ...]
    ub: tuple  # Fraction or math.inf
    prior_counts: np.ndarray  # k x (stages so far)


def stage_bounds(prior_counts, target) -> StageBounds:
    """Lower bound ``target * max prior count`` and upper bound ``min prior count / target``."""
    prior = np.atleast_2d(np.asarray(prior_counts, dtype=np.int64))
    t = as_fraction(target)
    lb, ub = [], []
    for row in prior:
        hi, lo = int(row.max()), int(row.min())
        lb.append(t * hi)
        ub.append(Fraction(lo) / t if t > 0 else math.inf)
    return StageBounds(tuple(lb), tuple(ub), prior)


@dataclass(frozen=True)
class FlowNetwork:
    """One stage's network, stored by its integer parameters.

    ``demands`` (h_w, non-positive), ``capacities`` (u of the center-to-sink
    arcs) and ``sink_demand`` are derived from the rounded bounds and the
    adjustment counters exactly as the stage rules prescribe.
    """

    costs: np.ndarray  # m x k integer arc costs
    lb_ceil: np.ndarray
    ub_floor: np.ndarray
    eps_demand: np.ndarray = field(default=None)
    eps_capacity: np.ndarray = field(default=None)

    def __post_init__(self):
        k = len(self.lb_ceil)
        for name in ("eps_demand", "eps_capacity"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(k, dtype=np.int64))

    @property
    def m(self) -> int:
        return self.costs.shape[0]

    @property
    def k(self) -> int:
        return len(self.lb_ceil)

    @property
    def supplies(self) -> np.ndarray:
        return np.ones(self.m, dtype=np.int64)

    @property
    def demands(self) -> np.ndarray:
        return -self.lb_ceil + self.eps_demand

    @property
    def capacities(self) -> np.ndarray:
        return self.ub_floor + self.demands + self.eps_capacity

    @property
    def sink_demand(self) -> int:
        return -(self.m + int(self.demands.sum()))

    @property
    def min_receive(self) -> np.ndarray:
        return -self.demands

    @property
    def max_receive(self) -> np.ndarray:
        return self.min_receive + self.capacities

    @property
    def epsilon_total(self) -> int:
        return int(self.eps_demand.sum() + self.eps_capacity.sum())


def build_network(stage_points, centers, bounds: StageBounds, cost_scale: float = DEFAULT_COST_SCALE) -> FlowNetwork:
    """Network for one stage with unadjusted (epsilon = 0) parameters."""
    pts = np.asarray(stage_points, dtype=float).reshape(-1, np.asarray(centers).shape[1])
    m = pts.shape[0]
    costs = np.rint(cost_scale * sq_dists(pts, centers)).astype(np.int64)
    lb_ceil = np.array([math.ceil(b) for b in bounds.lb], dtype=np.int64)
    ub_floor = np.array([m if b == math.inf else math.floor(b) for b in bounds.ub], dtype=np.int64)
    return FlowNetwork(costs, lb_ceil, ub_floor)


@dataclass(frozen=True)
class FlowSolution:
    assign: np.ndarray  # center per object, i.e. the unit-flow object arcs
    sink_flow: np.ndarray  # flow on each center-to-sink arc
    cost: int


def solve_min_cost_flow(network: FlowNetwork) -> FlowSolution:
    """Exact min-cost flow for a stage network; raises :class:`Infeasible`."""
    assign, count = bounded_assignment(network.costs, network.min_receive, network.max_receive)
    cost = int(network.costs[np.arange(network.m), assign].sum()) if network.m else 0
    return FlowSolution(np.asarray(assign, dtype=np.int64), count, cost)


def needs_adjustment(network: FlowNetwork) -> bool:
    lo, hi = network.min_receive, network.max_receive
    return bool(lo.sum() > network.m or hi.sum() < network.m or (hi < lo).any())


def adjust_parameters(network: FlowNetwork, bounds: StageBounds, prior_counts, target) -> FlowNetwork:
    """Relax demands, then capacities, one unit at a time until the network is feasible.

    Each unit goes to the center whose relaxation hurts the target least:
    lowering center j's demand scores ``max(0, t - (lo_j - 1) / max prior_j)``,
    raising its capacity scores ``max(0, t - min prior_j / (hi_j + 1))``.
    Ties go to the lowest center index.
    """
    t = as_fraction(target)
    prior = np.atleast_2d(np.asarray(prior_counts, dtype=np.int64))
    pmax = [int(r.max()) for r in prior]
    pmin = [int(r.min()) for r in prior]
    m = network.m
    eps_d = network.eps_demand.copy()
    eps_c = network.eps_capacity.copy()
    lo = (network.lb_ceil - eps_d).tolist()
    hi = (network.ub_floor + eps_c).tolist()
    k = len(lo)

    # a center whose range is empty (possible only after earlier relaxations)
    for j in range(k):
        if hi[j] < lo[j]:
            eps_c[j] += lo[j] - hi[j]
            hi[j] = lo[j]

    zero = Fraction(0)
    while sum(lo) > m:
        best = None
        for j in range(k):
            if lo[j] < 1:
                continue
            score = max(zero, t - Fraction(lo[j] - 1, max(pmax[j], 1)))
            if best is None or score < best[0]:
                best = (score, j)
        j = best[1]
        lo[j] -= 1
        eps_d[j] += 1
    while sum(hi) < m:
        best = None
        for j in range(k):
            score = max(zero, t - Fraction(pmin[j], hi[j] + 1))
            if best is None or score < best[0]:
                best = (score, j)
        j = best[1]
        hi[j] += 1
        eps_c[j] += 1
    return replace(network, eps_demand=eps_d, eps_capacity=eps_c)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def _reseed(points, centers, empty, rng):
    """Move the empty centers to D^2-sampled objects, keeping the others fixed."""
    centers = centers.copy()
    keep = [j for j in range(len(centers)) if j not in set(empty)]
    d2 = sq_dists(points, centers[keep]).min(axis=1) if keep else np.ones(len(points))
    for j in empty:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(len(points), p=d2 / total))
        else:
            idx = int(rng.integers(len(points)))
        centers[j] = points[idx]
        d2 = np.minimum(d2, sq_dists(points, points[idx][None])[:, 0])
    return centers


def first_stage_assign(points, centers, rng, reinit_cap: int = DEFAULT_REINIT_CAP):
    """Nearest-center assignment of the first (largest) group.

    Centers that receive nothing are re-seeded by k-means++ among the group's
    objects and the stage is repeated. Returns ``(assign, centers, reseeds)``.
    """
    pts = np.asarray(points, dtype=float)
    centers = np.array(centers, dtype=float)
    k = centers.shape[0]
    if k > pts.shape[0]:
        raise FirstStageDegenerate(f"{k} centers but only {pts.shape[0]} objects in the first group")
    for attempt in range(reinit_cap + 1):
        assign, _ = nearest(pts, centers)
        empty = np.flatnonzero(np.bincount(assign, minlength=k) == 0).tolist()
        if not empty:
            return assign, centers, attempt
        centers = _reseed(pts, centers, empty, rng)
    raise FirstStageDegenerate(f"centers still empty after {reinit_cap} re-initializations")


@dataclass(frozen=True)
class StagedAssignment:
    labels: np.ndarray
    centers: np.ndarray
    eps_demand: int
    eps_capacity: int
    reseeds: int = 0

    @property
    def epsilon_total(self) -> int:
        return self.eps_demand + self.eps_capacity


def staged_assign(
    points,
    membership,
    centers,
    target,
    rng,
    n_groups: int | None = None,
    cost_scale: float = DEFAULT_COST_SCALE,
    reinit_cap: int = DEFAULT_REINIT_CAP,
) -> StagedAssignment:
    """Full MS-FlowFC assignment step for a single sensitive feature.

    The returned centers differ from the input only if the first stage had
    to re-seed empty centers.
    """
    pts = np.asarray(points, dtype=float)
    membership = np.asarray(membership, dtype=np.int64)
    if n_groups is None:
        n_groups = int(membership.max()) + 1
    plan = stage_plan(membership, n_groups)
    k = np.asarray(centers).shape[0]
    labels = np.full(pts.shape[0], -1, dtype=np.int64)

    first = plan.members[0]
    assign, centers, reseeds = first_stage_assign(pts[first], centers, rng, reinit_cap)
    labels[first] = assign
    prior = [np.bincount(assign, minlength=k)]
    eps_d = eps_c = 0
    for members in plan.members[1:]:
        bounds = stage_bounds(np.stack(prior, axis=1), target)
        net = build_network(pts[members], centers, bounds, cost_scale)
        if needs_adjustment(net):
            net = adjust_parameters(net, bounds, np.stack(prior, axis=1), target)
        sol = solve_min_cost_flow(net)
        labels[members] = sol.assign
        prior.append(np.asarray(sol.sink_flow, dtype=np.int64))
        eps_d += int(net.eps_demand.sum())
        eps_c += int(net.eps_capacity.sum())
    return StagedAssignment(labels, centers, eps_d, eps_c, reseeds)
