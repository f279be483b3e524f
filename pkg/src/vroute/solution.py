"""Solution representation, penalized evaluation, diversity and fitness.

An :class:`Individual` couples a giant tour with its route decomposition and
cached cost summary. Routes are stored flat (``tour`` + ``offsets``) so the
genetic loop never builds per-route Python lists; ``succ``/``pred`` arrays
give each customer's within-route neighbors for the diversity measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenalizedCost:
    """Cost split into its distance and capacity-excess parts."""

    distance: float
    excess: float
    penalty: float

    @property
    def total(self):
        return self.distance + self.penalty * self.excess


class Individual:
    """One candidate solution.

    ``tour`` is the concatenation of the routes in order (the giant tour);
    route k spans ``tour[offsets[k]:offsets[k+1]]``. Cached ``total_distance``
    and ``capacity_excess`` always match a recomputation from the routes.
    """

    __slots__ = ("inst", "tour", "offsets", "succ", "pred", "loads",
                 "total_distance", "capacity_excess", "uid")

    def __init__(self, inst, tour, offsets, succ, pred, loads,
                 total_distance, capacity_excess):
        self.inst = inst
        self.tour = tour
        self.offsets = offsets
        self.succ = succ
        self.pred = pred
        self.loads = loads
        self.total_distance = float(total_distance)
        self.capacity_excess = float(capacity_excess)
        self.uid = -1  # assigned on population insertion

    # -- construction --------------------------------------------------

    @classmethod
    def from_routes(cls, inst, routes, validate=True):
        """Build from explicit route lists, recomputing all caches."""
        routes = [[int(c) for c in r] for r in routes if len(r)]
        n = inst.n
        flat = np.array([c for r in routes for c in r], dtype=np.int32)
        if validate:
            if len(routes) > inst.fleet_bound:
                raise ValueError("more routes than the fleet bound")
            seen = np.zeros(n + 1, dtype=bool)
            for c in flat:
                if c < 1 or c > n or seen[c]:
                    raise ValueError(f"bad or duplicate customer {c}")
                seen[c] = True
            if len(flat) != n:
                raise ValueError("solution does not visit every customer")
        offsets = np.zeros(len(routes) + 1, dtype=np.int32)
        succ = np.zeros(n + 1, dtype=np.int32)
        pred = np.zeros(n + 1, dtype=np.int32)
        loads = np.zeros(len(routes), dtype=np.float64)
        D = inst.dist
        dem = inst.demand
        total = 0.0
        excess = 0.0
        at = 0
        for k, r in enumerate(routes):
            arr = np.asarray(r, dtype=np.int32)
            at += len(arr)
            offsets[k + 1] = at
            succ[arr[:-1]] = arr[1:]
            succ[arr[-1]] = 0
            pred[arr[1:]] = arr[:-1]
            pred[arr[0]] = 0
            load = float(dem[arr].sum())
            loads[k] = load
            total += float(D[0, arr[0]] + D[arr[:-1], arr[1:]].sum()
                           + D[arr[-1], 0])
            if load > inst.capacity:
                excess += load - inst.capacity
        return cls(inst, flat, offsets, succ, pred, loads, total, excess)

    @classmethod
    def from_descent(cls, inst, res):
        """Wrap a :class:`~vroute.engine.result.DescentResult` (trusted)."""
        return cls(inst, res.flat, res.offsets, res.succ, res.pred, res.loads,
                   res.total_distance, res.capacity_excess)

    # -- views -----------------------------------------------------------

    @property
    def n_routes(self):
        return len(self.offsets) - 1

    @property
    def routes(self):
        off = self.offsets
        return [self.tour[off[k]:off[k + 1]].tolist()
                for k in range(len(off) - 1)]

    @property
    def is_feasible(self):
        return self.capacity_excess == 0.0

    def penalized(self, penalty):
        return self.total_distance + penalty * self.capacity_excess

    def __repr__(self):
        flag = "feasible" if self.is_feasible else f"excess={self.capacity_excess:g}"
        return (f"Individual(dist={self.total_distance:g}, "
                f"routes={self.n_routes}, {flag})")


def evaluate(ind, penalty):
    """Penalized cost recomputed from the routes (pure function of them)."""
    inst = ind.inst
    D = inst.dist
    dem = inst.demand
    total = 0.0
    excess = 0.0
    off = ind.offsets
    for k in range(len(off) - 1):
        r = ind.tour[off[k]:off[k + 1]]
        total += float(D[0, r[0]] + D[r[:-1], r[1:]].sum() + D[r[-1], 0])
        load = float(dem[r].sum())
        if load > inst.capacity:
            excess += load - inst.capacity
    return PenalizedCost(total, excess, float(penalty))


def broken_pairs_distance(a, b):
    """Fraction of customers whose tour successor in ``a`` is adjacent to
    them in neither direction in ``b``. Zero iff the undirected adjacency
    structure coincides (route reversals do not count as difference)."""
    sa = a.succ[1:]
    count = np.count_nonzero((sa != b.succ[1:]) & (sa != b.pred[1:]))
    return count / a.inst.n


def diversity_contributions(dmat, n_closest):
    """Mean distance of each member to its n_closest most similar peers.

    ``dmat`` is the symmetric pairwise distance matrix of one subpopulation.
    A singleton gets contribution 1 (maximally diverse)."""
    size = dmat.shape[0]
    if size <= 1:
        return np.ones(size, dtype=np.float64)
    k = min(n_closest, size - 1)
    contrib = np.empty(size, dtype=np.float64)
    for i in range(size):
        row = np.delete(dmat[i], i)
        if k < row.size:
            row = np.partition(row, k - 1)[:k]
        contrib[i] = row.mean()
    return contrib


def biased_fitness(costs, diversity, n_elite, uids=None):
    """Rank-blend fitness: cost rank plus diversity rank weighted by
    ``1 - n_elite / |P|`` (clamped at zero), lower is better.

    Ranks are 0-based; ties in cost or diversity break by ``uids``
    (insertion order) when given, else by position."""
    costs = np.asarray(costs, dtype=np.float64)
    size = costs.size
    if uids is None:
        uids = np.arange(size)
    uids = np.asarray(uids)
    fit = np.empty(size, dtype=np.float64)
    cost_order = np.lexsort((uids, costs))
    div_order = np.lexsort((uids, -np.asarray(diversity, dtype=np.float64)))
    cost_rank = np.empty(size, dtype=np.float64)
    div_rank = np.empty(size, dtype=np.float64)
    cost_rank[cost_order] = np.arange(size)
    div_rank[div_order] = np.arange(size)
    weight = max(0.0, 1.0 - n_elite / size)
    fit[:] = cost_rank + weight * div_rank
    return fit
