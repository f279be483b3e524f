"""Giant-tour splitting: optimal insertion of route delimiters.

A giant tour visits every customer once with no depot returns. Splitting
chooses where the returns go: a shortest path on the DAG whose arcs are
candidate routes (contiguous tour segments). Capacity excess is allowed and
penalized linearly, so the decomposition always exists; arcs whose load would
exceed ``SPLIT_LOAD_FACTOR * Q`` are dropped as never useful.

Two implementations: :func:`split_bellman`, a plain quadratic dynamic program
kept deliberately simple to serve as the oracle, and :func:`split_linear`,
the production monotone-deque algorithm provided by the search engines.
"""

from __future__ import annotations

import numpy as np

from .constants import SPLIT_LOAD_FACTOR
from .engine import get_engine

INF = float("inf")


class SplitResult:
    """Decomposition of a tour: route k is tour[offsets[k]:offsets[k+1]]."""

    __slots__ = ("offsets", "cost")

    def __init__(self, offsets, cost):
        self.offsets = np.asarray(offsets, dtype=np.int32)
        self.cost = float(cost)

    @property
    def n_routes(self):
        return len(self.offsets) - 1

    def routes(self, tour):
        tour = np.asarray(tour)
        off = self.offsets
        return [tour[off[k]:off[k + 1]].tolist() for k in range(self.n_routes)]


def route_cost(inst, tour, i, j, penalty):
    """Penalized cost of one route serving tour positions i+1..j (1-based)."""
    seq = [int(c) for c in tour[i:j]]
    D = inst.dist
    prev = 0
    dist = 0.0
    load = 0.0
    for c in seq:
        dist += D[prev, c]
        load += inst.demand[c]
        prev = c
    dist += D[prev, 0]
    over = load - inst.capacity
    return dist + penalty * over if over > 0.0 else dist


def split_bellman(inst, tour, penalty, fleet_bound=None):
    """Oracle split: quadratic Bellman recursion over all usable arcs.

    Minimizes total penalized cost over decompositions into nonempty
    contiguous routes, at most ``fleet_bound`` of them when given. With a
    bound so tight that the load cap excludes every decomposition, the cap
    is lifted (a decomposition into <= m routes always exists for m >= 1).
    """
    tour = [int(c) for c in tour]
    n = len(tour)
    if fleet_bound is not None and fleet_bound < 1:
        raise ValueError("fleet bound must be at least 1")
    D = inst.dist
    dem = inst.demand
    Q = inst.capacity
    maxload = SPLIT_LOAD_FACTOR * Q

    sumd = [0.0] * (n + 1)
    sumc = [0.0] * (n + 1)
    d0 = [0.0] * (n + 1)
    for t in range(1, n + 1):
        c = tour[t - 1]
        sumd[t] = sumd[t - 1] + dem[c]
        d0[t] = D[0, c]
        sumc[t] = sumc[t - 1] + (D[tour[t - 2], c] if t > 1 else 0.0)

    def arc(i, j, cap):
        load = sumd[j] - sumd[i]
        if load > cap:
            return None
        cost = d0[i + 1] + (sumc[j] - sumc[i + 1]) + d0[j]
        over = load - Q
        if over > 0.0:
            cost += penalty * over
        return cost

    if fleet_bound is None:
        p = [INF] * (n + 1)
        p[0] = 0.0
        pred = [0] * (n + 1)
        for j in range(1, n + 1):
            for i in range(j - 1, -1, -1):
                c = arc(i, j, maxload)
                if c is None:
                    break  # loads only grow as i decreases
                if p[i] + c < p[j]:
                    p[j] = p[i] + c
                    pred[j] = i
        breaks = []
        t = n
        while t > 0:
            breaks.append(t)
            t = pred[t]
        breaks.append(0)
        return SplitResult(breaks[::-1], p[n])

    m = min(int(fleet_bound), n)
    for cap in (maxload, INF):
        p = [[INF] * (n + 1) for _ in range(m + 1)]
        pred = [[-1] * (n + 1) for _ in range(m + 1)]
        p[0][0] = 0.0
        for k in range(1, m + 1):
            pk = p[k]
            pk1 = p[k - 1]
            for j in range(k, n + 1):
                for i in range(j - 1, k - 2, -1):
                    if pk1[i] == INF:
                        continue
                    c = arc(i, j, cap)
                    if c is None:
                        break
                    if pk1[i] + c < pk[j]:
                        pk[j] = pk1[i] + c
                        pred[k][j] = i
        best_k = -1
        best = INF
        for k in range(1, m + 1):
            if p[k][n] < best:
                best = p[k][n]
                best_k = k
        if best_k > 0:
            breaks = []
            t = n
            k = best_k
            while t > 0:
                breaks.append(t)
                t = pred[k][t]
                k -= 1
            breaks.append(0)
            return SplitResult(breaks[::-1], best)
    raise RuntimeError("no decomposition found")  # unreachable for m >= 1


def split_linear(inst, tour, penalty, engine=None):
    """Production split: linear-time deque algorithm, fleet-bounded fallback.

    Cost-equivalent to :func:`split_bellman` without a bound; when the
    unbounded optimum needs more than ``inst.fleet_bound`` routes, the
    bounded dynamic program enforces the bound.
    """
    eng = engine if engine is not None else get_engine(inst)
    offsets, cost = eng.split(np.asarray(tour, dtype=np.int32), float(penalty))
    return SplitResult(offsets, cost)
