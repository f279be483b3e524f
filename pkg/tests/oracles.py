"""Independent brute-force oracles used by the test suite.

Everything here evaluates candidate solutions from scratch on explicit route
lists. None of it shares code with the engines: these are the slow,
obviously-correct references the fast paths are checked against.
"""

from __future__ import annotations

import math

import numpy as np

from vroute.constants import MOVE_EPS, SPLIT_LOAD_FACTOR
from vroute.instance import Instance
from vroute.localsearch import route_sector, sectors_overlap


def route_distance(inst, route):
    D = inst.dist
    prev = 0
    total = 0.0
    for c in route:
        total += D[prev, c]
        prev = c
    return total + D[prev, 0]


def penalized_cost(inst, routes, penalty):
    total = 0.0
    for r in routes:
        if not r:
            continue
        total += route_distance(inst, r)
        load = sum(inst.demand[c] for c in r)
        if load > inst.capacity:
            total += penalty * (load - inst.capacity)
    return total


# ----------------------------------------------------------------------
# random instance generation

def random_instance(rng, n, capacity=None, clustered=False, name=None,
                    fleet_bound=None, gamma=20, max_demand=10):
    """Uniform or clustered random points with integer demands."""
    coords = [(500.0, 500.0)]
    if clustered:
        n_seeds = max(2, n // 12)
        seeds = [(rng.uniform(0, 1000), rng.uniform(0, 1000))
                 for _ in range(n_seeds)]
        for _ in range(n):
            sx, sy = rng.choice(seeds)
            coords.append((sx + rng.gauss(0, 40), sy + rng.gauss(0, 40)))
    else:
        for _ in range(n):
            coords.append((rng.uniform(0, 1000), rng.uniform(0, 1000)))
    demand = [0.0] + [float(rng.randint(1, max_demand)) for _ in range(n)]
    if capacity is None:
        capacity = float(rng.randint(3 * max_demand, 6 * max_demand))
    total = sum(demand)
    if fleet_bound is None:
        fleet_bound = int(math.ceil(total / capacity)) + 2
    return Instance(name or f"rnd-n{n}", np.array(coords), np.array(demand),
                    capacity, fleet_bound, gamma=gamma)


def random_solution(rng, inst, n_routes=None):
    """Random partition of a random tour into nonempty contiguous routes."""
    n = inst.n
    tour = list(range(1, n + 1))
    rng.shuffle(tour)
    if n_routes is None:
        n_routes = rng.randint(1, min(inst.fleet_bound, n))
    n_routes = min(n_routes, n)
    cuts = sorted(rng.sample(range(1, n), n_routes - 1)) if n_routes > 1 else []
    bounds = [0] + cuts + [n]
    return [tour[bounds[k]:bounds[k + 1]] for k in range(n_routes)]


# ----------------------------------------------------------------------
# split oracle by full enumeration

def enumerate_split(inst, tour, penalty, load_cap=True):
    """Best decomposition by trying all 2^(n-1) contiguous splits."""
    n = len(tour)
    maxload = SPLIT_LOAD_FACTOR * inst.capacity if load_cap else float("inf")
    best = float("inf")
    best_routes = None
    for mask in range(1 << (n - 1)):
        routes = []
        start = 0
        ok = True
        for i in range(n):
            if i == n - 1 or (mask >> i) & 1:
                r = tour[start:i + 1]
                if sum(inst.demand[c] for c in r) > maxload:
                    ok = False
                    break
                routes.append(r)
                start = i + 1
        if not ok or len(routes) > inst.fleet_bound:
            continue
        cost = penalized_cost(inst, routes, penalty)
        if cost < best:
            best = cost
            best_routes = routes
    return best, best_routes


# ----------------------------------------------------------------------
# insertion positions

def brute_top3(inst, v, route):
    """Three cheapest insertion positions by direct enumeration."""
    D = inst.dist
    seq = [0] + list(route) + [0]
    cands = []
    for k in range(len(seq) - 1):
        i, j = seq[k], seq[k + 1]
        cands.append((float(D[i, v] + D[v, j] - D[i, j]), k, i, j))
    cands.sort(key=lambda e: (e[0], e[1]))
    return cands[:3]


def best_insertion_cost(inst, v, route):
    if not route:
        return 2.0 * float(inst.dist[0, v])
    return brute_top3(inst, v, route)[0][0]


# ----------------------------------------------------------------------
# exhaustive swap* enumeration for one route pair

def brute_swap_star(inst, route_a, route_b, penalty):
    """Minimum delta over every (v, v2, position, position) quadruple."""
    base = penalized_cost(inst, [route_a, route_b], penalty)
    best = 0.0
    found = None
    for iv, v in enumerate(route_a):
        ra = route_a[:iv] + route_a[iv + 1:]
        for iv2, v2 in enumerate(route_b):
            rb = route_b[:iv2] + route_b[iv2 + 1:]
            for pa in range(len(ra) + 1):
                na = ra[:pa] + [v2] + ra[pa:]
                for pb in range(len(rb) + 1):
                    nb = rb[:pb] + [v] + rb[pb:]
                    delta = penalized_cost(inst, [na, nb], penalty) - base
                    if delta < best:
                        best = delta
                        found = (v, v2, pa, pb)
    return best, found


# ----------------------------------------------------------------------
# exhaustive local-optimum verifier

def _substitute(routes, mapping):
    """Rebuild routes replacing each key customer with a block; each block
    entry also says how many following customers it consumes."""
    out = []
    for r in routes:
        nr = []
        skip = 0
        for c in r:
            if skip:
                skip -= 1
                continue
            if c in mapping:
                block, extra_skip = mapping[c]
                nr.extend(block)
                skip = extra_skip
            else:
                nr.append(c)
        out.append(nr)
    return [r for r in out if r]


def _relocated(routes, block, after):
    """Remove ``block`` (contiguous, in order) and reinsert it after customer
    ``after``."""
    bs = set(block)
    out = []
    for r in routes:
        nr = []
        for c in r:
            if c in bs:
                continue
            nr.append(c)
            if c == after:
                nr.extend(block)
        out.append(nr)
    return [r for r in out if r]


def improving_moves(inst, routes, penalty, eps=MOVE_EPS):
    """Yield every improving move of the implemented neighborhoods,
    mirroring the engine's move set exactly: the nine granular classical
    moves, the empty-route targets, and the starred swap restricted to
    overlapping polar sectors. Items are (name, delta, candidate_routes)."""
    routes = [list(r) for r in routes if r]
    base = penalized_cost(inst, routes, penalty)
    where = {}
    for ri, r in enumerate(routes):
        for k, c in enumerate(r):
            where[c] = (ri, k)

    def emit(name, cand):
        d = penalized_cost(inst, cand, penalty) - base
        if d < -eps:
            return (name, d, cand)
        return None

    for u in range(1, inst.n + 1):
        ru, pu = where[u]
        r1 = routes[ru]
        x = r1[pu + 1] if pu + 1 < len(r1) else 0
        for v in inst.neighbors[u]:
            v = int(v)
            rv, pv = where[v]
            r2 = routes[rv]
            y = r2[pv + 1] if pv + 1 < len(r2) else 0

            hit = emit("relocate", _relocated(routes, [u], v))
            if hit:
                yield hit
            if x and v != x:
                hit = emit("relocate_pair", _relocated(routes, [u, x], v))
                if hit:
                    yield hit
                hit = emit("relocate_pair_rev",
                           _relocated(routes, [x, u], v))
                if hit:
                    yield hit
            hit = emit("swap", _substitute(routes, {u: ([v], 0), v: ([u], 0)}))
            if hit:
                yield hit
            if x and v != x:
                cand = _substitute(routes, {u: ([v], 1), v: ([u, x], 0)})
                hit = emit("swap_pair_single", cand)
                if hit:
                    yield hit
                if y and y != u and len({u, x, v, y}) == 4:
                    cand = _substitute(routes,
                                       {u: ([v, y], 1), v: ([u, x], 1)})
                    hit = emit("swap_pairs", cand)
                    if hit:
                        yield hit
            if ru == rv and u != v:
                a, b = (pu, pv) if pu < pv else (pv, pu)
                cand = [list(r) for r in routes]
                rr = cand[ru]
                cand[ru] = rr[:a + 1] + rr[a + 1:b + 1][::-1] + rr[b + 1:]
                hit = emit("two_opt", cand)
                if hit:
                    yield hit
            if ru != rv:
                a = routes[ru]
                b = routes[rv]
                cand = [list(r) for r in routes]
                cand[ru] = a[:pu + 1] + b[pv + 1:]
                cand[rv] = b[:pv + 1] + a[pu + 1:]
                hit = emit("two_opt_star", [r for r in cand if r])
                if hit:
                    yield hit
                cand = [list(r) for r in routes]
                cand[ru] = a[:pu + 1] + b[:pv + 1][::-1]
                cand[rv] = a[pu + 1:][::-1] + b[pv + 1:]
                hit = emit("two_opt_star_rev", [r for r in cand if r])
                if hit:
                    yield hit
        if len(routes) < inst.fleet_bound and len(r1) > 1:
            cand = [list(r) for r in routes]
            del cand[ru][pu]
            cand.append([u])
            hit = emit("relocate_empty", cand)
            if hit:
                yield hit
            if x:
                cand = [list(r) for r in routes]
                del cand[ru][pu:pu + 2]
                cand.append([u, x])
                hit = emit("relocate_pair_empty", [r for r in cand if r])
                if hit:
                    yield hit
                cand = [list(r) for r in routes]
                cand[ru] = r1[:pu + 1]
                cand.append(r1[pu + 1:])
                hit = emit("split_empty", cand)
                if hit:
                    yield hit

    secs = [route_sector(inst, r) for r in routes]
    for ri in range(len(routes)):
        for rj in range(ri + 1, len(routes)):
            if not sectors_overlap(secs[ri], secs[rj]):
                continue
            delta, move = brute_swap_star(inst, routes[ri], routes[rj],
                                          penalty)
            if delta < -eps:
                yield ("swap_star", delta, (ri, rj, move))


def first_improving(inst, routes, penalty, eps=MOVE_EPS):
    for hit in improving_moves(inst, routes, penalty, eps):
        return hit
    return None
