"""Route-improvement local search: public surface and instrumentation.

The descent itself runs inside the selected engine (see ``vroute.engine``);
this module exposes the individual-level entry points plus the geometric
helpers small enough to live in Python: insertion deltas, top-3 insertion
scans and polar circle sectors. Engines replicate the same arithmetic
internally for speed; tests hold the two sides together.
"""

from __future__ import annotations

import numpy as np

from .constants import FAMILIES
from .engine import get_engine
from .instance import ANGLE_STEPS
from .solution import Individual

INF = float("inf")
_AMASK = ANGLE_STEPS - 1


def insertion_delta(inst, v, i, j):
    """Cost change of inserting v between adjacent vertices i and j."""
    D = inst.dist
    return float(D[i, v] + D[v, j] - D[i, j])


class ThreeBest:
    """The three cheapest insertion positions of a vertex into a route.

    Entries are (prev, next, cost) with ascending cost, earlier route
    position first on ties; missing entries carry cost infinity.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        self.entries = list(entries)

    def best_avoiding(self, banned):
        """Cheapest entry whose edge does not touch ``banned`` (Theorem-1
        candidate selection); returns (prev, next, cost) or None."""
        for prev, nxt, cost in self.entries:
            if prev != banned and nxt != banned:
                if cost == INF:
                    return None
                return prev, nxt, cost
        return None


def find_top3(inst, v, route):
    """Scan all |route|+1 insertion positions of v and keep the 3 cheapest."""
    D = inst.dist
    v = int(v)
    entries = []
    prev = 0
    seq = [int(c) for c in route] + [0]
    for idx, nxt in enumerate(seq):
        cost = float(D[prev, v] + D[v, nxt] - D[prev, nxt])
        entries.append((cost, idx, prev, nxt))
        prev = nxt
    entries.sort(key=lambda e: (e[0], e[1]))
    top = [(p, nx, c) for c, _, p, nx in entries[:3]]
    while len(top) < 3:
        top.append((0, 0, INF))
    return ThreeBest(top)


class CircleSector:
    """Angular span about the depot on the 2**16-step integer circle.

    The sector runs from ``start`` toward increasing angles (mod 65536) up to
    ``end``; a single-customer route has the degenerate [a, a] sector.
    """

    __slots__ = ("start", "end")

    def __init__(self, start, end):
        self.start = int(start) & _AMASK
        self.end = int(end) & _AMASK

    @classmethod
    def of_angle(cls, a):
        return cls(a, a)

    def span(self):
        return (self.end - self.start) & _AMASK

    def contains(self, a):
        return ((int(a) - self.start) & _AMASK) <= self.span()

    def extend(self, a):
        """Grow minimally (in the cheaper direction) to include angle a."""
        a = int(a) & _AMASK
        if not self.contains(a):
            if ((a - self.end) & _AMASK) <= ((self.start - a) & _AMASK):
                self.end = a
            else:
                self.start = a

    def __repr__(self):
        return f"CircleSector({self.start}, {self.end})"


def sectors_overlap(s1, s2):
    """Whether two sectors share at least one angle (enclosure counts)."""
    return s1.contains(s2.start) or s2.contains(s1.start)


def route_sector(inst, route):
    """Sector swept by a route's customers, in visit order."""
    if not len(route):
        raise ValueError("empty route has no sector")
    sec = CircleSector.of_angle(inst.polar[int(route[0])])
    for c in route[1:]:
        sec.extend(inst.polar[int(c)])
    return sec


class SwapStarMove:
    """Best improving two-sided exchange found for one route pair."""

    __slots__ = ("delta", "v_out", "v_in", "insert_after_out", "insert_after_in")

    def __init__(self, delta, v_out, v_in, insert_after_out, insert_after_in):
        self.delta = float(delta)
        self.v_out = int(v_out)       # leaves the first route
        self.v_in = int(v_in)         # leaves the second route
        self.insert_after_out = int(insert_after_out)  # new pred in route 2
        self.insert_after_in = int(insert_after_in)    # new pred in route 1

    def __repr__(self):
        return (f"SwapStarMove(delta={self.delta:g}, "
                f"{self.v_out}<->{self.v_in})")


def swap_star_route_pair(inst, route_a, route_b, penalty, engine=None):
    """Evaluate the starred swap between two explicit routes.

    Returns the best strictly improving :class:`SwapStarMove` or None. The
    chosen insertion position of each customer is distance-optimal; the load
    penalty term depends only on the demand transfer and is added afterwards.
    """
    eng = engine if engine is not None else get_engine(inst)
    delta, move = eng.swap_star_eval(route_a, route_b, float(penalty))
    if move is None:
        return None
    return SwapStarMove(delta, move[0], move[1], move[2], move[3])


def classical_step(ind, u, penalty, engine=None):
    """Explore customer u's classical granular moves once; apply the first
    improving one. Returns (applied, individual-after)."""
    eng = engine if engine is not None else get_engine(ind.inst)
    applied, res = eng.classical_step(ind.tour, ind.offsets, float(penalty),
                                      int(u))
    return applied, Individual.from_descent(ind.inst, res)


class NeighborhoodStats:
    """Aggregated instrumentation over one or more descents."""

    def __init__(self):
        self.applied_first = np.zeros(len(FAMILIES), dtype=np.int64)
        self.applied_later = np.zeros(len(FAMILIES), dtype=np.int64)
        self.time_ns = np.zeros(len(FAMILIES), dtype=np.int64)
        self.swap_star_evals = 0
        self.descents = 0
        self.moves = 0

    def add(self, res):
        self.applied_first += res.applied_first
        self.applied_later += res.applied_later
        self.time_ns += res.time_ns
        self.swap_star_evals += res.swap_star_evals
        self.moves += res.moves
        self.descents += 1

    def merge(self, other):
        self.applied_first += other.applied_first
        self.applied_later += other.applied_later
        self.time_ns += other.time_ns
        self.swap_star_evals += other.swap_star_evals
        self.moves += other.moves
        self.descents += other.descents

    def rows(self):
        """Per-family shares: time %, improvement % (first/later loops)."""
        total_time = max(1, int(self.time_ns.sum()))
        applied = self.applied_first + self.applied_later
        total_applied = max(1, int(applied.sum()))
        out = []
        for i, fam in enumerate(FAMILIES):
            out.append({
                "neighborhood": fam,
                "time_ns": int(self.time_ns[i]),
                "time_share_pct": 100.0 * self.time_ns[i] / total_time,
                "first_loop_improvements": int(self.applied_first[i]),
                "later_improvements": int(self.applied_later[i]),
                "improvement_share_pct": 100.0 * applied[i] / total_applied,
                "first_loop_share_pct": 100.0 * self.applied_first[i] / total_applied,
                "later_share_pct": 100.0 * self.applied_later[i] / total_applied,
            })
        return out

    def as_dict(self):
        return {
            "descents": self.descents,
            "moves": self.moves,
            "swap_star_pair_evals": self.swap_star_evals,
            "families": self.rows(),
        }


def run_descent(ind, penalty, seed=0, engine=None, swap_star=True,
                stats=None, debug=0):
    """Educate an individual: descend to a local optimum of all implemented
    neighborhoods under the granular restriction.

    Deterministic given (individual, penalty, seed). Returns the improved
    individual; instrumentation is merged into ``stats`` when given.
    """
    eng = engine if engine is not None else get_engine(ind.inst)
    res = eng.descend(ind.tour, ind.offsets, float(penalty), int(seed),
                      swap_star=swap_star,
                      collect_stats=stats is not None, debug=debug)
    if stats is not None:
        stats.add(res)
    out = Individual.from_descent(ind.inst, res)
    if debug & 1 and res.debug_delta_err > 1e-6:
        raise AssertionError(
            f"move delta drifted from recomputation by {res.debug_delta_err:g}")
    return out
