"""Pure-Python search engine.

Reference implementation of the solver's hot kernels: the linear-time giant
tour split, the OX crossover, and the route-improvement descent (granular
classical moves plus the best-position exchange neighborhood with polar-sector
pruning). The compiled engine in ``_ckernel.pyx`` mirrors this module
function-for-function; given the same inputs and seed both must take exactly
the same search path. Keep any behavioral edit in sync between the two.

State layout is flat arrays indexed by customer (1..n) or route slot (0..m-1)
rather than objects, both for speed and so the compiled twin is a direct
transcription. Route slots beyond the current solution are empty and act as
relocation targets while the fleet bound is not saturated.
"""

from __future__ import annotations

import time

import numpy as np

from ..constants import MOVE_EPS, SPLIT_LOAD_FACTOR
from .result import DescentResult

INF = float("inf")
MASK64 = (1 << 64) - 1
AMASK = 0xFFFF  # angles live on a 2**16 circle

F_RELOCATE, F_SWAP, F_TWO_OPT, F_TWO_OPT_STAR, F_SWAP_STAR = range(5)


def _splitmix_next(state):
    """One step of splitmix64; returns (new_state, 64-bit output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class PyEngine:
    """Per-instance search workspace. Single-threaded; one per run."""

    kind = "python"

    def __init__(self, inst):
        n = int(inst.n)
        m = int(inst.fleet_bound)
        self.n = n
        self.m = m
        self.Q = float(inst.capacity)
        self.max_route_load = SPLIT_LOAD_FACTOR * self.Q
        self.D = inst.dist.tolist()
        self.dem = inst.demand.tolist()
        self.nb = inst.neighbors.tolist()
        self.polar = inst.polar.tolist()

        # per-customer state (index 0 = depot, unused except as sentinel)
        self.succ = [0] * (n + 1)
        self.pred = [0] * (n + 1)
        self.route_of = [0] * (n + 1)
        self.pos = [0] * (n + 1)
        self.cumload = [0.0] * (n + 1)
        self.last_tested = [-1] * (n + 1)

        # per-route state
        self.r_first = [0] * m
        self.r_last = [0] * m
        self.r_count = [0] * m
        self.r_load = [0.0] * m
        self.r_dist = [0.0] * m
        self.r_sec_start = [0] * m
        self.r_sec_end = [0] * m
        self.r_mod = [0] * m
        self.pair_tested = [-1] * (m * m)

        # three cheapest insertion positions of customer v into route r,
        # cached with a validity stamp against r's last modification
        self.t3_cost = [INF] * ((n + 1) * m * 3)
        self.t3_prev = [0] * ((n + 1) * m * 3)
        self.t3_next = [0] * ((n + 1) * m * 3)
        self.t3_stamp = [-1] * ((n + 1) * m)

        self.move_counter = 0
        self.pen = 0.0
        self.first_empty = -1
        self._seg = [0] * (n + 1)
        self._order = list(range(1, n + 1))
        self._rng = 0

        self._reset_stats()

    # ------------------------------------------------------------------
    # small utilities

    def _reset_stats(self):
        self.applied_first = [0] * 5
        self.applied_later = [0] * 5
        self.time_ns = [0] * 5
        self.ss_evals = 0
        self._pass = 0
        self._moves = 0
        self._collect = False
        self._debug = 0
        self._dbg_before = 0.0
        self.debug_delta_err = 0.0
        self.debug_stamp_violations = 0

    def _rand(self, bound):
        self._rng, z = _splitmix_next(self._rng)
        return z % bound

    def _shuffle_order(self):
        order = self._order
        for i in range(self.n - 1, 0, -1):
            j = self._rand(i + 1)
            order[i], order[j] = order[j], order[i]

    def _exc(self, load):
        over = load - self.Q
        return over if over > 0.0 else 0.0

    # ------------------------------------------------------------------
    # giant-tour split

    def split(self, tour, penalty):
        """Optimal soft-capacity decomposition of a giant tour.

        Runs the unlimited-fleet linear (monotone deque) shortest path; if the
        result needs more than the fleet bound, falls back to the
        level-by-level bounded dynamic program. Returns (offsets, cost) where
        route k spans tour[offsets[k]:offsets[k+1]].
        """
        tour = [int(c) for c in tour]
        n = len(tour)
        D = self.D
        dem = self.dem
        Q = self.Q
        maxload = self.max_route_load

        sumd = [0.0] * (n + 1)
        sumc = [0.0] * (n + 1)
        d0 = [0.0] * (n + 1)
        row0 = D[0]
        for t in range(1, n + 1):
            c = tour[t - 1]
            sumd[t] = sumd[t - 1] + dem[c]
            d0[t] = row0[c]
            sumc[t] = sumc[t - 1] + (D[tour[t - 2]][c] if t > 1 else 0.0)

        p = [INF] * (n + 1)
        p[0] = 0.0
        pred = [0] * (n + 1)
        g = [0.0] * (n + 1)  # g[i] = p[i] + d0[i+1] - sumc[i+1]

        qa = [0] * (n + 1)  # candidates whose route would stay within Q
        qb = [0] * (n + 1)  # candidates in the penalized band (Q, maxload]
        ah = at = bh = bt = 0
        qa[0] = 0
        at = 1
        g[0] = d0[1] - sumc[1]

        for j in range(1, n + 1):
            if j > 1:
                i = j - 1
                gi = p[i] + d0[i + 1] - sumc[i + 1]
                g[i] = gi
                while at > ah and g[qa[at - 1]] >= gi:
                    at -= 1
                qa[at] = i
                at += 1
            lim_a = sumd[j] - Q
            lim_b = sumd[j] - maxload
            pj = penalty  # alias to keep the two value formulas side by side
            while at > ah and sumd[qa[ah]] < lim_a:
                i2 = qa[ah]
                ah += 1
                if sumd[i2] >= lim_b:
                    k2 = g[i2] - pj * sumd[i2]
                    while bt > bh and (g[qb[bt - 1]] - pj * sumd[qb[bt - 1]]) >= k2:
                        bt -= 1
                    qb[bt] = i2
                    bt += 1
            while bt > bh and sumd[qb[bh]] < lim_b:
                bh += 1
            best = INF
            bi = -1
            if at > ah:
                i2 = qa[ah]
                best = sumc[j] + d0[j] + g[i2]
                bi = i2
            if bt > bh:
                i2 = qb[bh]
                cand = sumc[j] + d0[j] + pj * (sumd[j] - Q) + g[i2] - pj * sumd[i2]
                if cand < best:
                    best = cand
                    bi = i2
            p[j] = best
            pred[j] = bi

        breaks = []
        t = n
        while t > 0:
            breaks.append(t)
            t = pred[t]
        breaks.append(0)
        breaks.reverse()
        if len(breaks) - 1 <= self.m:
            return np.array(breaks, dtype=np.int32), p[n]
        return self._split_limited(tour, penalty, sumd, sumc, d0, maxload)

    def _split_limited(self, tour, penalty, sumd, sumc, d0, maxload):
        """Fleet-bounded split: one deque pass per route level.

        If no decomposition exists within the load cap (tiny fleets with huge
        total demand), retries with the cap lifted, which always succeeds.
        """
        n = len(tour)
        m = min(self.m, n)
        Q = self.Q
        prev_p = [INF] * (n + 1)
        prev_p[0] = 0.0
        preds = [None] * (m + 1)
        best_cost = INF
        best_k = -1
        qa = [0] * (n + 1)
        qb = [0] * (n + 1)
        g = [0.0] * (n + 1)
        for k in range(1, m + 1):
            cur_p = [INF] * (n + 1)
            pred = [-1] * (n + 1)
            ah = at = bh = bt = 0
            for j in range(1, n + 1):
                i = j - 1
                if prev_p[i] < INF:
                    gi = prev_p[i] + d0[i + 1] - sumc[i + 1]
                    g[i] = gi
                    while at > ah and g[qa[at - 1]] >= gi:
                        at -= 1
                    qa[at] = i
                    at += 1
                lim_a = sumd[j] - Q
                lim_b = sumd[j] - maxload
                while at > ah and sumd[qa[ah]] < lim_a:
                    i2 = qa[ah]
                    ah += 1
                    if sumd[i2] >= lim_b:
                        k2 = g[i2] - penalty * sumd[i2]
                        while bt > bh and (g[qb[bt - 1]] - penalty * sumd[qb[bt - 1]]) >= k2:
                            bt -= 1
                        qb[bt] = i2
                        bt += 1
                while bt > bh and sumd[qb[bh]] < lim_b:
                    bh += 1
                best = INF
                bi = -1
                if at > ah:
                    i2 = qa[ah]
                    best = sumc[j] + d0[j] + g[i2]
                    bi = i2
                if bt > bh:
                    i2 = qb[bh]
                    cand = (sumc[j] + d0[j] + penalty * (sumd[j] - Q)
                            + g[i2] - penalty * sumd[i2])
                    if cand < best:
                        best = cand
                        bi = i2
                cur_p[j] = best
                pred[j] = bi
            preds[k] = pred
            if cur_p[n] < best_cost:
                best_cost = cur_p[n]
                best_k = k
            prev_p = cur_p
        if best_k < 0:
            if maxload < INF:
                return self._split_limited(tour, penalty, sumd, sumc, d0, INF)
            raise RuntimeError("fleet-limited split found no decomposition")
        breaks = []
        t = n
        k = best_k
        while t > 0:
            breaks.append(t)
            t = preds[k][t]
            k -= 1
        breaks.append(0)
        breaks.reverse()
        return np.array(breaks, dtype=np.int32), best_cost

    # ------------------------------------------------------------------
    # OX crossover

    def crossover_ox(self, p1, p2, start, end):
        """Order crossover: keep p1[start..end] (circular, inclusive), fill
        the remaining slots from position end+1 with p2's customers in tour
        order, skipping those already present."""
        n = self.n
        p1 = [int(c) for c in p1]
        p2 = [int(c) for c in p2]
        child = [0] * n
        present = [False] * (n + 1)
        i = start
        while True:
            c = p1[i]
            child[i] = c
            present[c] = True
            if i == end:
                break
            i = (i + 1) % n
        fill = (end + 1) % n
        for k in range(n):
            c = p2[(end + 1 + k) % n]
            if not present[c]:
                child[fill] = c
                fill = (fill + 1) % n
        return np.array(child, dtype=np.int32)

    # ------------------------------------------------------------------
    # solution loading / extraction

    def _load(self, flat, offsets):
        succ = self.succ
        pred = self.pred
        for r in range(self.m):
            self.r_first[r] = 0
        nr = len(offsets) - 1
        if nr > self.m:
            raise ValueError("more routes than the fleet bound")
        for r in range(nr):
            prev = 0
            for idx in range(offsets[r], offsets[r + 1]):
                c = int(flat[idx])
                if prev == 0:
                    self.r_first[r] = c
                else:
                    succ[prev] = c
                pred[c] = prev
                prev = c
            if prev:
                succ[prev] = 0
        self.move_counter += 1
        for r in range(self.m):
            self._refresh_route(r)
            self.r_mod[r] = self.move_counter
        self._scan_first_empty()

    def _refresh_route(self, r):
        """Rebuild derived data of one route from its successor chain."""
        D = self.D
        dem = self.dem
        polar = self.polar
        succ = self.succ
        pred = self.pred
        c = self.r_first[r]
        prev = 0
        cnt = 0
        load = 0.0
        dist = 0.0
        sec_s = 0
        sec_e = 0
        while c:
            pred[c] = prev
            self.route_of[c] = r
            self.pos[c] = cnt
            load += dem[c]
            self.cumload[c] = load
            dist += D[prev][c]
            ang = polar[c]
            if cnt == 0:
                sec_s = sec_e = ang
            else:
                span = (sec_e - sec_s) & AMASK
                rel = (ang - sec_s) & AMASK
                if rel > span:
                    if ((ang - sec_e) & AMASK) <= ((sec_s - ang) & AMASK):
                        sec_e = ang
                    else:
                        sec_s = ang
            cnt += 1
            prev = c
            c = succ[c]
        dist += D[prev][0]
        self.r_last[r] = prev
        self.r_count[r] = cnt
        self.r_load[r] = load
        self.r_dist[r] = dist
        self.r_sec_start[r] = sec_s
        self.r_sec_end[r] = sec_e

    def _scan_first_empty(self):
        fe = -1
        for r in range(self.m):
            if self.r_count[r] == 0:
                fe = r
                break
        self.first_empty = fe

    def _sectors_overlap(self, r1, r2):
        s1 = self.r_sec_start[r1]
        e1 = self.r_sec_end[r1]
        s2 = self.r_sec_start[r2]
        e2 = self.r_sec_end[r2]
        return (((s2 - s1) & AMASK) <= ((e1 - s1) & AMASK)
                or ((s1 - s2) & AMASK) <= ((e2 - s2) & AMASK))

    def _scratch_cost(self):
        """Penalized cost recomputed from the raw successor chains."""
        D = self.D
        dem = self.dem
        total = 0.0
        excess = 0.0
        for r in range(self.m):
            c = self.r_first[r]
            prev = 0
            load = 0.0
            while c:
                total += D[prev][c]
                load += dem[c]
                prev = c
                c = self.succ[c]
            total += D[prev][0]
            over = load - self.Q
            if over > 0.0:
                excess += over
        return total + self.pen * excess

    def _extract(self):
        n = self.n
        flat = np.empty(n, dtype=np.int32)
        offsets = [0]
        loads = []
        idx = 0
        total = 0.0
        excess = 0.0
        for r in range(self.m):
            c = self.r_first[r]
            if not c:
                continue
            while c:
                flat[idx] = c
                idx += 1
                c = self.succ[c]
            offsets.append(idx)
            loads.append(self.r_load[r])
            total += self.r_dist[r]
            excess += self._exc(self.r_load[r])
        return DescentResult(
            flat, np.array(offsets, dtype=np.int32),
            np.array(self.succ, dtype=np.int32),
            np.array(self.pred, dtype=np.int32),
            np.array(loads, dtype=np.float64),
            total, excess,
            list(self.applied_first), list(self.applied_later),
            list(self.time_ns), self.ss_evals, self._pass, self._moves,
            self.debug_delta_err, self.debug_stamp_violations)

    # ------------------------------------------------------------------
    # move application

    def _register(self, family):
        if self._pass == 0:
            self.applied_first[family] += 1
        else:
            self.applied_later[family] += 1

    def _begin_move(self):
        if self._debug & 1:
            self._dbg_before = self._scratch_cost()

    def _finish_move(self, ra, rb, predicted_delta):
        self.move_counter += 1
        self._refresh_route(ra)
        self.r_mod[ra] = self.move_counter
        if rb != ra:
            self._refresh_route(rb)
            self.r_mod[rb] = self.move_counter
        self._moves += 1
        self._scan_first_empty()
        if self._debug & 1:
            after = self._scratch_cost()
            err = abs(after - (self._dbg_before + predicted_delta))
            if err > self.debug_delta_err:
                self.debug_delta_err = err

    def _apply_relocate(self, u, prev_to, r2):
        self._begin_move()
        succ = self.succ
        ru = self.route_of[u]
        up = self.pred[u]
        ux = succ[u]
        if up:
            succ[up] = ux
        else:
            self.r_first[ru] = ux
        if prev_to == 0:
            succ[u] = self.r_first[r2]
            self.r_first[r2] = u
        else:
            succ[u] = succ[prev_to]
            succ[prev_to] = u
        return ru, r2

    def _apply_relocate_pair(self, u, x, prev_to, r2, rev):
        self._begin_move()
        succ = self.succ
        ru = self.route_of[u]
        up = self.pred[u]
        xs = succ[x]
        if up:
            succ[up] = xs
        else:
            self.r_first[ru] = xs
        if prev_to == 0:
            tail = self.r_first[r2]
        else:
            tail = succ[prev_to]
        if rev:
            head = x
            succ[x] = u
            succ[u] = tail
        else:
            head = u
            succ[u] = x
            succ[x] = tail
        if prev_to == 0:
            self.r_first[r2] = head
        else:
            succ[prev_to] = head
        return ru, r2

    def _apply_swap(self, u, v):
        self._begin_move()
        succ = self.succ
        pred = self.pred
        ru = self.route_of[u]
        rv = self.route_of[v]
        up = pred[u]
        ux = succ[u]
        vp = pred[v]
        vy = succ[v]
        if ux == v:
            if up:
                succ[up] = v
            else:
                self.r_first[ru] = v
            succ[v] = u
            succ[u] = vy
        elif vy == u:
            if vp:
                succ[vp] = u
            else:
                self.r_first[rv] = u
            succ[u] = v
            succ[v] = ux
        else:
            if up:
                succ[up] = v
            else:
                self.r_first[ru] = v
            succ[v] = ux
            if vp:
                succ[vp] = u
            else:
                self.r_first[rv] = u
            succ[u] = vy
        return ru, rv

    def _apply_swap_pair(self, u, x, v):
        self._begin_move()
        # (u, x) trades places with the single customer v
        succ = self.succ
        pred = self.pred
        ru = self.route_of[u]
        rv = self.route_of[v]
        up = pred[u]
        xs = succ[x]
        vp = pred[v]
        vy = succ[v]
        if xs == v:
            if up:
                succ[up] = v
            else:
                self.r_first[ru] = v
            succ[v] = u
            succ[x] = vy
        elif vy == u:
            if vp:
                succ[vp] = u
            else:
                self.r_first[rv] = u
            succ[x] = v
            succ[v] = xs
        else:
            if up:
                succ[up] = v
            else:
                self.r_first[ru] = v
            succ[v] = xs
            if vp:
                succ[vp] = u
            else:
                self.r_first[rv] = u
            succ[x] = vy
        return ru, rv

    def _apply_swap_pairs(self, u, x, v, y):
        self._begin_move()
        succ = self.succ
        pred = self.pred
        ru = self.route_of[u]
        rv = self.route_of[v]
        up = pred[u]
        xs = succ[x]
        vp = pred[v]
        ys = succ[y]
        if xs == v:
            if up:
                succ[up] = v
            else:
                self.r_first[ru] = v
            succ[y] = u
            succ[x] = ys
        elif ys == u:
            if vp:
                succ[vp] = u
            else:
                self.r_first[rv] = u
            succ[x] = v
            succ[y] = xs
        else:
            if up:
                succ[up] = v
            else:
                self.r_first[ru] = v
            succ[y] = xs
            if vp:
                succ[vp] = u
            else:
                self.r_first[rv] = u
            succ[x] = ys
        return ru, rv

    def _apply_two_opt(self, u, v):
        self._begin_move()
        # intra-route: break the edges after u and after v, reverse between
        succ = self.succ
        if self.pos[u] > self.pos[v]:
            u, v = v, u
        seg = self._seg
        k = 0
        c = succ[u]
        while c != v:
            seg[k] = c
            k += 1
            c = succ[c]
        vy = succ[v]
        succ[u] = v
        prev = v
        for idx in range(k - 1, -1, -1):
            succ[prev] = seg[idx]
            prev = seg[idx]
        succ[prev] = vy
        r = self.route_of[u]
        return r, r

    def _apply_two_opt_star(self, u, v, variant):
        self._begin_move()
        succ = self.succ
        pred = self.pred
        ru = self.route_of[u]
        rv = self.route_of[v]
        ux = succ[u]
        vy = succ[v]
        if variant == 0:
            # straight tail exchange: u -> tail(v), v -> tail(u)
            succ[u] = vy
            succ[v] = ux
        else:
            # reversed: u -> v..head(rv) reversed; tail(u) reversed -> tail(v)
            last1 = self.r_last[ru]
            succ[u] = v
            c = v
            while c != 0:
                nxt = pred[c]
                succ[c] = nxt
                c = nxt
            if ux != 0:
                c = last1
                while c != ux:
                    nxt = pred[c]
                    succ[c] = nxt
                    c = nxt
                succ[ux] = vy
                self.r_first[rv] = last1
            else:
                self.r_first[rv] = vy
        return ru, rv

    # ------------------------------------------------------------------
    # classical neighborhood exploration

    def _try_pair(self, u, v, do_apply):
        """Evaluate the nine classical moves for the ordered pair (u, v);
        apply the first improving one when do_apply is set. Returns whether
        an improving move was found."""
        D = self.D
        succ = self.succ
        pred = self.pred
        dem = self.dem
        pen = self.pen
        Q = self.Q
        collect = self._collect and do_apply
        ru = self.route_of[u]
        rv = self.route_of[v]
        up = pred[u]
        ux = succ[u]
        vp = pred[v]
        vy = succ[v]
        du = dem[u]
        dv = dem[v]
        load1 = self.r_load[ru]
        load2 = self.r_load[rv]
        intra = ru == rv
        x = ux
        y = vy

        if collect:
            t0 = time.perf_counter_ns()

        # --- relocate family -------------------------------------------
        found = -1
        rem_u = D[up][ux] - D[up][u] - D[u][ux]
        if v != up:
            delta = rem_u + D[v][u] + D[u][vy] - D[v][vy]
            if not intra:
                delta += pen * (self._exc(load1 - du) + self._exc(load2 + du)
                                - self._exc(load1) - self._exc(load2))
            if delta < -MOVE_EPS:
                found = 1
        if found < 0 and x != 0 and v != x and v != up:
            xs = succ[x]
            dx = dem[x]
            base = D[up][xs] - D[up][u] - D[x][xs] - D[v][vy]
            pd = 0.0
            if not intra:
                pd = pen * (self._exc(load1 - du - dx)
                            + self._exc(load2 + du + dx)
                            - self._exc(load1) - self._exc(load2))
            delta = base + D[v][u] + D[x][vy] + pd
            if delta < -MOVE_EPS:
                found = 2
            else:
                delta = base + D[v][x] + D[u][vy] + pd
                if delta < -MOVE_EPS:
                    found = 3
        if found > 0:
            if not do_apply:
                return True
            self._register(F_RELOCATE)
            if found == 1:
                ra, rb = self._apply_relocate(u, v, rv)
            elif found == 2:
                ra, rb = self._apply_relocate_pair(u, x, v, rv, False)
            else:
                ra, rb = self._apply_relocate_pair(u, x, v, rv, True)
            self._finish_move(ra, rb, delta)
            if collect:
                self.time_ns[F_RELOCATE] += time.perf_counter_ns() - t0
            return True
        if collect:
            t1 = time.perf_counter_ns()
            self.time_ns[F_RELOCATE] += t1 - t0
            t0 = t1

        # --- swap family ------------------------------------------------
        found = -1
        pd_single = 0.0
        if not intra:
            pd_single = pen * (self._exc(load1 - du + dv)
                               + self._exc(load2 + du - dv)
                               - self._exc(load1) - self._exc(load2))
        if v == ux:
            delta = D[up][v] + D[u][vy] - D[up][u] - D[v][vy] + pd_single
        elif u == vy:
            delta = D[vp][u] + D[v][ux] - D[vp][v] - D[u][ux] + pd_single
        else:
            delta = (D[up][v] + D[v][ux] - D[up][u] - D[u][ux]
                     + D[vp][u] + D[u][vy] - D[vp][v] - D[v][vy] + pd_single)
        if delta < -MOVE_EPS:
            found = 4
        if found < 0 and x != 0 and v != x:
            xs = succ[x]
            dx = dem[x]
            pd = 0.0
            if not intra:
                pd = pen * (self._exc(load1 - du - dx + dv)
                            + self._exc(load2 + du + dx - dv)
                            - self._exc(load1) - self._exc(load2))
            if v == xs:
                delta = (D[up][v] + D[v][u] + D[x][vy]
                         - D[up][u] - D[x][v] - D[v][vy] + pd)
            elif u == vy:
                delta = (D[vp][u] + D[x][v] + D[v][xs]
                         - D[vp][v] - D[v][u] - D[x][xs] + pd)
            else:
                delta = (D[up][v] + D[v][xs] - D[up][u] - D[x][xs]
                         + D[vp][u] + D[x][vy] - D[vp][v] - D[v][vy] + pd)
            if delta < -MOVE_EPS:
                found = 5
            elif y != 0 and v != x and y != u:
                dy = dem[y]
                ys = succ[y]
                pd = 0.0
                if not intra:
                    pd = pen * (self._exc(load1 - du - dx + dv + dy)
                                + self._exc(load2 + du + dx - dv - dy)
                                - self._exc(load1) - self._exc(load2))
                if v == xs:
                    delta = (D[up][v] + D[y][u] + D[x][ys]
                             - D[up][u] - D[x][v] - D[y][ys] + pd)
                elif u == ys:
                    delta = (D[vp][u] + D[x][v] + D[y][xs]
                             - D[vp][v] - D[y][u] - D[x][xs] + pd)
                else:
                    delta = (D[up][v] + D[y][xs] - D[up][u] - D[x][xs]
                             + D[vp][u] + D[x][ys] - D[vp][v] - D[y][ys] + pd)
                if delta < -MOVE_EPS:
                    found = 6
        if found > 0:
            if not do_apply:
                return True
            self._register(F_SWAP)
            if found == 4:
                ra, rb = self._apply_swap(u, v)
            elif found == 5:
                ra, rb = self._apply_swap_pair(u, x, v)
            else:
                ra, rb = self._apply_swap_pairs(u, x, v, y)
            self._finish_move(ra, rb, delta)
            if collect:
                self.time_ns[F_SWAP] += time.perf_counter_ns() - t0
            return True
        if collect:
            t1 = time.perf_counter_ns()
            self.time_ns[F_SWAP] += t1 - t0
            t0 = t1

        # --- intra-route 2-opt -------------------------------------------
        if intra and v != ux and u != vy:
            delta = D[u][v] + D[ux][vy] - D[u][ux] - D[v][vy]
            if delta < -MOVE_EPS:
                if not do_apply:
                    return True
                self._register(F_TWO_OPT)
                ra, rb = self._apply_two_opt(u, v)
                self._finish_move(ra, rb, delta)
                if collect:
                    self.time_ns[F_TWO_OPT] += time.perf_counter_ns() - t0
                return True
        if collect:
            t1 = time.perf_counter_ns()
            self.time_ns[F_TWO_OPT] += t1 - t0
            t0 = t1

        # --- inter-route 2-opt* ------------------------------------------
        if not intra:
            c1u = self.cumload[u]
            c2v = self.cumload[v]
            new1 = c1u + load2 - c2v
            new2 = c2v + load1 - c1u
            delta = (D[u][vy] + D[v][ux] - D[u][ux] - D[v][vy]
                     + pen * (self._exc(new1) + self._exc(new2)
                              - self._exc(load1) - self._exc(load2)))
            variant = -1
            if delta < -MOVE_EPS:
                variant = 0
            else:
                new1 = c1u + c2v
                new2 = (load1 - c1u) + (load2 - c2v)
                delta = (D[u][v] + D[ux][vy] - D[u][ux] - D[v][vy]
                         + pen * (self._exc(new1) + self._exc(new2)
                                  - self._exc(load1) - self._exc(load2)))
                if delta < -MOVE_EPS:
                    variant = 1
            if variant >= 0:
                if not do_apply:
                    return True
                self._register(F_TWO_OPT_STAR)
                ra, rb = self._apply_two_opt_star(u, v, variant)
                self._finish_move(ra, rb, delta)
                if collect:
                    self.time_ns[F_TWO_OPT_STAR] += time.perf_counter_ns() - t0
                return True
        if collect:
            self.time_ns[F_TWO_OPT_STAR] += time.perf_counter_ns() - t0
        return False

    def _try_empty(self, u, e, do_apply):
        """Relocation and route-split moves sending material to an empty
        route slot, the mechanism that lets the descent open new routes."""
        D = self.D
        succ = self.succ
        pred = self.pred
        dem = self.dem
        pen = self.pen
        collect = self._collect and do_apply
        ru = self.route_of[u]
        up = pred[u]
        ux = succ[u]
        du = dem[u]
        load1 = self.r_load[ru]
        if collect:
            t0 = time.perf_counter_ns()
        rem_u = D[up][ux] - D[up][u] - D[u][ux]
        delta = (rem_u + 2.0 * D[0][u]
                 + pen * (self._exc(load1 - du) - self._exc(load1)))
        if delta < -MOVE_EPS:
            if not do_apply:
                return True
            self._register(F_RELOCATE)
            ra, rb = self._apply_relocate(u, 0, e)
            self._finish_move(ra, rb, delta)
            if collect:
                self.time_ns[F_RELOCATE] += time.perf_counter_ns() - t0
            return True
        x = ux
        if x != 0:
            xs = succ[x]
            dx = dem[x]
            delta = (D[up][xs] - D[up][u] - D[x][xs] + D[0][u] + D[x][0]
                     + pen * (self._exc(load1 - du - dx) + self._exc(du + dx)
                              - self._exc(load1)))
            if delta < -MOVE_EPS:
                if not do_apply:
                    return True
                self._register(F_RELOCATE)
                ra, rb = self._apply_relocate_pair(u, x, 0, e, False)
                self._finish_move(ra, rb, delta)
                if collect:
                    self.time_ns[F_RELOCATE] += time.perf_counter_ns() - t0
                return True
        if collect:
            t1 = time.perf_counter_ns()
            self.time_ns[F_RELOCATE] += t1 - t0
            t0 = t1
        if x != 0:
            # tail split via the straight 2-opt* against the empty route
            c1u = self.cumload[u]
            delta = (D[u][0] + D[0][x] - D[u][x]
                     + pen * (self._exc(c1u) + self._exc(load1 - c1u)
                              - self._exc(load1)))
            if delta < -MOVE_EPS:
                if not do_apply:
                    return True
                self._register(F_TWO_OPT_STAR)
                self._begin_move()
                succ[u] = 0
                self.r_first[e] = x
                self._finish_move(ru, e, delta)
                if collect:
                    self.time_ns[F_TWO_OPT_STAR] += time.perf_counter_ns() - t0
                return True
        if collect:
            self.time_ns[F_TWO_OPT_STAR] += time.perf_counter_ns() - t0
        return False

    def _explore_classical(self, u):
        prev_test = self.last_tested[u]
        self.last_tested[u] = self.move_counter
        ru = self.route_of[u]
        r_mod = self.r_mod
        for v in self.nb[u]:
            if prev_test > r_mod[ru] and prev_test > r_mod[self.route_of[v]]:
                if self._debug & 2 and self._try_pair(u, v, False):
                    self.debug_stamp_violations += 1
                continue
            if self._try_pair(u, v, True):
                return True
        e = self.first_empty
        if e >= 0 and self.r_count[ru] > 1:
            if prev_test > r_mod[ru] and prev_test > r_mod[e]:
                if self._debug & 2 and self._try_empty(u, e, False):
                    self.debug_stamp_violations += 1
                return False
            if self._try_empty(u, e, True):
                return True
        return False

    # ------------------------------------------------------------------
    # best-position exchange between two routes (the starred swap)

    def _ensure_top3(self, v, r):
        stamp_idx = v * self.m + r
        if self.t3_stamp[stamp_idx] > self.r_mod[r]:
            return
        D = self.D
        succ = self.succ
        base = stamp_idx * 3
        cost = self.t3_cost
        tprev = self.t3_prev
        tnext = self.t3_next
        cost[base] = cost[base + 1] = cost[base + 2] = INF
        tprev[base] = tprev[base + 1] = tprev[base + 2] = 0
        tnext[base] = tnext[base + 1] = tnext[base + 2] = 0
        rowv = D[v]
        p = 0
        c = self.r_first[r]
        while True:
            d = rowv[p] + rowv[c] - D[p][c]
            if d < cost[base + 2]:
                if d < cost[base]:
                    cost[base + 2] = cost[base + 1]
                    tprev[base + 2] = tprev[base + 1]
                    tnext[base + 2] = tnext[base + 1]
                    cost[base + 1] = cost[base]
                    tprev[base + 1] = tprev[base]
                    tnext[base + 1] = tnext[base]
                    cost[base] = d
                    tprev[base] = p
                    tnext[base] = c
                elif d < cost[base + 1]:
                    cost[base + 2] = cost[base + 1]
                    tprev[base + 2] = tprev[base + 1]
                    tnext[base + 2] = tnext[base + 1]
                    cost[base + 1] = d
                    tprev[base + 1] = p
                    tnext[base + 1] = c
                else:
                    cost[base + 2] = d
                    tprev[base + 2] = p
                    tnext[base + 2] = c
            if c == 0:
                break
            p = c
            c = succ[c]
        self.t3_stamp[stamp_idx] = self.move_counter + 1

    def _swap_star_best(self, r, r2):
        """Best improving exchange between routes r and r2, where each moved
        customer lands at its cheapest feasible position (in place of the
        other, or one of the cached top-3 insertions)."""
        D = self.D
        succ = self.succ
        pred = self.pred
        dem = self.dem
        pen = self.pen
        m = self.m
        c = self.r_first[r]
        while c:
            self._ensure_top3(c, r2)
            c = succ[c]
        c = self.r_first[r2]
        while c:
            self._ensure_top3(c, r)
            c = succ[c]
        load1 = self.r_load[r]
        load2 = self.r_load[r2]
        base_exc = self._exc(load1) + self._exc(load2)
        best_delta = -MOVE_EPS
        best = None
        t3c = self.t3_cost
        t3p = self.t3_prev
        t3n = self.t3_next
        evals = 0
        v = self.r_first[r]
        while v:
            pv = pred[v]
            sv = succ[v]
            rem_v = D[pv][v] + D[v][sv] - D[pv][sv]
            dv = dem[v]
            ibase = (v * m + r2) * 3
            v2 = self.r_first[r2]
            while v2:
                evals += 1
                p2 = pred[v2]
                s2 = succ[v2]
                dv2 = dem[v2]
                # cheapest insertion of v into r2, v2 removed
                ins_v = D[p2][v] + D[v][s2] - D[p2][s2]
                prev_v = p2
                for k in range(3):
                    if t3p[ibase + k] != v2 and t3n[ibase + k] != v2:
                        cand = t3c[ibase + k]
                        if cand < ins_v:
                            ins_v = cand
                            prev_v = t3p[ibase + k]
                        break
                # cheapest insertion of v2 into r, v removed
                rem_v2 = D[p2][v2] + D[v2][s2] - D[p2][s2]
                ins_v2 = D[pv][v2] + D[v2][sv] - D[pv][sv]
                prev_v2 = pv
                jbase = (v2 * m + r) * 3
                for k in range(3):
                    if t3p[jbase + k] != v and t3n[jbase + k] != v:
                        cand = t3c[jbase + k]
                        if cand < ins_v2:
                            ins_v2 = cand
                            prev_v2 = t3p[jbase + k]
                        break
                delta = (ins_v - rem_v) + (ins_v2 - rem_v2)
                delta += pen * (self._exc(load1 - dv + dv2)
                                + self._exc(load2 + dv - dv2) - base_exc)
                if delta < best_delta:
                    best_delta = delta
                    best = (v, v2, prev_v, prev_v2)
                v2 = succ[v2]
            v = succ[v]
        self.ss_evals += evals
        return best_delta, best

    def _apply_swap_star(self, r, r2, v, v2, prev_v, prev_v2, delta):
        self._begin_move()
        succ = self.succ
        pred = self.pred
        up = pred[v]
        sx = succ[v]
        if up:
            succ[up] = sx
        else:
            self.r_first[r] = sx
        up = pred[v2]
        sx = succ[v2]
        if up:
            succ[up] = sx
        else:
            self.r_first[r2] = sx
        if prev_v == 0:
            succ[v] = self.r_first[r2]
            self.r_first[r2] = v
        else:
            succ[v] = succ[prev_v]
            succ[prev_v] = v
        if prev_v2 == 0:
            succ[v2] = self.r_first[r]
            self.r_first[r] = v2
        else:
            succ[v2] = succ[prev_v2]
            succ[prev_v2] = v2
        self._register(F_SWAP_STAR)
        self._finish_move(r, r2, delta)

    def _swap_star_sweep(self, do_apply=True):
        improved = False
        m = self.m
        collect = self._collect
        for r in range(m):
            if self.r_count[r] == 0:
                continue
            for r2 in range(r + 1, m):
                if self.r_count[r2] == 0:
                    continue
                if not self._sectors_overlap(r, r2):
                    continue
                pt = self.pair_tested[r * m + r2]
                if pt > self.r_mod[r] and pt > self.r_mod[r2]:
                    if self._debug & 2:
                        d, mv = self._swap_star_best(r, r2)
                        if mv is not None:
                            self.debug_stamp_violations += 1
                    continue
                self.pair_tested[r * m + r2] = self.move_counter
                if collect:
                    t0 = time.perf_counter_ns()
                delta, mv = self._swap_star_best(r, r2)
                if mv is not None and do_apply:
                    self._apply_swap_star(r, r2, mv[0], mv[1], mv[2], mv[3],
                                          delta)
                    improved = True
                if collect:
                    self.time_ns[F_SWAP_STAR] += time.perf_counter_ns() - t0
        return improved

    # ------------------------------------------------------------------
    # descent driver

    def descend(self, flat, offsets, penalty, seed, swap_star=True,
                collect_stats=False, debug=0):
        """Run the route-improvement descent to a local optimum.

        Customers are visited in a fresh random order each pass; the starred
        swap sweep joins in once a classical pass finds nothing and stays
        active afterwards. Terminates when a full pass applies no move.
        """
        self._reset_stats()
        self._collect = collect_stats
        self._debug = debug
        self.pen = float(penalty)
        self._rng = int(seed) & MASK64
        self._load(list(map(int, flat)), list(map(int, offsets)))
        swap_active = False
        while True:
            self._shuffle_order()
            improved = False
            for u in self._order:
                if self._explore_classical(u):
                    improved = True
            if not improved:
                swap_active = True
            ss_improved = False
            if swap_active and swap_star:
                ss_improved = self._swap_star_sweep()
            if not improved and not ss_improved:
                break
            self._pass += 1
        return self._extract()

    # ------------------------------------------------------------------
    # evaluation-only entry points used by tests and the module facades

    def classical_step(self, flat, offsets, penalty, u):
        """Load a solution, explore customer u once, return (applied, result)."""
        self._reset_stats()
        self.pen = float(penalty)
        self._load(list(map(int, flat)), list(map(int, offsets)))
        applied = self._explore_classical(int(u))
        return applied, self._extract()

    def top3_positions(self, v, route, penalty=0.0):
        """Three cheapest insertion positions of v into an explicit route."""
        flat = list(map(int, route))
        offsets = [0, len(flat)]
        self._reset_stats()
        self.pen = float(penalty)
        self._load(flat, offsets)
        self._ensure_top3(int(v), 0)
        base = (int(v) * self.m + 0) * 3
        return [(self.t3_prev[base + k], self.t3_next[base + k],
                 self.t3_cost[base + k]) for k in range(3)]

    def swap_star_eval(self, route_a, route_b, penalty):
        """Best starred-swap move between two explicit routes, not applied.

        Returns (delta, move) where move is None or a tuple
        (v, v2, prev_v, prev_v2).
        """
        flat = list(map(int, route_a)) + list(map(int, route_b))
        offsets = [0, len(route_a), len(route_a) + len(route_b)]
        self._reset_stats()
        self.pen = float(penalty)
        self._load(flat, offsets)
        return self._swap_star_best(0, 1)
