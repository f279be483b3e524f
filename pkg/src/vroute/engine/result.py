"""Result containers shared by the compiled and pure-Python engines."""

import numpy as np


class DescentResult:
    """Outcome of one local-search descent.

    ``flat``/``offsets`` encode the nonempty routes in slot order; route ``k``
    is ``flat[offsets[k]:offsets[k+1]]``. ``succ``/``pred`` give each
    customer's neighbors within its route (0 = depot on both ends).
    Instrumentation arrays are indexed by neighborhood family in the order of
    :data:`vroute.constants.FAMILIES`.
    """

    __slots__ = (
        "flat", "offsets", "succ", "pred", "loads",
        "total_distance", "capacity_excess",
        "applied_first", "applied_later", "time_ns",
        "swap_star_evals", "passes", "moves",
        "debug_delta_err", "debug_stamp_violations",
    )

    def __init__(self, flat, offsets, succ, pred, loads, total_distance,
                 capacity_excess, applied_first, applied_later, time_ns,
                 swap_star_evals, passes, moves, debug_delta_err,
                 debug_stamp_violations):
        self.flat = np.asarray(flat, dtype=np.int32)
        self.offsets = np.asarray(offsets, dtype=np.int32)
        self.succ = np.asarray(succ, dtype=np.int32)
        self.pred = np.asarray(pred, dtype=np.int32)
        self.loads = np.asarray(loads, dtype=np.float64)
        self.total_distance = float(total_distance)
        self.capacity_excess = float(capacity_excess)
        self.applied_first = np.asarray(applied_first, dtype=np.int64)
        self.applied_later = np.asarray(applied_later, dtype=np.int64)
        self.time_ns = np.asarray(time_ns, dtype=np.int64)
        self.swap_star_evals = int(swap_star_evals)
        self.passes = int(passes)
        self.moves = int(moves)
        self.debug_delta_err = float(debug_delta_err)
        self.debug_stamp_violations = int(debug_stamp_violations)

    @property
    def n_routes(self):
        return len(self.offsets) - 1

    def routes(self):
        off = self.offsets
        return [self.flat[off[k]:off[k + 1]].tolist()
                for k in range(len(off) - 1)]
