"""Numeric knobs shared across the solver and both search engines."""

# A move is accepted only if it improves the penalized cost by more than this.
MOVE_EPS = 1e-6

# Split considers a route arc only while its load stays below this multiple of
# the vehicle capacity; beyond it, heavily penalized arcs are never useful and
# would only bloat the shortest-path graph.
SPLIT_LOAD_FACTOR = 1.5

# Clamp range for the adaptive load-penalty coefficient.
PENALTY_MIN = 0.1
PENALTY_MAX = 1e5

# Neighborhood families reported by the instrumentation counters.
FAMILIES = ("relocate", "swap", "two_opt", "two_opt_star", "swap_star")
