"""Problem instances: CVRPLIB parsing and precomputed geometry.

An :class:`Instance` holds everything the solver ever reads about a problem:
integer-rounded distance matrix, demands, capacity, fleet bound, granular
neighbor lists and discretized polar angles about the depot. Vertex 0 is the
depot, customers are 1..n. Instances are immutable after construction and can
be shared freely between concurrent runs.
"""

from __future__ import annotations

import math
import re

import numpy as np

DEFAULT_GAMMA = 20

# 2**16 buckets over a full turn; integer angles make sector tests exact.
ANGLE_STEPS = 65536


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance files."""

    def __init__(self, message, line_no=None, line=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
            if line:
                message += f" ({line.strip()!r})"
        super().__init__(message)
        self.line_no = line_no


def distance(a, b, rounding="round"):
    """Edge cost between two coordinate pairs under the given convention.

    ``round`` is round-half-up to the nearest integer (the convention of the
    classical 100-instance benchmark set), ``floor`` truncates, ``none``
    keeps the exact Euclidean value. This is the single place defining the
    convention; the matrix builder mirrors it.
    """
    d = math.hypot(a[0] - b[0], a[1] - b[1])
    if rounding == "round":
        return math.floor(d + 0.5)
    if rounding == "floor":
        return math.floor(d)
    if rounding == "none":
        return d
    raise ValueError(f"unknown rounding convention: {rounding!r}")


def _distance_matrix(coords, rounding):
    dx = coords[:, 0][:, None] - coords[:, 0][None, :]
    dy = coords[:, 1][:, None] - coords[:, 1][None, :]
    d = np.hypot(dx, dy)
    if rounding == "round":
        return np.floor(d + 0.5)
    if rounding == "floor":
        return np.floor(d)
    if rounding == "none":
        return d
    raise ValueError(f"unknown rounding convention: {rounding!r}")


def build_neighbors(dist, gamma):
    """Granular neighbor lists: the gamma nearest customers of each customer.

    Returns an int32 array of shape (n+1, min(gamma, n-1)); row 0 (depot) is
    all zeros and unused. Lists exclude the depot and the customer itself,
    are sorted by nondecreasing distance, ties broken by ascending index.
    """
    n = dist.shape[0] - 1
    k = min(gamma, n - 1)
    out = np.zeros((n + 1, max(k, 0)), dtype=np.int32)
    if k <= 0:
        return out
    for i in range(1, n + 1):
        order = np.argsort(dist[i, 1:], kind="stable") + 1  # stable = index ties
        order = order[order != i]
        out[i] = order[:k]
    return out


def polar_angles(coords):
    """Angle of each vertex about the depot, discretized to [0, 65535].

    Customers coincident with the depot get angle 0 and participate normally.
    """
    rel = coords - coords[0]
    a = np.arctan2(rel[:, 1], rel[:, 0])
    a = np.where(a < 0.0, a + 2.0 * math.pi, a)
    steps = np.floor(a * (ANGLE_STEPS / (2.0 * math.pi)))
    return np.clip(steps, 0, ANGLE_STEPS - 1).astype(np.int32)


def polar_angle(inst, v):
    """Discretized polar angle of customer ``v`` (see :func:`polar_angles`)."""
    return int(inst.polar[v])


class Instance:
    """Immutable CVRP problem data with precomputed geometry.

    Attributes
    ----------
    n : number of customers (depot excluded)
    coords : (n+1, 2) float array, vertex 0 is the depot
    demand : (n+1,) float array of integral demands, demand[0] == 0
    capacity : vehicle capacity Q
    fleet_bound : maximum number of routes m
    dist : (n+1, n+1) symmetric cost matrix (integral under rounding)
    neighbors : (n+1, min(gamma, n-1)) int32 granular neighbor lists
    polar : (n+1,) int32 polar angles about the depot in [0, 65535]
    """

    def __init__(self, name, coords, demand, capacity, fleet_bound,
                 rounding="round", gamma=DEFAULT_GAMMA):
        coords = np.asarray(coords, dtype=np.float64)
        demand = np.asarray(demand, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise InstanceError("coords must be (n+1, 2)")
        if demand.shape[0] != coords.shape[0]:
            raise InstanceError("demand and coords length mismatch")
        if capacity <= 0:
            raise InstanceError("capacity must be positive")
        if demand[0] != 0:
            raise InstanceError("depot demand must be zero")
        if np.any(demand < 0):
            raise InstanceError("demands must be nonnegative")
        over = np.nonzero(demand > capacity)[0]
        if over.size:
            raise InstanceError(
                f"demand of customer {over[0]} exceeds capacity {capacity}")
        if fleet_bound < 1:
            raise InstanceError("fleet bound must be at least 1")

        self.name = name
        self.n = coords.shape[0] - 1
        self.coords = coords
        self.demand = demand
        self.capacity = float(capacity)
        self.fleet_bound = int(fleet_bound)
        self.rounding = rounding
        self.gamma = int(gamma)
        self.dist = _distance_matrix(coords, rounding)
        self.neighbors = build_neighbors(self.dist, gamma)
        self.polar = polar_angles(coords)
        for arr in (self.coords, self.demand, self.dist, self.neighbors,
                    self.polar):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"Instance({self.name!r}, n={self.n}, Q={self.capacity:g}, "
                f"m={self.fleet_bound})")


def default_fleet_bound(demand, capacity):
    """Bin-packing lower bound plus slack, used when the file names no bound."""
    total = float(np.sum(demand))
    return int(math.ceil(total / capacity)) + 2


_KV_RE = re.compile(r"^\s*([A-Z_][A-Z_0-9]*)\s*:?\s*(.*?)\s*$")


def parse_instance(text, fleet_bound=None, rounding="round",
                   gamma=DEFAULT_GAMMA, name=None):
    """Parse a CVRPLIB/TSPLIB-style document into an :class:`Instance`.

    Only EUC_2D instances are supported. The fleet bound is taken from the
    ``fleet_bound`` argument if given, else from a trailing ``-k<m>`` token in
    the NAME field, else from :func:`default_fleet_bound`. The EOF token is
    optional and extra whitespace is tolerated.
    """
    header = {}
    coords = {}
    demands = {}
    depots = []
    section = None
    dim_line = None

    lines = text.splitlines()
    for idx, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        upper = line.split()[0].upper()
        if upper.endswith("_SECTION") or upper == "DEPOT_SECTION":
            key = upper if ":" not in line else line.split(":")[0].strip()
            if key in ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"):
                section = key
                continue
            raise InstanceError(f"unsupported section {key}", idx, raw)

        if section is None:
            m = _KV_RE.match(line)
            if not m:
                raise InstanceError("malformed header line", idx, raw)
            header[m.group(1)] = m.group(2)
            if m.group(1) == "DIMENSION":
                dim_line = idx
            continue

        fields = line.split()
        if section == "NODE_COORD_SECTION":
            if len(fields) != 3:
                raise InstanceError("expected 'id x y'", idx, raw)
            try:
                vid, x, y = int(fields[0]), float(fields[1]), float(fields[2])
            except ValueError:
                raise InstanceError("bad coordinate entry", idx, raw) from None
            if vid in coords:
                raise InstanceError(f"duplicate vertex id {vid}", idx, raw)
            coords[vid] = (x, y)
        elif section == "DEMAND_SECTION":
            if len(fields) != 2:
                raise InstanceError("expected 'id demand'", idx, raw)
            try:
                vid, q = int(fields[0]), float(fields[1])
            except ValueError:
                raise InstanceError("bad demand entry", idx, raw) from None
            if vid in demands:
                raise InstanceError(f"duplicate demand for vertex {vid}", idx, raw)
            demands[vid] = (q, idx, raw)
        elif section == "DEPOT_SECTION":
            for f in fields:
                v = int(float(f))
                if v == -1:
                    section = "DONE"
                    break
                depots.append(v)

    for key in ("NAME", "DIMENSION", "CAPACITY"):
        if key not in header:
            raise InstanceError(f"missing {key} field")
    ewt = header.get("EDGE_WEIGHT_TYPE", "").upper()
    if ewt != "EUC_2D":
        raise InstanceError(f"unsupported EDGE_WEIGHT_TYPE {ewt or '<absent>'}")

    try:
        dim = int(header["DIMENSION"])
    except ValueError:
        raise InstanceError("DIMENSION is not an integer", dim_line) from None
    try:
        capacity = float(header["CAPACITY"])
    except ValueError:
        raise InstanceError("CAPACITY is not a number") from None
    if capacity <= 0:
        raise InstanceError(f"nonpositive capacity {capacity:g}")
    if not depots:
        raise InstanceError("missing or empty DEPOT_SECTION")
    if len(depots) > 1:
        raise InstanceError(f"multiple depots listed: {depots}")
    depot = depots[0]

    ids = sorted(coords)
    if len(ids) != dim:
        raise InstanceError(
            f"DIMENSION says {dim} vertices, found {len(ids)} coordinates")
    if depot not in coords:
        raise InstanceError(f"depot {depot} has no coordinates")

    # Renumber: depot becomes 0, customers keep file order as 1..n.
    order = [depot] + [v for v in ids if v != depot]
    arr_coords = np.array([coords[v] for v in order], dtype=np.float64)
    arr_demand = np.zeros(dim, dtype=np.float64)
    for internal, vid in enumerate(order):
        if vid not in demands:
            raise InstanceError(f"vertex {vid} has no demand entry")
        q, line_no, raw = demands[vid]
        if q < 0:
            raise InstanceError("negative demand", line_no, raw)
        if internal == 0:
            if q != 0:
                raise InstanceError("depot demand must be zero", line_no, raw)
        elif q > capacity:
            raise InstanceError(
                f"demand {q:g} exceeds capacity {capacity:g}", line_no, raw)
        arr_demand[internal] = q
    extra = set(demands) - set(coords)
    if extra:
        raise InstanceError(f"demand for unknown vertex {min(extra)}")

    inst_name = name if name is not None else header["NAME"]
    if fleet_bound is None:
        m = re.search(r"-k(\d+)\s*$", header["NAME"])
        if m:
            fleet_bound = int(m.group(1))
        else:
            fleet_bound = default_fleet_bound(arr_demand, capacity)

    return Instance(inst_name, arr_coords, arr_demand, capacity, fleet_bound,
                    rounding=rounding, gamma=gamma)


def load_instance(path, **kwargs):
    """Read and parse an instance file."""
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read(), **kwargs)
