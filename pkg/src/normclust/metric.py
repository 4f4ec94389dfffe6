"""Finite metric spaces, clustering instances, distance rounding and generators.

Point ids: facilities are ``0 .. nf-1`` and clients ``nf .. nf+nc-1``.  The
algorithms index clients locally (``0 .. nc-1``), :meth:`Instance.d` takes
local indices on both sides.

Distances are ints or Fractions.  ``INF`` (``math.inf``) marks removed
edges; comparisons against it behave as expected and sums saturate.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from normclust.norms import NormSpec, as_exact, rat_str
from normclust.rng import derive_rng

INF = math.inf


def is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def parse_distance(x):
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity"):
        return INF
    if isinstance(x, float) and math.isinf(x):
        return INF
    return as_exact(x)


def distance_str(x) -> str | int:
    if is_inf(x):
        return "inf"
    x = as_exact(x)
    return x if isinstance(x, int) else rat_str(x)


@dataclass(frozen=True)
class MetricSpace:
    dist: tuple[tuple, ...]

    def __post_init__(self):
        rows = tuple(tuple(parse_distance(x) for x in row) for row in self.dist)
        n = len(rows)
        if n == 0:
            raise ValueError("empty metric space")
        if any(len(r) != n for r in rows):
            raise ValueError("distance matrix must be square")
        object.__setattr__(self, "dist", rows)

    @property
    def point_count(self) -> int:
        return len(self.dist)

    def __getitem__(self, ab):
        a, b = ab
        return self.dist[a][b]


class Violation(NamedTuple):
    kind: str  # "diagonal" | "negative" | "symmetry" | "triangle"
    indices: tuple[int, ...]
    detail: str


def validate_metric(space: MetricSpace) -> list[Violation]:
    d = space.dist
    n = space.point_count
    out: list[Violation] = []
    for a in range(n):
        if d[a][a] != 0:
            out.append(Violation("diagonal", (a,), f"d[{a}][{a}] = {d[a][a]} != 0"))
    for a in range(n):
        for b in range(n):
            if d[a][b] < 0:
                out.append(Violation("negative", (a, b), f"d[{a}][{b}] = {d[a][b]} < 0"))
    for a in range(n):
        for b in range(a + 1, n):
            if d[a][b] != d[b][a]:
                out.append(
                    Violation("symmetry", (a, b), f"d[{a}][{b}] = {d[a][b]} != d[{b}][{a}] = {d[b][a]}")
                )
    for a in range(n):
        for b in range(n):
            if b == a or is_inf(d[a][b]):
                continue
            for c in range(n):
                if c == a or c == b or is_inf(d[b][c]) or is_inf(d[a][c]):
                    continue
                if d[a][c] > d[a][b] + d[b][c]:
                    out.append(
                        Violation(
                            "triangle",
                            (a, b, c),
                            f"d[{a}][{c}] = {d[a][c]} > d[{a}][{b}] + d[{b}][{c}] = {d[a][b] + d[b][c]}",
                        )
                    )
    return out


@dataclass(frozen=True)
class Instance:
    space: MetricSpace
    n_facilities: int
    n_clients: int
    k: int
    capacities: tuple[int, ...]
    norm: NormSpec = field(default_factory=NormSpec.l1)
    linf_budget: object = None

    def __post_init__(self):
        if self.n_facilities < 1 or self.n_clients < 0:
            raise ValueError("need at least one facility")
        if self.n_facilities + self.n_clients != self.space.point_count:
            raise ValueError("facilities and clients must partition the points")
        if not 1 <= self.k <= self.n_facilities:
            raise ValueError(f"k={self.k} outside [1, {self.n_facilities}]")
        caps = tuple(int(u) for u in self.capacities)
        if len(caps) != self.n_facilities or any(u < 0 for u in caps):
            raise ValueError("one nonnegative capacity per facility")
        object.__setattr__(self, "capacities", caps)
        if self.linf_budget is not None:
            object.__setattr__(self, "linf_budget", as_exact(self.linf_budget))

    # ids -------------------------------------------------------------
    @property
    def facilities(self) -> range:
        return range(self.n_facilities)

    @property
    def clients(self) -> range:
        return range(self.n_clients)

    def client_point(self, j: int) -> int:
        return self.n_facilities + j

    def d(self, i: int, j: int):
        """Distance between facility i and client j (local indices)."""
        return self.space.dist[i][self.n_facilities + j]

    def dp(self, a: int, b: int):
        """Distance between point ids."""
        return self.space.dist[a][b]

    @property
    def uncapacitated(self) -> bool:
        return all(u >= self.n_clients for u in self.capacities)

    # cached matrices -------------------------------------------------
    @cached_property
    def fc(self) -> tuple[tuple, ...]:
        nf = self.n_facilities
        return tuple(tuple(row[nf:]) for row in self.space.dist[:nf])

    @cached_property
    def scale(self) -> int:
        """Common denominator of all finite distances."""
        den = 1
        for row in self.space.dist:
            for x in row:
                if isinstance(x, Fraction):
                    den = math.lcm(den, x.denominator)
        return den

    @cached_property
    def fc_int(self) -> np.ndarray:
        """Facility x client distances times :attr:`scale` as int64; -1 marks INF."""
        s = self.scale
        out = np.full((self.n_facilities, self.n_clients), -1, dtype=np.int64)
        for i, row in enumerate(self.fc):
            for j, x in enumerate(row):
                if not is_inf(x):
                    out[i, j] = int(x * s)
        return out

    @cached_property
    def fc_finite(self) -> np.ndarray:
        return self.fc_int >= 0

    @cached_property
    def max_finite_distance(self):
        vals = [x for row in self.space.dist for x in row if not is_inf(x)]
        return max(vals, default=0)

    def distinct_fc_distances(self) -> list:
        return sorted({x for row in self.fc for x in row if not is_inf(x)})

    def with_(self, **kw) -> "Instance":
        return replace(self, **kw)

    def with_capacity_all(self, u: int) -> "Instance":
        return replace(self, capacities=(u,) * self.n_facilities)

    def uncapacitated_copy(self) -> "Instance":
        return self.with_capacity_all(max(self.n_clients, 1))

    # json ------------------------------------------------------------
    def to_json(self) -> dict:
        out = {
            "n_facilities": self.n_facilities,
            "n_clients": self.n_clients,
            "dist": [[distance_str(x) for x in row] for row in self.space.dist],
            "capacities": list(self.capacities),
            "k": self.k,
            "norm": self.norm.to_json(),
        }
        if self.linf_budget is not None:
            out["linf_budget"] = distance_str(self.linf_budget)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        nf, nc = int(obj["n_facilities"]), int(obj["n_clients"])
        dist = obj["dist"]
        if dist and not isinstance(dist[0], list):  # flat row-major
            m = nf + nc
            dist = [dist[r * m : (r + 1) * m] for r in range(m)]
        lb = obj.get("linf_budget")
        return cls(
            space=MetricSpace(tuple(tuple(r) for r in dist)),
            n_facilities=nf,
            n_clients=nc,
            k=int(obj["k"]),
            capacities=tuple(int(u) for u in obj["capacities"]),
            norm=NormSpec.from_json(obj.get("norm", {"kind": "l1"})),
            linf_budget=None if lb is None else parse_distance(lb),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]


def ball(inst: Instance, domain: Sequence[int], center: int, radius) -> list[int]:
    """Points of ``domain`` (point ids) within ``radius`` of ``center`` (point id)."""
    n = inst.space.point_count
    if not 0 <= center < n:
        raise KeyError(f"unknown point id {center}")
    if is_inf(radius):
        raise ValueError("radius must be finite")
    row = inst.space.dist[center]
    out = []
    for u in domain:
        if not 0 <= u < n:
            raise KeyError(f"unknown point id {u}")
        x = row[u]
        if not is_inf(x) and x <= radius:
            out.append(u)
    return out


# ---------------------------------------------------------------------------
# distance rounding


def shortest_path_completion(w: list[list]) -> list[list]:
    """All-pairs shortest paths (Floyd-Warshall) over exact weights, INF = no edge."""
    n = len(w)
    d = [row[:] for row in w]
    for a in range(n):
        d[a][a] = 0
    for m in range(n):
        dm = d[m]
        for a in range(n):
            dam = d[a][m]
            if is_inf(dam):
                continue
            da = d[a]
            for b in range(n):
                x = dam + dm[b]
                if x < da[b]:
                    da[b] = x
    return d


def rounding_unit(n: int, L_guess, eps):
    return as_exact(Fraction(as_exact(eps)) * as_exact(L_guess) / (3 * n * n))


def round_and_scale(inst: Instance, L_guess, eps) -> Instance:
    """Drop F-C edges longer than L_guess, round the rest down to multiples of
    u = eps*L/(3n^2), complete by shortest paths over the bipartite graph and
    express distances in units of u (so they are integers).

    n is the number of clients.
    """
    eps = as_exact(eps)
    L_guess = as_exact(L_guess)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if L_guess <= 0:
        raise ValueError("L_guess must be positive")
    n = max(inst.n_clients, 1)
    unit = rounding_unit(n, L_guess, eps)
    nf, m = inst.n_facilities, inst.space.point_count
    w = [[INF] * m for _ in range(m)]
    for i in range(nf):
        for j in range(nf, m):
            x = inst.space.dist[i][j]
            if is_inf(x) or x > L_guess:
                continue
            q = math.floor(x / unit)  # integer multiple count
            w[i][j] = w[j][i] = q
    d = shortest_path_completion(w)
    return replace(inst, space=MetricSpace(tuple(tuple(r) for r in d)), linf_budget=_scale_budget(inst, unit))


def _scale_budget(inst: Instance, unit):
    if inst.linf_budget is None:
        return None
    return math.floor(inst.linf_budget / unit)


# ---------------------------------------------------------------------------
# generators

GENERATOR_KINDS = ("euclidean", "random_metric", "clustered")


def _split_sizes(params: dict) -> tuple[int, int]:
    if "n_facilities" in params or "n_clients" in params:
        nf = int(params.get("n_facilities", 4))
        nc = int(params.get("n_clients", 6))
    else:
        n = int(params.get("n", 10))
        nf = max(1, n // 2)
        nc = n - nf
    if nf < 1 or nc < 1:
        raise ValueError("need at least one facility and one client")
    if nf + nc > 64:
        raise ValueError("desk-scale generator supports at most 64 points")
    return nf, nc


def _capacities(params: dict, nf: int, nc: int, rng: np.random.Generator) -> tuple[int, ...]:
    cap = params.get("capacity")
    if cap is None or cap == "uncapacitated":
        return (nc,) * nf
    if isinstance(cap, int):
        return (cap,) * nf
    lo, hi = cap
    return tuple(int(x) for x in rng.integers(int(lo), int(hi) + 1, size=nf))


def _ceil_euclid(points: np.ndarray, scale: int) -> list[list[int]]:
    # ceil(scale * euclidean) is still a metric: ceil(a+b) <= ceil(a)+ceil(b)
    diff = points[:, None, :] - points[None, :, :]
    raw = np.sqrt((diff**2).sum(-1)) * scale
    d = np.ceil(raw - 1e-9).astype(np.int64)
    np.fill_diagonal(d, 0)
    d = np.maximum(d, d.T)
    # guard against float noise at integer boundaries
    return shortest_path_completion(d.tolist())


def generate_instance(kind: str, params: dict | None = None, seed: int = 0) -> Instance:
    """Random desk-scale instance.

    params: ``n`` (total points, split in half) or ``n_facilities``/``n_clients``;
    ``k`` (default 2); ``capacity`` (None, an int, or ``[lo, hi]``);
    ``norm`` (NormSpec or string); euclidean: ``dim``, ``scale``;
    random_metric: ``max_weight``, ``edge_prob``; clustered: ``centers``,
    ``spread``, ``scale``.
    """
    params = dict(params or {})
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unknown generator {kind!r}")
    rng = derive_rng(seed, "generate", kind)
    nf, nc = _split_sizes(params)
    k = int(params.get("k", min(2, nf)))
    if not 1 <= k <= nf:
        raise ValueError("k outside [1, n_facilities]")
    m = nf + nc
    if kind == "euclidean":
        dim = int(params.get("dim", 2))
        scale = int(params.get("scale", 10))
        if dim < 1 or scale < 1:
            raise ValueError("dim and scale must be positive")
        pts = rng.random((m, dim))
        dist = _ceil_euclid(pts, scale)
    elif kind == "random_metric":
        max_w = int(params.get("max_weight", 10))
        p = float(params.get("edge_prob", 0.6))
        if max_w < 1 or not 0 < p <= 1:
            raise ValueError("bad random_metric params")
        w = [[INF] * m for _ in range(m)]
        order = rng.permutation(m)
        for a in range(m):  # spanning path keeps the graph connected
            if a + 1 < m:
                u, v = int(order[a]), int(order[a + 1])
                x = int(rng.integers(1, max_w + 1))
                w[u][v] = w[v][u] = x
        for a in range(m):
            for b in range(a + 1, m):
                if rng.random() < p:
                    x = int(rng.integers(1, max_w + 1))
                    if x < w[a][b]:
                        w[a][b] = w[b][a] = x
        dist = shortest_path_completion(w)
    else:
        centers = int(params.get("centers", 3))
        spread = float(params.get("spread", 0.1))
        scale = int(params.get("scale", 100))
        dim = int(params.get("dim", 2))
        if centers < 1 or centers > nf or not 0 < spread < 1:
            raise ValueError("bad clustered params")
        ctr = rng.random((centers, dim))
        # facilities and clients round-robin over the centers
        lab = np.concatenate([np.arange(nf) % centers, np.arange(nc) % centers])
        pts = ctr[lab] + spread * (rng.random((m, dim)) - 0.5)
        dist = _ceil_euclid(pts, scale)
    norm = params.get("norm", NormSpec.l1())
    if isinstance(norm, str):
        norm = NormSpec.parse(norm)
    space = MetricSpace(tuple(tuple(r) for r in dist))
    return Instance(space, nf, nc, k, _capacities(params, nf, nc, rng), norm, params.get("linf_budget"))


def instance_from_fc(fc: Sequence[Sequence], k: int, capacities=None, norm: NormSpec | None = None) -> Instance:
    """Build an instance from a facility x client matrix by shortest-path completion."""
    nf, nc = len(fc), len(fc[0])
    m = nf + nc
    w = [[INF] * m for _ in range(m)]
    for i in range(nf):
        for j in range(nc):
            x = parse_distance(fc[i][j])
            w[i][nf + j] = w[nf + j][i] = x
    d = shortest_path_completion(w)
    caps = tuple(capacities) if capacities is not None else (nc,) * nf
    return Instance(MetricSpace(tuple(tuple(r) for r in d)), nf, nc, k, caps, norm or NormSpec.l1())
