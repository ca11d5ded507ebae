"""Orientation, forks, bounded-trace enumeration, attracting subgraphs and verdicts.

The search for regions of trace at most K is made exhaustive by two pruning
certificates, both resting on one growth estimate: at a vertex (a, b; old, new)
with |a|, |b| >= C and |new| >= |old|, one has C/4 max(|a|, |b|) < |new|.

* growth: with C = max(8, sqrt|Re c|) every region beyond ``new`` is more than
  twice as large as its younger parent, so nothing past ``new`` is at most K.
* fan: once a region's neighbour sequence is above its own tail level and
  increasing, the rest of that fan increases, and the subtrees hanging off it
  fall under the growth certificate.

Neither certificate depends on the numerically estimated H_c; that function
only sizes the attracting arcs.
"""
from __future__ import annotations

import enum
import json
import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .charvar import CharacterPoint, FiberConstants, M_of_c, su21_P, su21_Q
from .dynamics import (
    Move,
    VertexQuadruple,
    _tail_level,
    base_quadruple,
    canonical_trace,
    h_bound,
    propagate_ball,
)
from .farey import (
    BASE_PAIR,
    Slope,
    _parents,
    canonical,
    det,
    fibonacci,
    triangle,
)
from .su21_core import InvalidInputError, boundary_tol, displacement_from_trace, resultant_f, trace_eigenvalues

STRICT_SLACK = 1e-9
DEFAULT_BUDGET = 100_000
COLLAR_DEPTH = 3
ONE_SIDED_TOL = 1e-8
MAX_FAN_WINDOW = 1 << 14


def fork_constant(c: complex) -> float:
    return max(6.0, math.sqrt(abs(complex(c).real)))


def growth_constant(c: complex) -> float:
    return max(8.0, math.sqrt(abs(complex(c).real)))


def eps0(C: float) -> float:
    return C * C * (C - 6.0) / 4.0


def is_loxodromic_trace(tr: complex) -> bool:
    return resultant_f(tr) > boundary_tol(tr)


# ------------------------------------------------------------ orientation


@dataclass(frozen=True)
class OrientedEdge:
    """The edge of the edge graph from ``vertex`` along ``move``.

    ``away`` is true when the arrow points from ``vertex`` to its neighbour,
    i.e. the region dropped by the move is larger than the region gained.
    """

    vertex: tuple[Slope, Slope]
    move: Move
    dropped: Slope
    gained: Slope
    away: bool
    tie_broken: bool


def arrow(dropped: Slope, d_abs: float, gained: Slope, g_abs: float, slack: float = STRICT_SLACK):
    """(points toward the gained side, tie was broken) for an edge trading ``dropped`` for ``gained``."""
    if abs(d_abs - g_abs) <= slack * (1.0 + max(d_abs, g_abs)):
        return dropped > gained, True
    return d_abs > g_abs, False


def orient(q: VertexQuadruple, move: Move, slack: float = STRICT_SLACK) -> OrientedEdge:
    nq = q.move(move)
    regs = dict(q.regions())
    new_regs = dict(nq.regions())
    (dropped,) = set(regs) - set(new_regs)
    (gained,) = set(new_regs) - set(regs)
    away, tie = arrow(dropped, abs(regs[dropped]), gained, abs(new_regs[gained]), slack)
    pair = tuple(sorted((canonical(*q.sa), canonical(*q.sb))))
    return OrientedEdge(pair, Move(move), dropped, gained, away, tie)


# ------------------------------------------------------------------ forks


class ForkConvention(enum.Enum):
    """``AWAY``: trace-decreasing arrows leave the vertex.  ``DISPLAYED``: the reversed inequalities."""

    AWAY = "away"
    DISPLAYED = "displayed"


def _fork_groups(q: VertexQuadruple):
    x, y, z, t = q.quad
    yb = y.conjugate()
    g1 = (abs(t - x * yb + y * z), abs(t - x * yb + (x * z).conjugate()))
    g2 = (abs(z - x * y + (x * t).conjugate()), abs(z - x * y + yb * t))
    return abs(t), g1, abs(z), g2


def is_fork(q: VertexQuadruple, convention: ForkConvention | str = ForkConvention.AWAY,
            slack: float = STRICT_SLACK) -> bool:
    """Two arrows of different colours leave the vertex: one on each flank side.

    Each side compares the dropped flank with the two regions reachable by
    crossing that flank's triangle.
    """
    convention = ForkConvention(convention)
    at, g1, az, g2 = _fork_groups(q)
    scale = 1.0 + max(at, az, *g1, *g2)
    tol = slack * scale
    if convention == ForkConvention.AWAY:
        return any(at > w + tol for w in g1) and any(az > w + tol for w in g2)
    return any(at < w - tol for w in g1) and any(az < w - tol for w in g2)


def is_eps_fork(q: VertexQuadruple, eps: float) -> bool:
    """Fork test where an arrow pointing in, with moduli closer than ``eps``, still counts."""
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    at, g1, az, g2 = _fork_groups(q)
    return any(at > w - eps for w in g1) and any(az > w - eps for w in g2)


# ------------------------------------------------------------ trace field


class TraceField:
    """Vertex quadruples at arbitrary Farey edges, memoised along the path to the base edge."""

    def __init__(self, point: CharacterPoint):
        self.point = point
        self.base = base_quadruple(point)
        self._memo: dict[frozenset, VertexQuadruple] = {frozenset(BASE_PAIR): self.base}

    def remember(self, q: VertexQuadruple) -> None:
        self._memo.setdefault(frozenset((canonical(*q.sa), canonical(*q.sb))), q)

    @staticmethod
    def _parent_key(key: frozenset) -> frozenset:
        u, v = sorted(key, key=lambda s: (abs(s[0]) + abs(s[1]), s))
        (p1, p2) = _parents(*v)
        other = p2 if p1 == u else p1
        return frozenset((u, other))

    def vertex(self, u: Slope, v: Slope) -> VertexQuadruple:
        key = frozenset((canonical(*u), canonical(*v)))
        if abs(det(*key)) != 1:
            raise ValueError(f"{u} and {v} are not Farey neighbours")
        chain = []
        while key not in self._memo:
            chain.append(key)
            key = self._parent_key(key)
        for k in reversed(chain):
            prev = self._memo[key]
            for mv in Move:
                nq = prev.move(mv)
                if frozenset((canonical(*nq.sa), canonical(*nq.sb))) == k:
                    self._memo[k] = nq
                    break
            key = k
        return self._memo[key]

    def trace(self, slope: Slope) -> complex:
        s = canonical(*slope)
        if s in BASE_PAIR:
            return self.base.x if s == (1, 0) else self.base.y
        p1, p2 = _parents(*s)
        for r, tr in self.vertex(p1, p2).regions():
            if r == s:
                return tr
        raise AssertionError("slope is not a flank of its parents")


# -------------------------------------------------------------- Omega(K)


@dataclass
class SearchStats:
    budget: int
    visited: int = 0
    expanded: int = 0
    pruned_growth: int = 0
    pruned_fan: int = 0
    max_generation: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RegionSet:
    """Regions of trace modulus at most K, with the search record behind them."""

    K: float
    members: dict[Slope, complex]
    exhausted: bool
    visited: dict[Slope, complex]
    generation: dict[Slope, int]
    non_loxodromic: list[Slope]
    stats: SearchStats
    below_recommended: bool
    trace_field: TraceField | None = field(repr=False, compare=False, default=None)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, s) -> bool:
        return canonical(*s) in self.members


def _seq_coefficients(x: complex, um1: complex, u0: complex, u1: complex):
    lam, mu, nu = trace_eigenvalues(x)
    V = np.array([[1 / lam, 1 / mu, 1 / nu], [1, 1, 1], [lam, mu, nu]], dtype=np.complex128)
    m = np.linalg.solve(V, np.array([um1, u0, u1], dtype=np.complex128))
    return lam, m


class _FanTest:
    """Per-region tail levels, shared by every vertex touching the region."""

    def __init__(self):
        self._cache: dict[Slope, float] = {}

    def level(self, slope: Slope, x: complex, um1: complex, u0: complex, u1: complex) -> float:
        if slope in self._cache:
            return self._cache[slope]
        if not is_loxodromic_trace(x):
            val = math.inf
        else:
            lam, m = _seq_coefficients(x, um1, u0, u1)
            val = _tail_level(abs(m[1]), math.sqrt(abs(m[0] * m[2])), abs(lam))
        self._cache[slope] = val
        return val


def enumerate_omega(start: VertexQuadruple | CharacterPoint, fiber: FiberConstants | None = None,
                    K: float | None = None, budget: int = DEFAULT_BUDGET,
                    slack: float = STRICT_SLACK, stop_at_non_loxodromic: bool = False) -> RegionSet:
    """Breadth-first search from the base edge for every region with |trace| <= K.

    ``exhausted`` is true when no frontier is left, in which case ``members``
    is all of Omega(K).  The budget counts visited regions.
    """
    if budget <= 0:
        raise InvalidInputError("budget must be positive")
    point = start if isinstance(start, CharacterPoint) else CharacterPoint.from_traces(*start.quad)
    fiber = fiber or M_of_c(point.c)
    K = fiber.Mc if K is None else float(K)
    L = growth_constant(point.c) * (1.0 + slack)
    Kp = K * (1.0 + slack)
    up = 1.0 + slack

    tf = TraceField(point)
    base = tf.base
    visited: dict[Slope, complex] = {}
    generation: dict[Slope, int] = {}
    nonlox: list[Slope] = []
    stats = SearchStats(budget=budget)
    fan = _FanTest()

    def record(slope: Slope, tr: complex, gen: int) -> None:
        if slope in visited:
            return
        visited[slope] = tr
        generation[slope] = gen
        stats.visited += 1
        stats.max_generation = max(stats.max_generation, gen)
        if not is_loxodromic_trace(tr):
            nonlox.append(slope)

    def prunable(q: VertexQuadruple) -> bool:
        """Whether nothing beyond the z flank of q can have trace modulus <= K."""
        ax, ay, an = abs(q.x), abs(q.y), abs(q.z)
        if an <= Kp:
            return False
        if ax >= L and ay >= L and an >= abs(q.t) * up:
            stats.pruned_growth += 1
            return True
        # around x the fan reads t, y, z in order; around y it reads t, x, z
        for center, cs, nb in ((q.x, canonical(*q.sa), ay), (q.y, canonical(*q.sb), ax)):
            if an > nb * up and nb > max(K, L, 4.0 * abs(center) / L) * up:
                if nb > fan.level(cs, center, *_center_seeds(q, cs)) * up:
                    stats.pruned_fan += 1
                    return True
        return False

    for s, tr in base.regions():
        record(s, tr, 0 if s in BASE_PAIR else 1)

    # the base edge has two new flanks; its T side is the z side of the (a, b^-1) view
    queue: deque[tuple[VertexQuadruple, int]] = deque(
        (q, 0) for q in (base, _t_view(base)) if not prunable(q)
    )
    while queue and stats.visited < budget:
        if stop_at_non_loxodromic and nonlox:
            break
        q, dist = queue.popleft()
        stats.expanded += 1
        for mv in (Move.XZ, Move.YZ):
            child = q.move(mv)
            tf.remember(child)
            s, tr = child.regions()[2]
            record(s, tr, dist + 2)
            if not prunable(child):
                queue.append((child, dist + 1))
    exhausted = not queue
    members = {s: tr for s, tr in visited.items() if abs(tr) <= K}
    return RegionSet(K, members, exhausted, visited, generation, nonlox, stats, K < fiber.Mc, tf)


def _t_view(q: VertexQuadruple) -> VertexQuadruple:
    """The base vertex seen from its T flank: the same basis with (a, b^-1)."""
    return VertexQuadruple(q.sa, (-q.sb[0], -q.sb[1]), q.x, q.y.conjugate(), q.t, q.z)


def _center_seeds(q: VertexQuadruple, center: Slope):
    """Three consecutive fan values (u_-1, u_0, u_1) around ``center`` at vertex q."""
    if canonical(*q.sa) == center:
        return q.t.conjugate(), q.y, q.z
    return q.t, q.x, q.z


def check_connected(rs: RegionSet) -> bool:
    if not rs.exhausted:
        raise ValueError("connectivity is only meaningful for an exhausted search")
    return _connected_slopes(list(rs.members))


def _connected_slopes(slopes: list[Slope]) -> bool:
    if len(slopes) <= 1:
        return True
    arr = np.array(slopes, dtype=np.int64)
    D = np.abs(np.outer(arr[:, 0], arr[:, 1]) - np.outer(arr[:, 1], arr[:, 0])) == 1
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(D[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == len(slopes)


# ------------------------------------------------------------ attractor


class InfiniteArc(Exception):
    """The neighbour sequence around ``region`` does not leave every bounded set."""

    def __init__(self, region: Slope, trace: complex, reason: str):
        super().__init__(f"{reason} around {region}")
        self.region = region
        self.trace = trace
        self.reason = reason


@dataclass(frozen=True)
class ArcDescriptor:
    """Fan triangles (X, Y_n, Y_n+1) for lo <= n <= hi, Y_n of slope n*center + neighbour."""

    center: Slope
    trace: complex
    neighbour: Slope
    center_oriented: Slope
    lo: int
    hi: int
    threshold: float
    triangles: frozenset
    inward: bool
    ties: int

    def to_json(self) -> dict:
        return {
            "center": list(self.center),
            "neighbour": list(self.neighbour),
            "lo": self.lo,
            "hi": self.hi,
            "threshold": self.threshold,
            "inward": self.inward,
        }


def _anchor_neighbour(s: Slope) -> Slope:
    if s in BASE_PAIR:
        return BASE_PAIR[1] if s == BASE_PAIR[0] else BASE_PAIR[0]
    return _parents(*s)[0]


def _fan_window(x: complex, seeds, lo: int, hi: int) -> np.ndarray:
    from . import kernels

    return kernels.fan_extend(complex(x), complex(seeds[0]), complex(seeds[1]), complex(seeds[2]), -lo - 1, hi - 1)


def attractor_arc(region: Slope, tf: TraceField, fiber: FiberConstants, K: float,
                  omega: dict[Slope, complex] | None = None) -> ArcDescriptor:
    """The extended arc of bounded neighbours around ``region``.

    The fan is scanned until both tails are above max(H_c(x), K) and past the
    sequence's own tail level, so everything outside the window grows.
    """
    region = canonical(*region)
    nb0 = _anchor_neighbour(region)
    q = tf.vertex(region, nb0)
    if canonical(*q.sa) == region:
        cs, s0, x = q.sa, q.sb, q.x
    else:
        cs, s0, x = q.sb, q.sa, q.y
    seeds = _center_seeds(q, canonical(*cs))
    tr = canonical_trace(cs, x)[1]
    if not is_loxodromic_trace(x):
        raise InfiniteArc(region, tr, "non-loxodromic center")
    lam, m = _seq_coefficients(x, *seeds)
    norm = float(np.linalg.norm(seeds))
    if min(abs(m[0]), abs(m[2])) <= ONE_SIDED_TOL * norm:
        raise InfiniteArc(region, tr, "one-sided bounded fan")
    level = _tail_level(abs(m[1]), math.sqrt(abs(m[0] * m[2])), abs(lam))
    thr = max(h_bound(x, fiber).value, K)
    stop = max(thr, level)

    w = 16
    while True:
        u = np.abs(_fan_window(x, seeds, -w, w))  # u[i] = |u_{i - w}|
        right = _tail_start(u, stop)
        left = _tail_start(u[::-1], stop)
        if right is not None and left is not None:
            break
        w *= 2
        if w > MAX_FAN_WINDOW:
            raise InfiniteArc(region, tr, "fan window exceeded")
    n_right = right - w
    n_left = -(left - w)

    def slope(n: int) -> Slope:
        return (n * cs[0] + s0[0], n * cs[1] + s0[1])

    idx = [n for n in range(n_left, n_right) if u[n + w] <= thr and u[n + w + 1] <= thr]
    if omega:
        idx += [n for n in range(n_left - 1, n_right + 1)
                if canonical(*slope(n)) in omega or canonical(*slope(n + 1)) in omega]
    if not idx:
        m_min = n_left + int(np.argmin(u[n_left + w:n_right + w + 1]))
        idx = [m_min - 1, m_min]
    lo, hi = min(idx), max(idx)

    inward = True
    ties = 0
    for n in range(max(n_left - 2, -w + 1), min(n_right + 2, w - 2)):
        if lo <= n <= hi:
            continue
        # edge (X; Y_n, Y_n+1) joins (X, Y_n) and (X, Y_n+1); its far flanks are Y_n-1 and Y_n+2
        a_prev, a_next = u[n - 1 + w], u[n + 2 + w]
        toward_next, tie = arrow(canonical(*slope(n - 1)), a_prev, canonical(*slope(n + 2)), a_next)
        ties += tie
        if (n > hi and toward_next) or (n < lo and not toward_next):
            inward = False
    tris = frozenset(
        triangle(cs, slope(n), slope(n + 1)) for n in range(lo, hi + 1)
    )
    return ArcDescriptor(region, tr, canonical(*s0), tuple(cs), lo, hi, thr, tris, inward, ties)


def _tail_start(u: np.ndarray, stop: float) -> int | None:
    """First index i >= centre with u[i] > stop and u increasing from there to the window end."""
    mid = len(u) // 2
    inc = u[1:] > u[:-1]
    for i in range(mid, len(u) - 2):
        if u[i] > stop and inc[i:].all():
            return i
    return None


@dataclass
class AttractorGraph:
    triangles: frozenset
    arcs: dict[Slope, ArcDescriptor]
    finite: bool = True
    connected: bool = True
    attracting: bool = True
    inward: bool = True
    collar_edges: int = 0
    ties: int = 0

    def regions(self) -> set[Slope]:
        return {s for tri in self.triangles for s in tri}

    def to_json(self) -> dict:
        return {
            "triangles": sorted(sorted(list(s) for s in tri) for tri in self.triangles),
            "finite": self.finite,
            "connected": self.connected,
            "attracting": self.attracting,
            "inward": self.inward,
            "collar_edges": self.collar_edges,
            "ties": self.ties,
        }

    def to_dot(self, name: str = "attractor") -> str:
        from .farey import ball_to_dot

        return ball_to_dot(sorted(self.triangles, key=lambda t: sorted(t)), name=name)


def _triangles_connected(tris) -> bool:
    tris = list(tris)
    if len(tris) <= 1:
        return True
    by_edge: dict[frozenset, list[int]] = {}
    for i, tri in enumerate(tris):
        regs = sorted(tri)
        for j in range(3):
            by_edge.setdefault(frozenset((regs[j], regs[(j + 1) % 3])), []).append(i)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        regs = sorted(tris[i])
        for j in range(3):
            for k in by_edge[frozenset((regs[j], regs[(j + 1) % 3]))]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
    return len(seen) == len(tris)


def _flanks(key: frozenset) -> tuple[Slope, Slope]:
    u, v = tuple(key)
    return canonical(u[0] + v[0], u[1] + v[1]), canonical(u[0] - v[0], u[1] - v[1])


def collar_check(triangles, tf: TraceField, depth: int = COLLAR_DEPTH) -> tuple[bool, int, int]:
    """Check that edges on geodesics from the outside collar point toward the subgraph.

    Vertices of the edge graph are Farey edges.  Distances to the subgraph are
    found by breadth-first search; every edge that decreases the distance must
    be oriented along the decrease.  Returns (ok, edges checked, ties).
    """
    if not triangles:
        return True, 0, 0
    inside = set()
    for tri in triangles:
        regs = sorted(tri)
        for j in range(3):
            inside.add(frozenset((regs[j], regs[(j + 1) % 3])))
    dist = {v: 0 for v in inside}
    frontier = sorted(inside, key=sorted)
    ok, checked, ties = True, 0, 0
    for d in range(1, depth + 1):
        nxt = []
        for v in frontier:
            for f in _flanks(v):
                for keep in v:
                    w = frozenset((keep, f))
                    if w in dist:
                        continue
                    dist[w] = d
                    nxt.append(w)
        for w in nxt:
            # w's neighbours at distance d - 1 are reached by edges that must point toward them
            for f in _flanks(w):
                for keep in w:
                    v = frozenset((keep, f))
                    if dist.get(v) != d - 1:
                        continue
                    (gone,) = w - {keep}
                    (far,) = set(_flanks(v)) - {gone}
                    (w_far,) = set(_flanks(w)) - {f}
                    toward_v, tie = arrow(w_far, abs(tf.trace(w_far)), far, abs(tf.trace(far)))
                    checked += 1
                    ties += tie
                    if not toward_v:
                        ok = False
        frontier = nxt
    return ok, checked, ties


def build_attractor(rs: RegionSet, fiber: FiberConstants, K: float | None = None,
                    threads: int = 1, collar_depth: int = COLLAR_DEPTH) -> AttractorGraph:
    """Union of extended arcs over Omega(K), with connectivity and attraction checks."""
    if not rs.exhausted:
        raise ValueError("the attractor needs an exhausted search")
    K = rs.K if K is None else K
    tf = rs.trace_field
    members = sorted(rs.members)

    def one(s):
        return attractor_arc(s, tf, fiber, K, rs.members)

    if threads > 1 and len(members) > 1:
        # warm the shared memo along every anchor path before fanning out
        for s in members:
            tf.vertex(s, _anchor_neighbour(s))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            arcs = list(pool.map(one, members))
    else:
        arcs = [one(s) for s in members]
    tris = frozenset().union(*(a.triangles for a in arcs)) if arcs else frozenset()
    attracting, checked, ties = collar_check(tris, tf, collar_depth)
    return AttractorGraph(
        triangles=tris,
        arcs=dict(zip(members, arcs)),
        connected=_triangles_connected(tris),
        attracting=attracting,
        inward=all(a.inward for a in arcs),
        collar_edges=checked,
        ties=ties + sum(a.ties for a in arcs),
    )


# ------------------------------------------------------------------ verdict


class VerdictTag(enum.Enum):
    CERTIFIED = "CertifiedBQ"
    REFUTED = "Refuted"
    INCONCLUSIVE = "Inconclusive"


EXIT_CODES = {VerdictTag.CERTIFIED: 0, VerdictTag.REFUTED: 1, VerdictTag.INCONCLUSIVE: 2}


@dataclass(frozen=True)
class Witness:
    kind: str
    region: Slope | None = None
    trace: complex | None = None
    f_value: float | None = None
    detail: str = ""

    def to_json(self) -> dict:
        out = {"kind": self.kind, "detail": self.detail}
        if self.region is not None:
            out["region"] = list(self.region)
        if self.trace is not None:
            out["trace"] = [self.trace.real, self.trace.imag]
            out["f"] = self.f_value
        return out


@dataclass
class Verdict:
    tag: VerdictTag
    witness: Witness | None
    stats: dict
    constants: dict
    omega: RegionSet
    attractor: AttractorGraph | None = None
    timing: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.tag]

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "tag": self.tag.value,
            "witness": self.witness.to_json() if self.witness else None,
            "stats": self.stats,
            "constants": self.constants,
            "omega": [
                {"slope": list(s), "trace": [tr.real, tr.imag]} for s, tr in sorted(self.omega.members.items())
            ],
            "attractor": self.attractor.to_json() if self.attractor else None,
        }
        if timing:
            out["timing"] = self.timing
        return out

    def dumps(self, timing: bool = False) -> str:
        return json.dumps(self.to_json(timing), sort_keys=True, indent=2)


def fiber_constants_json(fiber: FiberConstants, K: float) -> dict:
    C = fork_constant(fiber.c_value)
    eps = eps0(C) / 2 if C > 6.0 else None
    return {
        "C": C,
        "growth_C": growth_constant(fiber.c_value),
        "Mc": fiber.Mc,
        "Dc": fiber.Dc,
        "K": K,
        "eps": eps,
        "eps_notice": None if eps else "epsilon-fork diagnostics are vacuous when C = 6",
        "slack": STRICT_SLACK,
    }


def certify(point: CharacterPoint, K: float | None = None, budget: int = DEFAULT_BUDGET,
            threads: int = 1) -> Verdict:
    """Three-valued Bowditch verdict.

    Refuted when a visited region is not loxodromic or an arc is unbounded;
    certified when the search for Omega(K) closes with every region
    loxodromic and the attractor checks pass; inconclusive otherwise.
    """
    if budget <= 0:
        raise InvalidInputError("budget must be positive")
    t0 = time.perf_counter()
    fiber = M_of_c(point.c)
    K = fiber.Mc if K is None else float(K)
    rs = enumerate_omega(point, fiber, K, budget, stop_at_non_loxodromic=True)
    stats = rs.stats.to_json()
    stats.update(omega_size=len(rs.members), exhausted=rs.exhausted, below_recommended_K=rs.below_recommended)
    consts = fiber_constants_json(fiber, K)

    def done(tag, witness=None, attractor=None):
        return Verdict(tag, witness, stats, consts, rs, attractor, {"wall_seconds": time.perf_counter() - t0})

    if rs.non_loxodromic:
        s = min(rs.non_loxodromic, key=lambda r: (rs.generation[r], r))
        tr = rs.visited[s]
        return done(VerdictTag.REFUTED, Witness("non-loxodromic", s, tr, float(resultant_f(tr))))
    if not rs.exhausted:
        return done(VerdictTag.INCONCLUSIVE,
                    Witness("budget", detail=f"{rs.stats.visited} regions visited, frontier open"))
    try:
        att = build_attractor(rs, fiber, K, threads)
    except InfiniteArc as exc:
        return done(VerdictTag.REFUTED, Witness("unbounded-arc", exc.region, exc.trace,
                                                float(resultant_f(exc.trace)), exc.reason))
    stats.update(attractor_triangles=len(att.triangles), ties=att.ties, collar_edges=att.collar_edges)
    if not (att.connected and att.attracting and att.inward):
        return done(VerdictTag.INCONCLUSIVE,
                    Witness("attractor-check", detail=f"connected={att.connected} attracting={att.attracting} "
                                                      f"inward={att.inward}"), att)
    return done(VerdictTag.CERTIFIED, None, att)


# ------------------------------------------------------------- probes


@dataclass(frozen=True)
class BQ3Report:
    k: float
    m: float
    witness: Slope | None
    samples: list
    log_bound_violations: int


def bq3_report(point: CharacterPoint, depth: int = 12, scale: float | None = None) -> BQ3Report:
    """Fit displacement >= k * word length - m over a ball of regions.

    k is the smallest ratio displacement / length among the longer half of
    the words, m the offset that makes the bound hold on every sample.
    """
    samples = []
    for s, tr in sorted(propagate_ball(point, depth).items()):
        W = fibonacci(s)
        ell = displacement_from_trace(tr, scale)
        samples.append((s, W, ell, math.log(max(abs(tr), 1.0))))
    Wmax = max(w for _, w, _, _ in samples)
    long = [smp for smp in samples if smp[1] * 2 >= Wmax]
    witness = min(long, key=lambda smp: (smp[2] / smp[1], smp[0]))
    k = max(witness[2] / witness[1], 0.0)
    m = max(0.0, max(k * w - ell for _, w, ell, _ in samples))
    violations = sum(1 for _, _, ell, lp in samples if lp > ell + 1e-12)
    return BQ3Report(k, m, witness[0] if k > 0 else None, samples, violations)


@dataclass(frozen=True)
class RayReport:
    steps: int
    terminated: bool
    stabilized_region: Slope | None
    stabilized_f: float | None
    regions_crossed: int
    min_modulus: float
    path: list


def escaping_ray_probe(start: VertexQuadruple, max_steps: int = 1000, tail: int = 20,
                       field: TraceField | None = None) -> RayReport:
    """Follow outgoing arrows greedily until a sink or ``max_steps``.

    At each vertex the move gaining the smallest region among those pointing
    away is taken.  A walk that ends up turning around one region reports it.

    With ``field`` every trace is read from it, so steps toward the base edge
    do not recover a small trace by cancelling large ones.  Far from the base
    that cancellation leaves no correct digits and the arrows become noise.
    """
    if max_steps <= 0:
        raise InvalidInputError("max_steps must be positive")
    q = start if field is None else field.vertex(start.sa, start.sb)
    seen = {_key(q)}
    path = [tuple(sorted(_key(q)))]
    regions = {s for s, _ in q.regions()}
    min_mod = min(abs(tr) for _, tr in q.regions())
    steps = 0
    terminated = False
    while steps < max_steps:
        best = None
        for mv in Move:
            nq = q.move(mv)
            key = _key(nq)
            if key in seen:
                continue
            if field is not None:
                nq = field.vertex(nq.sa, nq.sb)
            (dropped,) = {s for s, _ in q.regions()} - {s for s, _ in nq.regions()}
            (gained,) = {s for s, _ in nq.regions()} - {s for s, _ in q.regions()}
            g = abs(dict(nq.regions())[gained])
            away, _ = arrow(dropped, abs(dict(q.regions())[dropped]), gained, g)
            if not away:
                continue
            if best is None or (g, gained) < (best[0], best[1]):
                best = (g, gained, nq, key)
        if best is None:
            terminated = True
            break
        _, _, q, key = best
        seen.add(key)
        path.append(tuple(sorted(key)))
        steps += 1
        for s, tr in q.regions():
            regions.add(s)
            min_mod = min(min_mod, abs(tr))
    stab = None
    stab_f = None
    if not terminated and len(path) > tail:
        common = set(path[-tail]).intersection(*map(set, path[-tail:]))
        if common:
            stab = min(common)
            stab_f = float(resultant_f(_trace_on_path(q, stab)))
    return RayReport(steps, terminated, stab, stab_f, len(regions), min_mod, path)


def _trace_on_path(q: VertexQuadruple, s: Slope) -> complex:
    return dict(q.regions())[s]


def _key(q: VertexQuadruple) -> frozenset:
    return frozenset((canonical(*q.sa), canonical(*q.sb)))


def random_vertex(point: CharacterPoint, rng: np.random.Generator, length: int) -> VertexQuadruple:
    """End of a random non-backtracking walk of ``length`` moves from the base vertex.

    Only the slopes come from the walk; the traces are propagated outward
    from the base edge.
    """
    field = TraceField(point)
    q = field.base
    prev = None
    for _ in range(length):
        while True:
            nq = q.move(Move(int(rng.integers(4))))
            if _key(nq) != prev:
                break
        prev, q = _key(q), nq
    return field.vertex(q.sa, q.sb)


def project_to_fiber(quad, P0: float, Q0: float, iters: int = 60):
    """Minimum-norm Gauss-Newton projection of (x, y, z, t) onto P = P0, Q = Q0."""
    v = np.array([c for z in quad for c in (z.real, z.imag)], dtype=float)

    def F(v):
        x, y, z, t = v[0::2] + 1j * v[1::2]
        return np.array([su21_P(x, y, z, t) - P0, su21_Q(x, y, z, t) - Q0])

    scale = 1.0 + abs(P0) + abs(Q0)
    for _ in range(iters):
        r = F(v)
        if np.max(np.abs(r)) <= 1e-12 * scale:
            break
        h = 1e-7 * (1.0 + np.abs(v))
        J = np.empty((2, 8))
        for i in range(8):
            e = np.zeros(8)
            e[i] = h[i]
            J[:, i] = (F(v + e) - F(v - e)) / (2 * h[i])
        v = v - np.linalg.pinv(J) @ r
    x, y, z, t = v[0::2] + 1j * v[1::2]
    return complex(x), complex(y), complex(z), complex(t), float(np.max(np.abs(F(v))) / scale)


def stability_probe(point: CharacterPoint, radius: float, samples: int = 8, K: float | None = None,
                    seed: int = 0, budget: int = DEFAULT_BUDGET) -> bool:
    """Perturb within the fiber and check that nearby characters certify with smaller attractors."""
    base = certify(point, K, budget)
    if base.tag != VerdictTag.CERTIFIED:
        return False
    if radius == 0:
        return True
    rng = np.random.default_rng(seed)
    tris = base.attractor.triangles
    for _ in range(samples):
        noise = rng.normal(size=4) + 1j * rng.normal(size=4)
        noise *= radius * rng.uniform() / np.linalg.norm(noise)
        *quad, resid = project_to_fiber(np.array(point.quadruple) + noise, point.P, point.Q)
        if resid > 1e-9:
            return False
        try:
            sigma = CharacterPoint.from_traces(*quad, c=point.c)
        except ValueError:
            return False
        v = certify(sigma, base.constants["K"], budget)
        if v.tag != VerdictTag.CERTIFIED or not v.attractor.triangles <= tris:
            return False
    return True
