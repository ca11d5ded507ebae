"""Farey combinatorics for the one-holed torus.

Regions (simple closed curves) are identified by coprime slopes ``(p, q)``
with the sign fixed so that ``q > 0`` or ``(p, q) == (1, 0)``.  A slope is the
abelianisation of the curve's word in the generators ``a``, ``b``.  Words are
strings over ``a b A B`` with capitals for inverses.

Vertices of the edge graph are Farey edges (two adjacent regions) and
triangles are Farey triangles.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

Slope = tuple[int, int]
Triangle = frozenset

BASE_PAIR: tuple[Slope, Slope] = ((1, 0), (0, 1))


class ColoringInfeasibleError(RuntimeError):
    """Constraint propagation for the 4-colouring found a contradiction."""


def canonical(p: int, q: int) -> Slope:
    if (p, q) == (0, 0):
        raise ValueError("zero vector is not a slope")
    g = math.gcd(p, q)
    p, q = p // g, q // g
    if q < 0 or (q == 0 and p < 0):
        p, q = -p, -q
    return (p, q)


def det(u: Slope, v: Slope) -> int:
    return u[0] * v[1] - u[1] * v[0]


def adjacent(u: Slope, v: Slope) -> bool:
    return abs(det(u, v)) == 1


def add(u: Slope, v: Slope, sign: int = 1) -> Slope:
    return canonical(u[0] + sign * v[0], u[1] + sign * v[1])


# ------------------------------------------------------------------ words

_INV = {"a": "A", "A": "a", "b": "B", "B": "b"}


def invert(word: str) -> str:
    return "".join(_INV[ch] for ch in reversed(word))


def free_reduce(word: str) -> str:
    out: list[str] = []
    for ch in word:
        if out and out[-1] == _INV[ch]:
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def cyclic_reduce(word: str) -> str:
    w = free_reduce(word)
    while len(w) >= 2 and w[0] == _INV[w[-1]]:
        w = w[1:-1]
    return w


def abelianize(word: str) -> Slope:
    p = word.count("a") - word.count("A")
    q = word.count("b") - word.count("B")
    return (p, q)


def _mediant_word(p: int, q: int, left: str, right: str) -> str:
    """Word for the primitive vector (p, q), p, q >= 0, in a basis whose
    first vector carries ``left`` and second carries ``right``.

    Mediants concatenate the lower-slope parent on the left.
    """
    if (p, q) == (1, 0):
        return left
    if (p, q) == (0, 1):
        return right
    lo, lo_w = (1, 0), left
    hi, hi_w = (0, 1), right
    while True:
        mid = (lo[0] + hi[0], lo[1] + hi[1])
        mid_w = lo_w + hi_w
        if mid == (p, q):
            return mid_w
        if p * mid[1] - q * mid[0] > 0:
            hi, hi_w = mid, mid_w
        else:
            lo, lo_w = mid, mid_w


def region_word(slope: Slope, basis: tuple[str, str] = ("a", "b")) -> str:
    """Labelling word of a region relative to the base edge ``basis``.

    Regions on the ``ab`` side of the base edge are products with ``b`` on the
    right; regions on the ``ab^-1`` side use ``b^-1`` instead and are then
    inverted so that the abelianisation equals the canonical slope.
    """
    p, q = canonical(*slope)
    wa, wb = basis
    if p >= 0:
        word = _mediant_word(p, q, wa, wb)
    else:
        word = invert(_mediant_word(-p, q, wa, invert(wb)))
    return free_reduce(word)


def word_length(slope: Slope, basis: tuple[str, str] = ("a", "b")) -> int:
    return len(cyclic_reduce(region_word(slope, basis)))


# -------------------------------------------------------------- Fibonacci


def base_coordinates(slope: Slope, base: tuple[Slope, Slope] = BASE_PAIR) -> Slope:
    """Coordinates (m, n) of ``slope`` in the basis ``base`` (canonical sign)."""
    (a, c), (b, d) = base
    D = a * d - b * c
    if abs(D) != 1:
        raise ValueError("base pair is not a Farey edge")
    p, q = slope
    m = (d * p - b * q) * D
    n = (-c * p + a * q) * D
    return canonical(m, n)


def _parents(m: int, n: int) -> tuple[Slope, Slope]:
    """The two Farey parents of a non-base slope, closer to the base edge."""
    sign = 1 if m >= 0 else -1
    m = abs(m)
    if m == 0 or n == 0:
        raise ValueError("base slope has no parents")
    # parents (a, b) and (m - a, n - b) with a n - b m = 1
    a = pow(n, -1, m) if m > 1 else 1
    b = (a * n - 1) // m
    return canonical(sign * a, b), canonical(sign * (m - a), n - b)


class FibonacciWeight:
    """Memoised Fibonacci function: 1 on the base pair, additive on mediants."""

    def __init__(self, base: tuple[Slope, Slope] = BASE_PAIR):
        self.base = (canonical(*base[0]), canonical(*base[1]))
        self._memo: dict[Slope, int] = {}

    def __call__(self, slope: Slope) -> int:
        m, n = base_coordinates(canonical(*slope), self.base)
        return self._weight(m, n)

    def _weight(self, m: int, n: int) -> int:
        key = (m, n)
        if key in ((1, 0), (0, 1)):
            return 1
        if key in self._memo:
            return self._memo[key]
        stack = [key]
        while stack:
            top = stack[-1]
            ps = _parents(*top)
            missing = [p for p in ps if p not in self._memo and p not in ((1, 0), (0, 1))]
            if missing:
                stack.extend(missing)
                continue
            stack.pop()
            self._memo[top] = sum(self._memo.get(p, 1) for p in ps)
        return self._memo[key]


def fibonacci(slope: Slope, base: tuple[Slope, Slope] = BASE_PAIR) -> int:
    return _default_weight(base)(slope)


@lru_cache(maxsize=16)
def _default_weight(base) -> FibonacciWeight:
    return FibonacciWeight(base)


# ------------------------------------------------------- vertices, fans


@dataclass(frozen=True)
class VertexE:
    """A Farey edge {X, Y} with its two flanks (X + Y, X - Y)."""

    pair: tuple[Slope, Slope]

    @classmethod
    def of(cls, u: Slope, v: Slope) -> "VertexE":
        u, v = canonical(*u), canonical(*v)
        if not adjacent(u, v):
            raise ValueError(f"{u} and {v} are not Farey neighbours")
        return cls(tuple(sorted((u, v))))

    @property
    def flanks(self) -> tuple[Slope, Slope]:
        u, v = self.pair
        return add(u, v, 1), add(u, v, -1)

    def triangles(self) -> tuple[Triangle, Triangle]:
        u, v = self.pair
        z, t = self.flanks
        return frozenset((u, v, z)), frozenset((u, v, t))


BASE_VERTEX = VertexE.of(*BASE_PAIR)


def flip(v: VertexE, keep: int, toward: int) -> VertexE:
    """Adjacent vertex keeping ``pair[keep]`` and moving into the triangle of flank ``toward``."""
    return VertexE.of(v.pair[keep], v.flanks[toward])


def star(region: Slope, neighbour: Slope | None = None, start: int = 0) -> Iterator[VertexE]:
    """Fan of vertices (region, n*region + neighbour) for n = start, start+1, ..."""
    r = canonical(*region)
    s0 = neighbour if neighbour is not None else _some_neighbour(r)
    n = start
    while True:
        yield VertexE.of(r, (n * r[0] + s0[0], n * r[1] + s0[1]))
        n += 1


def fan_slope(region: Slope, neighbour: Slope, n: int) -> Slope:
    return canonical(n * region[0] + neighbour[0], n * region[1] + neighbour[1])


def _some_neighbour(r: Slope) -> Slope:
    g, x, y = _egcd(r[0], r[1])  # x p + y q = g = +-1
    return canonical(-y * g, x * g)


def _egcd(a, b):
    if b == 0:
        return (a, 1, 0)
    g, x, y = _egcd(b, a % b)
    return (g, y, x - (a // b) * y)


def fan_index(region: Slope, neighbour0: Slope, y: Slope) -> int:
    """n with y = +-(n * region + neighbour0)."""
    r = region
    sgn = det(r, y) * det(r, neighbour0)
    w = (sgn * y[0] - neighbour0[0], sgn * y[1] - neighbour0[1])
    if r[0] != 0:
        return w[0] // r[0]
    return w[1] // r[1]


# ------------------------------------------------------------- triangles


def triangle(u: Slope, v: Slope, w: Slope) -> Triangle:
    return frozenset((canonical(*u), canonical(*v), canonical(*w)))


BASE_TRIANGLE = triangle((1, 0), (0, 1), (1, 1))


def triangle_neighbours(tri: Triangle) -> list[Triangle]:
    out = []
    regs = sorted(tri)
    for i in range(3):
        u, v = regs[i], regs[(i + 1) % 3]
        w = regs[(i + 2) % 3]
        other = add(u, v, 1)
        if other == w:
            other = add(u, v, -1)
        out.append(frozenset((u, v, other)))
    return out


def triangle_ball(seed: Triangle, depth: int) -> list[Triangle]:
    """Triangles within ``depth`` steps of ``seed`` in BFS order."""
    seen = {seed: 0}
    order = [seed]
    queue = deque([seed])
    while queue:
        tri = queue.popleft()
        d = seen[tri]
        if d >= depth:
            continue
        for nb in triangle_neighbours(tri):
            if nb not in seen:
                seen[nb] = d + 1
                order.append(nb)
                queue.append(nb)
    return order


def _fan_positions(tris: list[Triangle]) -> dict[Slope, dict[int, Triangle]]:
    fans: dict[Slope, dict[int, Triangle]] = {}
    anchors: dict[Slope, Slope] = {}
    for tri in tris:
        for r in tri:
            u, v = (s for s in tri if s != r)
            s0 = anchors.setdefault(r, u)
            n = min(fan_index(r, s0, u), fan_index(r, s0, v))
            fans.setdefault(r, {})[n] = tri
    return fans


def four_coloring(seed: Triangle = BASE_TRIANGLE, depth: int = 4) -> dict[Triangle, int]:
    """Colour triangles so that every fan is 3-periodic and neighbours differ.

    Constraints inside each region's fan: triangles one or two steps apart get
    different colours and triangles three steps apart get the same colour.
    Triangles are assigned in BFS order with backtracking.
    """
    tris = triangle_ball(seed, depth)
    fans = _fan_positions(tris)
    differ: dict[Triangle, set] = {t: set() for t in tris}
    same: dict[Triangle, set] = {t: set() for t in tris}
    for fan in fans.values():
        for n, tri in fan.items():
            for k in (1, 2):
                other = fan.get(n + k)
                if other is not None:
                    differ[tri].add(other)
                    differ[other].add(tri)
            other = fan.get(n + 3)
            if other is not None:
                same[tri].add(other)
                same[other].add(tri)
    colors: dict[Triangle, int] = {}

    def options(tri):
        allowed = [0, 1, 2, 3]
        for o in differ[tri]:
            if o in colors and colors[o] in allowed:
                allowed.remove(colors[o])
        for o in same[tri]:
            if o in colors:
                allowed = [c for c in allowed if c == colors[o]]
        return allowed

    # iterative backtracking over the BFS order
    choices: list[list[int]] = []
    i = 0
    while i < len(tris):
        tri = tris[i]
        if len(choices) <= i:
            choices.append(options(tri))
        if not choices[i]:
            choices.pop()
            i -= 1
            if i < 0:
                raise ColoringInfeasibleError("no 4-colouring satisfies the fan constraints")
            del colors[tris[i]]
            continue
        colors[tri] = choices[i].pop(0)
        i += 1
    return colors


def region_color(colors: dict[Triangle, int], region: Slope) -> int | None:
    """The colour missing from the fan of ``region`` (None unless exactly 3 appear)."""
    used = {c for tri, c in colors.items() if region in tri}
    if len(used) != 3:
        return None
    return ({0, 1, 2, 3} - used).pop()


# ---------------------------------------------------------------- export


def _label(s: Slope) -> str:
    return f"{s[0]}/{s[1]}"


def ball_to_dot(tris: list[Triangle], colors: dict[Triangle, int] | None = None, name: str = "ball") -> str:
    palette = ("red", "blue", "green", "orange")
    regions = sorted({r for t in tris for r in t})
    lines = [f"graph {name} {{"]
    for r in regions:
        lines.append(f'  "{_label(r)}";')
    seen = set()
    for tri in tris:
        col = None if colors is None else colors.get(tri)
        regs = sorted(tri)
        for i in range(3):
            for j in range(i + 1, 3):
                key = (regs[i], regs[j])
                if key in seen:
                    continue
                seen.add(key)
                attr = f' [color="{palette[col]}"]' if col is not None else ""
                lines.append(f'  "{_label(regs[i])}" -- "{_label(regs[j])}"{attr};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def ball_to_json(tris: list[Triangle], colors: dict[Triangle, int] | None = None) -> str:
    regions = sorted({r for t in tris for r in t})
    doc = {
        "regions": [list(r) for r in regions],
        "triangles": [
            {"regions": [list(r) for r in sorted(t)], "color": None if colors is None else colors.get(t)}
            for t in tris
        ],
    }
    return json.dumps(doc)
