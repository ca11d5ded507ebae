"""Trace propagation over the edge graph and neighbour sequences around a region."""
from __future__ import annotations

import enum
import functools
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .charvar import CharacterPoint, FiberConstants, su21_P, su21_Q
from .farey import Slope, canonical
from .su21_core import resultant_f, trace_eigenvalues

H_SAFETY = 2.0
H_PHASE_GRID = 96


def growth_band(x: complex) -> float:
    return 1e-9 * (1.0 + abs(x)) ** 4


# ------------------------------------------------------------ local calculus


def neighbor_traces(x, y, z, t) -> tuple[complex, complex, complex, complex]:
    """tr(ab^2), tr((a^2 b)^-1), tr(a^-2 b), tr(ab^-2) at the vertex with traces (x, y, z, t)."""
    yb = np.conj(y)
    return (
        t - x * yb + y * z,
        t - x * yb + np.conj(x * z),
        np.conj(t * x) - x * y + z,
        -x * y + t * yb + z,
    )


class Move(enum.IntEnum):
    """Moves to the four neighbouring vertices: keep a region, enter a flank's triangle."""

    XZ = 0
    YZ = 1
    XT = 2
    YT = 3


_MOVE_KERNELS = (kernels.move_xz, kernels.move_yz, kernels.move_xt, kernels.move_yt)


def _move_slopes(move: Move, sa: Slope, sb: Slope) -> tuple[Slope, Slope]:
    ab = (sa[0] + sb[0], sa[1] + sb[1])
    a_b = (sa[0] - sb[0], sa[1] - sb[1])
    if move == Move.XZ:
        return sa, ab
    if move == Move.YZ:
        return ab, sb
    if move == Move.XT:
        return sa, a_b
    return a_b, (-sb[0], -sb[1])


@dataclass(frozen=True)
class VertexQuadruple:
    """Traces of (a, b, ab, ab^-1) for an oriented basis (a, b) of F2.

    ``sa`` and ``sb`` are the oriented abelianisations of the basis, so the
    vertex is the Farey edge {sa, sb} with flanks sa + sb and sa - sb.
    """

    sa: Slope
    sb: Slope
    x: complex
    y: complex
    z: complex
    t: complex

    @property
    def quad(self) -> tuple[complex, complex, complex, complex]:
        return (self.x, self.y, self.z, self.t)

    def oriented_regions(self) -> tuple[tuple[Slope, complex], ...]:
        sa, sb = self.sa, self.sb
        return (
            (sa, self.x),
            (sb, self.y),
            ((sa[0] + sb[0], sa[1] + sb[1]), self.z),
            ((sa[0] - sb[0], sa[1] - sb[1]), self.t),
        )

    def regions(self) -> tuple[tuple[Slope, complex], ...]:
        """The four regions with traces taken in canonical orientation."""
        return tuple(canonical_trace(s, tr) for s, tr in self.oriented_regions())

    def move(self, move: Move) -> "VertexQuadruple":
        nx, ny, nz, nt = _MOVE_KERNELS[move](self.x, self.y, self.z, self.t)
        sa, sb = _move_slopes(move, self.sa, self.sb)
        return VertexQuadruple(sa, sb, complex(nx), complex(ny), complex(nz), complex(nt))


def canonical_trace(slope: Slope, trace: complex) -> tuple[Slope, complex]:
    c = canonical(*slope)
    if c == (slope[0], slope[1]):
        return c, complex(trace)
    return c, complex(np.conj(trace))


def base_quadruple(point: CharacterPoint) -> VertexQuadruple:
    return VertexQuadruple((1, 0), (0, 1), point.x, point.y, point.z, point.t)


def flip_quadruple(q: VertexQuadruple, move: Move) -> VertexQuadruple:
    return q.move(move)


def unflip_quadruple(q: VertexQuadruple, move: Move) -> VertexQuadruple:
    """Exact inverse of ``flip_quadruple(., move)``."""
    x1, y1, z1, t1 = q.quad
    cj = np.conj
    if move == Move.XZ:
        x, y, z = x1, cj(t1), y1
        t = cj(z1) + x1 * t1 - cj(x1 * y1)
        sa, sb = q.sa, (q.sb[0] - q.sa[0], q.sb[1] - q.sa[1])
    elif move == Move.YZ:
        x, y, z = t1, y1, x1
        t = z1 + t1 * cj(y1) - y1 * x1
        sa, sb = (q.sa[0] - q.sb[0], q.sa[1] - q.sb[1]), q.sb
    elif move == Move.XT:
        x, y, t = x1, t1, y1
        z = cj(z1) - cj(x1 * y1) + x1 * t1
        sa, sb = q.sa, (q.sa[0] - q.sb[0], q.sa[1] - q.sb[1])
    else:
        x, y, t = t1, cj(y1), x1
        z = z1 + t1 * y - x1 * cj(y)
        sb = (-q.sb[0], -q.sb[1])
        sa = (q.sa[0] + sb[0], q.sa[1] + sb[1])
    return VertexQuadruple(sa, sb, complex(x), complex(y), complex(z), complex(t))


def propagate_ball(point: CharacterPoint, depth: int) -> dict[Slope, complex]:
    """Canonical-orientation traces of every region of generation <= depth.

    Generation 0 holds the base pair, generation 1 its two flanks, and each
    vertex at distance k from the base edge creates one region of generation k + 1.
    """
    slopes, quads, _ = kernels.ball_vertices(point.x, point.y, point.z, point.t, max(depth - 1, 0))
    out: dict[Slope, complex] = {}
    base = VertexQuadruple((1, 0), (0, 1), *point.quadruple)
    regs = base.regions() if depth >= 1 else base.regions()[:2]
    for s, tr in regs:
        out[s] = tr
    if depth >= 2:
        new_p = slopes[1:, 0] + slopes[1:, 2]
        new_q = slopes[1:, 1] + slopes[1:, 3]
        for p, q_, tr in zip(new_p.tolist(), new_q.tolist(), quads[1:, 2].tolist()):
            s, c = canonical_trace((p, q_), tr)
            out.setdefault(s, c)
    return out


# -------------------------------------------------------- Nielsen moves


class NielsenMove(enum.Enum):
    SWAP = "S"
    INVERT_SECOND = "I"
    RIGHT_MULTIPLY = "R"


def nielsen_move(point: CharacterPoint, move: NielsenMove | str) -> CharacterPoint:
    """Character of rho o phi^-1 for an elementary automorphism phi.

    S: (a, b) -> (b, a); I: b -> b^-1; R: the new second generator is ab.
    """
    move = NielsenMove(move)
    x, y, z, t = point.quadruple
    cj = lambda v: complex(np.conj(v))  # noqa: E731
    if move == NielsenMove.SWAP:
        return CharacterPoint(y, x, z, cj(t), cj(point.c))
    if move == NielsenMove.INVERT_SECOND:
        return CharacterPoint(x, cj(y), t, z, cj(point.c))
    nz = cj(t - x * cj(y) + cj(x * z))
    return CharacterPoint(x, z, nz, cj(y), point.c)


def nielsen_slope_map(move: NielsenMove | str):
    """Action of the automorphism on region slopes: region g for rho matches phi(g)."""
    move = NielsenMove(move)
    if move == NielsenMove.SWAP:
        return lambda s: canonical(s[1], s[0])
    if move == NielsenMove.INVERT_SECOND:
        return lambda s: canonical(s[0], -s[1])
    return lambda s: canonical(s[0] - s[1], s[1])


def nielsen_matrices(A, B, move: NielsenMove | str):
    """Generators of rho o phi^-1 given generators (A, B) of rho."""
    move = NielsenMove(move)
    if move == NielsenMove.SWAP:
        return B, A
    if move == NielsenMove.INVERT_SECOND:
        from .su21_core import su21_inverse

        return A, su21_inverse(B)
    return A, A @ B


# ------------------------------------------------------- neighbour sequences


class GrowthKind(enum.Enum):
    EXPONENTIAL_BOTH = "ExponentialBothDirections"
    ONE_SIDED_BOUNDED = "OneSidedBounded"
    BOUNDED = "Bounded"
    AT_MOST_QUADRATIC = "AtMostQuadratic"


@dataclass(frozen=True)
class GrowthClass:
    kind: GrowthKind
    bounded_direction: int = 0  # +1 bounded as n -> +inf, -1 as n -> -inf


@dataclass(frozen=True)
class NeighborSequence:
    """u_n = tr(a^n b) around the region a, indexed so that ``values[k]`` is u_{n_min + k}.

    When f(x) > 0, u_n = m1 lam^n + m2 mu^n + m3 nu^n with |lam| > 1 = |mu| > |nu|.
    """

    x: complex
    n_min: int
    values: np.ndarray
    f_value: float
    lam: complex | None = None
    mu: complex | None = None
    nu: complex | None = None
    m: tuple[complex, complex, complex] | None = None
    residual: float = 0.0

    def at(self, n: int) -> complex:
        return complex(self.values[n - self.n_min])


def sequence_around(x, u0, u1, u2, n_min: int = -20, n_max: int = 20) -> NeighborSequence:
    """Evaluate u_n for n_min <= n <= n_max from seeds (u_0, u_1, u_2).

    The recursion is u_{n+3} = x u_{n+2} - conj(x) u_{n+1} + u_n.
    """
    x = complex(x)
    n_min = min(n_min, 0)
    n_max = max(n_max, 2)
    vals = kernels.fan_extend(x, complex(u0), complex(u1), complex(u2), -n_min, n_max - 2)
    f = resultant_f(x)
    if abs(f) <= growth_band(x):
        return NeighborSequence(x, n_min, vals, f)
    lam, mu, nu = trace_eigenvalues(x)
    if f < 0:
        return NeighborSequence(x, n_min, vals, f)
    V = np.array([[lam**k, mu**k, nu**k] for k in (0, 1, 2)], dtype=np.complex128)
    m = np.linalg.solve(V, np.array([u0, u1, u2], dtype=np.complex128))
    ns = np.arange(n_min, n_min + len(vals))
    recon = m[0] * lam ** ns + m[1] * mu ** ns + m[2] * nu ** ns
    resid = float(np.max(np.abs(recon - vals) / (1.0 + np.abs(vals))))
    return NeighborSequence(x, n_min, vals, f, lam, mu, nu, tuple(complex(v) for v in m), resid)


def growth_class(seq: NeighborSequence) -> GrowthClass:
    if seq.f_value < -growth_band(seq.x):
        return GrowthClass(GrowthKind.BOUNDED)
    if seq.m is None:
        return GrowthClass(GrowthKind.AT_MOST_QUADRATIC)
    seed_norm = float(np.linalg.norm([seq.at(0), seq.at(1), seq.at(2)]))
    thr = 1e-8 * max(seed_norm, 1e-300)
    m1, _, m3 = (abs(v) for v in seq.m)
    if m1 > thr and m3 > thr:
        return GrowthClass(GrowthKind.EXPONENTIAL_BOTH)
    return GrowthClass(GrowthKind.ONE_SIDED_BOUNDED, +1 if m1 <= thr else -1)


def sequence_threshold(seq: NeighborSequence) -> float:
    """Trace level beyond which this particular sequence is strictly monotone in each tail.

    With a = |m2|, rho = sqrt|m1 m3| and R = |lam|: once |u_n| exceeds
    max(rho, 2(a + rho)/(R - 1)) + a + rho, |u| keeps growing away from the middle.
    """
    if seq.m is None:
        return math.inf
    R = abs(seq.lam)
    a = abs(seq.m[1])
    rho = math.sqrt(abs(seq.m[0]) * abs(seq.m[2]))
    return _tail_level(a, rho, R)


def _tail_level(a: float, rho: float, R: float) -> float:
    return max(rho, 2.0 * (a + rho) / (R - 1.0)) + a + rho


# ------------------------------------------------------------------ H_c


@dataclass(frozen=True)
class HBound:
    x: complex
    value: float
    K_c: float
    L_c: float
    m2_max: float = 0.0
    rho_max: float = 0.0


# 12 points determine the 7 quartic coefficients with room to spare
_SAMPLES = np.array([(r, a) for r in (0.0, 0.8, 1.6) for a in (0.0, 0.6, 1.2, 1.9)])
_Q_DESIGN = np.stack(
    [
        _SAMPLES[:, 1] ** 4,
        _SAMPLES[:, 1] ** 2 * _SAMPLES[:, 0] ** 2,
        _SAMPLES[:, 0] ** 4,
        _SAMPLES[:, 1] * _SAMPLES[:, 0] ** 2,
        _SAMPLES[:, 1] ** 2,
        _SAMPLES[:, 0] ** 2,
        np.ones(len(_SAMPLES)),
    ],
    axis=1,
)
_P_DESIGN = np.stack([_SAMPLES[:, 1] ** 2, _SAMPLES[:, 0] ** 2, np.ones(len(_SAMPLES))], axis=1)


@functools.lru_cache(maxsize=4096)
def _invariant_sup(x: complex, P0: float, Q0: float, n: int) -> tuple[float, float]:
    """Largest |m2| and sqrt|m1 m3| over sequences with centre x on the fiber (P0, Q0).

    P and Q of the quadruple (x, u_1, u_2, conj(u_0)) are invariant under
    m -> (s e^{ia} m1, e^{-2ia} m2, e^{ia} m3 / s), so one may take
    m = (rho e^{i p1}, a, rho e^{i p3}).  For fixed phases P is
    quadratic and Q quartic in (rho, a); eliminating a^2 through P leaves a
    quartic in rho^2, solved for every phase pair on an n x n grid.
    """
    lam, mu, nu = trace_eigenvalues(x)
    psi, chi = np.meshgrid(
        np.linspace(0, 2 * np.pi, n, endpoint=False), np.linspace(0, 2 * np.pi, n, endpoint=False)
    )
    psi, chi = psi.ravel(), chi.ravel()
    e1 = np.exp(0.5j * (chi - psi))
    e3 = np.exp(0.5j * (chi + psi))
    Pv = np.empty((len(_SAMPLES), psi.size))
    Qv = np.empty_like(Pv)
    for i, (r, a) in enumerate(_SAMPLES):
        m1, m3 = r * e1, r * e3
        u0 = m1 + a + m3
        u1 = m1 * lam + a * mu + m3 * nu
        u2 = m1 * lam**2 + a * mu**2 + m3 * nu**2
        args = (x, u1, u2, np.conj(u0))
        Pv[i] = su21_P(*args)
        Qv[i] = su21_Q(*args)
    cq = np.linalg.lstsq(_Q_DESIGN, Qv, rcond=None)[0]
    cp = np.linalg.lstsq(_P_DESIGN, Pv, rcond=None)[0]
    g, G = cp[0], cp[1]
    s0 = (P0 - cp[2]) / g
    s1 = -G / g
    c1, c2, c3, c4, c5, c6, c7 = cq
    F2 = c1 * s1**2 + c2 * s1 + c3
    F1 = 2 * c1 * s0 * s1 + c2 * s0 + c5 * s1 + c6
    F0 = c1 * s0**2 + c5 * s0 + c7 - Q0
    coeffs = np.stack(
        [F2**2, 2 * F2 * F1 - c4**2 * s1, F1**2 + 2 * F2 * F0 - c4**2 * s0, 2 * F1 * F0, F0**2], axis=1
    )
    sig, row = _quartic_real_roots(coeffs)
    s = s0[row] + s1[row] * sig
    a = np.sqrt(np.maximum(s, 0.0))
    F = F2[row] * sig**2 + F1[row] * sig + F0[row]
    cross = c4[row] * a * sig
    ok = (s >= -1e-9 * (1 + np.abs(s0[row]))) & (np.abs(F + cross) <= 1e-6 * (1 + np.abs(F) + np.abs(cross)))
    if not ok.any():
        return 0.0, 0.0
    return float(a[ok].max()), float(np.sqrt(sig[ok]).max())


def _quartic_real_roots(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Non-negative real roots of each row's quartic, with the row index of each root."""
    coeffs = coeffs / np.abs(coeffs).max(axis=1, keepdims=True).clip(min=1e-300)
    lead = coeffs[:, 0]
    good = np.abs(lead) > 1e-10
    roots, rows = [], []
    idx = np.flatnonzero(good)
    if idx.size:
        comp = np.zeros((idx.size, 4, 4))
        comp[:, 0, :] = -coeffs[idx, 1:] / lead[idx, None]
        comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
        ev = np.linalg.eigvals(comp)
        roots.append(ev.ravel())
        rows.append(np.repeat(idx, 4))
    for k in np.flatnonzero(~good):
        ev = np.roots(coeffs[k])
        roots.append(ev)
        rows.append(np.full(ev.size, k))
    if not roots:
        return np.empty(0), np.empty(0, dtype=int)
    r = np.concatenate(roots)
    row = np.concatenate(rows)
    keep = (np.abs(r.imag) <= 1e-7 * (1 + np.abs(r))) & (r.real >= -1e-12)
    return np.maximum(r.real[keep], 0.0), row[keep]


def h_bound(x: complex, fiber: FiberConstants, grid: int = H_PHASE_GRID) -> HBound:
    """Trace threshold beyond which every neighbour sequence around x is monotone.

    Infinite when f(x) is inside the tolerance band or negative.  Otherwise
    the invariants |m2| and sqrt|m1 m3| are bounded over the fiber (at x and
    at conj(x), so the value is symmetric) and fed through the tail estimate
    used by ``sequence_threshold``, with a safety factor.
    """
    x = complex(x)
    f = resultant_f(x)
    if f <= growth_band(x):
        return HBound(x, math.inf, math.inf, math.inf)
    R = abs(trace_eigenvalues(x)[0])
    sups = [_invariant_sup(v, fiber.P, fiber.Q, grid) for v in (x, x.conjugate())]
    a_max = max(s[0] for s in sups)
    rho_max = max(s[1] for s in sups)
    K = max(a_max, rho_max)
    L = (2.0 * K + R + 1.0) / (R - 1.0)
    level = H_SAFETY * _tail_level(a_max, rho_max, R)
    return HBound(x, max(fiber.Mc, level), K, L, a_max, rho_max)


# --------------------------------------------------- radial slice of Q


def shark_fin(P: float, r: float, s: float) -> float:
    """|B|^2 at lambda = r e^{is}; NaN at the removable singularities r = 1, 3s = 0 mod 2 pi."""
    if abs(r - 1.0) < 1e-15 and abs(math.remainder(3.0 * s, 2.0 * math.pi)) < 1e-12:
        return math.nan
    lam = r * complex(math.cos(s), math.sin(s))
    lb = lam.conjugate()
    x = lam + lb / lam + 1.0 / lb
    den = abs(x) ** 2 - 4.0 * (x * lam / lb).real + 3.0
    if abs(den) < 1e-14:
        return math.nan
    return (P + 3.0 - abs(x) ** 2) / den


def shark_fin_p6(r: float, s: float) -> float:
    """Closed form of ``shark_fin(6, r, s)``."""
    r2 = r * r
    return 1.0 - 2.0 * (r2 - 1.0) ** 2 / ((r2 + 1.0) * (r2 - 2.0 * r * math.cos(3.0 * s) + 1.0))


def q_of_r(P: float, r: float) -> float:
    r2 = r * r
    return (P * r2 * r2 - r2**3 + 1.0) * (P * r2 + r2**3 - 1.0) / (r2 * r2 * (r2 + 1.0) ** 2)


def q_from_b(P: float, r: float, s: float) -> float:
    """Q of the limiting quadruple (x, B, B w, conj(B) w), w = conj(lam)/lam, with |B|^2 from P."""
    lam = r * complex(math.cos(s), math.sin(s))
    w = lam.conjugate() / lam
    x = lam + w + 1.0 / lam.conjugate()
    xb = x.conjugate()
    ax = abs(x) ** 2
    B2 = shark_fin(P, r, s)
    quartic = 5 + ax + 2 * (2 * w**3 - 2 * xb * w - x * w**2).real
    quad = ax**2 + 3 * ax - 18 + 2 * (2 * x**2 * w - 3 * x * w**2 + 6 * xb * w - 2 * ax * xb * w + xb**2 * w**2 - x**3).real
    return B2 * B2 * quartic + B2 * quad + 9 - 6 * ax + 2 * (x**3).real


# ------------------------------------------------------------- CSV output


def _csv(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in row) + "\n")
    return buf.getvalue()


def sharkfin_csv(P: float = 6.0, r_values=None, s_values=None) -> str:
    r_values = np.linspace(0.5, 2.0, 61) if r_values is None else np.asarray(r_values, float)
    s_values = np.linspace(0.0, 2 * np.pi, 121) if s_values is None else np.asarray(s_values, float)
    rows = []
    for r in r_values:
        for s in s_values:
            rows.append((float(r), float(s), shark_fin(P, float(r), float(s))))
    return _csv("r,s,b_squared", rows)


def deltoid_csv(samples: int = 360) -> str:
    from .su21_core import deltoid

    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    f = resultant_f(deltoid(theta))
    return _csv("theta,f", zip(theta.tolist(), f.tolist()))


def sequence_csv(seq: NeighborSequence) -> str:
    ns = range(seq.n_min, seq.n_min + len(seq.values))
    return _csv("n,abs_u", ((n, abs(complex(v))) for n, v in zip(ns, seq.values)))
