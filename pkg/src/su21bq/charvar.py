"""Trace coordinates on the SL(3,C) and SU(2,1) character varieties of F2.

Coordinates for a pair (A, B): x = tr A, y = tr B, z = tr AB, t = tr AB^-1,
capitals for the traces of the inverses (X = tr A^-1, Z = tr A^-1 B^-1,
T = tr A^-1 B) and s = tr [A, B].  The commutator trace satisfies
s^2 - P s + Q = 0.  On SU(2,1) every inverse trace is the conjugate of the
direct one, and P, Q become real.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .su21_core import NotSU21Error, require_su21, su21_inverse

DISCRIMINANT_TOL = 1e-8
RADIAL_IMAG_TOL = 1e-7
RADIAL_UNIT_TOL = 1e-6
S_GRID = 4096


class InconsistentCharacterError(ValueError):
    """Q - P^2/4 is negative beyond tolerance: no SU(2,1) boundary trace exists."""


@dataclass(frozen=True)
class Sl3Coordinates:
    x: complex
    y: complex
    z: complex
    t: complex
    X: complex
    Y: complex
    Z: complex
    T: complex
    s: complex

    @classmethod
    def from_matrices(cls, A, B) -> "Sl3Coordinates":
        A = np.asarray(A, dtype=np.complex128)
        B = np.asarray(B, dtype=np.complex128)
        Ai, Bi = np.linalg.inv(A), np.linalg.inv(B)
        tr = lambda M: complex(np.trace(M))  # noqa: E731
        return cls(
            tr(A), tr(B), tr(A @ B), tr(A @ Bi),
            tr(Ai), tr(Bi), tr(Ai @ Bi), tr(Ai @ B),
            tr(A @ B @ Ai @ Bi),
        )


def sl3_P(c: Sl3Coordinates) -> complex:
    x, y, z, t, X, Y, Z, T = c.x, c.y, c.z, c.t, c.X, c.Y, c.Z, c.T
    return -3 + t * T + x * X - t * X * y - T * x * Y + y * Y + x * X * y * Y - X * Y * z - x * y * Z + z * Z


def _sl3_Q(x, y, z, t, X, Y, Z, T):
    return (
        9 + t**3 - 6 * t * T + T**3 + x**3 - 6 * x * X + t * T * x * X + X**3 + t * x**2 * y
        + 3 * t * X * y - 2 * T**2 * X * y - t * x * X**2 * y + T * x * y**2 + T * X**2 * y**2 + y**3
        - x * X * y**3 - 2 * t**2 * x * Y + 3 * T * x * Y - T * x**2 * X * Y + T * X**2 * Y - 6 * y * Y
        + t * T * y * Y - x**3 * y * Y + x * X * y * Y + x**2 * X**2 * y * Y - X**3 * y * Y - t * X * y**2 * Y
        + t * x**2 * Y**2 + t * X * Y**2 - T * x * y * Y**2 + x * X * y**2 * Y**2 + Y**3 - x * X * Y**3
        - 3 * t * x * z + T**2 * x * z + t * X**2 * z + t**2 * y * z - 3 * T * y * z - T * x * X * y * z
        + x**2 * y**2 * z + X * y**2 * z + x**2 * Y * z + 3 * X * Y * z - x * X**2 * Y * z - t * x * y * Y * z
        + T * Y**2 * z - X * y * Y**2 * z + T * X * z**2 - 2 * x * y * z**2 + t * Y * z**2 + z**3 + T * x**2 * Z
        + t**2 * X * Z - 3 * T * X * Z + 3 * x * y * Z - x**2 * X * y * Z + X**2 * y * Z + t * y**2 * Z
        - 3 * t * Y * Z + T**2 * Y * Z - t * x * X * Y * Z - T * X * y * Y * Z - x * y**2 * Y * Z + x * Y**2 * Z
        + X**2 * Y**2 * Z - 6 * z * Z + t * T * z * Z + x * X * z * Z + y * Y * z * Z + t * x * Z**2
        + T * y * Z**2 - 2 * X * Y * Z**2 + Z**3
    )


def sl3_Q(c: Sl3Coordinates) -> complex:
    return _sl3_Q(c.x, c.y, c.z, c.t, c.X, c.Y, c.Z, c.T)


def su21_P(x, y, z, t) -> float:
    """P = 2 Re tr[A, B] on SU(2,1), in terms of (x, y, z, t)."""
    ax, ay = abs(x) ** 2, abs(y) ** 2
    return (
        ax * ay + ax + ay + abs(z) ** 2 + abs(t) ** 2
        - 2 * (x * y * np.conj(z)).real - 2 * (np.conj(x) * y * t).real - 3
    )


def su21_Q(x, y, z, t) -> float:
    """Q = |tr[A, B]|^2 on SU(2,1), the reduced real polynomial."""
    re = np.real
    X, Y, T = np.conj(x), np.conj(y), np.conj(t)
    ax, ay, az, at = abs(x) ** 2, abs(y) ** 2, abs(z) ** 2, abs(t) ** 2
    return (
        9 - 6 * ax - 6 * ay - 6 * az - 6 * at
        + at * ay + ax * ay + ay * az + at * az + ax * az + at * ax + ax * ay**2 + ay * ax**2
        + 2 * re(z**3) + 2 * re(t**3) + 2 * re(x**3) + 2 * re(y**3)
        + 2 * re(t * x**2 * y) - 6 * re(t * x * z) + 2 * re(t**2 * y * z) + 2 * re(x**2 * y**2 * z)
        - 4 * re(x * y * z**2) + 2 * re(x * y**2 * T) - 6 * re(y * z * T) + 2 * re(x * z * T**2)
        + 6 * re(t * y * X) - 2 * ax * re(y**3) + 2 * re(y**2 * z * X) - 2 * ay * re(X * t * y)
        - 2 * ax * re(y * z * T) + 2 * re(z**2 * T * X) - 4 * re(y * T**2 * X) - 2 * ax * re(t * y * X)
        + 2 * re(t * z * X**2) + 2 * re(y**2 * T * X**2) - 2 * ay * re(x**3) + 2 * re(x**2 * z * Y)
        - 2 * ay * re(t * x * z) + 2 * re(t * z**2 * Y) + 6 * re(z * X * Y) - 2 * ax * re(z * X * Y)
        + 2 * re(z * T * Y**2) - 2 * ay * re(z * X * Y)
    )


def su21_Q_via_sl3(x, y, z, t) -> float:
    """Same value as ``su21_Q`` computed through the SL(3,C) polynomial."""
    return _sl3_Q(x, y, z, t, np.conj(x), np.conj(y), np.conj(z), np.conj(t)).real


def boundary_traces(x, y, z, t, tol: float = DISCRIMINANT_TOL) -> tuple[complex, complex]:
    P = su21_P(x, y, z, t)
    Q = su21_Q(x, y, z, t)
    return boundary_traces_from_PQ(P, Q, tol)


def boundary_traces_from_PQ(P: float, Q: float, tol: float = DISCRIMINANT_TOL):
    gap = Q - P * P / 4.0
    if gap < -tol * (1.0 + abs(Q)):
        raise InconsistentCharacterError(f"Q - P^2/4 = {gap:.3e} < 0")
    im = math.sqrt(max(gap, 0.0))
    return complex(P / 2.0, im), complex(P / 2.0, -im)


@dataclass(frozen=True)
class CharacterPoint:
    """Trace quadruple (x, y, z, t) with its boundary trace c."""

    x: complex
    y: complex
    z: complex
    t: complex
    c: complex

    @property
    def P(self) -> float:
        return su21_P(self.x, self.y, self.z, self.t)

    @property
    def Q(self) -> float:
        return su21_Q(self.x, self.y, self.z, self.t)

    @property
    def quadruple(self) -> tuple[complex, complex, complex, complex]:
        return (self.x, self.y, self.z, self.t)

    @classmethod
    def from_traces(cls, x, y, z, t, c=None, tol: float = DISCRIMINANT_TOL) -> "CharacterPoint":
        """Build a point; without ``c`` the root with non-negative imaginary part is used."""
        x, y, z, t = complex(x), complex(y), complex(z), complex(t)
        plus, minus = boundary_traces(x, y, z, t, tol)
        if c is None:
            c = plus
        else:
            c = complex(c)
            scale = tol * (1.0 + abs(c) ** 2)
            if min(abs(c - plus), abs(c - minus)) ** 2 > 1e3 * scale:
                raise InconsistentCharacterError(f"c = {c} is not a root of s^2 - P s + Q")
        return cls(x, y, z, t, c)

    def conjugate(self) -> "CharacterPoint":
        return CharacterPoint(*(complex(np.conj(v)) for v in (self.x, self.y, self.z, self.t, self.c)))

    def to_json(self) -> dict:
        return {k: [getattr(self, k).real, getattr(self, k).imag] for k in ("x", "y", "z", "t", "c")}

    @classmethod
    def from_json(cls, doc: dict) -> "CharacterPoint":
        vals = {}
        for k in ("x", "y", "z", "t"):
            re, im = doc[k]
            vals[k] = complex(float(re), float(im))
        c = doc.get("c")
        c = complex(float(c[0]), float(c[1])) if c is not None else None
        return cls.from_traces(vals["x"], vals["y"], vals["z"], vals["t"], c)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def character_of(A, B) -> CharacterPoint:
    A = require_su21(A)
    B = require_su21(B)
    Ai, Bi = su21_inverse(A), su21_inverse(B)
    tr = lambda M: complex(np.trace(M))  # noqa: E731
    return CharacterPoint(tr(A), tr(B), tr(A @ B), tr(A @ Bi), tr(A @ B @ Ai @ Bi))


def branch_discriminant(point: CharacterPoint) -> float:
    P, Q = point.P, point.Q
    return P * P - 4.0 * Q


def on_branch_locus(point: CharacterPoint, tol: float = DISCRIMINANT_TOL) -> bool:
    return abs(branch_discriminant(point)) <= tol * (1.0 + point.Q)


def is_smooth_fiber(c: complex) -> bool:
    return complex(c).imag != 0.0


# ---------------------------------------------------------------- fiber constants


def radial_polynomial(P: float, Q: float) -> np.ndarray:
    """Coefficients (highest first) in u = r^2 of (P u^2 - u^3 + 1)(P u + u^3 - 1) - Q u^2 (u + 1)^2."""
    left = np.polymul([-1.0, P, 0.0, 1.0], [1.0, 0.0, P, -1.0])
    right = Q * np.polymul([1.0, 0.0, 0.0], [1.0, 2.0, 1.0])
    return np.polysub(left, right)


def _deflate_unit_root(coeffs: np.ndarray) -> tuple[np.ndarray, int]:
    count = 0
    p = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    while len(p) > 1:
        if abs(np.polyval(p, 1.0)) > 1e-12 * (1.0 + np.abs(p).max()):
            break
        p, _ = np.polydiv(p, [1.0, -1.0])
        count += 1
    return p, count


@dataclass(frozen=True)
class RadialRoots:
    roots: tuple[float, ...]
    unit_root: bool


def radial_roots(P: float, Q: float) -> RadialRoots:
    """Positive real r != 1 solving (P r^4 - r^6 + 1)(P r^2 + r^6 - 1) = Q r^4 (r^2 + 1)^2.

    r = 1 (which happens exactly on the branch locus P^2 = 4Q) is reported
    through ``unit_root`` and removed from ``roots``.
    """
    coeffs, mult = _deflate_unit_root(radial_polynomial(P, Q))
    found = []
    if len(coeffs) > 1:
        for u in np.roots(coeffs):
            if abs(u.imag) > RADIAL_IMAG_TOL * (1.0 + abs(u)) or u.real <= 0:
                continue
            r = math.sqrt(u.real)
            if abs(r - 1.0) <= RADIAL_UNIT_TOL:
                mult += 1
                continue
            if all(abs(r - s) > 1e-6 * (1 + r) for s in found):
                found.append(r)
    return RadialRoots(tuple(sorted(found)), mult > 0)


def b_squared(P: float, r: float, s) -> np.ndarray:
    """|B|^2 as a function of lambda = r e^{is} on the fiber with parameter P."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return kernels.b_squared_grid(float(P), np.array([float(r)]), s)[0]


def _max_b_squared(P: float, r: float) -> float:
    s = np.linspace(0.0, 2.0 * np.pi, S_GRID, endpoint=False)
    vals = b_squared(P, r, s)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    k = int(np.argmax(vals))
    h = s[1] - s[0]
    res = minimize_scalar(
        lambda v: -float(b_squared(P, r, v)[0]),
        bracket=(s[k] - h, s[k], s[k] + h),
        method="golden",
        options={"xtol": 1e-12},
    )
    return max(float(vals[k]), -float(res.fun))


@dataclass(frozen=True)
class FiberConstants:
    c_value: complex
    P: float
    Q: float
    Mc: float
    Dc: float
    r_roots: tuple[float, ...] = field(default_factory=tuple)
    unit_root: bool = False

    @property
    def fork_constant(self) -> float:
        return max(6.0, math.sqrt(abs(self.c_value.real)))


def D_of_c(c: complex) -> float:
    c = complex(c)
    P, Q = 2.0 * c.real, abs(c) ** 2
    return _d_from_roots(P, radial_roots(P, Q).roots)


def _d_from_roots(P, roots) -> float:
    if not roots:
        return 0.0
    best = max(max(_max_b_squared(P, r), 0.0) for r in roots)
    bmax = math.sqrt(best)
    return bmax + 1e-6 * (1.0 + bmax)


def M_of_c(c: complex) -> FiberConstants:
    c = complex(c)
    P, Q = 2.0 * c.real, abs(c) ** 2
    rr = radial_roots(P, Q)
    D = _d_from_roots(P, rr.roots)
    Mc = max(6.0, math.sqrt(abs(c.real)), D)
    return FiberConstants(c, P, Q, Mc, D, rr.roots, rr.unit_root)


# ------------------------------------------------------------ worked example


def symmetric_square(g) -> np.ndarray:
    """Adjoint image of g in SL(2,R), in the basis diag(1,-1), [[0,1],[1,0]], [[0,1],[-1,0]].

    The Killing form is diag(1,1,-1) in this basis, so the image lies in
    SO(2,1) inside SU(2,1); its trace is tr(g)^2 - 1.
    """
    g = np.asarray(g, dtype=float)
    basis = [
        np.array([[1.0, 0.0], [0.0, -1.0]]),
        np.array([[0.0, 1.0], [1.0, 0.0]]),
        np.array([[0.0, 1.0], [-1.0, 0.0]]),
    ]
    gi = np.linalg.inv(g)
    out = np.zeros((3, 3))
    for j, e in enumerate(basis):
        m = g @ e @ gi
        a = m[0, 0]
        b = 0.5 * (m[0, 1] + m[1, 0])
        c = 0.5 * (m[0, 1] - m[1, 0])
        out[:, j] = (a, b, c)
    return out.astype(np.complex128)


MARKOV_PAIR = (np.array([[1.0, 1.0], [1.0, 2.0]]), np.array([[1.0, -1.0], [-1.0, 2.0]]))


def fuchsian_generators() -> tuple[np.ndarray, np.ndarray]:
    """Symmetric-square images of a Markov pair with traces (3, 3, 3)."""
    return symmetric_square(MARKOV_PAIR[0]), symmetric_square(MARKOV_PAIR[1])


def fuchsian_point() -> CharacterPoint:
    return CharacterPoint(8 + 0j, 8 + 0j, 8 + 0j, 35 + 0j, 3 + 0j)


def identity_point() -> CharacterPoint:
    return CharacterPoint(3 + 0j, 3 + 0j, 3 + 0j, 3 + 0j, 3 + 0j)


__all__ = [
    "CharacterPoint", "FiberConstants", "InconsistentCharacterError", "NotSU21Error", "RadialRoots",
    "Sl3Coordinates", "b_squared", "boundary_traces", "boundary_traces_from_PQ", "branch_discriminant",
    "character_of", "D_of_c", "M_of_c", "fuchsian_generators", "fuchsian_point", "identity_point",
    "is_smooth_fiber", "on_branch_locus", "radial_polynomial", "radial_roots", "sl3_P", "sl3_Q",
    "su21_P", "su21_Q", "su21_Q_via_sl3", "symmetric_square",
]
