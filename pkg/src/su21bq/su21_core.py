"""SU(2,1) linear algebra: membership, the trace resultant, classification.

Matrices are plain ``numpy`` arrays of shape (3, 3) and dtype complex128.
The Hermitian form is ``J = diag(1, 1, -1)``.
"""
from __future__ import annotations

import cmath
import enum
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import kernels

J = np.diag([1.0, 1.0, -1.0]).astype(np.complex128)
OMEGA = cmath.exp(2j * math.pi / 3)
CUBE_ROOTS_OF_UNITY = (1.0 + 0.0j, OMEGA, OMEGA.conjugate())

MEMBERSHIP_TOL = 1e-9
# multiplies 2 ln(max |eigenvalue|); overridable for other metric normalisations
DISPLACEMENT_SCALE = float(os.environ.get("SU21BQ_DISPLACEMENT_SCALE", "1.0"))
MAX_CONDITION = 1e12
HUGE_TRACE = 1e60


class InvalidInputError(ValueError):
    """Input is malformed (non-finite entries, wrong shape)."""


class NotSU21Error(ValueError):
    """A matrix was expected to lie in SU(2,1) but does not."""


class NumericDegeneracyError(ArithmeticError):
    """An eigen computation is too ill-conditioned to trust."""

    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class ElementKind(enum.Enum):
    LOXODROMIC = "Loxodromic"
    REGULAR_ELLIPTIC = "RegularElliptic"
    PARABOLIC_NON_UNIPOTENT = "ParabolicNonUnipotent"
    COMPLEX_REFLECTION = "ComplexReflection"
    UNIPOTENT = "Unipotent"
    BOUNDARY_AMBIGUOUS = "Boundary-Ambiguous"


@dataclass(frozen=True)
class ElementClass:
    kind: ElementKind
    trace: complex
    f_value: float
    eigenvalues: tuple[complex, complex, complex]


def as_matrix(A) -> np.ndarray:
    M = np.asarray(A, dtype=np.complex128)
    if M.shape != (3, 3):
        raise InvalidInputError(f"expected a 3x3 matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M


def is_su21(A, tol: float = MEMBERSHIP_TOL) -> bool:
    """True when det(A) = 1 and A^-1 = J A^H J, both within ``tol``.

    The unitarity test is applied as ``A J A^H J = I`` entrywise, scaled by
    the size of ``A`` so that large loxodromics are not rejected for rounding.
    """
    M = as_matrix(A)
    scale = max(1.0, float(np.abs(M).max()) ** 2)
    if abs(np.linalg.det(M) - 1.0) > tol * scale**1.5:
        return False
    resid = M @ J @ M.conj().T @ J - np.eye(3)
    return bool(np.abs(resid).max() <= tol * scale)


def require_su21(A, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    M = as_matrix(A)
    if not is_su21(M, tol):
        raise NotSU21Error("matrix is not in SU(2,1) within tolerance")
    return M


def su21_inverse(A) -> np.ndarray:
    M = np.asarray(A, dtype=np.complex128)
    return J @ M.conj().T @ J


def char_poly(A) -> complex:
    """Trace t of A; the characteristic polynomial is x^3 - t x^2 + conj(t) x - 1."""
    M = require_su21(A)
    return complex(np.trace(M))


def resultant_f(t) -> float:
    """|t|^4 - 8 Re(t^3) + 18 |t|^2 - 27.  Accepts scalars or arrays."""
    if np.ndim(t) == 0:
        t = complex(t)
        if abs(t) > HUGE_TRACE:
            return math.inf
        a2 = t.real * t.real + t.imag * t.imag
        return a2 * a2 - 8.0 * (t * t * t).real + 18.0 * a2 - 27.0
    arr = np.ascontiguousarray(np.asarray(t, dtype=np.complex128).ravel())
    return kernels.resultant_array(arr).reshape(np.shape(t))


def boundary_tol(t: complex) -> float:
    return 1e-9 * (1.0 + min(abs(t), HUGE_TRACE) ** 4)


def deltoid(theta):
    """Boundary of the loxodromic region: 2 e^{i theta} + e^{-2 i theta}."""
    return 2.0 * np.exp(1j * np.asarray(theta)) + np.exp(-2j * np.asarray(theta))


def _cbrt(z: complex) -> complex:
    if z == 0:
        return 0j
    return cmath.exp(cmath.log(z) / 3.0)


def trace_eigenvalues(t: complex) -> tuple[complex, complex, complex]:
    """Roots of x^3 - t x^2 + conj(t) x - 1, sorted by decreasing modulus.

    Cardano with one Newton step per root.  Repeated roots come back repeated.
    """
    t = complex(t)
    if abs(t) > 1e30:
        # dominant root t - conj(t)/t up to O(|t|^-2); the others follow from the symmetry
        lam = t - t.conjugate() / t
        return lam, lam.conjugate() / lam, 1.0 / lam.conjugate()
    a, b, c = -t, t.conjugate(), -1.0 + 0j
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = cmath.sqrt(q * q / 4.0 + p**3 / 27.0)
    u = -q / 2.0 + disc
    v = -q / 2.0 - disc
    C = _cbrt(u if abs(u) >= abs(v) else v)
    roots = []
    for w in CUBE_ROOTS_OF_UNITY:
        if C == 0:
            y = 0j
        else:
            Cw = C * w
            y = Cw - p / (3.0 * Cw)
        roots.append(y - a / 3.0)
    polished = []
    for r in roots:
        val = ((r - t) * r + t.conjugate()) * r - 1.0
        der = (3.0 * r - 2.0 * t) * r + t.conjugate()
        if abs(der) > 1e-8 * (1.0 + abs(r) ** 2):
            step = val / der
            # a Newton step near a double root can overshoot; keep it only if it helps
            cand = r - step
            cval = ((cand - t) * cand + t.conjugate()) * cand - 1.0
            if abs(cval) < abs(val):
                r = cand
        polished.append(r)
    polished.sort(key=lambda z: -abs(z))
    return tuple(polished)


def eigenvalues(A) -> tuple[complex, complex, complex]:
    return trace_eigenvalues(char_poly(A))


def _condition(M: np.ndarray) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


def classify(A, tol: float | None = None) -> ElementClass:
    M = require_su21(A)
    cond = _condition(M)
    if cond > MAX_CONDITION:
        raise NumericDegeneracyError("matrix too ill-conditioned to classify", cond)
    t = complex(np.trace(M))
    f = resultant_f(t)
    band = boundary_tol(t) if tol is None else tol
    eig = trace_eigenvalues(t)

    def result(kind):
        return ElementClass(kind, t, f, eig)

    if f > band:
        return result(ElementKind.LOXODROMIC)
    if f < -band:
        return result(ElementKind.REGULAR_ELLIPTIC)

    for w in CUBE_ROOTS_OF_UNITY:
        if abs(t - 3.0 * w) <= 1e-6 * (1.0 + abs(t)):
            N = M - w * np.eye(3)
            if np.abs(N @ N @ N).max() <= 1e-6 * (1.0 + np.abs(M).max() ** 3):
                return result(ElementKind.UNIPOTENT)
            return result(ElementKind.BOUNDARY_AMBIGUOUS)

    # repeated eigenvalue: the closest pair among the three roots
    pairs = [(abs(eig[i] - eig[j]), i, j) for i in range(3) for j in range(i + 1, 3)]
    _, i, j = min(pairs)
    mu = 0.5 * (eig[i] + eig[j])
    sv = np.linalg.svd(M - mu * np.eye(3), compute_uv=False)
    scale = 1.0 + sv[0]
    if sv[1] <= 1e-6 * scale:
        return result(ElementKind.COMPLEX_REFLECTION)
    if sv[1] >= 1e-3 * scale and sv[2] <= 1e-3 * scale:
        return result(ElementKind.PARABOLIC_NON_UNIPOTENT)
    return result(ElementKind.BOUNDARY_AMBIGUOUS)


def displacement_from_trace(t: complex, scale: float | None = None) -> float:
    """scale * 2 ln(max |eigenvalue|) for loxodromic traces, else 0."""
    if resultant_f(t) <= boundary_tol(t):
        return 0.0
    k = DISPLACEMENT_SCALE if scale is None else scale
    return k * 2.0 * math.log(abs(trace_eigenvalues(t)[0]))


def displacement(A, scale: float | None = None) -> float:
    return displacement_from_trace(char_poly(A), scale)


def random_lie_element(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random X with X^H J + J X = 0 and tr X = 0."""
    S = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    S = 0.5 * (S - S.conj().T)
    X = J @ S
    X -= np.trace(X) / 3.0 * np.eye(3)
    return scale * X


def random_su21(seed: int | np.random.Generator, scale: float = 1.0) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return expm(random_lie_element(rng, scale))


def loxodromic_from_eigenvalue(lam: complex) -> np.ndarray:
    """diag(lam, conj(lam)/lam, 1/conj(lam)) moved into the J = diag(1,1,-1) frame.

    The diagonal form preserves the antidiagonal Hermitian form; a Cayley
    type change of basis carries that form to J.
    """
    lam = complex(lam)
    D = np.diag([lam, lam.conjugate() / lam, 1.0 / lam.conjugate()])
    # columns e1 +- e3 of the null basis map to the J-frame
    s = 1.0 / math.sqrt(2.0)
    C = np.array([[s, 0, s], [0, 1, 0], [s, 0, -s]], dtype=np.complex128)
    return C @ D @ np.linalg.inv(C)
