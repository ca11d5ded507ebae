"""Trace coordinates, Farey combinatorics and Bowditch certification for SU(2,1) characters of F2."""

__version__ = "0.1.0"

from .certifier import Verdict, VerdictTag, certify, enumerate_omega  # noqa: E402
from .charvar import CharacterPoint, M_of_c, character_of, fuchsian_point, identity_point  # noqa: E402

__all__ = [
    "CharacterPoint",
    "M_of_c",
    "Verdict",
    "VerdictTag",
    "__version__",
    "certify",
    "character_of",
    "enumerate_omega",
    "fuchsian_point",
    "identity_point",
]
