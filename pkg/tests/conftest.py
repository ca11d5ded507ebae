import numpy as np
import pytest
from hypothesis import settings

from su21bq.su21_core import random_su21, su21_inverse

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def word_matrix(word: str, A, B) -> np.ndarray:
    """Product of the generators spelled by ``word`` (capitals are inverses)."""
    letters = {"a": A, "b": B, "A": su21_inverse(A), "B": su21_inverse(B)}
    M = np.eye(3, dtype=np.complex128)
    for ch in word:
        M = M @ letters[ch]
    return M


def word_trace(word: str, A, B) -> complex:
    return complex(np.trace(word_matrix(word, A, B)))


def random_pair(rng: np.random.Generator, scale: float | None = None):
    s = float(rng.choice([0.3, 0.7, 1.2, 2.0])) if scale is None else scale
    return random_su21(rng, s), random_su21(rng, s)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def ball_quadruples(point, depth: int):
    """Every vertex quadruple within ``depth`` moves of the base vertex."""
    from su21bq import kernels
    from su21bq.dynamics import VertexQuadruple

    slopes, quads, _ = kernels.ball_vertices(*point.quadruple, depth)
    return [
        VertexQuadruple((int(s[0]), int(s[1])), (int(s[2]), int(s[3])), *map(complex, q))
        for s, q in zip(slopes, quads)
    ]


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
