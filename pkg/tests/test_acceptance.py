"""One test per acceptance criterion; each prints a PASS/FAIL line (collected again in the summary)."""
import math
import time
import timeit

import mpmath as mp
import numpy as np
import sympy

from su21bq.certifier import (
    TraceField,
    VerdictTag,
    bq3_report,
    certify,
    check_connected,
    enumerate_omega,
    eps0,
    escaping_ray_probe,
    fork_constant,
    is_eps_fork,
    is_fork,
    orient,
    random_vertex,
)
from su21bq.charvar import (
    M_of_c,
    _sl3_Q,
    boundary_traces,
    character_of,
    fuchsian_generators,
    fuchsian_point,
    identity_point,
    su21_P,
    su21_Q,
)
from su21bq.dynamics import (
    Move,
    NielsenMove,
    h_bound,
    nielsen_move,
    nielsen_slope_map,
    propagate_ball,
    q_from_b,
    q_of_r,
    sequence_around,
    shark_fin,
)
from su21bq.farey import fibonacci, region_word, word_length
from su21bq.su21_core import deltoid, is_su21, random_su21, resultant_f, su21_inverse

from conftest import ball_quadruples, random_pair

SCALES = (0.3, 0.7, 1.2, 2.0, 3.0)


def fiber_sample(rng, scales=SCALES):
    s = float(rng.choice(scales))
    return random_su21(rng, s), random_su21(rng, s)


# ----------------------------------------------------------------------------- 1


def test_identity_character(criterion):
    P, Q = su21_P(3, 3, 3, 3), su21_Q(3, 3, 3, 3)
    roots = boundary_traces(3, 3, 3, 3)
    err = max(abs(P - 6), abs(Q - 9), *(abs(r - 3) for r in roots))
    runtime = min(timeit.repeat(lambda: (su21_P(3, 3, 3, 3), su21_Q(3, 3, 3, 3), boundary_traces(3, 3, 3, 3)),
                                number=100, repeat=5)) / 100
    criterion(1, err <= 1e-12 and runtime < 1e-3,
              f"identity P=6 Q=9 double root 3, max err {err:.1e} (tol 1e-12), {runtime * 1e3:.3f} ms (< 1 ms)")


# ----------------------------------------------------------------------------- 2


def test_propagation_matches_matrix_words(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    regions = 0
    for _ in range(200):
        A, B = random_pair(rng)
        letters = {"a": A, "b": B, "A": su21_inverse(A), "B": su21_inverse(B)}
        cache = {"": np.eye(3, dtype=complex)}

        def mat(w):
            if w not in cache:
                cache[w] = mat(w[:-1]) @ letters[w[-1]]
            return cache[w]

        for slope, tr in propagate_ball(character_of(A, B), 8).items():
            want = complex(np.trace(mat(region_word(slope))))
            worst = max(worst, abs(tr - want) / (1 + abs(want)))
            regions += 1
    elapsed = time.perf_counter() - t0
    criterion(2, worst <= 1e-8 and elapsed < 60,
              f"200 pairs x depth-8 balls ({regions} regions), max rel err {worst:.1e} (tol 1e-8), "
              f"{elapsed:.1f} s (< 60 s)")


# ----------------------------------------------------------------------------- 3


def test_deltoid(criterion):
    theta = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    worst = float(np.max(np.abs(resultant_f(deltoid(theta)))))
    # exact: t = 3 w with w a primitive cube root of unity
    t = 3 * (sympy.Rational(-1, 2) + sympy.sqrt(3) * sympy.I / 2)
    a2 = sympy.expand(t * sympy.conjugate(t))
    t3 = sympy.expand(t**3)
    assert a2.is_Rational and t3.is_Rational
    exact = a2**2 - 8 * sympy.re(t3) + 18 * a2 - 27
    cusp_float = max(abs(resultant_f(complex(3 * np.exp(2j * np.pi * k / 3)))) for k in range(3))
    criterion(3, worst <= 1e-9 and exact == 0,
              f"max |f| on 1e4 deltoid samples {worst:.1e} (tol 1e-9); f(3 zeta_3) = {exact} exactly "
              f"(float {cusp_float:.1e})")


# ----------------------------------------------------------------------------- 4


def _q_oracle(P, r, s):
    """Q of the limiting quadruple at 40 digits, or None when |B|^2 < 0."""
    mp.mp.dps = 40
    lam = mp.mpf(r) * mp.expj(s)
    lb = mp.conj(lam)
    w = lb / lam
    x = lam + w + 1 / lb
    b2 = (P + 3 - abs(x) ** 2) / (abs(x) ** 2 - 4 * mp.re(x * lam / lb) + 3)
    if b2 < 0:
        return None
    B = mp.sqrt(b2)
    y, z, t = B, B * w, B * w
    c = mp.conj
    return float(mp.re(_sl3_Q(x, y, z, t, c(x), c(y), c(z), c(t))))


def test_radial_slice_identities(criterion):
    rng = np.random.default_rng(4)
    Ps = rng.uniform(-20, 20, 100)
    worst = worst_oracle = 0.0
    oracle_hits = 0
    for P in Ps:
        for r, s in zip(rng.uniform(0.2, 3.0, 100), rng.uniform(0, 2 * np.pi, 100)):
            q = q_of_r(P, r)
            worst = max(worst, abs(q_from_b(P, r, s) - q) / (1 + abs(q)))
            if oracle_hits < 400:
                o = _q_oracle(P, r, s)
                if o is not None:
                    worst_oracle = max(worst_oracle, abs(o - q) / (1 + abs(q)))
                    oracle_hits += 1
    lim = max(abs(q_of_r(P, 1 + d) - P * P / 4) / (1 + P * P) for P in Ps for d in (1e-4, -1e-4))
    fin1 = max(abs(shark_fin(6, 1 + d, math.pi / 7) - 1) for d in (1e-4, -1e-4))
    fin3 = max(abs(shark_fin(6, 1 + d, 0.0) + 3) for d in (1e-4, -1e-4))
    ok = worst <= 1e-8 and worst_oracle <= 1e-8 and lim <= 1e-3 and fin1 <= 1e-3 and fin3 <= 1e-3
    criterion(4, ok,
              f"Q from |B|^2 vs q_of_r on 100x100 grid rel err {worst:.1e}, mpmath oracle ({oracle_hits} pts) "
              f"{worst_oracle:.1e} (tol 1e-8); r->1 limit {lim:.1e} (tol 1e-3); shark fin limits "
              f"1: {fin1:.1e}, -3: {fin3:.1e} (tol 1e-3)")


# ----------------------------------------------------------------------------- 5


def test_fork_bound(criterion):
    rng = np.random.default_rng(5)
    forks = eps_forks = eps_fibers = 0
    violations = eps_violations = 0
    for _ in range(1000):
        p = character_of(*fiber_sample(rng))
        C = fork_constant(p.c)
        eps = eps0(C) / 2 if C > 6 else None
        eps_fibers += eps is not None
        for q in ball_quadruples(p, 8):
            m = min(abs(q.x), abs(q.y))
            if is_fork(q):
                forks += 1
                violations += m > C + 1e-9
            if eps is not None and is_eps_fork(q, eps):
                eps_forks += 1
                eps_violations += not (m < C)
    criterion(5, violations == 0 and eps_violations == 0 and forks > 0 and eps_forks > 0,
              f"1000 fibers, depth-8 balls: {forks} forks, {violations} violations of min(|x|,|y|) <= C; "
              f"{eps_forks} eps-forks on {eps_fibers} fibers with C > 6, {eps_violations} violations")


# ----------------------------------------------------------------------------- 6


def test_connectedness(criterion):
    rng = np.random.default_rng(6)
    exhausted = connected = 0
    for _ in range(100):
        p = character_of(*fiber_sample(rng))
        rs = enumerate_omega(p, budget=20_000)
        if rs.exhausted:
            exhausted += 1
            connected += check_connected(rs)
    criterion(6, exhausted > 0 and connected == exhausted,
              f"{exhausted}/100 fibers exhausted at K = M(c) >= C, {connected} connected")


# ----------------------------------------------------------------------------- 7


def test_fuchsian_end_to_end(criterion):
    fp = fuchsian_point()
    t0 = time.perf_counter()
    v = certify(fp, budget=100_000)
    elapsed = time.perf_counter() - t0
    rep = bq3_report(fp, depth=12)
    rng = np.random.default_rng(7)
    field = TraceField(fp)
    escapes = 0
    for _ in range(50):
        start = random_vertex(fp, rng, int(rng.integers(0, 16)))
        ray = escaping_ray_probe(start, 1000, field=field)
        escapes += not ray.terminated
    ok = v.tag == VerdictTag.CERTIFIED and elapsed < 10 and rep.k > 0 and escapes == 0
    criterion(7, ok,
              f"(8,8,8,35): {v.tag.value} in {elapsed:.2f} s (< 10 s), K = {v.constants['K']:g}; "
              f"bq3 k = {rep.k:.3f} > 0 at depth 12; {escapes}/50 rays escaped in 1000 steps")


# ----------------------------------------------------------------------------- 8


def test_refutations(criterion):
    cases = [("identity", identity_point(), None)]
    A, B = fuchsian_generators()
    w = np.exp(2j * np.pi / 3)
    E = np.diag([1, w, w * w])
    cases.append(("trace-0 generator", character_of(E, B), (E, B)))
    rng = np.random.default_rng(8)
    while len(cases) < 6:
        X, Y = random_pair(rng)
        if resultant_f(np.trace(X)) < 0:
            cases.append(("random f<0 generator", character_of(X, Y), (X, Y)))
    worst_time = 0.0
    bad = []
    for name, p, mats in cases:
        t0 = time.perf_counter()
        v = certify(p)
        worst_time = max(worst_time, time.perf_counter() - t0)
        wit = v.witness
        good = v.tag == VerdictTag.REFUTED and wit is not None and wit.kind == "non-loxodromic"
        good = good and resultant_f(wit.trace) <= 1e-6 * (1 + abs(wit.trace)) ** 4
        if mats is not None and good:
            X, Y = mats
            letters = {"a": X, "b": Y, "A": su21_inverse(X), "B": su21_inverse(Y)}
            M = np.eye(3, dtype=complex)
            for ch in region_word(wit.region):
                M = M @ letters[ch]
            good = abs(np.trace(M) - wit.trace) < 1e-8 * (1 + abs(wit.trace))
        if not good:
            bad.append(name)
    criterion(8, not bad and worst_time < 1,
              f"{len(cases)} characters refuted with matrix-checked witnesses, slowest {worst_time * 1e3:.1f} ms "
              f"(< 1 s); failures: {bad or 'none'}")


# ----------------------------------------------------------------------------- 9


def _orientations_match(p, q, g, tf_q, depth=3):
    for v in ball_quadruples(p, depth):
        image = tf_q.vertex(g(v.regions()[0][0]), g(v.regions()[1][0]))
        edges = {(e.dropped, e.gained): e for e in (orient(image, mv) for mv in Move)}
        for mv in Move:
            e = orient(v, mv)
            f = edges.get((g(e.dropped), g(e.gained)))
            if f is None:
                return False
            if not (e.tie_broken or f.tie_broken) and e.away != f.away:
                return False
    return True


def test_nielsen_equivariance(criterion):
    rng = np.random.default_rng(9)
    A0, B0 = fuchsian_generators()
    points = []
    tags = {VerdictTag.CERTIFIED: 0, VerdictTag.REFUTED: 0}
    while len(points) < 50:
        if len(points) % 2 == 0:
            A, B = A0 @ random_su21(rng, 0.08), B0 @ random_su21(rng, 0.08)
        else:
            A, B = random_pair(rng)
        p = character_of(A, B)
        v = certify(p, K=40)
        if v.tag in tags:
            tags[v.tag] += 1
            points.append((p, v))
    mismatches = 0
    for p, v in points:
        for m in NielsenMove:
            q = nielsen_move(p, m)
            w = certify(q, K=40)
            g = nielsen_slope_map(m)
            same = w.tag == v.tag
            if same and v.tag == VerdictTag.CERTIFIED:
                same = {g(s) for s in v.omega.members} == set(w.omega.members)
                same = same and {frozenset(map(g, t)) for t in v.attractor.triangles} == set(w.attractor.triangles)
                same = same and _orientations_match(p, q, g, w.omega.trace_field)
            mismatches += not same
    criterion(9, mismatches == 0,
              f"50 points ({tags[VerdictTag.CERTIFIED]} certified, {tags[VerdictTag.REFUTED]} refuted) x 3 moves: "
              f"{mismatches} mismatches in verdict, Omega, attractor or orientation")


# ----------------------------------------------------------------------------- 10


def test_word_length_equals_fibonacci(criterion):
    regions = list(propagate_ball(identity_point(), 12))
    bad = sum(word_length(s) != fibonacci(s) for s in regions)
    criterion(10, bad == 0 and len(regions) == 2**13,
              f"W = F on all {len(regions)} regions of the depth-12 ball, {bad} mismatches")


# ----------------------------------------------------------------------------- 11


def _centralizer_element(A, s, theta):
    w, V = np.linalg.eig(A)
    V = V[:, np.argsort(-np.abs(w))]
    return V @ np.diag([s * np.exp(1j * theta), np.exp(-2j * theta), np.exp(1j * theta) / s]) @ np.linalg.inv(V)


def _monotone_beyond(values, h):
    mod = np.abs(values)
    for i in range(len(mod) - 1):
        if mod[i] > h and mod[i + 1] > mod[i] and not np.all(np.diff(mod[i:]) > 0):
            return False
        if mod[i + 1] > h and mod[i] > mod[i + 1] and not np.all(np.diff(mod[: i + 2]) < 0):
            return False
        if mod[i] > h and mod[i + 1] > h and mod[i] == mod[i + 1]:
            return False
    return True


def test_tail_monotonicity(criterion):
    rng = np.random.default_rng(11)
    sequences = violations = 0
    beyond = 0
    while sequences < 1000:
        A, B = fiber_sample(rng)
        x = complex(np.trace(A))
        if resultant_f(x) <= 1e-6:
            continue
        c = character_of(A, B).c
        hb = h_bound(x, M_of_c(c))
        for _ in range(10):
            g = _centralizer_element(A, float(np.exp(rng.normal(scale=1.5))), float(rng.uniform(0, 2 * np.pi)))
            if not is_su21(g, 1e-8):
                continue
            Bg = g @ B @ np.linalg.inv(g)
            seeds = [complex(np.trace(np.linalg.matrix_power(A, n) @ Bg)) for n in range(3)]
            seq = sequence_around(x, *seeds, n_min=-30, n_max=30)
            violations += not _monotone_beyond(seq.values, hb.value)
            beyond += int(np.sum(np.abs(seq.values) > hb.value))
            sequences += 1
    criterion(11, violations == 0,
              f"{sequences} sequences (n in [-30, 30]), {beyond} terms beyond h_bound, {violations} tail violations")
