import json

import numpy as np
import pytest

from su21bq.certifier import (
    ForkConvention,
    InfiniteArc,
    TraceField,
    VerdictTag,
    attractor_arc,
    bq3_report,
    build_attractor,
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
    stability_probe,
)
from su21bq.charvar import M_of_c, character_of, fuchsian_generators, fuchsian_point, identity_point
from su21bq.dynamics import (
    Move,
    NielsenMove,
    VertexQuadruple,
    base_quadruple,
    nielsen_move,
    nielsen_slope_map,
    propagate_ball,
)
from su21bq.farey import adjacent
from su21bq.su21_core import InvalidInputError, random_su21, resultant_f, su21_inverse

from conftest import ball_quadruples, random_pair


def perturbed_fuchsian(rng, scale=0.05):
    A, B = fuchsian_generators()
    return character_of(A @ random_su21(rng, scale), B @ random_su21(rng, scale))


def test_orient_examples():
    e = orient(base_quadruple(identity_point()), Move.XZ)
    assert e.tie_broken
    # |t| = 10 against a gained flank of modulus 2: the arrow points toward the gained side
    q = VertexQuadruple((1, 0), (0, 1), 1, 1, -8, 10)
    e = orient(q, Move.XZ)
    assert e.dropped == (-1, 1) and abs(dict(q.move(Move.XZ).regions())[e.gained]) < 10
    assert e.away and not e.tie_broken


def test_orient_points_toward_smaller_flank():
    A, B = fuchsian_generators()
    q = base_quadruple(fuchsian_point())
    # from the base edge the z flank (8) is smaller than t (35); the XT/YT moves trade t away
    for mv in (Move.XT, Move.YT):
        e = orient(q, mv)
        assert e.dropped == (1, 1) and not e.tie_broken
        assert e.away == (abs(q.z) > abs(dict(q.move(mv).regions())[e.gained]))


def test_orient_conjugation_invariant(rng):
    for _ in range(10):
        A, B = random_pair(rng)
        g = random_su21(rng, 1.0)
        gi = su21_inverse(g)
        p1 = character_of(A, B)
        p2 = character_of(g @ A @ gi, g @ B @ gi)
        for q1, q2 in zip(ball_quadruples(p1, 6), ball_quadruples(p2, 6)):
            for mv in Move:
                e1, e2 = orient(q1, mv), orient(q2, mv)
                if not (e1.tie_broken or e2.tie_broken):
                    assert e1.away == e2.away


def test_fork_examples():
    assert not is_fork(base_quadruple(identity_point()))
    assert not is_fork(base_quadruple(identity_point()), ForkConvention.DISPLAYED)
    assert not is_fork(base_quadruple(fuchsian_point()))
    assert is_eps_fork(base_quadruple(identity_point()), 1.0)
    with pytest.raises(InvalidInputError):
        is_eps_fork(base_quadruple(identity_point()), 0.0)


def test_eps0():
    assert eps0(6) == 0
    assert eps0(10) == 100 * 4 / 4


def test_forks_obey_the_fork_bound(rng):
    forks = 0
    for _ in range(60):
        p = character_of(*random_pair(rng))
        C = fork_constant(p.c)
        for q in ball_quadruples(p, 6):
            if is_fork(q):
                forks += 1
                assert min(abs(q.x), abs(q.y)) <= C + 1e-9
                for eps in (1e-3, 1.0):
                    assert is_eps_fork(q, eps)
    assert forks > 0


def test_displayed_fork_direction_breaks_the_fork_bound(rng):
    """With the inequalities reversed, forks far from the small-trace core appear."""
    bad = 0
    for _ in range(30):
        p = character_of(*random_pair(rng))
        C = fork_constant(p.c)
        bad += sum(
            min(abs(q.x), abs(q.y)) > C + 1e-9
            for q in ball_quadruples(p, 6)
            if is_fork(q, ForkConvention.DISPLAYED)
        )
    assert bad > 0


def test_enumerate_examples():
    rs = enumerate_omega(identity_point(), K=6, budget=500)
    assert not rs.exhausted and rs.stats.visited >= 500
    with pytest.raises(InvalidInputError):
        enumerate_omega(identity_point(), budget=0)
    with pytest.raises(ValueError):
        check_connected(rs)
    fp = fuchsian_point()
    rs = enumerate_omega(fp)
    assert rs.exhausted and rs.members == {}
    assert check_connected(rs)


def test_fuchsian_omega_matches_ball_oracle():
    fp = fuchsian_point()
    ball = propagate_ball(fp, 12)
    for K in (40, 300):
        rs = enumerate_omega(fp, K=K)
        assert rs.exhausted
        oracle = {s for s, tr in ball.items() if abs(tr) <= K}
        assert set(rs.members) == oracle
    assert len(enumerate_omega(fp, K=40).members) == 6


def test_enumeration_is_budget_idempotent(rng):
    for _ in range(10):
        p = perturbed_fuchsian(rng)
        a = enumerate_omega(p, K=60, budget=20_000)
        b = enumerate_omega(p, K=60, budget=40_000)
        assert a.exhausted and b.exhausted
        assert a.members == b.members


def test_enumeration_members_match_ball(rng):
    for _ in range(10):
        p = perturbed_fuchsian(rng, 0.1)
        rs = enumerate_omega(p, K=100)
        assert rs.exhausted
        ball = propagate_ball(p, 10)
        for s, tr in rs.members.items():
            assert abs(tr) <= 100
            if s in ball:
                assert abs(ball[s] - tr) <= 1e-8 * (1 + abs(tr))
        assert {s for s, tr in ball.items() if abs(tr) <= 100} <= set(rs.members)


def test_connectedness_on_random_fibers(rng):
    checked = 0
    for _ in range(30):
        p = character_of(*random_pair(rng))
        rs = enumerate_omega(p, budget=20_000)
        if rs.exhausted:
            assert check_connected(rs)
            checked += 1
    assert checked > 0


def test_attractor_arc_infinite_for_elliptic_center():
    fp = fuchsian_point()
    rs = enumerate_omega(fp, K=40)
    fiber = M_of_c(fp.c)
    arc = attractor_arc((1, 0), rs.trace_field, fiber, 40, rs.members)
    assert arc.lo <= arc.hi
    A, B = fuchsian_generators()
    # an elliptic generator: trace 0
    w = np.exp(2j * np.pi / 3)
    E = np.diag([1, w, w * w])
    q = character_of(E, B)
    rs2 = enumerate_omega(q, K=20, budget=1000)
    with pytest.raises(InfiniteArc):
        attractor_arc((1, 0), rs2.trace_field, M_of_c(q.c), 20, rs2.members)


def test_fuchsian_attractor():
    fp = fuchsian_point()
    fiber = M_of_c(fp.c)
    rs = enumerate_omega(fp, fiber, 40)
    att = build_attractor(rs, fiber, 40)
    assert att.finite and att.connected and att.attracting and att.inward
    assert len(att.triangles) == 10
    assert set(rs.members) <= att.regions()
    # every triangle shared by two members belongs to the union of arcs
    members = list(rs.members)
    for tri in att.triangles:
        assert len(tri) == 3
    for i, u in enumerate(members):
        for v in members[i + 1:]:
            if adjacent(u, v):
                assert any(u in t and v in t for t in att.triangles)
    doc = att.to_json()
    assert len(doc["triangles"]) == 10
    assert att.to_dot().startswith("graph")


def test_certify_examples():
    v = certify(fuchsian_point())
    assert v.tag == VerdictTag.CERTIFIED and v.exit_code == 0
    assert v.attractor is not None and v.witness is None
    v = certify(identity_point())
    assert v.tag == VerdictTag.REFUTED and v.witness.kind == "non-loxodromic"
    assert v.exit_code == 1
    A, B = fuchsian_generators()
    w = np.exp(2j * np.pi / 3)
    v = certify(character_of(np.diag([1, w, w * w]), B))
    assert v.tag == VerdictTag.REFUTED and resultant_f(v.witness.trace) < 0
    v = certify(fuchsian_point(), K=10_000, budget=50)
    assert v.tag == VerdictTag.INCONCLUSIVE and v.witness.kind == "budget"
    with pytest.raises(InvalidInputError):
        certify(fuchsian_point(), budget=0)


def test_verdict_json_and_determinism():
    a = certify(fuchsian_point(), K=40)
    b = certify(fuchsian_point(), K=40)
    assert a.dumps() == b.dumps()
    doc = json.loads(a.dumps())
    assert doc["tag"] == "CertifiedBQ"
    for key in ("C", "Mc", "Dc", "K"):
        assert key in doc["constants"]
    assert "wall_seconds" not in json.dumps(doc["stats"])


def test_verdict_invariant_under_conjugation(rng):
    for _ in range(4):
        A, B = fuchsian_generators()
        A, B = A @ random_su21(rng, 0.05), B @ random_su21(rng, 0.05)
        g = random_su21(rng, 0.5)
        gi = su21_inverse(g)
        p = character_of(A, B)
        v1 = certify(p, K=40)
        v2 = certify(character_of(g @ A @ gi, g @ B @ gi), K=40)
        v3 = certify(p.conjugate(), K=40)
        assert v1.tag == v2.tag == v3.tag
        if v1.tag == VerdictTag.CERTIFIED:
            assert set(v1.omega.members) == set(v2.omega.members)
            assert v1.attractor.triangles == v2.attractor.triangles


def test_monotone_K():
    fp = fuchsian_point()
    for K in (40, 100, 300):
        assert certify(fp, K=K).tag == VerdictTag.CERTIFIED


def test_nielsen_equivariance(rng):
    for _ in range(5):
        p = perturbed_fuchsian(rng)
        v = certify(p, K=40)
        for m in NielsenMove:
            w = certify(nielsen_move(p, m), K=40)
            assert w.tag == v.tag
            if v.tag == VerdictTag.CERTIFIED:
                g = nielsen_slope_map(m)
                assert {g(s) for s in v.omega.members} == set(w.omega.members)
                mapped = {frozenset(g(s) for s in t) for t in v.attractor.triangles}
                assert mapped == set(w.attractor.triangles)


def test_bq3_report():
    rep = bq3_report(fuchsian_point(), depth=10)
    assert rep.k > 0 and rep.witness is not None
    for s, W, ell, _ in rep.samples:
        assert ell >= rep.k * W - rep.m - 1e-9
    rep0 = bq3_report(identity_point(), depth=6)
    assert rep0.k == 0


def test_escaping_ray_probe(rng):
    fp = fuchsian_point()
    field = TraceField(fp)
    for _ in range(10):
        start = random_vertex(fp, rng, int(rng.integers(0, 12)))
        rep = escaping_ray_probe(start, 1000, field=field)
        assert rep.terminated and rep.steps <= 1000
    with pytest.raises(InvalidInputError):
        escaping_ray_probe(base_quadruple(fp), 0)


def test_escaping_ray_stabilizes_around_elliptic_region():
    A, B = fuchsian_generators()
    w = np.exp(2j * np.pi / 3)
    p = character_of(np.diag([1, w, w * w]), B)
    rep = escaping_ray_probe(base_quadruple(p), 200)
    assert rep.steps <= 200
    if not rep.terminated:
        assert rep.stabilized_region == (1, 0) and rep.stabilized_f < 0


def test_stability_probe():
    fp = fuchsian_point()
    assert stability_probe(fp, 0.0)
    assert stability_probe(fp, 0.05, samples=3, K=40)
