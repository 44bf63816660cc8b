import json
import math

import numpy as np
import pytest

from oracles import plane_distance_lstsq, square_atomic_event_probability
from phtess.construction import (
    BulletViolation,
    Certificate,
    CertificationRequired,
    TargetSpec,
    bullet_checks,
    certify_epsilon0,
    class_membership,
    classify_event,
    draw_class_hyperplane,
    event_polytope,
    event_probability,
    event_realization,
    in_Aj,
    in_C,
    verify_bullet_on_event,
)
from phtess.geometry import PolytopeError, min_width
from phtess.model import AtomicDistribution, IsotropicDistribution, ProcessIntensity, watson
from phtess.sampler import ProcessSample, make_rng

AXES = AtomicDistribution([([1, 0], 0.5), ([0, 1], 0.5)])
ONE = ProcessIntensity(1.0)


@pytest.fixture(scope="module")
def square():
    return TargetSpec.build("square", 0.1, 3.0, draws=300)


def _facet_with_normal(spec, n):
    return int(np.argmax(spec.facet_normals @ np.asarray(n, dtype=float)))


def test_target_recentred(square):
    assert np.allclose(np.sort(np.abs(square.vertices), axis=0), 0.5)
    assert math.isclose(square.circumradius, math.sqrt(0.5))
    assert square.m == 4 and square.dimension == 2


def test_target_preconditions():
    with pytest.raises(ValueError):
        TargetSpec("square", 0.0, 3.0)
    with pytest.raises(ValueError):
        TargetSpec("square", 1.5, 3.0)
    with pytest.raises(PolytopeError):
        TargetSpec([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], 0.1, 3.0)  # circumcenter on a facet


def test_in_Aj_examples(square):
    j = _facet_with_normal(square, [1, 0])
    assert in_Aj(((1.0, 0.0), 0.5), square, j)
    assert in_Aj(((1.0, 0.0), 0.59), square, j)
    assert not in_Aj(((1.0, 0.0), 0.61), square, j)
    tilt = np.array([1.0, 0.25]) / math.hypot(1, 0.25)
    assert not in_Aj((tilt, 0.5), square, j)
    with pytest.raises(IndexError):
        in_Aj(((1.0, 0.0), 0.5), square, 4)


def test_in_Aj_matches_vertex_distances(square):
    rng = np.random.default_rng(2)
    for _ in range(500):
        th = rng.uniform(0, 2 * np.pi)
        u = np.array([math.cos(th), math.sin(th)])
        t = rng.uniform(-1, 1)
        for j, F in enumerate(square.facet_vertices):
            expect = all(plane_distance_lstsq(v, u, t) <= square.eps + 1e-12 for v in F)
            assert in_Aj((u, t), square, j) == expect


def test_in_C_examples(square):
    assert in_C(((1.0, 0.0), 0.0), square)            # through the middle
    assert not in_C(((1.0, 0.0), 0.5), square)        # an A_j hyperplane
    assert in_C(((1.0, 0.0), 1.4), square)            # meets only the enlargement
    assert not in_C(((1.0, 0.0), 1.6), square)        # misses P + B
    assert in_C(((0.0, 1.0), -1.45), square)


def test_classes_partition_hits(square):
    """Every hyperplane meeting ``P + B`` is in exactly one of the classes."""
    rng = np.random.default_rng(4)
    U = rng.standard_normal((20000, 2))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    t = rng.uniform(-2, 2, 20000)
    A, C = class_membership(U, t, square)
    proj = U @ square.vertices.T
    hits = (proj.min(axis=1) - 1 <= t) & (t <= proj.max(axis=1) + 1)
    assert np.all(A.sum(axis=1) <= 1)
    assert np.array_equal(A.any(axis=1) | C, hits)
    assert not np.any(A.any(axis=1) & C)


def _sample_from(hs, radius):
    U = np.array([u for u, _ in hs], dtype=float)
    T = np.array([t for _, t in hs], dtype=float)
    return ProcessSample(2, radius, U, T, np.arange(len(T)) + 100)


def test_classify_hand_built(square):
    good = [((1, 0), 0.5), ((1, 0), -0.5), ((0, 1), 0.5), ((0, 1), -0.55), ((1, 1), 4.0)]
    out = classify_event(_sample_from(good, 5.0), square)
    assert out.occurred and out.c_count == 0 and out.a_counts == (1, 1, 1, 1)
    extra = good + [((0, 1), 0.0)]
    out = classify_event(_sample_from(extra, 5.0), square)
    assert not out.occurred and out.c_ids == (105,)
    twice = good + [((1, 0), 0.52)]
    out = classify_event(_sample_from(twice, 5.0), square)
    assert not out.occurred and sorted(out.a_counts) == [1, 1, 1, 2]
    with pytest.raises(ValueError):
        classify_event(_sample_from(good, 1.0), square)


def test_atomic_square_matches_hand_value(square):
    p = event_probability(square, AXES, ONE)
    assert math.isclose(p.value, square_atomic_event_probability(0.1), rel_tol=1e-12)
    assert all(math.isclose(e.value, 0.1) for e in p.theta_a)
    assert math.isclose(p.hit.value, 3.0)


def test_isotropic_square_closed_form(square):
    iso = IsotropicDistribution(2)
    p = event_probability(square, iso, ONE, rel_tol=1e-9)
    eps, L = 0.1, 1.0
    th0 = math.asin(2 * eps / L)
    theta = (2 / math.pi) * (2 * eps * th0 - L * (1 - math.cos(th0)))
    for e in p.theta_a:
        assert abs(e.value - theta) < 1e-9
    assert abs(p.hit.value - (4 / math.pi + 2)) < 1e-8
    expect = (theta * math.exp(-theta)) ** 4 * math.exp(-(4 / math.pi + 2 - 4 * theta))
    assert math.isclose(p.value, expect, rel_tol=1e-7)


def test_cube_hitting_mean():
    cube = TargetSpec.build("cube", 0.05, 3.0, draws=50)
    p = event_probability(cube, IsotropicDistribution(3), ONE)
    # mean width of the unit cube is 3/2, plus 2 for the unit ball
    assert abs(p.hit.value - 3.5) < 1e-5
    assert p.value > 0


def test_small_eps_limit():
    vals = []
    for eps in (0.1, 0.03, 0.01, 0.003):
        spec = TargetSpec.build("square", eps, 3.0, draws=50)
        vals.append(event_probability(spec, IsotropicDistribution(2), ONE).value)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # Theta(A_j) ~ 4 eps^2 / pi, so P(E) scales like eps^8
    assert 0.5 < math.log(vals[-2] / vals[-1]) / (8 * math.log(10 / 3)) < 1.5


def test_watson_classes_against_monte_carlo(square):
    dist = watson(2, mu=[1.0, 0.3], kappa=2.0)
    p = event_probability(square, dist, ONE)
    rng = make_rng(9)
    n = 2_000_000
    R = square.circumradius + 1 + square.eps
    U = dist.sample(rng, n)
    t = rng.uniform(-R, R, n)
    A, C = class_membership(U, t, square)
    for j, e in enumerate(p.theta_a):
        freq = A[:, j].mean()
        mc, se = 2 * R * freq, 2 * R * math.sqrt(freq * (1 - freq) / n)
        assert abs(mc - e.value) < 4 * se
    fc = C.mean()
    assert abs(2 * R * fc - p.theta_c.value) < 4 * 2 * R * math.sqrt(fc * (1 - fc) / n)


def test_event_probability_needs_certificate():
    with pytest.raises(CertificationRequired):
        event_probability(TargetSpec("square", 0.1, 3.0), AXES, ONE)


def test_certificates():
    assert certify_epsilon0("square", 0.01, 3.0, draws=200).granted
    refused = certify_epsilon0("square", 0.7071, 3.0, draws=50)
    assert not refused.granted and refused.failing_pair is not None
    assert "overlap" in refused.reason
    assert certify_epsilon0("simplex-3", 0.005, TargetSpec("simplex-3", 0.005, 3.0).circumradius * 2 + 2,
                            draws=100).granted


def test_small_D_refused_with_counterexample():
    cert = certify_epsilon0("square", 0.1, 1.0, draws=100)
    assert not cert.granted and cert.disjoint
    assert "diameter" in cert.counterexample["failed"]
    hs = [(np.array(u), t) for u, t in cert.counterexample["hyperplanes"]]
    Q = event_polytope(hs, 2)
    assert not bullet_checks(Q, TargetSpec("square", 0.1, 1.0))["diameter"][0]


def test_certificate_json_round_trip():
    cert = certify_epsilon0("square", 0.05, 3.0, draws=20)
    back = Certificate(**json.loads(cert.to_json()))
    assert back == cert


def test_disjointness_witness(square):
    """Overlap is decided by the minimal width of the two facets' vertices."""
    F = square.facet_vertices
    for j, k, w in square.certificate.pair_widths:
        assert math.isclose(w, min_width(np.vstack([F[j], F[k]])))
        assert w > 2 * square.eps
    # no drawn hyperplane lands in two classes
    rng = make_rng(1)
    for j in range(square.m):
        for _ in range(200):
            u, t = draw_class_hyperplane(square, j, rng)
            A, _ = class_membership(u, t, square)
            assert A[0, j] and A[0].sum() == 1


def test_overlap_at_half_width():
    # adjacent facets of the unit square: width of three corners is 1/sqrt(2)
    assert certify_epsilon0("square", 0.35, 3.0, draws=20).disjoint
    assert not certify_epsilon0("square", 0.36, 3.0, draws=20).disjoint


def test_certificate_monotone_in_eps():
    granted = [certify_epsilon0("square", e, 2.5, draws=200, seed=3).granted
               for e in (0.2, 0.1, 0.05, 0.02)]
    assert granted == sorted(granted)   # once granted, smaller eps stays granted
    assert granted[-1]


def test_bullets_on_exact_target(square):
    hs = [(n, float(b)) for n, b in zip(square.facet_normals, square.polytope.offsets)]
    Q = event_polytope(hs, 2)
    assert all(ok for ok, _ in bullet_checks(Q, square).values())


@pytest.mark.parametrize("name,eps,D,dist", [
    ("square", 0.1, 3.0, IsotropicDistribution(2)),
    ("square", 0.1, 3.0, AXES),
    ("cube", 0.05, 3.0, IsotropicDistribution(3)),
])
def test_bullets_on_conditional_realizations(name, eps, D, dist):
    spec = TargetSpec.build(name, eps, D, draws=50)
    for seed in range(10):
        s = event_realization(spec, dist, ONE, seed)
        out = classify_event(s, spec)
        assert out.occurred
        assert verify_bullet_on_event(s, spec).passed


def test_forged_diameter_raises(square):
    forged = TargetSpec("square", 0.1, 1.2)
    s = event_realization(square, IsotropicDistribution(2), ONE, 0)
    with pytest.raises(BulletViolation) as err:
        verify_bullet_on_event(s, forged)
    assert not err.value.report.checks["diameter"][0]


def test_classes_grow_with_eps():
    small = TargetSpec("square", 0.05, 3.0)
    large = TargetSpec("square", 0.2, 3.0)
    rng = np.random.default_rng(8)
    U = rng.standard_normal((20000, 2))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    t = rng.uniform(-1, 1, 20000)
    A_small, _ = class_membership(U, t, small)
    A_large, _ = class_membership(U, t, large)
    assert A_small.any() and not np.any(A_small & ~A_large)


def test_every_factor_positive_under_full_support(square):
    p = event_probability(square, IsotropicDistribution(2), ONE)
    assert all(e.value > 0 for e in p.theta_a) and p.theta_c.value > 0 and p.value > 0


def test_exact_facet_planes_reproduce_target(square):
    hs = [(n, float(b)) for n, b in zip(square.facet_normals, square.polytope.offsets)]
    s = _sample_from(hs, 3.0)
    rep = verify_bullet_on_event(s, square)
    assert rep.checks["matches_event_polytope"][1] < 1e-12
    assert math.isclose(rep.checks["diameter"][1], math.sqrt(2))
    assert rep.checks["center_in_B"][1] < 1e-12


def test_isotropic_square_frequency_and_disjointness():
    """10^4 independent trials: frequency within the 3 sigma binomial interval, no overlaps."""
    from phtess.sampler import sample_process

    spec = TargetSpec.build("square", 0.05, 3.0, draws=100)
    iso = IsotropicDistribution(2)
    p = event_probability(spec, iso, ONE).value
    R = spec.circumradius + 1 + spec.eps
    hits, n = 0, 10_000
    for t in range(n):
        out = classify_event(sample_process(iso, ONE, R, 17, t), spec)
        assert out.overlaps == 0
        hits += out.occurred
    f = hits / n
    half = 3 * math.sqrt(max(p * (1 - p), 1 / n) / n)
    assert abs(f - p) <= half
