import math

import numpy as np
import pytest
from scipy import stats

from conftest import isotropic_sample
from phtess.geometry import extract_cells
from phtess.model import AtomicDistribution, Hyperplane, IsotropicDistribution, ProcessIntensity
from phtess.sampler import (
    ProcessSample,
    dump_sample,
    general_position_report,
    load_sample,
    make_rng,
    sample_process,
)


def test_same_seed_same_sample():
    a = isotropic_sample(3, 7.0, 42)
    b = isotropic_sample(3, 7.0, 42)
    assert a.same_as(b)
    assert np.array_equal(a.normals, b.normals)
    c = sample_process(IsotropicDistribution(3), ProcessIntensity(1.0), 7.0, 42, stream=1)
    assert not a.same_as(c)


def test_sample_hits_ball_and_is_canonical():
    s = isotropic_sample(2, 5.0, 1)
    assert np.all(np.abs(s.offsets) <= 5.0)
    assert np.allclose(np.linalg.norm(s.normals, axis=1), 1.0)
    assert np.all(s.normals[:, 0] > 0)


def test_radius_must_be_positive():
    with pytest.raises(ValueError):
        sample_process(IsotropicDistribution(2), ProcessIntensity(1.0), 0.0, 1)


def test_poisson_counts_small():
    n = np.array([len(isotropic_sample(2, 5.0, s)) for s in range(2000)])
    assert abs(n.mean() - 10) <= 3 * math.sqrt(10 / len(n))
    assert 0.9 < n.var(ddof=1) / n.mean() < 1.1


def test_restriction_matches_direct_sampling():
    a = np.array([len(isotropic_sample(2, 8.0, s).restrict(3.0)) for s in range(1500)])
    b = np.array([len(isotropic_sample(2, 3.0, s + 10_000)) for s in range(1500)])
    se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    assert abs(a.mean() - b.mean()) <= 3 * se
    assert abs(a.mean() - 6.0) <= 3 * math.sqrt(6.0 / len(a))


def test_duplicate_hyperplane_reported_parallel():
    hs = [Hyperplane((1.0, 0.0), 0.5, 0), Hyperplane((1.0, 0.0), 0.5, 1), Hyperplane((0.0, 1.0), 0.1, 2)]
    rep = general_position_report(ProcessSample.from_hyperplanes(hs, 2.0))
    assert (0, 1) in rep.parallel
    assert not rep.empty


def test_concurrent_lines_reported():
    hs = [Hyperplane.through((math.cos(a), math.sin(a)), 0.0, i)
          for i, a in enumerate([0.1, 1.0, 2.0])]
    rep = general_position_report(ProcessSample.from_hyperplanes(hs, 2.0))
    assert rep.concurrent == [(0, 1, 2)]
    assert rep.offending_ids() == [0, 1, 2]


def test_linearly_dependent_normals_reported():
    # three normals in a common plane of R^3, no two parallel
    hs = [Hyperplane.through(v, t, i) for i, (v, t) in
          enumerate([((1, 0, 0), 0.1), ((0, 1, 0), 0.2), ((1, 1, 0), 0.7), ((0, 0, 1), 0.3)])]
    rep = general_position_report(ProcessSample.from_hyperplanes(hs, 2.0))
    assert (0, 1, 2) in rep.dependent
    assert not rep.parallel


def test_isotropic_samples_in_general_position():
    empty = sum(general_position_report(isotropic_sample(2, 20.0, s), 1e-9).empty for s in range(100))
    assert empty >= 99


def test_atomic_samples_show_only_parallelism():
    dist = AtomicDistribution([([1, 0], 0.5), ([0, 1], 0.5)])
    rep = general_position_report(sample_process(dist, ProcessIntensity(1.0), 5.0, 3))
    assert rep.parallel and not rep.concurrent and not rep.dependent


def test_serialization_roundtrip_bit_exact():
    s = isotropic_sample(3, 4.0, 9)
    text = dump_sample(s)
    header = text.splitlines()[0]
    assert '"d": 3' in header and '"seed": 9' in header
    back = load_sample(text)
    assert back.same_as(s)
    assert back.gamma == s.gamma and back.dist_tag == s.dist_tag
    with pytest.raises(ValueError):
        load_sample(text.replace('"version": 1', '"version": 99'))


def test_rng_streams_independent_of_order():
    a = make_rng(5, 3).random(4)
    make_rng(5, 2).random(100)
    assert np.array_equal(a, make_rng(5, 3).random(4))


def test_translation_proxy_cell_volumes():
    """Cell volumes near the origin and in a shifted subwindow have one law."""
    R = 16.0

    def volumes(seeds, shift):
        out = []
        for s in seeds:
            cells = extract_cells(isotropic_sample(2, R * math.sqrt(2), s), R)
            for c in cells:
                if c.trusted and np.linalg.norm(c.center - shift) <= R / 2:
                    out.append(c.volume)
        return np.array(out)

    a = volumes(range(15), np.zeros(2))
    b = volumes(range(100, 115), np.array([R / 4, 0.0]))
    assert stats.ks_2samp(a, b).pvalue > 0.01
