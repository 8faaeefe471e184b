import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.special import gamma as gamma_fn

from spinsense.geometry import (
    NN_MEAN_DISTANCE,
    ClusterGeometry,
    cluster_stream,
    rescale_cluster,
    sample_cluster,
    sample_clusters,
    write_clusters_csv,
)

import oracles


def test_nn_mean_distance_constant():
    # E[r_1] for a unit-density PPP: Gamma(4/3) (3 / 4 pi)^(1/3)
    assert NN_MEAN_DISTANCE == pytest.approx(gamma_fn(4 / 3) * (3 / (4 * math.pi)) ** (1 / 3),
                                             abs=1e-10)


def test_cluster_geometry_validation():
    with pytest.raises(ValueError):
        ClusterGeometry(np.zeros((2, 2)))
    c = ClusterGeometry([[0, 0, 0], [1, 0, 0]])
    with pytest.raises(ValueError):
        c.positions[0, 0] = 1.0
    pairs, r = c.pair_vectors()
    np.testing.assert_array_equal(pairs, [[0, 1]])
    np.testing.assert_allclose(r, [[-1, 0, 0]])


def test_origin_and_sorted_distances():
    c = sample_cluster(6, cluster_stream(3, 0))
    np.testing.assert_array_equal(c.positions[0], 0.0)
    d = c.distances()
    assert np.all(np.diff(d) > 0)
    assert c.n_sites == 6


def test_streams_are_counter_based():
    a = sample_clusters(4, 99, [5, 6, 7])
    b = sample_clusters(4, 99, [7, 5])
    np.testing.assert_array_equal(a[2], b[0])
    np.testing.assert_array_equal(a[0], b[1])
    c = sample_clusters(4, 100, [5])
    assert not np.array_equal(a[0], c[0])


@pytest.fixture(scope="module")
def large_sample():
    return sample_clusters(5, 7, np.arange(100_000))


@pytest.mark.parametrize("k", [1, 2, 4])
def test_knn_volume_is_gamma_distributed(large_sample, k):
    # (4 pi / 3) r_k^3 ~ Gamma(k, 1); n = 1e5 draws
    r = np.linalg.norm(large_sample[:, k], axis=1)
    vol = 4 * np.pi / 3 * r**3
    assert stats.kstest(vol, stats.gamma(k).cdf).pvalue > 0.01


def test_matches_rejection_box_oracle():
    rng = np.random.default_rng(11)
    ref = oracles.ppp_neighbour_distances(4000, 3, rng)
    ours = np.linalg.norm(sample_clusters(4, 5, np.arange(4000))[:, 1:], axis=2)
    for k in range(3):
        assert stats.ks_2samp(ours[:, k], ref[:, k]).pvalue > 0.01
    np.testing.assert_allclose(ours[:, 0].mean(), NN_MEAN_DISTANCE, rtol=0.03)


def test_directions_isotropic():
    pos = sample_clusters(2, 8, np.arange(20000))[:, 1]
    unit = pos / np.linalg.norm(pos, axis=1, keepdims=True)
    # cos(theta) uniform on [-1, 1], azimuth uniform
    assert stats.kstest(unit[:, 2], stats.uniform(-1, 2).cdf).pvalue > 0.01
    phi = np.arctan2(unit[:, 1], unit[:, 0])
    assert stats.kstest(phi, stats.uniform(-np.pi, 2 * np.pi).cdf).pvalue > 0.01


def test_min_distance_redraw():
    pos = sample_clusters(3, 1, np.arange(500), min_distance=0.4)
    i, j = np.triu_indices(3, 1)
    assert np.linalg.norm(pos[:, i] - pos[:, j], axis=-1).min() >= 0.4


@given(st.floats(0.01, 100.0))
def test_rescale(lam):
    c = sample_cluster(3, cluster_stream(0, 1))
    r = rescale_cluster(c, lam)
    np.testing.assert_allclose(r.distances(), c.distances() * lam ** (-1 / 3), rtol=1e-14)


def test_rescale_rejects_nonpositive():
    c = sample_cluster(2, cluster_stream(0, 0))
    for lam in (0.0, -1.0):
        with pytest.raises(ValueError):
            rescale_cluster(c, lam)


def test_write_csv(tmp_path):
    pos = sample_clusters(2, 0, [0, 1])
    path = tmp_path / "c.csv"
    write_clusters_csv(path, pos)
    lines = path.read_text().splitlines()
    assert lines[0] == "cluster_index,site_index,x,y,z"
    assert len(lines) == 5
    row = lines[4].split(",")
    assert row[:2] == ["1", "1"]
    assert float(row[2]) == pos[1, 1, 0]
