import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spinsense.estimation import (
    MomentAccumulator,
    MomentSample,
    central_difference,
    collective_moments,
    dc_gradient,
    ensemble_covariance,
    find_optimum,
    jackknife_se,
    optimal_variance,
    per_cluster_covariance,
    plane_closed_form,
    richardson_discrepancy,
)
from spinsense.quantum_kernel import SpinSpecies

import oracles


def random_spd(rng, n=3):
    a = rng.standard_normal((n, n))
    return a @ a.T + 0.05 * np.eye(n)


def random_states(rng, n, d):
    psi = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def test_collective_moments_shapes_and_values(rng):
    sp = SpinSpecies(1.0)
    psi = random_states(rng, 6, 9).reshape(2, 3, 9)
    m = collective_moments(psi, sp, 2)
    assert m.mean.shape == (2, 3, 3) and m.second.shape == (2, 3, 3, 3)
    ref_mean, ref_second = oracles.moments(psi[1, 2], 1.0, 2)
    np.testing.assert_allclose(m.mean[1, 2], ref_mean, atol=1e-12)
    np.testing.assert_allclose(m.second[1, 2], ref_second, atol=1e-12)


class TestOptimalVariance:
    @pytest.mark.parametrize("readout", ["plane", "full"])
    def test_never_beaten_by_random_search(self, rng, readout):
        for _ in range(20):
            gamma, g = random_spd(rng), rng.standard_normal(3)
            best = optimal_variance(gamma, g, readout).variance
            found = oracles.random_direction_search(gamma, g, 20000, rng, plane=readout == "plane")
            assert best <= found * (1 + 1e-12)
            assert found <= best * 1.05  # the search gets close

    def test_direction_attains_minimum(self, rng):
        gamma, g = random_spd(rng), rng.standard_normal(3)
        r = optimal_variance(gamma, g, "full")
        n = r.direction
        assert np.linalg.norm(n) == pytest.approx(1)
        assert n @ gamma @ n / (g @ n) ** 2 == pytest.approx(r.variance, rel=1e-10)
        rp = optimal_variance(gamma, g, "plane")
        assert rp.direction[2] == 0
        assert rp.variance >= r.variance

    def test_plane_closed_form(self, rng):
        gamma = np.stack([random_spd(rng) for _ in range(5)])
        g = rng.standard_normal((5, 3))
        np.testing.assert_allclose(optimal_variance(gamma, g, "plane").variance,
                                   plane_closed_form(gamma, g), rtol=1e-10)

    def test_zero_gradient_is_infinite(self, rng):
        r = optimal_variance(random_spd(rng), np.zeros(3))
        assert np.isinf(r.variance)
        np.testing.assert_array_equal(r.direction, 0)

    def test_rank_deficient(self):
        # no noise along x: pseudo-inverse restricted to the noisy subspace
        gamma = np.diag([0.0, 2.0, 1.0])
        r = optimal_variance(gamma, np.array([0.0, 1.0, 0.0]), "plane")
        assert r.rank == 1
        assert r.variance == pytest.approx(2.0)

    @given(st.floats(0.1, 10), st.floats(0.1, 10))
    def test_scaling(self, a, b):
        rng = np.random.default_rng(5)
        gamma, g = random_spd(rng), rng.standard_normal(3)
        v = optimal_variance(gamma, g).variance
        assert optimal_variance(a * gamma, b * g).variance == pytest.approx(a / b**2 * v,
                                                                           rel=1e-9)


def test_ensemble_covariance_total_variance(rng):
    sp = SpinSpecies(0.5)
    psi = random_states(rng, 50, 8)
    m = collective_moments(psi, sp, 3)
    mean_j, cov_j = ensemble_covariance(m, 10, "joint")
    mean_q, cov_q = ensemble_covariance(m, 10, "quantum")
    np.testing.assert_allclose(mean_j, 10 * m.mean.mean(axis=0))
    spread = np.cov(m.mean.T, bias=True)
    # law of total variance: joint = averaged quantum + spread of the means
    np.testing.assert_allclose(cov_j, cov_q + 10 * spread, atol=1e-12)
    assert np.linalg.eigvalsh(cov_j).min() > -1e-12
    with pytest.raises(ValueError):
        ensemble_covariance(m, 10, "other")


def test_moment_sample_covariance_psd(rng):
    m = collective_moments(random_states(rng, 30, 9), SpinSpecies(1.0), 2)
    assert np.linalg.eigvalsh(m.covariance()).min() > -1e-12


class TestGradients:
    def test_dc_gradient_is_rotation_derivative(self, rng):
        m, tau, b, h = rng.standard_normal(3), 0.7, 0.3, 1e-5
        lab = lambda x: oracles.rot_z(-x * tau) @ m  # noqa: E731
        fd = (lab(b + h) - lab(b - h)) / (2 * h)
        np.testing.assert_allclose(-dc_gradient(lab(b), np.float64(tau)), fd, atol=1e-9)

    def test_dc_gradient_broadcast(self):
        mean = np.array([[1.0, 0, 0], [0, 2.0, 0]])
        np.testing.assert_allclose(dc_gradient(mean, np.array([0.5, 1.0])),
                                   [[0, 0.5, 0], [-2.0, 0, 0]])

    def test_central_difference_exact_on_quadratic(self):
        f = lambda x: np.array([x**2, 3 * x, 1.0])  # noqa: E731
        np.testing.assert_allclose(central_difference(f(1.1), f(0.9), 0.1), [2.0, 3.0, 0.0],
                                   atol=1e-12)

    def test_richardson(self):
        g = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
        assert richardson_discrepancy(g, g) == 0
        assert richardson_discrepancy(g, 1.01 * g) == pytest.approx(0.01)


class TestOptimum:
    def test_parabola_vertex(self):
        t = np.geomspace(0.1, 3, 40)
        opt = find_optimum(t, 2 + 3 * (t - 0.83) ** 2)
        assert opt.tau_opt == pytest.approx(0.83, rel=1e-10)
        assert opt.er_min == pytest.approx(2.0, rel=1e-12)
        assert not opt.boundary

    def test_boundary_and_monotone(self):
        t = np.linspace(1, 2, 10)
        opt = find_optimum(t, 5 - t)
        assert opt.boundary and opt.monotone and opt.tau_opt == 2.0
        opt = find_optimum(t, np.r_[3.0, 4.0, 2.0, 2.5, 2.6, 2.7, 2.8, 2.9, 3.0, 1.0])
        assert opt.boundary and not opt.monotone

    def test_ignores_nonfinite(self):
        t = np.linspace(0, 1, 6)
        v = np.array([np.inf, 3.0, 2.0, 1.5, 2.0, 3.0])
        assert find_optimum(t, v).index == 3
        with pytest.raises(ValueError):
            find_optimum(t, np.full(6, np.nan))


@given(arrays(float, st.integers(2, 30), elements=st.floats(-1e3, 1e3)))
def test_jackknife_of_mean_is_classical(x):
    # delete-one jackknife of a sample mean equals the usual standard error
    n = len(x)
    reps = np.array([np.delete(x, i).mean() for i in range(n)])
    classic = np.std(x, ddof=1) / np.sqrt(n)
    assert jackknife_se(reps) == pytest.approx(classic, rel=1e-8, abs=1e-9)


class TestAccumulator:
    def make(self, rng, n, t=4):
        mean = rng.standard_normal((n, t, 3))
        second = rng.standard_normal((n, t, 3, 3))
        return MomentSample(mean, second), {"+h": rng.standard_normal((n, t, 3))}

    def test_merge_equals_single_pass(self, rng):
        s, sh = self.make(rng, 30)
        blocks = np.arange(30) * 5 // 30
        whole = MomentAccumulator(5, 4)
        whole.add(blocks, s, sh)
        a, b = MomentAccumulator(5, 4), MomentAccumulator(5, 4)
        cut = 13
        a.add(blocks[:cut], MomentSample(s.mean[:cut], s.second[:cut]), {"+h": sh["+h"][:cut]})
        b.add(blocks[cut:], MomentSample(s.mean[cut:], s.second[cut:]), {"+h": sh["+h"][cut:]})
        a.merge(b)
        for key in ("mean", "second", "outer"):
            np.testing.assert_allclose(a.averages()[key], whole.averages()[key], atol=1e-14)
        np.testing.assert_allclose(a.averages()["shifted"]["+h"], sh["+h"].mean(axis=0))
        np.testing.assert_array_equal(a.counts, [6] * 5)

    def test_exclude_block(self, rng):
        s, _ = self.make(rng, 20)
        blocks = np.arange(20) // 4
        acc = MomentAccumulator(5, 4)
        acc.add(blocks, s)
        avg = acc.averages(exclude=2)
        assert avg["count"] == 16
        keep = blocks != 2
        np.testing.assert_allclose(avg["mean"], s.mean[keep].mean(axis=0))

    def test_covariance_modes(self, rng):
        m = collective_moments(random_states(rng, 40, 4), SpinSpecies(0.5), 2)
        sample = MomentSample(m.mean[:, None], m.second[:, None])
        acc = MomentAccumulator(4, 1)
        acc.add(np.arange(40) // 10, sample)
        avg = acc.averages()
        for mode in ("joint", "quantum"):
            _, ref = ensemble_covariance(m, 1, mode)
            np.testing.assert_allclose(per_cluster_covariance(avg, mode)[0], ref, atol=1e-13)
        with pytest.raises(ValueError):
            per_cluster_covariance(avg, "bad")

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            MomentAccumulator(3, 2).merge(MomentAccumulator(4, 2))
