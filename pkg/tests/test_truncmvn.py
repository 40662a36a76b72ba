import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

import selbias.truncmvn as truncmvn
from selbias.errors import (
    DegenerateTruncationError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)
from selbias.model import GaussianSpec, conditional_distribution
from selbias.mvn import QmcConfig
from selbias.simulate import rejection_sample_truncated
from selbias.truncmvn import (
    TruncatedAboveSpec,
    marginal_densities_at_bounds,
    marginal_density,
    normalizing_constant,
    truncated_mean,
)
from selbias.validate import random_truncated_spec


class TestUnivariate:
    def test_half_normal(self):
        spec = TruncatedAboveSpec.equicorrelated([0.0], 1.0, 0.0, [0.0])
        assert normalizing_constant(spec) == pytest.approx(0.5, abs=1e-15)
        assert truncated_mean(spec)[0] == pytest.approx(-math.sqrt(2 / math.pi), abs=1e-12)

    @pytest.mark.parametrize("theta,var,upper", [(0.3, 2.0, 1.1), (-1.0, 0.5, -1.4), (2.0, 1.0, 5.0)])
    def test_inverse_mills_ratio(self, theta, var, upper):
        spec = TruncatedAboveSpec.equicorrelated([theta], var, 0.0, [upper])
        s = math.sqrt(var)
        z = (upper - theta) / s
        phi = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        cdf = 0.5 * math.erfc(-z / math.sqrt(2))
        assert truncated_mean(spec)[0] == pytest.approx(theta - s * phi / cdf, abs=1e-12)
        # density at the bound is the normal density over alpha
        assert marginal_density(spec, 0, upper - theta) == pytest.approx(phi / s / cdf, rel=1e-12)

    def test_huge_bound_leaves_mean_unchanged(self):
        spec = TruncatedAboveSpec.equicorrelated(np.array([0.2, -0.4, 1.0]), 1.0, 0.5, 40.0)
        assert spec.alpha == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(truncated_mean(spec), spec.theta, atol=1e-12)


class TestBivariateOracle:
    def test_mean_against_2d_quadrature(self):
        cov = np.array([[1.0, 0.4], [0.4, 1.5]])
        theta = np.array([0.1, -0.2])
        upper = np.array([0.8, 0.5])
        spec = TruncatedAboveSpec(GaussianSpec(theta, cov), upper, qmc=QmcConfig(samples=2 ** 16, seed=3))
        inv = np.linalg.inv(cov)
        norm = 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(cov)))

        def pdf(y2, y1):
            v = np.array([y1, y2]) - theta
            return norm * math.exp(-0.5 * v @ inv @ v)

        lo = -12.0
        mass = integrate.dblquad(pdf, lo, upper[0], lo, upper[1], epsabs=1e-11)[0]
        m1 = integrate.dblquad(lambda y2, y1: y1 * pdf(y2, y1), lo, upper[0], lo, upper[1], epsabs=1e-11)[0]
        m2 = integrate.dblquad(lambda y2, y1: y2 * pdf(y2, y1), lo, upper[0], lo, upper[1], epsabs=1e-11)[0]
        assert spec.alpha == pytest.approx(mass, abs=1e-6)
        np.testing.assert_allclose(truncated_mean(spec), [m1 / mass, m2 / mass], atol=1e-5)


class TestExchangeable:
    def test_densities_equal_across_coordinates(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            spec = random_truncated_spec(rng, dims=(2, 3, 5, 7), exchangeable=True)
            w = float(rng.uniform(-2.0, 0.0) + spec.centered_upper[0])
            vals = [marginal_density(spec, k, w) for k in range(spec.dim)]
            assert max(vals) - min(vals) <= 1e-13

    def test_shortcut_matches_full_evaluation(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            spec = random_truncated_spec(rng, dims=(2, 4, 6), exchangeable=True)
            assert spec.exchangeable
            fast = truncated_mean(spec, exploit_symmetry=True)
            slow = truncated_mean(spec, exploit_symmetry=False)
            np.testing.assert_allclose(fast, slow, atol=1e-10)
            assert np.ptp(fast) <= 1e-10

    def test_conditional_law_is_exchangeable(self, ref_params):
        spec = TruncatedAboveSpec(conditional_distribution(ref_params, 3.25), 3.25)
        assert spec.exchangeable


class TestDensities:
    def test_integrate_to_one(self):
        rng = np.random.default_rng(22)
        spec = random_truncated_spec(rng, dims=(3,))
        c, d = spec.base.equicorr
        for k in range(spec.dim):
            top = float(spec.centered_upper[k])
            mass = integrate.quad(lambda w: marginal_density(spec, k, w), top - 40 * math.sqrt(c + d), top,
                                  epsabs=1e-10, epsrel=1e-10, limit=200)[0]
            assert mass == pytest.approx(1.0, abs=1e-6)

    def test_zero_above_bound_and_left_continuous(self):
        spec = TruncatedAboveSpec.equicorrelated(np.zeros(3), 1.0, 0.5, [0.5, 1.0, 0.0])
        for k in range(3):
            top = float(spec.centered_upper[k])
            assert marginal_density(spec, k, top + 1e-9) == 0.0
            assert marginal_density(spec, k, top) > 0.0
            assert marginal_density(spec, k, top - 1e-9) == pytest.approx(
                marginal_density(spec, k, top), rel=1e-6)

    def test_array_input(self):
        spec = TruncatedAboveSpec.equicorrelated(np.zeros(3), 1.0, 0.5, 1.0)
        w = np.array([[-1.0, 0.0], [0.5, 2.0]])
        out = marginal_density(spec, 1, w)
        assert out.shape == w.shape
        assert out[1, 1] == 0.0
        assert out[0, 0] == marginal_density(spec, 1, -1.0)

    def test_bad_index(self):
        spec = TruncatedAboveSpec.equicorrelated(np.zeros(3), 1.0, 0.5, 1.0)
        with pytest.raises(IndexError):
            marginal_density(spec, 3, 0.0)
        with pytest.raises(IndexError):
            marginal_density(spec, -1, 0.0)

    def test_general_path_matches_tagged(self):
        tagged = TruncatedAboveSpec.equicorrelated([0.0, 0.3, -0.2], 1.2, 0.6, [0.7, 1.0, 0.4])
        untagged = TruncatedAboveSpec(GaussianSpec(tagged.theta, tagged.omega), tagged.upper,
                                      qmc=QmcConfig(samples=2 ** 15, seed=5))
        assert untagged.alpha == pytest.approx(tagged.alpha, abs=2e-4)
        np.testing.assert_allclose(marginal_densities_at_bounds(untagged),
                                   marginal_densities_at_bounds(tagged), atol=2e-4)


class TestMoments:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_mean_below_bound(self, seed):
        spec = random_truncated_spec(np.random.default_rng(seed), dims=(1, 2, 4))
        assert np.all(truncated_mean(spec) < spec.upper)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 2.0))
    def test_raising_all_bounds_raises_mean(self, seed, shift):
        spec = random_truncated_spec(np.random.default_rng(seed), dims=(2, 3))
        c, d = spec.base.equicorr
        higher = TruncatedAboveSpec.equicorrelated(spec.theta, c, d, spec.upper + shift)
        assert higher.alpha >= spec.alpha - 1e-12
        assert np.all(truncated_mean(higher) >= truncated_mean(spec) - 1e-10)

    def test_against_rejection_sampling(self):
        spec = TruncatedAboveSpec.equicorrelated([0.0, 0.5, -0.3], 1.0, 0.7, [0.6, 1.2, 0.1])
        sim = rejection_sample_truncated(spec, 2 * 10 ** 5, seed=8)
        z = np.abs(truncated_mean(spec) - sim.mean) / sim.se
        assert np.all(z <= 3.5)
        assert abs(sim.acceptance_rate - spec.alpha) <= 3.5 * sim.acceptance_se

    def test_reference_conditional_alpha_matches_acceptance(self, ref_params):
        spec = TruncatedAboveSpec(conditional_distribution(ref_params, 3.25), 3.25)
        sim = rejection_sample_truncated(spec, 10 ** 5, seed=1)
        assert abs(sim.acceptance_rate - spec.alpha) <= 3 * sim.acceptance_se


class TestConstruction:
    def test_alpha_computed_once(self, monkeypatch):
        calls = []
        original = truncmvn._compute_alpha

        def counting(spec):
            calls.append(1)
            return original(spec)

        monkeypatch.setattr(truncmvn, "_compute_alpha", counting)
        spec = TruncatedAboveSpec.equicorrelated(np.zeros(4), 1.0, 0.5, 0.5)
        truncated_mean(spec)
        marginal_densities_at_bounds(spec, exploit_symmetry=False)
        normalizing_constant(spec)
        assert len(calls) == 1

    def test_degenerate(self):
        with pytest.raises(DegenerateTruncationError):
            TruncatedAboveSpec.equicorrelated(np.zeros(3), 1.0, 0.0, -60.0)

    def test_dimension_cap(self):
        with pytest.raises(DimensionMismatchError):
            TruncatedAboveSpec.equicorrelated(np.zeros(26), 1.0, 0.5, 1.0)
        TruncatedAboveSpec.equicorrelated(np.zeros(25), 1.0, 0.5, 1.0)

    def test_bound_length(self):
        with pytest.raises(DimensionMismatchError):
            TruncatedAboveSpec.equicorrelated(np.zeros(3), 1.0, 0.5, [1.0, 2.0])

    def test_not_positive_definite(self):
        cov = np.array([[1.0, 0.0], [0.0, 1.0]])
        cov_bad = np.array([[1.0, 1.5], [1.5, 1.0]])
        TruncatedAboveSpec(GaussianSpec(np.zeros(2), cov), 0.0)
        with pytest.raises(NotPositiveDefiniteError):
            TruncatedAboveSpec(GaussianSpec(np.zeros(2), cov_bad), 0.0)

    def test_frozen(self):
        spec = TruncatedAboveSpec.equicorrelated(np.zeros(2), 1.0, 0.5, 1.0)
        with pytest.raises(AttributeError):
            spec.alpha = 0.3
        with pytest.raises(ValueError):
            spec.upper[0] = 3.0
