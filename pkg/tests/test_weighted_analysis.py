import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import DegenerateData, EmptySample, InvalidAlpha, NoValidPairs
from core.gluing_models import EguchiHansonPotential
from core.surface_charts import point_from_ambient, radial_eigenvalues
from core.weighted_analysis import (DecayFit, FieldSamples, WeightFunction, annulus_samples,
                                    annulus_samples_ambient, decay_fit, radial_derivatives,
                                    radial_jets, shell_samples_ambient, weight_rho,
                                    weighted_holder_seminorm, weighted_sup_norm)

DELTA = 2.0 ** -4


@pytest.fixture
def weight():
    return WeightFunction(DELTA)


class TestWeightFunction:
    def test_pieces(self, weight):
        assert weight(DELTA ** 2) == pytest.approx(DELTA)
        assert weight(2.0 * DELTA ** 2) == pytest.approx(DELTA)
        assert weight(0.1) == pytest.approx(math.sqrt(0.1))
        assert weight(0.5) == pytest.approx(math.sqrt(0.5))
        assert weight(1.0) == 1.0
        assert weight(3.0) == 1.0

    def test_monotone_and_bounded(self, weight):
        r = np.geomspace(DELTA ** 2, 4.0, 4000)
        rho = weight(r)
        assert np.all(np.diff(rho) >= -1e-15)
        assert rho.min() >= DELTA and rho.max() <= 1.0

    @given(st.floats(min_value=1e-6, max_value=10.0))
    def test_range(self, r):
        assert DELTA <= WeightFunction(DELTA)(r) <= 1.0

    def test_delta_too_large(self):
        with pytest.raises(ValueError):
            WeightFunction(0.5)

    def test_point_weight(self):
        t = DELTA ** 4
        w = shell_samples_ambient(0.2, 0.2, t, 1)[0]
        assert weight_rho(point_from_ambient(w, t), DELTA) == pytest.approx(math.sqrt(0.2))


class TestWeightedNorms:
    def test_sup_norm_by_hand(self):
        samples = FieldSamples([0.5, 1.0], [[1.0, 2.0]])
        # ρ^{1}|φ| with β = −1
        assert weighted_sup_norm(samples, -1.0, 0) == pytest.approx(2.0)

    def test_sup_norm_sums_orders(self):
        samples = FieldSamples([0.5, 1.0], [[1.0, 1.0], [4.0, 0.0]])
        # max(0.5, 1) + max(0.5^2·4, 0)
        assert weighted_sup_norm(samples, -1.0, 1) == pytest.approx(2.0)

    @given(st.floats(min_value=-100.0, max_value=100.0, allow_nan=False))
    def test_sup_norm_is_homogeneous(self, factor):
        rng = np.random.default_rng(7)
        samples = FieldSamples(rng.uniform(0.1, 1.0, 20),
                               [rng.normal(size=20), rng.uniform(size=20)])
        assert weighted_sup_norm(samples.scaled(factor), -1.0, 1) == pytest.approx(
            abs(factor) * weighted_sup_norm(samples, -1.0, 1), rel=1e-12, abs=1e-300)

    def test_empty_sample(self):
        with pytest.raises(EmptySample):
            weighted_sup_norm(FieldSamples([], [[]]), -1.0, 0)
        with pytest.raises(EmptySample):
            weighted_holder_seminorm(FieldSamples([], [[]], coords=np.zeros((0, 1))),
                                     -1.0, 0.5, 0)

    def test_missing_jet_order(self):
        with pytest.raises(ValueError):
            weighted_sup_norm(FieldSamples([1.0], [[1.0]]), -1.0, 2)

    def test_jet_size_mismatch(self):
        with pytest.raises(ValueError):
            FieldSamples([1.0, 1.0], [[1.0]])

    def test_holder_of_a_linear_function(self):
        x = np.linspace(0.0, 1.0, 41)
        samples = FieldSamples(np.ones_like(x), [x], coords=x[:, None])
        value = weighted_holder_seminorm(samples, 0.0, 0.5, 0)
        # |x − y|^{1/2} over pairs closer than 1/2
        assert value == pytest.approx(math.sqrt(0.5), rel=0.05)

    def test_holder_without_close_pairs(self):
        samples = FieldSamples([0.1, 0.1], [[0.0, 1.0]], coords=np.array([[0.0], [1.0]]))
        with pytest.raises(NoValidPairs):
            weighted_holder_seminorm(samples, -1.0, 0.5, 0)


class TestRadialJets:
    def test_eguchi_hanson_against_itself(self):
        t = 1e-4
        s = np.geomspace(1.5 * t, 4.0, 50)
        u, d1, d2 = EguchiHansonPotential(t).profile(s)
        lam1, lam2 = radial_eigenvalues(d1, d2, s, t)
        jets = radial_jets(u, d1, d2, s, t, lam1, lam2)
        np.testing.assert_allclose(jets[2], math.sqrt(2.0), rtol=1e-12)
        np.testing.assert_allclose(jets[0], u)

    def test_gradient_of_the_flat_potential(self):
        # |∂s| = √s for the flat potential
        t = 0.0
        s = np.array([0.25, 1.0, 4.0])
        ones = np.ones_like(s)
        jets = radial_jets(s, ones, 0.0 * s, s, t, ones, ones)
        np.testing.assert_allclose(jets[1], np.sqrt(s))

    def test_derivatives_of_a_power(self):
        s = np.array([0.01, 0.5, 3.0])
        f0, d1, d2 = radial_derivatives(lambda x: x ** 2, s)
        np.testing.assert_allclose(f0, s ** 2)
        np.testing.assert_allclose(d1, 2.0 * s, rtol=1e-5)
        np.testing.assert_allclose(d2, 2.0, rtol=1e-5)


class TestSampling:
    @pytest.mark.parametrize("alpha", [0.5, 4.0 / 3.0, 2.0])
    def test_annulus_radii(self, alpha):
        w = annulus_samples_ambient(alpha, DELTA, 64, seed=1)
        r = np.sqrt(np.sum(np.abs(w) ** 2, axis=1))
        assert np.all(r >= DELTA ** alpha * (1 - 1e-12))
        assert np.all(r <= 2.0 * DELTA ** alpha * (1 + 1e-12))
        assert np.all(np.abs(np.sum(w * w, axis=1) - DELTA ** 4) <= 1e-14)

    def test_invalid_alpha(self):
        with pytest.raises(InvalidAlpha):
            annulus_samples_ambient(2.5, DELTA, 64)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            annulus_samples_ambient(1.0, DELTA, 4)

    def test_reproducible_with_seed(self):
        np.testing.assert_array_equal(annulus_samples_ambient(1.0, DELTA, 32, seed=5),
                                      annulus_samples_ambient(1.0, DELTA, 32, seed=5))

    def test_surface_points(self):
        points = annulus_samples(1.0, DELTA, 16)
        assert len(points) == 16
        assert all(p.t == DELTA ** 4 for p in points)

    def test_shell_below_the_cycle(self):
        with pytest.raises(ValueError):
            shell_samples_ambient(0.5 * DELTA ** 2, 1.0, DELTA ** 4, 8)


class TestDecayFit:
    def test_exact_power_law(self):
        deltas = [2.0 ** -k for k in range(3, 9)]
        fit = decay_fit([(d, 3.0 * d ** 2.5) for d in deltas], 2.5, 0.1)
        assert fit.slope == pytest.approx(2.5, abs=1e-10)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.passed
        assert fit.to_dict()["pass"] is True

    def test_rate_mode_rejects_a_wrong_slope(self):
        deltas = [2.0 ** -k for k in range(3, 9)]
        fit = decay_fit([(d, d ** 2.0) for d in deltas], 2.5, 0.1)
        assert not fit.passed

    def test_bound_mode_accepts_faster_decay(self):
        deltas = [2.0 ** -k for k in range(3, 9)]
        fit = decay_fit([(d, d ** 4.0) for d in deltas], 2.5, 0.1, mode="bound")
        assert fit.passed
        slow = decay_fit([(d, d ** 2.0) for d in deltas], 2.5, 0.1, mode="bound")
        assert not slow.passed

    @pytest.mark.parametrize("data", [
        [(0.1, 1.0), (0.05, 0.5), (0.025, 0.25)],
        [(0.1, 1.0), (0.05, 0.0), (0.025, 0.25), (0.0125, 0.1)],
        [(0.1, 1.0), (0.1, 0.5), (0.025, 0.25), (0.0125, 0.1)],
        [(0.1, 1.0), (0.05, float("nan")), (0.025, 0.25), (0.0125, 0.1)],
    ])
    def test_degenerate_data(self, data):
        with pytest.raises(DegenerateData):
            decay_fit(data, 1.0)

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            DecayFit(1.0, 0.0, 1.0, 1.0, 0.1, mode="sharp")
