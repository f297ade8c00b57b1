import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.errors import ApexExcluded, CollapsedLocus, InvalidAlpha
from core.gluing_models import (DELTA_MAX, OUTER_SHELL, RICCI_REGIONS, EguchiHansonPotential,
                                PregluedModel, PulledBackCentralPotential, RegionTag,
                                annulus_exponent, central_model_potential, classify_region,
                                cutoff_derivative_bounds, cutoff_profile, eh_potential,
                                inverse_map_ambient, optimal_annulus_alpha,
                                pluriharmonic_correction, preglued_model, preglued_potential,
                                region_bounds, ricci_exponent, ricci_potential,
                                ricci_region_norm, ricci_region_samples, smoothing_map,
                                smoothing_map_ambient)
from core.surface_charts import (GluingParams, SurfacePoint, complex_hessian,
                                 point_from_ambient, vol_ratio_to_omega)
from core.weighted_analysis import ambient_from_frame, orthonormal_pairs, radial_derivatives

DELTA = 2.0 ** -4


@pytest.fixture
def params():
    return GluingParams(delta=DELTA)


def cone_points(radii, seed=0):
    """Points of V_0 with the given moduli"""
    rng = np.random.default_rng(seed)
    x, y = orthonormal_pairs(rng.uniform(size=(len(radii), 3)))
    return ambient_from_frame(np.asarray(radii) ** 2, 0.0, x, y)


class TestCutoff:
    def test_flat_outside_the_transition(self):
        assert cutoff_profile(0.5) == 0.0
        assert cutoff_profile(1.0) == 0.0
        assert cutoff_profile(2.0) == 1.0
        assert cutoff_profile(3.0) == 1.0

    def test_monotone_with_values_in_unit_interval(self):
        chi = cutoff_profile(np.linspace(0.5, 2.5, 2001))
        assert np.all(np.diff(chi) >= -1e-15)
        assert chi.min() == 0.0 and chi.max() == 1.0

    def test_derivatives_match_differences(self):
        x = np.linspace(1.05, 1.95, 19)
        h = 1e-5
        _, d1, d2 = cutoff_profile(x, derivatives=True)
        numeric1 = (cutoff_profile(x + h) - cutoff_profile(x - h)) / (2 * h)
        numeric2 = (cutoff_profile(x + h) - 2 * cutoff_profile(x) + cutoff_profile(x - h)) / h ** 2
        np.testing.assert_allclose(d1, numeric1, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(d2, numeric2, rtol=1e-3, atol=1e-4)

    def test_derivative_bounds_are_finite(self):
        k1, k2 = cutoff_derivative_bounds()
        assert 1.0 < k1 < 10.0
        assert 0.0 < k2 < 100.0


class TestRegions:
    def test_boundaries_belong_to_the_inner_region(self):
        c = DELTA ** (4.0 / 3.0)
        assert classify_region(c, DELTA) == RegionTag.CORE
        assert classify_region(1.001 * c, DELTA) == RegionTag.GLUE
        assert classify_region(2.0 * c, DELTA) == RegionTag.GLUE
        assert classify_region(0.5, DELTA) == RegionTag.NECK
        assert classify_region(1.0, DELTA) == RegionTag.NECK
        assert classify_region(1.5, DELTA) == RegionTag.MATCH
        assert classify_region(3.0, DELTA) == RegionTag.OUTER

    def test_tags_are_strings(self):
        assert RegionTag.NECK == "neck"


class TestPotentials:
    def test_eguchi_hanson_profile(self):
        t = 0.01
        u, d1, d2 = EguchiHansonPotential(t).profile(0.03)
        assert float(u) == pytest.approx(0.2)
        assert float(d1) == pytest.approx(0.5 / 0.2)
        assert float(d2) == pytest.approx(-0.25 / 0.04 ** 1.5)

    def test_pulled_back_derivatives(self):
        potential = PulledBackCentralPotential(0.05, 1e-4)
        s = np.array([0.01, 0.1, 1.0])
        _, d1, d2 = potential.profile(s)
        _, n1, n2 = radial_derivatives(lambda x: potential.profile(x)[0], s, rel_step=1e-4)
        np.testing.assert_allclose(d1, n1, rtol=1e-6)
        np.testing.assert_allclose(d2, n2, rtol=1e-4)

    def test_central_potential_value(self):
        z = point_from_ambient(cone_points([0.5])[0], 0.0)
        assert central_model_potential(z, 0.05) == pytest.approx(0.5 + 0.05 * 0.25)

    def test_apex_is_excluded(self):
        with pytest.raises(ApexExcluded):
            central_model_potential(SurfacePoint("W1+", (0.0, 0.0), 0.0), 0.05)

    def test_central_potential_lives_on_the_cone(self):
        with pytest.raises(ValueError):
            central_model_potential(SurfacePoint("W1+", (0.3, 0.0), 1e-4), 0.05)


class TestSmoothingMap:
    @given(st.floats(min_value=0.05, max_value=2.0), st.integers(min_value=0, max_value=50))
    def test_image_lies_on_the_smoothing(self, r, seed):
        t = 1e-4
        z = cone_points([r], seed)
        w = smoothing_map_ambient(z, t)
        assert abs(np.sum(w * w) - t) <= 1e-12
        np.testing.assert_allclose(inverse_map_ambient(w, t), z, atol=1e-12)

    def test_modulus_formula(self):
        t = 1e-4
        z = cone_points([0.3, 1.0, 1.7], seed=4)
        s0 = np.sum(np.abs(z) ** 2, axis=1)
        s = np.sum(np.abs(smoothing_map_ambient(z, t)) ** 2, axis=1)
        # s = s0 + t²/(4 s0)
        np.testing.assert_allclose(s, s0 + t ** 2 / (4.0 * s0), rtol=1e-12)

    def test_collapsed_core(self):
        t = 1e-4
        with pytest.raises(CollapsedLocus):
            smoothing_map_ambient(cone_points([0.5 * math.sqrt(t)]), t)
        with pytest.raises(CollapsedLocus):
            inverse_map_ambient(math.sqrt(t) * np.array([[1.0, 0.0, 0.0]]), t)

    def test_surface_point_version(self):
        z = point_from_ambient(cone_points([0.4], seed=2)[0], 0.0)
        w = smoothing_map(z, 1e-4)
        assert w.t == 1e-4
        with pytest.raises(ValueError):
            smoothing_map(w, 1e-4)


class TestPregluedModel:
    def test_eguchi_hanson_in_the_core(self, params):
        model = PregluedModel(params)
        s = np.array([params.t * 1.5, (0.5 * params.glue_scale) ** 2])
        U, d1, d2 = model.profile(s)
        G = EguchiHansonPotential(params.t).profile(s)
        np.testing.assert_allclose(U, G[0], rtol=1e-14)
        np.testing.assert_allclose(d1, G[1], rtol=1e-14)
        np.testing.assert_allclose(d2, G[2], rtol=1e-14)

    def test_pulled_back_central_outside(self, params):
        model = PregluedModel(params)
        s = np.array([4.5, 9.0])
        U, _, _ = model.profile(s)
        F, _, _ = PulledBackCentralPotential(params.c2, params.t).profile(s)
        np.testing.assert_allclose(U, F, rtol=1e-14)

    def test_positive_across_the_model(self, params):
        model = PregluedModel(params)
        s = np.geomspace(params.t * 1.0001, 4.0, 2000)
        model.check_positive(s)
        lam1, lam2 = model.eigenvalues(s)
        assert np.all(lam1 > 0.0) and np.all(lam2 > 0.0)

    def test_ricci_potential_in_the_core(self, params):
        model = PregluedModel(params)
        s = np.array([params.t * 2.0, (0.5 * params.glue_scale) ** 2])
        np.testing.assert_allclose(model.ricci_radial(s), -np.sqrt(s + params.t), rtol=1e-9)

    def test_ricci_potential_decays_outside(self, params):
        model = PregluedModel(params)
        s = np.array([4.0, 9.0, 16.0])
        f = model.ricci_radial(s)
        assert np.all(np.abs(f) <= params.t ** 2 / s ** 2)

    def test_point_api(self, params):
        w = ambient_from_frame(np.array([0.25]), params.t, *orthonormal_pairs(
            np.array([[0.3, 0.6, 0.2]])))[0]
        p = point_from_ambient(w, params.t)
        value, region = preglued_potential(p, params)
        assert region == RegionTag.NECK
        assert value == pytest.approx(float(preglued_model(params).profile(0.25)[0]))
        assert math.isfinite(ricci_potential(p, params))

    def test_delta_above_maximum(self):
        params = GluingParams(delta=0.3)
        p = point_from_ambient(np.array([1.0, 0.0, 0.0]), params.t)
        with pytest.raises(ValueError):
            preglued_potential(p, params, delta_max=DELTA_MAX)

    def test_pluriharmonic_mismatch_in_the_core(self):
        radial = GluingParams(delta=DELTA)
        shifted = GluingParams(delta=DELTA, ph_coeffs=(0.5, 0.25j, 0.0))
        w = ricci_region_samples("core", DELTA, 2.0, 16)
        difference = preglued_model(shifted).ricci_ambient(w) - preglued_model(radial).ricci_ambient(w)
        np.testing.assert_allclose(difference, np.real(w @ np.array([0.5, 0.25j, 0.0])),
                                   atol=1e-12)


class TestAnnulusExponents:
    def test_exponent_values(self):
        assert annulus_exponent(4.0 / 3.0, 0) == pytest.approx(8.0 / 3.0)
        assert annulus_exponent(4.0 / 3.0, 2) == pytest.approx(4.0 / 3.0)
        assert annulus_exponent(1.0, 0) == pytest.approx(2.0)

    def test_optimal_alpha(self):
        assert optimal_annulus_alpha() == pytest.approx(4.0 / 3.0, abs=1e-6)

    @pytest.mark.parametrize("region,alpha,k,expected", [
        ("core", 2.0, 0, (2.0, "rate")),
        ("core", 2.0, 2, (0.0, "rate")),
        ("glue", 1.0, 1, (2.0 / 3.0, "rate")),
        ("neck", 1.0, 0, (2.0, "rate")),
        ("outer", 1.0, 0, (4.0, "rate")),
        ("outer", 1.0, 2, (4.0, "rate")),
    ])
    def test_ricci_exponents(self, region, alpha, k, expected):
        value, mode = ricci_exponent(region, alpha, k)
        assert value == pytest.approx(expected[0])
        assert mode == expected[1]

    @pytest.mark.parametrize("region", RICCI_REGIONS)
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_every_ricci_row_is_a_rate(self, region, k):
        assert ricci_exponent(region, 1.0, k)[1] == "rate"

    def test_unknown_region(self):
        with pytest.raises(ValueError):
            ricci_exponent("match", 1.0, 0)


class TestRicciRegions:
    def test_outer_shell_radii(self):
        w = ricci_region_samples("outer", DELTA, 1.0, 64)
        r = np.sqrt(np.sum(np.abs(w) ** 2, axis=1))
        assert np.all(r >= OUTER_SHELL[0] * (1 - 1e-12))
        assert np.all(r <= OUTER_SHELL[1] * (1 + 1e-12))

    def test_core_annulus_stays_off_the_cycle(self):
        w = ricci_region_samples("core", DELTA, 2.0, 64)
        r = np.sqrt(np.sum(np.abs(w) ** 2, axis=1))
        assert np.all(r >= 1.01 * DELTA ** 2 * (1 - 1e-12))

    def test_glue_ignores_alpha(self):
        np.testing.assert_array_equal(ricci_region_samples("glue", DELTA, 0.5, 32),
                                      ricci_region_samples("glue", DELTA, 4.0 / 3.0, 32))

    def test_invalid_alpha(self):
        with pytest.raises(InvalidAlpha):
            ricci_region_samples("neck", DELTA, 2.5, 32)

    def test_norm_order_checked(self, params):
        with pytest.raises(ValueError):
            ricci_region_norm(params, "core", 3)

    def test_outer_norm_is_tiny(self, params):
        assert ricci_region_norm(params, "outer", 0, count=64) <= params.t ** 2


class TestPointPotentials:
    def test_eh_potential_closed_form(self, params):
        y = 0.5
        x = math.sqrt(params.t + y * y)
        p = point_from_ambient([x, 1j * y, 0.0], params.t)
        assert eh_potential(p, params) == pytest.approx(math.sqrt(2 * params.t + 2 * y * y))

    def test_eh_potential_rejects_other_t(self, params):
        p = point_from_ambient([1.0, 0.0, 0.0], 1.0)
        with pytest.raises(ValueError):
            eh_potential(p, params)

    def test_pluriharmonic_correction(self, params):
        y = 0.5
        x = math.sqrt(params.t + y * y)
        p = point_from_ambient([x, 1j * y, 0.0], params.t)
        assert pluriharmonic_correction(p, [1.0, 0.0, 0.0]) == pytest.approx(x)
        assert pluriharmonic_correction(p, [0.0, 1j, 0.0]) == pytest.approx(-y)
        assert pluriharmonic_correction(p, [0.0, 0.0, 0.0]) == 0.0


def frame_point(r, t):
    """A point of V_t with |w| = r on a fixed generic frame"""
    x, y = orthonormal_pairs(np.array([[0.3, 0.6, 0.2]]))
    return ambient_from_frame(np.array([r * r]), t, x, y)[0]


class TestPregluedEverywhere:
    @pytest.mark.parametrize("factor,region", [
        (0.5, RegionTag.CORE), (1.5, RegionTag.GLUE), (None, RegionTag.NECK),
        (None, RegionTag.MATCH), (None, RegionTag.OUTER)])
    def test_point_api_in_every_region(self, params, factor, region):
        radii = {RegionTag.NECK: 0.5, RegionTag.MATCH: 1.5, RegionTag.OUTER: 3.0}
        r = factor * params.glue_scale if factor else radii[region]
        w = frame_point(r, params.t)
        p = point_from_ambient(w, params.t)
        value, tag = preglued_potential(p, params)
        assert tag == region
        model = preglued_model(params)
        U, d1, d2 = model.profile(r * r)
        assert isinstance(U, float)
        assert value == pytest.approx(U - pluriharmonic_correction(p, params.ph_coeffs))
        assert math.isfinite(ricci_potential(p, params))
        g = complex_hessian(model, p)
        assert g.is_positive()

    def test_scalar_and_array_profiles_agree(self, params):
        model = preglued_model(params)
        s = np.array([(1.5 * params.glue_scale) ** 2, 0.25, 2.25])
        U, U1, U2 = model.profile(s)
        for i, si in enumerate(s):
            assert model.profile(float(si)) == pytest.approx((U[i], U1[i], U2[i]), rel=1e-14)
        np.testing.assert_allclose([model.ricci_radial(float(si)) for si in s],
                                   model.ricci_radial(s), rtol=1e-14)

    @pytest.mark.parametrize("delta", [2.0 ** -5, 2.0 ** -7])
    def test_volume_ratio_in_the_glue_region(self, delta):
        params = GluingParams(delta=delta)
        w = frame_point(1.5 * params.glue_scale, params.t)
        p = point_from_ambient(w, params.t)
        ratio = vol_ratio_to_omega(complex_hessian(preglued_model(params), p), p)
        assert abs(ratio - 1.0) <= 25.0 * params.glue_scale

    def test_profile_is_continuous_across_region_edges(self, params):
        model = preglued_model(params)
        for edge in region_bounds(params.delta):
            s = edge * edge
            below = model.profile(s * (1.0 - 1e-10))
            above = model.profile(s * (1.0 + 1e-10))
            assert above[0] == pytest.approx(below[0], rel=1e-8, abs=1e-12)
            assert above[1] == pytest.approx(below[1], rel=1e-6)
