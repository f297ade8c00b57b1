import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from core.errors import BranchCut, DegenerateChart, InvalidAlpha, NotPositive, StepUnderflow, \
    UnregisteredRadial
from core.gluing_models import EguchiHansonPotential, PulledBackCentralPotential, preglued_model
from core.surface_charts import (GluingParams, HermitianForm2, PluriharmonicField,
                                 QuadraticField, FunctionField, SurfacePoint, chart_jacobian,
                                 chart_lift, complex_hessian, defining_residual,
                                 eh_normalization, holomorphic_volume_form, laplacian,
                                 ma_ratio, point_from_ambient, radial_eigenvalues,
                                 radial_volume_ratio, rechart, vol_ratio_to_omega)
from core.weighted_analysis import shell_samples_ambient

coordinate = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False, allow_infinity=False)


@pytest.fixture
def generic_point():
    # t − u1² − u2² = 0.8825 − 0.04i, well away from the cut
    return chart_lift((0.3 + 0.1j, 0.2 - 0.05j), 1.0, "W1+")


@pytest.fixture
def positive_form():
    return HermitianForm2([[2.0, 0.5j], [-0.5j, 1.0]])


class TestGluingParams:
    def test_t_is_delta_to_the_fourth(self):
        params = GluingParams(delta=0.125)
        assert params.t == pytest.approx(0.125 ** 4, rel=1e-15)
        assert params.sqrt_t == pytest.approx(math.sqrt(params.t), rel=1e-15)

    @pytest.mark.parametrize("beta", [-2.0, 0.0, 0.5, -3.0])
    def test_beta_outside_open_interval_rejected(self, beta):
        with pytest.raises(ValueError):
            GluingParams(delta=0.1, beta=beta)

    @pytest.mark.parametrize("delta", [0.0, -0.1, float("inf"), float("nan")])
    def test_delta_must_be_positive_and_finite(self, delta):
        with pytest.raises(ValueError):
            GluingParams(delta=delta)

    def test_alpha_outside_range(self):
        with pytest.raises(InvalidAlpha):
            GluingParams(delta=0.1, alpha=2.5)

    def test_with_delta_keeps_other_fields(self):
        params = GluingParams(delta=0.1, beta=-0.5, c2=0.2)
        other = params.with_delta(0.05)
        assert other.delta == 0.05
        assert other.beta == -0.5 and other.c2 == 0.2

    def test_radial_flag(self):
        assert GluingParams(delta=0.1).is_radial
        assert not GluingParams(delta=0.1, ph_coeffs=(0, 1j, 0)).is_radial


class TestCharts:
    @settings(max_examples=60, deadline=None)
    @given(coordinate, coordinate, coordinate, coordinate,
           st.floats(min_value=0.0, max_value=1.0), st.sampled_from(["W1+", "W2-", "W3+"]))
    def test_lift_lies_on_the_smoothing(self, a, b, c, d, t, chart_id):
        try:
            p = chart_lift((complex(a, b), complex(c, d)), t, chart_id)
        except BranchCut:
            assume(False)
        scale = 1.0 + a * a + b * b + c * c + d * d + t
        assert defining_residual(p) <= 1e-12 * scale

    def test_negative_real_argument_is_a_branch_cut(self):
        with pytest.raises(BranchCut) as info:
            chart_lift((2.0, 0.0), 1.0, "W1+")
        assert info.value.chart_id == "W1+"

    def test_unknown_chart_rejected(self):
        with pytest.raises(ValueError):
            SurfacePoint("W4+", (0.0, 0.0), 1.0)

    def test_negative_t_rejected(self):
        with pytest.raises(ValueError):
            SurfacePoint("W1+", (0.0, 0.0), -1.0)

    def test_selection_uses_largest_coordinate(self):
        w = np.array([0.1, 0.2, math.sqrt(0.95)], dtype=complex)
        p = point_from_ambient(w, 1.0)
        assert p.chart_id == "W3+"
        np.testing.assert_allclose(p.ambient(), w, atol=1e-14)

    def test_selection_picks_the_negative_branch(self):
        w = np.array([0.1, 0.2, -math.sqrt(0.95)], dtype=complex)
        assert point_from_ambient(w, 1.0).chart_id == "W3-"

    def test_rechart_keeps_the_ambient_point(self, generic_point):
        q = rechart(generic_point, "W2+")
        assert q.chart_index == 1
        np.testing.assert_allclose(q.ambient(), generic_point.ambient(), atol=1e-13)

    def test_volume_form_transforms_with_the_chart_jacobian(self, generic_point):
        q = rechart(generic_point, "W2+")
        J = chart_jacobian(generic_point, q.chart_id)
        source = holomorphic_volume_form(generic_point)
        target = holomorphic_volume_form(q)
        assert abs(source - target * np.linalg.det(J)) <= 1e-12 * abs(source)

    def test_vanishing_solved_coordinate_is_degenerate(self):
        p = chart_lift((1.0, 0.0), 1.0, "W1+")
        with pytest.raises(DegenerateChart):
            holomorphic_volume_form(p)


class TestHessians:
    def test_flat_potential_modes_agree(self, generic_point):
        exact = complex_hessian(QuadraticField(), generic_point).entries
        approx = complex_hessian(QuadraticField(), generic_point, mode="fd").entries
        assert np.linalg.norm(exact - approx) <= 1e-4 * np.linalg.norm(exact)

    def test_pluriharmonic_part_has_no_levi_form(self, generic_point):
        field = QuadraticField() + PluriharmonicField((1.0, 1j, 0.5))
        exact = complex_hessian(field, generic_point).entries
        flat = complex_hessian(QuadraticField(), generic_point).entries
        np.testing.assert_allclose(exact, flat, atol=1e-14)

    def test_finite_differences_are_second_order(self, generic_point):
        eh = EguchiHansonPotential(1.0)
        exact = complex_hessian(eh, generic_point).entries
        errors = [np.linalg.norm(complex_hessian(eh, generic_point, "fd", h=h).entries - exact)
                  for h in (0.02, 0.01)]
        assert 3.5 <= errors[0] / errors[1] <= 4.5

    def test_plain_function_needs_finite_differences(self, generic_point):
        field = FunctionField(lambda w: float(np.sum(np.abs(w) ** 2)))
        with pytest.raises(UnregisteredRadial):
            complex_hessian(field, generic_point)
        fd = complex_hessian(field, generic_point, mode="finite-difference")
        exact = complex_hessian(QuadraticField(), generic_point)
        np.testing.assert_allclose(fd.entries, exact.entries, atol=1e-5)

    def test_step_underflow(self, generic_point):
        with pytest.raises(StepUnderflow):
            complex_hessian(QuadraticField(), generic_point, mode="fd", h=1e-13)

    def test_unknown_mode(self, generic_point):
        with pytest.raises(ValueError):
            complex_hessian(QuadraticField(), generic_point, mode="spectral")


class TestHermitianForms:
    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            HermitianForm2([[1.0, 1.0], [0.0, 1.0]])

    def test_ma_ratio_value(self, positive_form):
        h = HermitianForm2([[1.0, 0.2], [0.2, 0.5]])
        assert ma_ratio(positive_form, h) == pytest.approx(4.21 / 1.75, rel=1e-12)

    def test_laplacian_is_the_derivative_of_ma_ratio(self, positive_form):
        h = HermitianForm2([[1.0, 0.2], [0.2, 0.5]])
        eps = 1e-6
        derivative = (ma_ratio(positive_form, h.scaled(eps)) - 1.0) / eps
        assert laplacian(positive_form, h) == pytest.approx(2.0 / 1.75, rel=1e-12)
        assert derivative == pytest.approx(laplacian(positive_form, h), rel=1e-5)

    def test_background_must_be_positive(self):
        indefinite = HermitianForm2([[1.0, 0.0], [0.0, -1.0]])
        zero = HermitianForm2(np.zeros((2, 2)))
        with pytest.raises(NotPositive):
            ma_ratio(indefinite, zero)
        with pytest.raises(NotPositive):
            laplacian(indefinite, zero)


class TestVolumeRatio:
    @pytest.mark.parametrize("t", [0.0, 1e-8, 2.0 ** -16, 1.0])
    def test_eguchi_hanson_normalization(self, t):
        assert eh_normalization(t) == pytest.approx(0.5, rel=1e-9)

    @given(st.floats(min_value=1e-6, max_value=1.0), st.floats(min_value=0.0, max_value=1e4))
    def test_eguchi_hanson_radial_ratio_is_one(self, t, x):
        s = t * (1.0 + x)
        _, d1, d2 = EguchiHansonPotential(t).profile(s)
        lam1, lam2 = radial_eigenvalues(d1, d2, s, t)
        assert float(4.0 * s * lam1 * lam2) == pytest.approx(0.5, rel=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_eguchi_hanson_is_ricci_flat_through_charts(self, seed):
        t = 2.0 ** -16
        eh = EguchiHansonPotential(t)
        for row in shell_samples_ambient(1.01 * math.sqrt(t), 2.0, t, 8, seed=seed):
            p = point_from_ambient(row, t)
            assert vol_ratio_to_omega(complex_hessian(eh, p), p) == pytest.approx(1.0, rel=1e-8)

    def test_radial_closed_form_matches_charts(self):
        t = 2.0 ** -16
        potential = PulledBackCentralPotential(0.05, t)
        for row in shell_samples_ambient(0.1, 1.0, t, 5, seed=3):
            p = point_from_ambient(row, t)
            s = float(np.sum(np.abs(row) ** 2))
            _, d1, d2 = potential.profile(s)
            closed = radial_volume_ratio(d1, d2, s, t)
            charted = vol_ratio_to_omega(complex_hessian(potential, p), p)
            assert float(closed) == pytest.approx(charted, rel=1e-8)


small = st.floats(min_value=-0.3, max_value=0.3)
diagonal = st.floats(min_value=0.5, max_value=3.0)
entry = st.floats(min_value=-2.0, max_value=2.0)


class TestDeterminantIdentity:
    @given(diagonal, diagonal, small, small, entry, entry, entry, entry)
    def test_ma_ratio_splits_into_trace_and_determinant(self, a, b, cr, ci, p, q, hr, hi):
        g = HermitianForm2([[a, cr + 1j * ci], [cr - 1j * ci, b]])
        h = HermitianForm2([[p, hr + 1j * hi], [hr - 1j * hi, q]])
        expected = 1.0 + laplacian(g, h) + h.det() / g.det()
        assert ma_ratio(g, h) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def second_chart(p):
    """The chart solving for the coordinate of second largest modulus"""
    w = p.ambient()
    k = sorted(range(3), key=lambda i: -abs(w[i]))[1]
    return rechart(p, f"W{k + 1}+")


class TestChartIndependence:
    @pytest.fixture
    def points(self):
        params = GluingParams(delta=2.0 ** -4)
        # glue region out to the match region
        rows = shell_samples_ambient(1.5 * params.glue_scale, 1.5, params.t, 6, seed=5)
        return params, [point_from_ambient(row, params.t) for row in rows]

    def test_invariants_agree_across_charts(self, points):
        params, sample = points
        background = EguchiHansonPotential(params.t)
        perturbation = preglued_model(params)
        for p in sample:
            q = second_chart(p)
            assert q.chart_id[:2] != p.chart_id[:2]
            np.testing.assert_allclose(q.ambient(), p.ambient(), atol=1e-12)
            values = []
            for point in (p, q):
                g = complex_hessian(background, point)
                h = complex_hessian(perturbation, point) + g.scaled(-1.0)
                values.append((ma_ratio(g, h), laplacian(g, h),
                               vol_ratio_to_omega(g + h, point)))
            assert values[1] == pytest.approx(values[0], rel=1e-8, abs=1e-10)
