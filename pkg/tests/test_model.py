import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_data
from mpbr import (
    InterceptVector,
    MeasurementMatrix,
    MixedSignError,
    PairTable,
    ScalingVector,
    ZeroPivotError,
    build_pair_table,
    normalize_scaling,
    pair_intercepts,
    pair_slopes,
)


class TestNormalizeScaling:
    def test_proportionality(self):
        result = normalize_scaling([2.0, 4.0, 6.0])
        np.testing.assert_array_equal(result.b, [1.0, 2.0, 3.0])

    def test_identity(self):
        np.testing.assert_array_equal(normalize_scaling([1.0, 1.0]).b, [1.0, 1.0])

    def test_global_sign_flip_absorbed(self):
        np.testing.assert_array_equal(normalize_scaling([-3.0, -6.0]).b, [1.0, 2.0])

    def test_mixed_signs_rejected(self):
        with pytest.raises(MixedSignError):
            normalize_scaling([1.0, -2.0])

    def test_zero_reference_rejected(self):
        with pytest.raises(ZeroPivotError):
            normalize_scaling([0.0, 2.0])

    def test_zero_component_rejected(self):
        with pytest.raises(MixedSignError):
            normalize_scaling([1.0, 0.0])


class TestScalingVector:
    def test_gauge_must_be_exact(self):
        with pytest.raises(ValueError):
            ScalingVector(np.array([1.0 + 1e-15, 2.0]))

    def test_positive_required(self):
        with pytest.raises(ValueError):
            ScalingVector(np.array([1.0, -2.0]))

    def test_beta_is_reciprocal(self):
        sv = ScalingVector(np.array([1.0, 2.0, 4.0]))
        np.testing.assert_allclose(sv.beta, [1.0, 0.5, 0.25])

    def test_array_is_read_only(self):
        sv = ScalingVector(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            sv.b[0] = 5.0


class TestInterceptVector:
    def test_zero_sum_enforced(self):
        with pytest.raises(ValueError):
            InterceptVector(np.array([1.0, 1.0]))

    def test_tolerant_of_rounding(self):
        InterceptVector(np.array([1.0, -1.0 + 1e-13]))

    def test_zeros_constructor(self):
        np.testing.assert_array_equal(InterceptVector.zeros(3).a, np.zeros(3))


class TestMeasurementMatrix:
    def test_shape_and_name_validation(self):
        values = np.ones((3, 2))
        with pytest.raises(ValueError):
            MeasurementMatrix(values[:2], ("a", "b"), ("m1", "m2"))
        with pytest.raises(ValueError):
            MeasurementMatrix(values, ("a", "b", "c"), ("m1", "m1"))
        with pytest.raises(ValueError):
            MeasurementMatrix(np.array([[1.0, np.nan]] * 3), ("a", "b", "c"), ("m1", "m2"))

    def test_take_rows_and_reorder(self):
        data = make_data([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
        resampled = data.take_rows([2, 2, 0])
        np.testing.assert_array_equal(resampled.values[:, 0], [3.0, 3.0, 1.0])
        assert resampled.sample_ids == ("s3", "s3", "s1")
        swapped = data.reorder_methods(["m2", "m1"])
        assert swapped.method_names == ("m2", "m1")
        np.testing.assert_array_equal(swapped.values[:, 0], [10.0, 20.0, 30.0])

    def test_values_read_only(self):
        data = make_data([[1.0, 2.0]] * 3)
        with pytest.raises(ValueError):
            data.values[0, 0] = 9.0


class TestPairSlopes:
    def test_reciprocal_pair(self):
        table = pair_slopes(ScalingVector(np.array([1.0, 2.0])))
        assert table[0, 1] == 0.5
        assert table[1, 0] == 2.0

    def test_identity(self):
        table = pair_slopes(ScalingVector(np.array([1.0, 1.0, 1.0])))
        np.testing.assert_array_equal(table, np.ones((3, 3)))

    def test_compatibility_by_construction(self):
        table = pair_slopes(ScalingVector(np.array([1.0, 2.0, 4.0])))
        assert table[0, 1] * table[1, 2] == pytest.approx(0.25, rel=1e-15)
        assert table[0, 2] == pytest.approx(0.25, rel=1e-15)


class TestPairIntercepts:
    def test_zero_intercepts(self):
        table = pair_intercepts(
            InterceptVector(np.zeros(2)), ScalingVector(np.array([1.0, 1.0]))
        )
        np.testing.assert_array_equal(table, np.zeros((2, 2)))

    def test_direct_arithmetic(self):
        table = pair_intercepts(
            InterceptVector(np.array([-1.0, 1.0])), ScalingVector(np.array([1.0, 2.0]))
        )
        assert table[0, 1] == pytest.approx(1.0)

    def test_matches_two_point_line_through_model_points(self):
        # Exact model: column nu as a function of column mu is the line
        # x_nu = (b_mu/b_nu) x_mu + (a_nu - a_mu)/b_nu. Fit that line from
        # two generated points and compare intercepts.
        b = ScalingVector(np.array([1.0, 0.5, 2.0]))
        a = InterceptVector(np.array([0.5, 1.0, -1.5]))
        r = np.array([2.0, 5.0])
        x = (r[:, None] + a.a[None, :]) / b.b[None, :]
        expected = pair_intercepts(a, b)
        for mu in range(3):
            for nu in range(3):
                slope = (x[1, nu] - x[0, nu]) / (x[1, mu] - x[0, mu])
                intercept = x[0, nu] - slope * x[0, mu]
                assert intercept == pytest.approx(expected[mu, nu], abs=1e-12)


@st.composite
def gauge_parameters(draw):
    n = draw(st.integers(min_value=2, max_value=6))
    logs = draw(
        st.lists(st.floats(-3.0, 3.0, allow_nan=False), min_size=n - 1, max_size=n - 1)
    )
    raw_a = draw(st.lists(st.floats(-5.0, 5.0, allow_nan=False), min_size=n, max_size=n))
    b = np.concatenate([[1.0], np.exp(logs)])
    a = np.asarray(raw_a)
    a = a - a.mean()
    return ScalingVector(b), InterceptVector(a)


class TestPairTableProperties:
    @settings(max_examples=50, deadline=None)
    @given(gauge_parameters())
    def test_compatibility_and_antisymmetry(self, params):
        b, a = params
        table = build_pair_table(b, a, [f"m{k}" for k in range(len(b))])
        slopes, intercepts = table.slopes, table.intercepts
        n = len(b)
        for mu in range(n):
            for nu in range(n):
                for kappa in range(n):
                    np.testing.assert_allclose(
                        slopes[mu, nu] * slopes[nu, kappa], slopes[mu, kappa], rtol=1e-12
                    )
        np.testing.assert_allclose(slopes * slopes.T, np.ones((n, n)), rtol=1e-12)
        # intercepts[mu, nu] = -intercepts[nu, mu] * slopes[mu, nu]
        np.testing.assert_allclose(
            intercepts, -intercepts.T * slopes, rtol=1e-12, atol=1e-12
        )

    @settings(max_examples=50, deadline=None)
    @given(gauge_parameters())
    def test_round_trip_reconstructs_parameters(self, params):
        b, a = params
        table = build_pair_table(b, a, [f"m{k}" for k in range(len(b))])
        b_back = 1.0 / table.slopes[0]  # slopes[0, nu] = b[0]/b[nu]
        np.testing.assert_allclose(b_back, b.b, rtol=1e-12)
        a_back = table.intercepts[0] * b.b  # a[nu] - a[0]
        a_back = a_back - a_back.mean()
        np.testing.assert_allclose(a_back, a.a, rtol=1e-9, atol=1e-12)

    def test_table_validation_rejects_incompatible_slopes(self):
        bad = np.array([[1.0, 2.0], [0.4, 1.0]])
        with pytest.raises(ValueError):
            PairTable(bad, np.zeros((2, 2)), ("m1", "m2"))
