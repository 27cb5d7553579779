import numpy as np
import pytest

from conftest import make_data, model_values
from mpbr import (
    BootstrapConfig,
    EstimatorSpec,
    InvalidSpecError,
    SimSpec,
    bootstrap,
    simulate,
)

BETA3 = np.array([1.0, 2.0, 0.5])
ALPHA3 = np.array([0.0, 1.0, -1.0])


def spec3(**kwargs):
    defaults = dict(beta=BETA3, alpha=ALPHA3, r_values=np.linspace(1.0, 10.0, 20))
    defaults.update(kwargs)
    return SimSpec(**defaults)


class TestSimulate:
    def test_zero_noise_is_exact_model(self):
        data = simulate(spec3(sigma=0.0), seed=1)
        np.testing.assert_allclose(
            data.values, model_values(BETA3, ALPHA3, np.linspace(1.0, 10.0, 20))
        )

    def test_deterministic_in_seed(self):
        a = simulate(spec3(sigma=0.1), seed=9)
        b = simulate(spec3(sigma=0.1), seed=9)
        c = simulate(spec3(sigma=0.1), seed=10)
        np.testing.assert_array_equal(a.values, b.values)
        assert np.any(a.values != c.values)

    def test_noise_scale_tracks_specification(self):
        # constant sigma: column residual spread approaches sigma * beta
        spec = spec3(r_values=np.linspace(1.0, 10.0, 10000), sigma=0.2)
        data = simulate(spec, seed=4)
        residuals = data.values - model_values(BETA3, ALPHA3, spec.r_values)
        spread = residuals.std(axis=0, ddof=1)
        np.testing.assert_allclose(spread, 0.2 * BETA3, rtol=0.1)

    @pytest.mark.parametrize("family,df", [("laplace", None), ("student_t", 5.0)])
    def test_other_noise_families_have_unit_scale(self, family, df):
        spec = spec3(
            r_values=np.linspace(1.0, 10.0, 20000),
            sigma=0.2,
            noise_family=family,
            student_df=df,
        )
        data = simulate(spec, seed=4)
        residuals = data.values - model_values(BETA3, ALPHA3, spec.r_values)
        np.testing.assert_allclose(residuals.std(axis=0, ddof=1), 0.2 * BETA3, rtol=0.1)

    def test_proportional_sigma(self):
        r = np.full(5000, 4.0)
        spec = spec3(r_values=r, sigma=0.05, sigma_mode="proportional")
        data = simulate(spec, seed=2)
        residuals = data.values - model_values(BETA3, ALPHA3, r)
        np.testing.assert_allclose(residuals.std(axis=0, ddof=1), 0.05 * 4.0 * BETA3, rtol=0.1)

    def test_contamination_count_exact(self):
        spec = spec3(
            r_values=np.linspace(1.0, 10.0, 50),
            sigma=0.0,
            contamination_fraction=0.2,
            contamination_magnitude=100.0,
            contamination_column=1,
        )
        data = simulate(spec, seed=3)
        clean = model_values(BETA3, ALPHA3, spec.r_values)
        contaminated_rows = np.sum(np.any(data.values != clean, axis=1))
        assert contaminated_rows == 10
        assert np.all(data.values[:, [0, 2]] == clean[:, [0, 2]])

    def test_contamination_defaults_to_last_column(self):
        spec = spec3(
            r_values=np.linspace(1.0, 10.0, 50),
            sigma=0.0,
            contamination_fraction=0.1,
        )
        data = simulate(spec, seed=3)
        clean = model_values(BETA3, ALPHA3, spec.r_values)
        assert np.all(data.values[:, :2] == clean[:, :2])
        assert np.sum(data.values[:, 2] != clean[:, 2]) == 5

    def test_invalid_specs(self):
        with pytest.raises(InvalidSpecError):
            spec3(contamination_fraction=0.5)
        with pytest.raises(InvalidSpecError):
            spec3(noise_family="student_t", student_df=2.0)
        with pytest.raises(InvalidSpecError):
            spec3(beta=np.array([1.0, -2.0]))
        with pytest.raises(InvalidSpecError):
            spec3(noise_family="uniform")
        with pytest.raises(InvalidSpecError):
            spec3(r_values=np.array([1.0, 2.0]))


class TestBootstrap:
    def test_noiseless_intervals_have_zero_width(self):
        data = simulate(spec3(sigma=0.0), seed=1)
        result = bootstrap(data, BootstrapConfig(replicates=10, seed=1, level=0.9))
        np.testing.assert_allclose(result.slope_high, result.slope_low, rtol=0, atol=1e-12)
        np.testing.assert_allclose(
            result.intercept_high, result.intercept_low, rtol=0, atol=1e-12
        )
        np.testing.assert_allclose(result.a_high, result.a_low, rtol=0, atol=1e-12)

    def test_deterministic_in_seed(self):
        data = simulate(spec3(sigma=0.05), seed=5)
        first = bootstrap(data, BootstrapConfig(replicates=10, seed=1, level=0.9))
        second = bootstrap(data, BootstrapConfig(replicates=10, seed=1, level=0.9))
        third = bootstrap(data, BootstrapConfig(replicates=10, seed=2, level=0.9))
        np.testing.assert_array_equal(first.slope_low, second.slope_low)
        np.testing.assert_array_equal(first.slope_high, second.slope_high)
        assert np.any(first.slope_low != third.slope_low)

    def test_raising_level_never_shrinks_intervals(self):
        data = simulate(spec3(sigma=0.08), seed=6)
        narrow = bootstrap(data, BootstrapConfig(replicates=99, seed=3, level=0.90))
        wide = bootstrap(data, BootstrapConfig(replicates=99, seed=3, level=0.99))
        assert np.all(wide.ln_slope_low <= narrow.ln_slope_low + 1e-15)
        assert np.all(wide.ln_slope_high >= narrow.ln_slope_high - 1e-15)
        assert np.all(wide.intercept_low <= narrow.intercept_low + 1e-15)
        assert np.all(wide.intercept_high >= narrow.intercept_high - 1e-15)

    def test_point_estimate_matches_direct_fit(self):
        from mpbr import fit_mpbr

        data = simulate(spec3(sigma=0.05), seed=8)
        result = bootstrap(data, BootstrapConfig(replicates=5, seed=1))
        direct = fit_mpbr(data)
        np.testing.assert_array_equal(result.point.b.b, direct.b.b)

    def test_estimator_choice_respected(self):
        data = simulate(spec3(sigma=0.05), seed=8)
        result = bootstrap(
            data,
            BootstrapConfig(replicates=5, seed=1, estimator=EstimatorSpec(kind="mmar")),
        )
        assert result.point.estimator == "mMAR"

    def test_config_validation(self):
        with pytest.raises(InvalidSpecError):
            BootstrapConfig(replicates=1)
        with pytest.raises(InvalidSpecError):
            BootstrapConfig(level=1.0)

    def test_retries_counted_and_deterministic(self):
        # tiny n makes degenerate resamples (too few distinct rows) likely
        values = model_values(BETA3[:2], ALPHA3[:2], np.array([1.0, 2.0, 3.0, 4.0]))
        rng = np.random.default_rng(0)
        data = make_data(values + 0.01 * rng.standard_normal(values.shape))
        config = BootstrapConfig(replicates=40, seed=11, level=0.9, max_retry_fraction=2.0)
        first = bootstrap(data, config)
        second = bootstrap(data, config)
        assert first.n_retries > 0
        assert first.n_retries == second.n_retries
        np.testing.assert_array_equal(first.slope_low, second.slope_low)

    def test_exhausted_retry_budget_raises(self):
        from mpbr import TooManyFailuresError

        values = model_values(BETA3[:2], ALPHA3[:2], np.array([1.0, 2.0, 3.0]))
        rng = np.random.default_rng(0)
        data = make_data(values + 0.01 * rng.standard_normal(values.shape))
        config = BootstrapConfig(replicates=40, seed=11, level=0.9, max_retry_fraction=0.0)
        with pytest.raises(TooManyFailuresError):
            bootstrap(data, config)
