import numpy as np
import pytest

from kalmanlab.baselines import (
    SavgolSpec,
    passive_step,
    savgol_coefficients,
    savgol_filter,
)
from kalmanlab.errors import DataError, DimensionError
from kalmanlab.numerics import make_rng


class TestSavgolCoefficients:
    def test_default_kernel_closed_form(self):
        w = savgol_coefficients(SavgolSpec(window=5, degree=2))
        expect = np.array([-3.0, 12.0, 17.0, 12.0, -3.0]) / 35.0
        assert np.allclose(w, expect, atol=1e-12)

    def test_kernel_sums_to_one(self):
        for window, degree in ((5, 2), (7, 2), (7, 3), (9, 4)):
            w = savgol_coefficients(SavgolSpec(window=window, degree=degree))
            assert abs(w.sum() - 1.0) <= 1e-12

    def test_kernel_symmetric(self):
        w = savgol_coefficients(SavgolSpec(window=7, degree=3))
        assert np.allclose(w, w[::-1], atol=1e-12)

    def test_degree_zero_is_moving_average(self):
        w = savgol_coefficients(SavgolSpec(window=5, degree=0))
        assert np.allclose(w, np.full(5, 0.2), atol=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SavgolSpec(window=4, degree=2)
        with pytest.raises(ValueError):
            SavgolSpec(window=5, degree=5)


class TestSavgolFilter:
    def test_constant_series_invariant(self):
        out = savgol_filter(SavgolSpec(), np.full(20, 3.7))
        assert np.allclose(out, 3.7, atol=1e-12)

    def test_ramp_invariant(self):
        # degree >= 1 fits a line exactly; mirror padding keeps the
        # interior exact
        t = np.arange(30, dtype=float)
        out = savgol_filter(SavgolSpec(), 2.0 * t + 1.0)
        interior = slice(2, -2)
        assert np.allclose(out[interior], (2.0 * t + 1.0)[interior], atol=1e-10)

    def test_quadratic_invariant_for_degree_two(self):
        t = np.linspace(-1, 1, 25)
        series = 3.0 * t**2 - t + 0.5
        out = savgol_filter(SavgolSpec(window=5, degree=2), series)
        assert np.allclose(out[2:-2], series[2:-2], atol=1e-10)

    def test_linearity(self):
        rng = make_rng(163)
        a = rng.standard_normal(40)
        b = rng.standard_normal(40)
        spec = SavgolSpec()
        lhs = savgol_filter(spec, 2.0 * a + 3.0 * b)
        rhs = 2.0 * savgol_filter(spec, a) + 3.0 * savgol_filter(spec, b)
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_output_length_matches_input(self):
        out = savgol_filter(SavgolSpec(), np.arange(11, dtype=float))
        assert out.shape == (11,)

    def test_reduces_noise_variance(self):
        rng = make_rng(167)
        noise = rng.standard_normal(500)
        out = savgol_filter(SavgolSpec(), noise)
        assert out.var() < 0.6 * noise.var()

    def test_short_series_rejected(self):
        with pytest.raises(DataError):
            savgol_filter(SavgolSpec(), np.ones(4))

    def test_two_dimensional_rejected(self):
        with pytest.raises(DimensionError):
            savgol_filter(SavgolSpec(), np.ones((5, 2)))


class TestPassive:
    def test_identity(self):
        z = np.array([1.0, 2.0])
        out = passive_step(z)
        assert np.array_equal(out, z)

    def test_returns_copy(self):
        z = np.array([1.0, 2.0])
        out = passive_step(z)
        out[0] = 99.0
        assert z[0] == 1.0
