"""Standardised weights from fixed, user and estimated detection functions."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hskdetect.data import Dataset
from hskdetect.detection import (
    DegenerateDetectionError,
    DetectionFunction,
    estimated_weights,
    standardize_weights,
)
from hskdetect.locpoly import SmootherConfig
from hskdetect.simulate import gen_example1

values = arrays(float, st.integers(2, 40), elements=st.floats(-1e3, 1e3, allow_nan=False))


def _accepted(w):
    try:
        return standardize_weights(w)
    except DegenerateDetectionError:
        return None


class TestStandardize:
    def test_two_values(self):
        np.testing.assert_allclose(standardize_weights([0.0, 2.0]).values, [-1.0, 1.0])

    def test_three_values(self):
        r = math.sqrt(1.5)
        np.testing.assert_allclose(standardize_weights([1.0, 2.0, 3.0]).values, [-r, 0.0, r])

    def test_constant_is_degenerate(self):
        with pytest.raises(DegenerateDetectionError, match="degenerate detection function"):
            standardize_weights([5.0, 5.0, 5.0])

    def test_relative_threshold(self):
        # variance 1e-10 around a large mean is still numerically constant
        with pytest.raises(DegenerateDetectionError):
            standardize_weights([1e4, 1e4 + 1e-6, 1e4 - 1e-6])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            standardize_weights([1.0, np.nan])

    def test_provenance(self):
        assert standardize_weights([1.0, 2.0], "builtin:remark1").provenance == "builtin:remark1"

    @given(values)
    def test_centred_unit_mean_square(self, w):
        out = _accepted(w)
        if out is None:
            return
        n = len(w)
        assert abs(out.values.sum()) < 1e-10 * n
        assert abs(np.mean(out.values**2) - 1) < 1e-10

    @given(values, st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), st.floats(-100, 100))
    def test_affine_equivariance(self, w, a, b):
        base = _accepted(w)
        moved = _accepted(a * w + b)
        if base is None or moved is None:
            return
        np.testing.assert_allclose(moved.values, np.sign(a) * base.values, atol=1e-10 * (1 + abs(b)) / 1e-3)

    @given(values, st.randoms(use_true_random=False))
    def test_permutation(self, w, rnd):
        base = _accepted(w)
        if base is None:
            return
        perm = list(range(len(w)))
        rnd.shuffle(perm)
        np.testing.assert_allclose(standardize_weights(w[perm]).values, base.values[perm], rtol=1e-12, atol=1e-12)


class TestDetectionFunction:
    def test_builtins_on_original_scale(self):
        X = np.array([[0.0, 0.0], [1.0, -1.0], [0.5, 0.5]])
        np.testing.assert_allclose(DetectionFunction.builtin("omega1_ex2").evaluate(X), [0.5, 10.5, 3.0])
        np.testing.assert_allclose(DetectionFunction.builtin("omega2_ex2").evaluate(X), [2.0, 2.0, 1.0], atol=1e-15)
        x = np.array([[0.0], [0.25], [0.5]])
        np.testing.assert_allclose(DetectionFunction.builtin("remark1").evaluate(x), [2.0, 1.0, 0.0], atol=1e-15)

    def test_builtin_dimension_check(self):
        with pytest.raises(ValueError, match="needs 2 covariates"):
            DetectionFunction.builtin("omega1_ex2").evaluate(np.zeros((3, 1)))

    def test_unknown_builtin(self):
        with pytest.raises(ValueError):
            DetectionFunction.builtin("omega9")

    def test_user_values_must_be_finite(self):
        with pytest.raises(ValueError):
            DetectionFunction.user([1.0, np.inf])

    def test_describe(self):
        assert DetectionFunction.estimated().describe() == "estimated"
        assert DetectionFunction.builtin("remark1").describe() == "builtin:remark1"
        assert DetectionFunction.user([1.0, 2.0], "w").describe() == "user:w"


class TestEstimatedWeights:
    def test_reduces_to_standardize(self):
        np.testing.assert_allclose(standardize_weights([0.5, 1.5]).values, [-1.0, 1.0])

    def test_tracks_true_scale(self):
        rng = np.random.default_rng(17)
        d = gen_example1(1, 300, rng=rng)
        w = estimated_weights(d, SmootherConfig(degree=1))
        x = d.X[:, 0]
        assert np.corrcoef(w.values, 0.4 + 4 * x**2)[0, 1] > 0.5

    def test_deterministic_data_is_degenerate(self):
        X = np.linspace(0, 1, 40)
        with pytest.raises(DegenerateDetectionError):
            estimated_weights(Dataset(X, 1 + 2 * X), SmootherConfig(degree=2, bandwidth=2.0))

    def test_uses_observed_rows_only(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(size=80)
        Y = X + (0.2 + X) * rng.normal(size=80)
        delta = (rng.uniform(size=80) < 0.6).astype(int)
        w = estimated_weights(Dataset(X, Y, delta), SmootherConfig(degree=1, bandwidth=2.0))
        assert len(w.values) == delta.sum()
