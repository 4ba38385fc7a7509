import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from astromls.dataset import FeatureMatrix
from astromls.errors import ParameterError
from astromls.reduce import PcaModel, Scaler, fit_pca, fit_scaler, pca_transform, should_standardize


def covariance_eigen(x):
    """Oracle: eigenpairs of the sample covariance, largest first."""
    c = np.cov(x, rowvar=False, ddof=1)
    w, v = np.linalg.eigh(c)
    return w[::-1], v[:, ::-1].T


# ---------------------------------------------------------------- scaler


def test_scaler_constant_and_two_point_columns():
    s = fit_scaler(np.array([[2.0, 0.0], [2.0, 2.0]]))
    np.testing.assert_array_equal(s.means, [2.0, 1.0])
    np.testing.assert_array_equal(s.stdevs, [0.0, 1.0])
    np.testing.assert_array_equal(s.transform(np.array([[2.0, 0.0], [2.0, 2.0]])), [[0, -1], [0, 1]])


def test_scaler_keeps_feature_names_and_round_trips():
    fm = FeatureMatrix(np.array([[1.0, 5.0], [3.0, 9.0]]), ("u", "v"))
    s = fit_scaler(fm)
    out = s.transform(fm)
    assert out.feature_names == ("u", "v")
    back = Scaler.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.transform(fm).values, out.values)


def test_scaler_errors():
    with pytest.raises(ParameterError):
        fit_scaler(np.zeros((0, 3)))
    with pytest.raises(ParameterError):
        fit_scaler(np.ones((3, 2))).transform(np.ones((3, 3)))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 6)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_scaled_columns_have_zero_mean_and_unit_or_zero_spread(x):
    z = fit_scaler(x).transform(x)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12 * max(1.0, np.abs(x).max()))
    sd = z.std(axis=0)
    for v in sd:
        assert v == 0.0 or abs(v - 1.0) < 1e-9


def test_should_standardize_ignores_constant_columns():
    x = np.column_stack([np.zeros(10), np.arange(10.0), np.arange(10.0) * 2])
    assert not should_standardize(x)
    x = np.column_stack([np.arange(10.0), np.arange(10.0) * 10])
    assert should_standardize(x)


# ---------------------------------------------------------------- PCA


def test_pca_axis_aligned_variances():
    # columns uncorrelated with sample variances 4 and 1
    x = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) * np.sqrt([1.5, 1.5])
    m = fit_pca(x, 2)
    np.testing.assert_allclose(m.explained_variance, [4.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(m.components, np.eye(2), atol=1e-12)


def test_pca_full_rank_reconstruction():
    x = np.random.default_rng(1).normal(size=(20, 4))
    m = fit_pca(x, 4)
    np.testing.assert_allclose(m.inverse_transform(m.transform(x)), x, atol=1e-9)


def test_pca_matches_covariance_eigensolver():
    x = np.random.default_rng(2015).normal(size=(50, 6)) @ np.diag([3, 2, 1.5, 1, 0.5, 0.1])
    m = fit_pca(x, 3)
    w, v = covariance_eigen(x)
    np.testing.assert_allclose(m.explained_variance, w[:3], atol=1e-8)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(3), atol=1e-9)
    # same directions up to sign
    np.testing.assert_allclose(np.abs(np.sum(m.components * v[:3], axis=1)), 1.0, atol=1e-8)


def test_pca_sign_convention():
    x = np.random.default_rng(5).normal(size=(30, 5))
    for row in fit_pca(x, 5).components:
        j = int(np.argmax(np.abs(row)))
        assert row[j] > 0


def test_pca_transform_of_mean_is_zero_and_scores_uncorrelated():
    x = np.random.default_rng(9).normal(size=(40, 5)) @ np.random.default_rng(10).normal(size=(5, 5))
    m = fit_pca(x, 3)
    np.testing.assert_allclose(pca_transform(m, np.tile(m.mean, (4, 1))), 0.0, atol=1e-12)
    scores = pca_transform(m, x)
    cov = np.cov(scores, rowvar=False)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 1e-8


def test_pca_feature_names_and_errors():
    fm = FeatureMatrix.of(np.random.default_rng(0).normal(size=(10, 3)))
    m = fit_pca(fm, 2)
    assert pca_transform(m, fm).feature_names == ("pc1", "pc2")
    with pytest.raises(ParameterError):
        fit_pca(fm, 0)
    with pytest.raises(ParameterError):
        fit_pca(fm, 4)
    with pytest.raises(ParameterError):
        fit_pca(np.ones((1, 3)), 1)
    with pytest.raises(ParameterError):
        pca_transform(m, np.ones((2, 4)))


def test_pca_model_json_round_trip():
    x = np.random.default_rng(4).normal(size=(12, 4))
    m = fit_pca(x, 2)
    back = PcaModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.transform(x), m.transform(x))


matrices = arrays(np.float64, st.tuples(st.integers(3, 25), st.integers(1, 5)),
                  elements=st.floats(-100, 100, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(matrices, st.floats(-1e3, 1e3))
def test_pca_properties(x, shift):
    n, d = x.shape
    r = min(n - 1, d)
    m = fit_pca(x, r)
    # total variance conservation
    if r == d:
        assert abs(m.explained_variance.sum() - np.trace(np.atleast_2d(np.cov(x, rowvar=False)))) \
            <= 1e-8 * max(1.0, np.abs(x).max() ** 2)
    # non-expansive projection
    centered = x - x.mean(axis=0)
    scores = m.transform(x)
    assert (np.linalg.norm(scores, axis=1) <= np.linalg.norm(centered, axis=1) + 1e-9 * max(1.0, np.abs(x).max())).all()
    # translation invariance
    moved = fit_pca(x + shift, r)
    np.testing.assert_allclose(moved.explained_variance, m.explained_variance,
                               atol=1e-9 * max(1.0, np.abs(x).max() ** 2))


def test_pca_translation_invariance_of_components():
    x = np.random.default_rng(12).normal(size=(30, 4)) * [5, 3, 2, 1]
    a, b = fit_pca(x, 3), fit_pca(x + np.array([10.0, -4.0, 7.0, 1e3]), 3)
    np.testing.assert_allclose(a.components, b.components, atol=1e-9)
    np.testing.assert_allclose(a.explained_variance, b.explained_variance, atol=1e-9)
