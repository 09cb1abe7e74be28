"""Tests for the synthetic spatio-temporal field generators."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from driveby.simgen import SpectralBasis, simulate_ar, simulate_factored, spectral_basis
from driveby.similarity import autoregressive_temporal_similarity


def _gaussian_similarity(rng, L, length=0.5):
    pts = rng.random((L, 2))
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * length**2))


class TestSpectralBasis:
    def test_eigenvalues_descend_and_vectors_are_orthonormal(self):
        rng = np.random.default_rng(71)
        G = _gaussian_similarity(rng, 12)
        basis = spectral_basis(G, 5)
        assert isinstance(basis, SpectralBasis)
        assert basis.m == 5
        assert basis.vectors.shape == (12, 5)
        assert basis.eigenvalues.shape == (12,)
        assert np.all(np.diff(basis.eigenvalues) <= 1e-12)
        assert_allclose(basis.vectors.T @ basis.vectors, np.eye(5), atol=1e-10)

    def test_vectors_diagonalize_the_matrix(self):
        rng = np.random.default_rng(72)
        G = _gaussian_similarity(rng, 10)
        basis = spectral_basis(G, 10)
        assert_allclose(G @ basis.vectors, basis.vectors * basis.eigenvalues, atol=1e-9)

    def test_input_validation(self):
        with pytest.raises(ValueError, match="square"):
            spectral_basis(np.ones((3, 2)), 1)
        asym = np.array([[1.0, 0.9], [0.1, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            spectral_basis(asym, 1)
        with pytest.raises(ValueError, match="m must be"):
            spectral_basis(np.eye(3), 0)
        with pytest.raises(ValueError, match="m must be"):
            spectral_basis(np.eye(3), 4)


class TestFactoredGenerator:
    def test_shape_and_determinism(self):
        rng = np.random.default_rng(73)
        G = _gaussian_similarity(rng, 9)
        H = autoregressive_temporal_similarity(7, 0.9)
        a = simulate_factored(G, H, 3, 4, 3, 0.01, seed=11)
        b = simulate_factored(G, H, 3, 4, 3, 0.01, seed=11)
        c = simulate_factored(G, H, 3, 4, 3, 0.01, seed=12)
        assert a.values.shape == (9, 7)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_noiseless_rank_is_bounded(self):
        rng = np.random.default_rng(74)
        G = _gaussian_similarity(rng, 10)
        H = autoregressive_temporal_similarity(8, 0.9)
        for m, n, r in ((2, 3, 5), (4, 4, 2)):
            Y = simulate_factored(G, H, m, n, r, 0.0, seed=5).values
            s = np.linalg.svd(Y, compute_uv=False)
            assert np.all(s[min(m, n, r):] < 1e-10)

    def test_columns_stay_in_the_spatial_subspace(self):
        rng = np.random.default_rng(75)
        G = _gaussian_similarity(rng, 10)
        H = autoregressive_temporal_similarity(6, 0.9)
        m = 3
        Y = simulate_factored(G, H, m, 4, 5, 0.0, seed=9).values
        U = spectral_basis(G, m).vectors
        residual = Y - U @ (U.T @ Y)
        assert float(np.abs(residual).max()) < 1e-8

    def test_provenance_records_the_recipe(self):
        rng = np.random.default_rng(76)
        G = _gaussian_similarity(rng, 6)
        H = autoregressive_temporal_similarity(5, 0.8)
        out = simulate_factored(G, H, 2, 3, 4, 0.05, seed=21)
        p = out.provenance
        assert p["generator"] == "factored"
        assert (p["m"], p["n"], p["r"]) == (2, 3, 4)
        assert p["seed"] == 21
        assert p["noise_std"] == 0.05

    def test_input_validation(self):
        rng = np.random.default_rng(77)
        G = _gaussian_similarity(rng, 6)
        H = autoregressive_temporal_similarity(5, 0.8)
        with pytest.raises(ValueError, match="r must be"):
            simulate_factored(G, H, 2, 3, 0, 0.0, seed=1)
        with pytest.raises(ValueError, match="noise_std"):
            simulate_factored(G, H, 2, 3, 2, -0.1, seed=1)


class TestAutoregressiveGenerator:
    def test_carryover_controls_temporal_correlation(self):
        rng = np.random.default_rng(78)
        G = _gaussian_similarity(rng, 500)
        lag1 = {}
        for c in (0.0, 0.5, 1.0):
            Y = simulate_ar(G, 5, 5, c, 40, 0.0, seed=13).values
            x = Y[:, :-1].ravel()
            y = Y[:, 1:].ravel()
            lag1[c] = float(np.corrcoef(x, y)[0, 1])
        assert lag1[1.0] > 0.8
        assert lag1[1.0] > lag1[0.5] > lag1[0.0]
        assert abs(lag1[0.0]) < 0.2

    def test_r_does_not_enter_generation(self):
        rng = np.random.default_rng(79)
        G = _gaussian_similarity(rng, 8)
        a = simulate_ar(G, 3, 2, 0.9, 6, 0.01, seed=4)
        b = simulate_ar(G, 3, 7, 0.9, 6, 0.01, seed=4)
        assert np.array_equal(a.values, b.values)
        assert a.provenance["r"] == 2 and b.provenance["r"] == 7

    def test_provenance_records_the_recipe(self):
        rng = np.random.default_rng(80)
        G = _gaussian_similarity(rng, 6)
        out = simulate_ar(G, 2, 3, 0.7, 5, 0.02, seed=6)
        p = out.provenance
        assert p["generator"] == "autoregressive"
        assert (p["m"], p["r"], p["c"], p["T"]) == (2, 3, 0.7, 5)
        assert out.values.shape == (6, 5)

    def test_input_validation(self):
        rng = np.random.default_rng(81)
        G = _gaussian_similarity(rng, 6)
        with pytest.raises(ValueError, match="T must be"):
            simulate_ar(G, 2, 2, 0.9, 0, 0.0, seed=1)
        with pytest.raises(ValueError, match="noise_std"):
            simulate_ar(G, 2, 2, 0.9, 5, -1.0, seed=1)
        with pytest.raises(ValueError, match="finite"):
            simulate_ar(G, 2, 2, float("nan"), 5, 0.0, seed=1)
