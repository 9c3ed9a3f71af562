import numpy as np
import pytest

from deot.synthetic import gaussian, generate_synthetic, gmm, translated_blobs


class TestGaussian:
    def test_deterministic_in_seed(self):
        a = gaussian(50, [0.0, 0.0], 0.01, seed=1)
        b = gaussian(50, [0.0, 0.0], 0.01, seed=1)
        np.testing.assert_array_equal(a.points, b.points)

    def test_zero_covariance_collapses_to_mean(self):
        m = gaussian(10, [2.0, -1.0], np.zeros((2, 2)), seed=0)
        np.testing.assert_allclose(m.points, [[2.0, -1.0]] * 10, atol=1e-12)

    def test_sample_mean_monte_carlo(self):
        m = gaussian(100_000, [0.5, -0.25], 0.25, seed=2)
        np.testing.assert_allclose(m.points.mean(axis=0), [0.5, -0.25],
                                   atol=0.02)

    def test_scalar_cov_is_isotropic(self):
        m = gaussian(50_000, [0.0, 0.0], 0.09, seed=3)
        np.testing.assert_allclose(m.points.std(axis=0), 0.3, atol=0.01)

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ValueError, match="semidefinite"):
            gaussian(5, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


class TestGmm:
    def test_labels_record_components(self):
        m = gmm(200, [[0.0, 0.0], [5.0, 0.0]],
                [np.eye(2) * 0.01] * 2, seed=4)
        assert set(np.unique(m.samples.labels)) <= {0, 1}
        # points near each mean carry that component's label
        near_origin = np.linalg.norm(m.points, axis=1) < 1.0
        assert np.all(m.samples.labels[near_origin] == 0)

    def test_weights_shift_component_frequencies(self):
        m = gmm(10_000, [[0.0], [1.0]], [np.eye(1) * 1e-6] * 2,
                weights=[0.9, 0.1], seed=5)
        frac = float(np.mean(m.samples.labels == 0))
        assert abs(frac - 0.9) < 0.02

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal length"):
            gmm(10, [[0.0]], [np.eye(1)] * 2)


class TestGenerateSynthetic:
    def test_dispatch(self):
        g = generate_synthetic({"kind": "gaussian", "n": 5,
                                "mean": [0.0], "cov": 0.01})
        assert g.n == 5
        mix = generate_synthetic({"kind": "gmm", "n": 5,
                                  "means": [[0.0]], "covs": [np.eye(1)]})
        assert mix.n == 5
        with pytest.raises(ValueError, match="unknown dataset kind"):
            generate_synthetic({"kind": "moons", "n": 5})


class TestTranslatedBlobs:
    def test_target_is_shifted_source_distribution(self):
        src, tgt = translated_blobs(60, shift=[2.0, 0.5], seed=6)
        assert src.n == tgt.n == 60
        assert set(np.unique(src.samples.labels)) == {0, 1}
        # class means move by about the shift
        for c in (0, 1):
            s_mean = src.points[src.samples.labels == c].mean(axis=0)
            t_mean = tgt.points[tgt.samples.labels == c].mean(axis=0)
            np.testing.assert_allclose(t_mean - s_mean, [2.0, 0.5], atol=0.15)
