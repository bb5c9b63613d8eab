import math
import unittest

import mpmath
import numpy as np

from models.errors import InvalidArgumentError, NumericalRankError
from models.krr_model import KrrModel, MaternParams, TunerConfig
from services.kernel_service import (bessel_k, cross_gram, gram, kernel_eval, krr_fit, krr_predict, matern_profile,
                                     mse, rkhs_norm, tune)


def oracle_profile(nu, xi, s):
    """
    High-precision Matern profile evaluated with mpmath.
    """
    mpmath.mp.dps = 40
    t = mpmath.sqrt(2 * mpmath.mpf(nu)) * mpmath.mpf(s) / mpmath.mpf(xi)
    return float(2 ** (1 - mpmath.mpf(nu)) / mpmath.gamma(nu) * t ** nu * mpmath.besselk(nu, t))


class TestBessel(unittest.TestCase):
    def test_half_order_value(self):
        """
        Test K_{1/2}(1) = sqrt(pi/2) e^-1.
        """
        self.assertAlmostEqual(bessel_k(0.5, 1.0), 0.46106850444789, places=12)

    def test_three_halves_identity(self):
        """
        Test K_{3/2}(2) = sqrt(pi/4) e^-2 (1 + 1/2).
        """
        expected = math.sqrt(math.pi / 4) * math.exp(-2) * 1.5
        self.assertAlmostEqual(bessel_k(1.5, 2.0), expected, places=14)

    def test_closed_matches_oracle(self):
        """
        Test the closed form and the general path against mpmath for half-integer orders.
        """
        mpmath.mp.dps = 40
        for nu in (0.5, 1.5, 2.5, 7.5):
            for x in (1e-3, 0.1, 1.0, 5.0, 40.0):
                expected = float(mpmath.besselk(nu, x))
                self.assertLessEqual(abs(bessel_k(nu, x, method="closed") - expected), 1e-10 * expected)
                self.assertLessEqual(abs(bessel_k(nu, x, method="general") - expected), 1e-10 * expected)

    def test_integer_order(self):
        """
        Test the integer order 5 used by the tuning grid.
        """
        mpmath.mp.dps = 40
        for x in (0.05, 2.0, 30.0):
            expected = float(mpmath.besselk(5, x))
            self.assertLessEqual(abs(bessel_k(5.0, x) - expected), 1e-10 * expected)

    def test_order_symmetry(self):
        self.assertEqual(bessel_k(-1.5, 0.7), bessel_k(1.5, 0.7))

    def test_invalid_arguments(self):
        """
        Test non-positive arguments and a forced closed form without one.
        """
        with self.assertRaises(InvalidArgumentError):
            bessel_k(0.5, 0.0)
        with self.assertRaises(InvalidArgumentError):
            bessel_k(1.0, 1.0, method="closed")


class TestMaternProfile(unittest.TestCase):
    def test_zero_distance(self):
        for nu in (0.5, 1.5, 2.5, 5.0, 1.3):
            self.assertEqual(matern_profile(MaternParams(nu, 0.7), 0.0), 1.0)

    def test_exponential_case(self):
        """
        Test nu=0.5 gives exp(-s/xi) on both paths.
        """
        params = MaternParams(0.5, 1.0)
        self.assertAlmostEqual(matern_profile(params, 1.0), math.exp(-1), places=15)
        self.assertAlmostEqual(matern_profile(params, 1.0, method="general"), math.exp(-1), places=10)

    def test_three_halves_case(self):
        """
        Test nu=1.5 gives (1 + sqrt(3) s/xi) exp(-sqrt(3) s/xi).
        """
        t = math.sqrt(3) * 1.0 / 2.0
        self.assertAlmostEqual(matern_profile(MaternParams(1.5, 2.0), 1.0), (1 + t) * math.exp(-t), places=14)

    def test_closed_matches_general(self):
        """
        Test half-integer closed forms against the general path across s in [1e-6, 1e2] xi.
        """
        distances = np.logspace(-6, 2, 41)
        for nu in (0.5, 1.5, 2.5):
            params = MaternParams(nu, 1.7)
            closed = matern_profile(params, distances * 1.7, method="closed")
            general = matern_profile(params, distances * 1.7, method="general")
            np.testing.assert_allclose(closed, general, rtol=1e-10, atol=1e-10)

    def test_matches_oracle(self):
        """
        Test the general path against an mpmath profile for a non-half-integer order.
        """
        params = MaternParams(1.3, 0.8)
        for s in (1e-4, 0.3, 2.0, 9.0):
            self.assertAlmostEqual(matern_profile(params, s), oracle_profile(1.3, 0.8, s), places=10)

    def test_small_distance_curvature(self):
        """
        Test phi(s) = 1 - nu s^2 / (2 (nu - 1) xi^2) + O(s^4) at nu=2.5, s=1e-3.
        """
        expected = 1 - 2.5 * 1e-6 / (2 * 1.5)
        self.assertAlmostEqual(matern_profile(MaternParams(2.5, 1.0), 1e-3), expected, delta=1e-8)

    def test_strictly_decreasing(self):
        """
        Test the profile decreases and vanishes at large distance.
        """
        for nu in (0.5, 2.5, 5.0):
            values = matern_profile(MaternParams(nu, 1.0), np.linspace(0.0, 20.0, 50))
            self.assertTrue(np.all(np.diff(values) < 0))
            self.assertLess(values[-1], 1e-6)

    def test_negative_distance(self):
        with self.assertRaises(InvalidArgumentError):
            matern_profile(MaternParams(1.5, 1.0), -0.1)

    def test_invalid_params(self):
        for nu, xi in ((0.0, 1.0), (1.5, -1.0), (float("inf"), 1.0)):
            with self.assertRaises(InvalidArgumentError):
                MaternParams(nu, xi)


class TestGram(unittest.TestCase):
    def setUp(self):
        self.params = MaternParams(1.5, 1.0)
        self.features = np.random.default_rng(10).uniform(-1, 1, size=(5, 4))

    def test_kernel_eval(self):
        """
        Test unit self-similarity, symmetry and the exponential value at distance 2.
        """
        a, b = self.features[0], self.features[1]
        self.assertEqual(kernel_eval(self.params, a, a), 1.0)
        self.assertEqual(kernel_eval(self.params, a, b), kernel_eval(self.params, b, a))
        self.assertAlmostEqual(kernel_eval(MaternParams(0.5, 1.0), np.zeros(2), np.array([2.0, 0.0])),
                               math.exp(-2), places=15)

    def test_single_point(self):
        np.testing.assert_array_equal(gram(self.params, self.features[:1]), np.ones((1, 1)))

    def test_positive_semidefinite(self):
        """
        Test symmetry, unit diagonal and min eigenvalue >= -1e-10.
        """
        K = gram(self.params, self.features)
        np.testing.assert_array_equal(K, K.T)
        np.testing.assert_array_equal(np.diag(K), np.ones(5))
        self.assertGreaterEqual(np.linalg.eigvalsh(K).min(), -1e-10)

    def test_duplicate_rows(self):
        """
        Test that a duplicated feature vector gives identical rows and a zero eigenvalue.
        """
        features = np.vstack([self.features, self.features[2]])
        K = gram(self.params, features)
        np.testing.assert_array_equal(K[2], K[5])
        self.assertLess(abs(np.linalg.eigvalsh(K).min()), 1e-10)

    def test_cross_gram_matches_gram(self):
        np.testing.assert_allclose(cross_gram(self.params, self.features, self.features),
                                   gram(self.params, self.features), atol=1e-14)


class TestKrr(unittest.TestCase):
    def setUp(self):
        """
        Set up 10 distinct feature vectors with smooth labels.
        """
        rng = np.random.default_rng(3)
        self.params = MaternParams(1.5, 1.0)
        self.features = rng.uniform(-1, 1, size=(10, 3))
        self.y = np.sin(self.features.sum(axis=1))

    def test_orthonormal_limit(self):
        """
        Test that K = I with lambda_reg = 0 gives alpha = y.
        """
        features = 10.0 * np.eye(4)
        y = np.array([0.5, -1.0, 2.0, 0.0])
        model = krr_fit(MaternParams(0.5, 1e-3), 0.0, features, y)
        np.testing.assert_allclose(model.alpha, y, atol=1e-15)
        self.assertAlmostEqual(rkhs_norm(model), float(np.linalg.norm(y)), places=12)

    def test_large_ridge(self):
        """
        Test that a huge regularizer drives alpha and predictions to 0.
        """
        model = krr_fit(self.params, 1e12, self.features, self.y)
        self.assertLess(np.max(np.abs(model.alpha)), 1e-11)
        self.assertLess(np.max(np.abs(krr_predict(model, self.features))), 1e-10)

    def test_matches_high_precision_solve(self):
        """
        Test alpha for N=3 against an mpmath dense solve of the same system.
        """
        mpmath.mp.dps = 40
        model = krr_fit(self.params, 1e-3, self.features[:3], self.y[:3])
        system = gram(self.params, self.features[:3]) + 3e-3 * np.eye(3)
        oracle = mpmath.lu_solve(mpmath.matrix(system.tolist()), mpmath.matrix(self.y[:3].tolist()))
        np.testing.assert_allclose(model.alpha, [float(oracle[i]) for i in range(3)], atol=1e-10)

    def test_plain_regularizer(self):
        """
        Test that the plain convention adds lambda instead of N lambda to the diagonal.
        """
        plain = krr_fit(self.params, 0.01, self.features, self.y, regularizer="plain")
        scaled = krr_fit(self.params, 0.001, self.features, self.y)
        self.assertAlmostEqual(plain.ridge, scaled.ridge)
        np.testing.assert_allclose(plain.alpha, scaled.alpha, atol=1e-12)

    def test_interpolation(self):
        """
        Test that lambda_reg = 0 reproduces the training labels within 1e-6.
        """
        model = krr_fit(self.params, 0.0, self.features, self.y)
        np.testing.assert_allclose(krr_predict(model, self.features), self.y, atol=1e-6)
        self.assertLessEqual(mse(self.y, krr_predict(model, self.features)), 1e-8 * self.y.var())

    def test_singular_system(self):
        """
        Test that duplicate points at lambda_reg = 0 raise a numerical-rank error.
        """
        features = np.vstack([self.features, self.features[0]])
        with self.assertRaises(NumericalRankError):
            krr_fit(self.params, 0.0, features, np.append(self.y, 1.0))

    def test_label_count_mismatch(self):
        with self.assertRaises(InvalidArgumentError):
            krr_fit(self.params, 1e-3, self.features, self.y[:5])

    def test_zero_alpha_predictions(self):
        """
        Test that alpha = 0 predicts 0 everywhere and has zero norm.
        """
        model = KrrModel(self.params, 0.1, self.features, np.zeros(10), self.y)
        np.testing.assert_array_equal(krr_predict(model, self.features[:4]), np.zeros(4))
        self.assertEqual(rkhs_norm(model), 0.0)

    def test_single_support_point(self):
        """
        Test that predicting at the only support point returns alpha_1.
        """
        model = KrrModel(self.params, 0.1, self.features[:1], np.array([0.42]), np.array([1.0]))
        self.assertAlmostEqual(krr_predict(model, self.features[:1])[0], 0.42, places=15)

    def test_regularization_path_monotone(self):
        """
        Test that training MSE does not decrease as lambda_reg grows.
        """
        errors = [mse(self.y, krr_predict(krr_fit(self.params, lam, self.features, self.y), self.features))
                  for lam in np.logspace(-10, 2, 13)]
        for smaller, larger in zip(errors, errors[1:]):
            self.assertLessEqual(smaller, larger + 1e-15)

    def test_scaled_readout(self):
        """
        Test that scaling an interpolant by f gives training MSE (1 - f)^2 ||y||^2 / N.
        """
        model = krr_fit(self.params, 0.0, self.features, self.y)
        for factor in (0.25, 0.5, 0.9):
            scaled = model.scaled(factor)
            expected = (1 - factor) ** 2 * float(self.y @ self.y) / 10
            self.assertAlmostEqual(mse(self.y, krr_predict(scaled, self.features)), expected, delta=1e-8)
            self.assertAlmostEqual(rkhs_norm(scaled), factor * rkhs_norm(model), places=10)

    def test_rkhs_norm_matches_oracle(self):
        """
        Test sqrt(alpha^T K alpha) on a 3 x 3 case against mpmath.
        """
        mpmath.mp.dps = 40
        model = krr_fit(self.params, 1e-2, self.features[:3], self.y[:3])
        K = mpmath.matrix(gram(self.params, self.features[:3]).tolist())
        alpha = mpmath.matrix(model.alpha.tolist())
        oracle = float(mpmath.sqrt((alpha.T * K * alpha)[0, 0]))
        self.assertAlmostEqual(rkhs_norm(model), oracle, places=12)


class TestTune(unittest.TestCase):
    def setUp(self):
        """
        Set up 60 feature vectors in the plane with labels from a smooth Matern-1.5 function.
        """
        rng = np.random.default_rng(12)
        self.features = rng.uniform(-1, 1, size=(60, 2))
        centres = rng.uniform(-1, 1, size=(6, 2))
        weights = rng.normal(size=6)
        self.y = cross_gram(MaternParams(1.5, 0.8), self.features, centres) @ weights
        self.config = TunerConfig(nu_grid=(0.5, 1.5, 2.5, 5.0), xi_maxiter=40)

    def test_zero_labels_tie_break(self):
        """
        Test that identically zero labels give val_mse 0 and select the smallest nu.
        """
        result = tune(self.config, self.features, np.zeros(60))
        self.assertEqual(result.val_mse, 0.0)
        self.assertEqual(result.params.nu, 0.5)

    def test_selection_is_argmin(self):
        """
        Test that the selected trial is no worse than any evaluated trial.
        """
        result = tune(self.config, self.features, self.y)
        self.assertTrue(all(result.val_mse <= trial.val_mse for trial in result.trials))
        self.assertIn(result.params.nu, self.config.nu_grid)
        self.assertTrue(1e-3 <= result.params.xi <= 1e3)
        self.assertLess(result.val_mse, 0.1 * self.y.var())

    def test_evaluation_budget(self):
        """
        Test that each nu uses at most xi_maxiter evaluations.
        """
        result = tune(self.config, self.features, self.y)
        for nu in self.config.nu_grid:
            self.assertLessEqual(sum(1 for trial in result.trials if trial.nu == nu), 40)

    def test_tight_evaluation_budget(self):
        """
        Test that the bounded search itself stops after xi_maxiter objective calls.
        """
        config = TunerConfig(nu_grid=(1.5, 2.5), xi_maxiter=3)
        result = tune(config, self.features, self.y)
        for nu in config.nu_grid:
            self.assertIn(sum(1 for trial in result.trials if trial.nu == nu), (1, 2, 3))

    def test_deterministic(self):
        first = tune(self.config, self.features, self.y)
        second = tune(self.config, self.features, self.y)
        self.assertEqual(first.params, second.params)

    def test_too_few_samples(self):
        with self.assertRaises(InvalidArgumentError):
            tune(self.config, self.features[:4], self.y[:4])

    def test_invalid_config(self):
        """
        Test that empty grids, reversed bounds and bad ratios are rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            TunerConfig(nu_grid=())
        with self.assertRaises(InvalidArgumentError):
            TunerConfig(xi_bounds=(10.0, 1.0))
        with self.assertRaises(InvalidArgumentError):
            TunerConfig(val_ratio=1.0)


if __name__ == "__main__":
    unittest.main()
