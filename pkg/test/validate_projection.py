import math
import unittest

import numpy as np

from models.errors import InvalidArgumentError
from models.projector import JlProjector
from services.projection_service import check_distortion, make_projector, project, required_qubits


class TestProjector(unittest.TestCase):
    def setUp(self):
        """
        Set up the default-size projector used by the reservoir (n=5, d=3).
        """
        self.projector = make_projector(5, 3, seed=7)

    def test_deterministic(self):
        """
        Test that the same seed reproduces the matrix bit-exactly.
        """
        again = make_projector(5, 3, seed=7)
        np.testing.assert_array_equal(self.projector.matrix, again.matrix)

    def test_dict_round_trip(self):
        """
        Test that a projector persisted by seed reproduces identical outputs.
        """
        restored = JlProjector.from_dict(self.projector.to_dict())
        x = np.array([0.3, -0.2, 0.9])
        np.testing.assert_array_equal(project(restored, x), project(self.projector, x))

    def test_entry_variance(self):
        """
        Test that the sample variance of the entries is within 20% of 1/n.
        """
        projector = make_projector(50, 40, seed=1)
        self.assertLess(abs(projector.matrix.var() * 50 - 1.0), 0.2)

    def test_entry_mean(self):
        """
        Test that the mean over 10^5 entries is within three standard errors of zero.
        """
        projector = make_projector(10, 10000, seed=2)
        sigma = 1 / math.sqrt(10)
        self.assertLessEqual(abs(projector.matrix.mean()), 3 * sigma / math.sqrt(1e5))

    def test_invalid_dimensions(self):
        """
        Test that zero dimensions are rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            make_projector(0, 3, seed=1)
        with self.assertRaises(InvalidArgumentError):
            make_projector(5, 0, seed=1)

    def test_matrix_is_read_only(self):
        with self.assertRaises(ValueError):
            self.projector.matrix[0, 0] = 1.0


class TestProject(unittest.TestCase):
    def setUp(self):
        self.projector = make_projector(5, 3, seed=7)

    def test_zero_maps_to_zero(self):
        """
        Test that project(0) = 0.
        """
        np.testing.assert_array_equal(project(self.projector, np.zeros(3)), np.zeros(5))

    def test_identity_injection(self):
        """
        Test that an injected identity matrix returns the input.
        """
        identity = JlProjector.from_matrix(np.eye(3))
        x = np.array([0.1, -0.5, 0.7])
        np.testing.assert_array_equal(project(identity, x), x)

    def test_basis_vector_picks_column(self):
        """
        Test that e_1 selects the first column of the matrix.
        """
        np.testing.assert_array_equal(project(self.projector, np.array([1.0, 0.0, 0.0])), self.projector.matrix[:, 0])

    def test_linearity(self):
        """
        Test additivity and homogeneity within 1e-12.
        """
        rng = np.random.default_rng(5)
        x, y = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        np.testing.assert_allclose(project(self.projector, x + y),
                                   project(self.projector, x) + project(self.projector, y), atol=1e-12)
        np.testing.assert_allclose(project(self.projector, 2.5 * x), 2.5 * project(self.projector, x), atol=1e-12)

    def test_length_mismatch(self):
        """
        Test that a wrong input length is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            project(self.projector, np.zeros(4))


class TestRequiredQubits(unittest.TestCase):
    def test_reference_value(self):
        """
        Test ceil(16 ln(4e6)) = 244 for eps=0.5, delta=0.05, w=25, N=8000.
        """
        self.assertEqual(required_qubits(0.5, 0.05, 25, 8000), 244)

    def test_unit_log_term(self):
        """
        Test that wN / delta = e with eps=1 gives C = 4.
        """
        self.assertEqual(required_qubits(1.0, 1 / math.e, 1, 1), 4)

    def test_doubling_wn(self):
        """
        Test that doubling wN adds at most ceil(C eps^-2 ln 2).
        """
        base = required_qubits(0.3, 0.1, 25, 100)
        doubled = required_qubits(0.3, 0.1, 25, 200)
        self.assertGreaterEqual(doubled, base)
        self.assertLessEqual(doubled - base, math.ceil(4 / 0.09 * math.log(2)))

    def test_monotone_in_eps_and_delta(self):
        """
        Test the count does not grow with eps or delta.
        """
        self.assertGreaterEqual(required_qubits(0.2, 0.05, 25, 100), required_qubits(0.4, 0.05, 25, 100))
        self.assertGreaterEqual(required_qubits(0.2, 0.01, 25, 100), required_qubits(0.2, 0.1, 25, 100))

    def test_invalid_ranges(self):
        """
        Test that out-of-range parameters are rejected.
        """
        for args in ((0.0, 0.05, 25, 10), (1.5, 0.05, 25, 10), (0.5, 1.0, 25, 10), (0.5, 0.05, 0, 10)):
            with self.assertRaises(InvalidArgumentError):
                required_qubits(*args)


class TestCheckDistortion(unittest.TestCase):
    def test_identical_points_pass(self):
        """
        Test that identical points pass vacuously with ratios 1.
        """
        report = check_distortion(make_projector(2, 3, seed=1), np.ones((4, 3)), eps=0.1)
        self.assertTrue(report.passed)
        self.assertEqual((report.max_over, report.max_under, report.pairs_checked), (1.0, 1.0, 0))

    def test_adversarial_pair_fails(self):
        """
        Test that a pair orthogonal to the single row of a 1 x 2 projector collapses to distance 0.
        """
        projector = make_projector(1, 2, seed=3)
        a, b = projector.matrix[0]
        points = np.array([[0.0, 0.0], [-b, a]])
        report = check_distortion(projector, points, eps=0.5)
        self.assertFalse(report.passed)
        self.assertLess(report.max_under, 1e-12)

    def test_sized_projector_passes(self):
        """
        Test that n from the sizing rule keeps 100 random points within eps=0.5.
        """
        n = required_qubits(0.5, 0.05, 25, 8000)
        points = np.random.default_rng(9).uniform(-1, 1, size=(100, 3))
        report = check_distortion(make_projector(n, 3, seed=4), points, eps=0.5)
        self.assertTrue(report.passed)
        self.assertEqual(report.pairs_checked, 4950)

    def test_order_invariance(self):
        """
        Test that reversing the point order leaves the extremes unchanged.
        """
        projector = make_projector(3, 3, seed=8)
        points = np.random.default_rng(2).uniform(-1, 1, size=(10, 3))
        forward = check_distortion(projector, points, eps=0.5)
        backward = check_distortion(projector, points[::-1], eps=0.5)
        self.assertAlmostEqual(forward.max_over, backward.max_over, places=12)
        self.assertAlmostEqual(forward.max_under, backward.max_under, places=12)

    def test_too_few_points(self):
        """
        Test that a single point is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            check_distortion(make_projector(2, 3, seed=1), np.zeros((1, 3)), eps=0.1)


if __name__ == "__main__":
    unittest.main()
