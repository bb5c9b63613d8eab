import math
import unittest

import numpy as np
from scipy.linalg import expm

from models.density_operator import DensityOperator
from models.errors import InvalidArgumentError
from models.pauli import PAULI_MATRICES, ObservableSet, PauliString
from services.gates import embed_operator, gate_cswap, gate_h, gate_rx, gate_ry, gate_rz, gate_rzz, is_unitary
from services.qcore_service import (apply_unitary, expectation, hs_distance, partial_trace, raw_expectation,
                                    trace_distance)


def random_state(n, rng):
    """
    Random full-rank density matrix G G^dagger / Tr.
    """
    g = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityOperator(rho / np.trace(rho).real)


class TestDensityOperator(unittest.TestCase):
    def setUp(self):
        """
        Set up the single-qubit basis states.
        """
        self.zero = DensityOperator.zero_state(1)
        self.one = DensityOperator(np.diag([0.0, 1.0]))

    def test_plus_state_entries(self):
        """
        Test that |+><+|^n has every entry equal to 2^-n.
        """
        plus = DensityOperator.plus_state(3)
        self.assertEqual(plus.n, 3)
        np.testing.assert_allclose(plus.data, np.full((8, 8), 1 / 8))

    def test_non_hermitian_rejected(self):
        """
        Test that a non-Hermitian matrix is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            DensityOperator(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_trace_rejected(self):
        """
        Test that a matrix without unit trace is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            DensityOperator(np.eye(2))

    def test_negative_eigenvalue_rejected(self):
        """
        Test that an indefinite unit-trace matrix is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            DensityOperator(np.array([[1.5, 0.0], [0.0, -0.5]]))

    def test_dimension_not_power_of_two(self):
        """
        Test that a 3x3 matrix is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            DensityOperator(np.eye(3) / 3)

    def test_data_is_read_only(self):
        """
        Test that the stored matrix cannot be mutated.
        """
        with self.assertRaises(ValueError):
            self.zero.data[0, 0] = 0.0

    def test_tensor_order(self):
        """
        Test that the left operand lands on qubit 0.
        """
        product_state = self.one.tensor(self.zero)
        self.assertAlmostEqual(product_state.data[2, 2].real, 1.0)

    def test_dict_round_trip(self):
        """
        Test the dictionary form restores the same matrix.
        """
        rho = random_state(2, np.random.default_rng(3))
        np.testing.assert_array_equal(DensityOperator.from_dict(rho.to_dict()).data, rho.data)


class TestPauli(unittest.TestCase):
    def setUp(self):
        """
        Set up the default 2-local observable set on 5 qubits.
        """
        self.observables = ObservableSet(5, 2)

    def test_observable_count(self):
        """
        Test |O| = 3n + 9n(n-1)/2 for k=2.
        """
        self.assertEqual(len(self.observables), 105)
        self.assertEqual(ObservableSet.expected_size(5, 2), 105)
        self.assertEqual(len(ObservableSet(3, 2)), 36)

    def test_canonical_order(self):
        """
        Test weight-1 strings come first, ordered by qubit then by letter.
        """
        labels = self.observables.labels()
        self.assertEqual(labels[:4], ["XIIII", "YIIII", "ZIIII", "IXIII"])
        self.assertEqual(labels[15], "XXIII")
        self.assertEqual(labels[-1], "IIIZZ")

    def test_no_identity_and_weights(self):
        """
        Test that every observable has weight 1 or 2.
        """
        self.assertTrue(all(1 <= string.weight <= 2 for string in self.observables))

    def test_locality_above_register(self):
        """
        Test that k > n enumerates every non-identity string.
        """
        self.assertEqual(len(ObservableSet(2, 5)), 15)

    def test_invalid_letter(self):
        """
        Test that an unknown Pauli letter is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            PauliString("XQ")

    def test_matrix_order(self):
        """
        Test that the first letter acts on the leading tensor factor.
        """
        expected = np.kron(PAULI_MATRICES["X"], PAULI_MATRICES["Z"])
        np.testing.assert_array_equal(PauliString("XZ").to_matrix(), expected)

    def test_stacked_matrices_and_codes(self):
        """
        Test the stacked matrices and integer codes agree with the strings.
        """
        small = ObservableSet(2, 2)
        self.assertEqual(small.matrices.shape, (15, 4, 4))
        for index, string in enumerate(small):
            np.testing.assert_array_equal(small.matrices[index], string.to_matrix())
            np.testing.assert_array_equal(small.codes[index], string.codes())


class TestGates(unittest.TestCase):
    def test_rotations_match_exponentials(self):
        """
        Test R_P(a) = exp(-i a P / 2) for X, Y, Z and ZZ.
        """
        angle = 0.731
        X, Y, Z = (PAULI_MATRICES[s] for s in "XYZ")
        np.testing.assert_allclose(gate_rx(angle), expm(-0.5j * angle * X), atol=1e-12)
        np.testing.assert_allclose(gate_ry(angle), expm(-0.5j * angle * Y), atol=1e-12)
        np.testing.assert_allclose(gate_rz(angle), expm(-0.5j * angle * Z), atol=1e-12)
        np.testing.assert_allclose(gate_rzz(angle), expm(-0.5j * angle * np.kron(Z, Z)), atol=1e-12)

    def test_non_finite_angle(self):
        """
        Test that NaN angles are rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            gate_rx(float("nan"))

    def test_cswap_action(self):
        """
        Test that CSWAP maps |101> to |110> and leaves |001> alone.
        """
        cswap = gate_cswap()
        self.assertEqual(cswap[6, 5], 1)
        self.assertEqual(cswap[1, 1], 1)
        self.assertTrue(is_unitary(cswap))

    def test_embed_single_qubit(self):
        """
        Test that X on qubit 1 of 3 is I (x) X (x) I.
        """
        X = PAULI_MATRICES["X"]
        expected = np.kron(np.kron(np.eye(2), X), np.eye(2))
        np.testing.assert_allclose(embed_operator(X, [1], 3), expected)

    def test_embed_reversed_pair(self):
        """
        Test that listing the qubits in reverse order swaps the tensor factors.
        """
        op = np.kron(PAULI_MATRICES["X"], PAULI_MATRICES["Z"])
        np.testing.assert_allclose(embed_operator(op, [1, 0], 2),
                                   np.kron(PAULI_MATRICES["Z"], PAULI_MATRICES["X"]))

    def test_embed_rejects_duplicates(self):
        """
        Test that repeated target qubits are rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            embed_operator(np.eye(4), [0, 0], 2)

    def test_hadamard_unitary(self):
        self.assertTrue(is_unitary(gate_h()))


class TestQcoreService(unittest.TestCase):
    def setUp(self):
        """
        Set up random states and basis states.
        """
        self.rng = np.random.default_rng(11)
        self.zero = DensityOperator.zero_state(1)
        self.one = DensityOperator(np.diag([0.0, 1.0]))

    def test_expectations_of_basis_states(self):
        """
        Test <Z> on |0>, <X> on |+> and <Y> on |+>.
        """
        self.assertAlmostEqual(expectation(self.zero, PauliString("Z")), 1.0)
        plus = DensityOperator.plus_state(1)
        self.assertAlmostEqual(expectation(plus, PauliString("X")), 1.0)
        self.assertAlmostEqual(expectation(plus, PauliString("Y")), 0.0)

    def test_expectation_matches_trace(self):
        """
        Test raw_expectation against an explicit trace on a random 3-qubit state.
        """
        rho = random_state(3, self.rng)
        pauli = PauliString("XYZ")
        expected = np.trace(pauli.to_matrix() @ rho.data).real
        self.assertAlmostEqual(raw_expectation(rho, pauli), expected, places=12)
        self.assertLessEqual(abs(expectation(rho, pauli)), 1.0)

    def test_register_mismatch(self):
        """
        Test that a 2-qubit Pauli on a 1-qubit state is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            expectation(self.zero, PauliString("ZZ"))

    def test_apply_unitary(self):
        """
        Test that X flips |0> to |1>.
        """
        flipped = apply_unitary(self.zero, PAULI_MATRICES["X"])
        np.testing.assert_allclose(flipped.data, self.one.data, atol=1e-15)

    def test_apply_non_unitary(self):
        """
        Test that a non-unitary operator is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            apply_unitary(self.zero, np.array([[1, 1], [0, 1]], dtype=complex))

    def test_distances_of_orthogonal_states(self):
        """
        Test HS distance sqrt(2) and trace norm 2 for |0><0| vs |1><1|.
        """
        self.assertAlmostEqual(hs_distance(self.zero, self.one), math.sqrt(2.0))
        self.assertAlmostEqual(trace_distance(self.zero, self.one), 2.0)

    def test_distance_unitary_invariance(self):
        """
        Test that both distances are unchanged by a common unitary.
        """
        a, b = random_state(2, self.rng), random_state(2, self.rng)
        unitary = np.kron(gate_rx(0.3), gate_ry(1.1))
        self.assertAlmostEqual(hs_distance(apply_unitary(a, unitary), apply_unitary(b, unitary)),
                               hs_distance(a, b), places=12)
        self.assertAlmostEqual(trace_distance(apply_unitary(a, unitary), apply_unitary(b, unitary)),
                               trace_distance(a, b), places=12)

    def test_partial_trace_of_product(self):
        """
        Test that tracing out one factor of a product state returns the other factor.
        """
        a, b, c = random_state(1, self.rng), random_state(1, self.rng), random_state(1, self.rng)
        joint = a.tensor(b).tensor(c)
        np.testing.assert_allclose(partial_trace(joint, [0]).data, a.data, atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, [1]).data, b.data, atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, [0, 2]).data, a.tensor(c).data, atol=1e-12)

    def test_partial_trace_of_bell_state(self):
        """
        Test that either half of a Bell pair is maximally mixed.
        """
        bell = DensityOperator.from_statevector(np.array([1, 0, 0, 1]))
        np.testing.assert_allclose(partial_trace(bell, [1]).data, np.eye(2) / 2, atol=1e-15)

    def test_partial_trace_invalid(self):
        """
        Test that an out-of-range kept qubit is rejected.
        """
        with self.assertRaises(InvalidArgumentError):
            partial_trace(self.zero, [1])


if __name__ == "__main__":
    unittest.main()
