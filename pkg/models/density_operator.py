# density_operator.py

from typing import Any, Dict

import numpy as np

from models.errors import InvalidArgumentError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


class DensityOperator:
    """
    Exact quantum state of an n-qubit register, stored as a dense 2^n x 2^n matrix.

    Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of the
    computational basis index.
    """

    def __init__(self, data: np.ndarray, check_psd: bool = True):
        """
        Initializes the density operator.

        :param data: Square complex matrix of dimension 2^n.
        :param check_psd: Whether to run the eigenvalue check. Channels that are
                          structurally CPTP skip it on their outputs.
        """
        matrix = np.array(data, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidArgumentError(f"Density matrix must be square, got shape {matrix.shape}.")
        dim = matrix.shape[0]
        n = dim.bit_length() - 1
        if dim < 2 or 2 ** n != dim:
            raise InvalidArgumentError(f"Density matrix dimension {dim} is not a power of two.")
        matrix.setflags(write=False)
        self._data = matrix
        self._n = n
        self._validate_state(check_psd)

    @property
    def n(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return 2 ** self._n

    @property
    def data(self) -> np.ndarray:
        return self._data

    def _validate_state(self, check_psd: bool):
        """
        Checks Hermiticity, unit trace and (optionally) positivity.
        """
        deviation = np.max(np.abs(self._data - self._data.conj().T))
        if deviation > HERMITIAN_TOL:
            raise InvalidArgumentError(f"Density matrix is not Hermitian (deviation {deviation:.3e}).")

        trace = np.trace(self._data)
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidArgumentError(f"Density matrix trace is {trace.real:.15f}, expected 1.")

        if check_psd:
            min_eig = np.linalg.eigvalsh(self._data).min()
            if min_eig < -PSD_TOL:
                raise InvalidArgumentError(f"Density matrix is not PSD (minimum eigenvalue {min_eig:.3e}).")

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> "DensityOperator":
        """
        Builds |psi><psi| from a (not necessarily normalized) state vector.
        """
        vec = np.asarray(psi, dtype=complex).ravel()
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise InvalidArgumentError("State vector must be nonzero.")
        vec = vec / norm
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def plus_state(cls, n: int) -> "DensityOperator":
        """
        Returns |+><+|^{(x) n}, the reservoir reference state.
        """
        _check_qubits(n)
        return cls(np.full((2 ** n, 2 ** n), 1.0 / 2 ** n, dtype=complex), check_psd=False)

    @classmethod
    def zero_state(cls, n: int) -> "DensityOperator":
        _check_qubits(n)
        data = np.zeros((2 ** n, 2 ** n), dtype=complex)
        data[0, 0] = 1.0
        return cls(data, check_psd=False)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityOperator":
        _check_qubits(n)
        return cls(np.eye(2 ** n, dtype=complex) / 2 ** n, check_psd=False)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        """
        Returns self (x) other, with self on the leading qubits.
        """
        return DensityOperator(np.kron(self._data, other.data), check_psd=False)

    def to_dict(self) -> Dict[str, Any]:
        """
        Converts the state to a JSON-friendly dictionary (real and imaginary parts).
        """
        return {
            "n": self._n,
            "real": self._data.real.tolist(),
            "imag": self._data.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DensityOperator":
        matrix = np.array(data["real"], dtype=float) + 1j * np.array(data["imag"], dtype=float)
        state = cls(matrix)
        if state.n != data["n"]:
            raise InvalidArgumentError(f"Stored qubit count {data['n']} does not match matrix size.")
        return state

    def __repr__(self) -> str:
        return f"DensityOperator(n={self._n})"


def _check_qubits(n: int):
    if n < 1:
        raise InvalidArgumentError(f"Qubit count must be at least 1, got {n}.")
