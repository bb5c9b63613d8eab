# gates.py

import math
from typing import Sequence

import numpy as np

from models.errors import InvalidArgumentError

# Rotations follow exp(-i a P / 2).


def _check_angle(angle: float) -> float:
    if not math.isfinite(angle):
        raise InvalidArgumentError(f"Rotation angle must be finite, got {angle}.")
    return float(angle)


def gate_ry(angle: float) -> np.ndarray:
    a = _check_angle(angle) / 2.0
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]], dtype=complex)


def gate_rx(angle: float) -> np.ndarray:
    a = _check_angle(angle) / 2.0
    return np.array([[math.cos(a), -1j * math.sin(a)], [-1j * math.sin(a), math.cos(a)]], dtype=complex)


def gate_rz(angle: float) -> np.ndarray:
    a = _check_angle(angle) / 2.0
    return np.diag([np.exp(-1j * a), np.exp(1j * a)])


def gate_rzz(angle: float) -> np.ndarray:
    """
    exp(-i a Z(x)Z / 2): phase e^{-ia/2} on even parity, e^{ia/2} on odd parity.
    """
    a = _check_angle(angle) / 2.0
    return np.diag([np.exp(-1j * a), np.exp(1j * a), np.exp(1j * a), np.exp(-1j * a)])


def gate_h() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)


def gate_cswap() -> np.ndarray:
    """
    Controlled-SWAP on (control, a, b): swaps a and b when control is |1>.
    """
    matrix = np.eye(8, dtype=complex)
    matrix[[5, 6]] = matrix[[6, 5]]
    return matrix


def embed_operator(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """
    Lifts a k-qubit operator acting on the listed qubits to the full n-qubit register.

    :param op: 2^k x 2^k matrix; its first tensor factor acts on qubits[0].
    :param qubits: Distinct target qubits.
    :param n: Register size.
    :return: 2^n x 2^n matrix.
    """
    qubits = list(qubits)
    k = len(qubits)
    if op.shape != (2 ** k, 2 ** k):
        raise InvalidArgumentError(f"Operator shape {op.shape} does not act on {k} qubits.")
    if len(set(qubits)) != k or any(not 0 <= q < n for q in qubits):
        raise InvalidArgumentError(f"Target qubits {qubits} are not distinct indices below {n}.")

    op_tensor = op.reshape([2] * (2 * k))
    identity = np.eye(2 ** n, dtype=complex).reshape([2] * (2 * n))
    lifted = np.tensordot(op_tensor, identity, axes=(list(range(k, 2 * k)), qubits))
    lifted = np.moveaxis(lifted, list(range(k)), qubits)
    return lifted.reshape(2 ** n, 2 ** n)


def is_unitary(matrix: np.ndarray, tol: float = 1e-10) -> bool:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))) <= tol
