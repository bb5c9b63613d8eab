# qcore_service.py

from typing import Sequence

import numpy as np

from models.density_operator import DensityOperator
from models.errors import InvalidArgumentError
from models.pauli import PauliString
from services.gates import is_unitary

IMAG_TOL = 1e-10


def _check_same_register(a: DensityOperator, b: DensityOperator):
    if a.n != b.n:
        raise InvalidArgumentError(f"Qubit counts differ: {a.n} vs {b.n}.")


def apply_unitary(rho: DensityOperator, unitary: np.ndarray) -> DensityOperator:
    """
    Returns U rho U^dagger.

    :param rho: Input state.
    :param unitary: Unitary acting on the same register.
    """
    if unitary.shape != (rho.dim, rho.dim):
        raise InvalidArgumentError(f"Unitary shape {unitary.shape} does not match state dimension {rho.dim}.")
    if not is_unitary(unitary):
        raise InvalidArgumentError("Operator is not unitary within 1e-10.")
    return DensityOperator(unitary @ rho.data @ unitary.conj().T, check_psd=False)


def raw_expectation(rho: DensityOperator, pauli: PauliString) -> float:
    """
    Real part of Tr(P rho), unclamped.
    """
    if pauli.n != rho.n:
        raise InvalidArgumentError(f"Pauli string acts on {pauli.n} qubits, state has {rho.n}.")
    # Tr(P rho) = sum_ij P_ij rho_ji
    value = np.sum(pauli.to_matrix() * rho.data.T)
    if abs(value.imag) > IMAG_TOL:
        raise InvalidArgumentError(f"Expectation has imaginary part {value.imag:.3e}; state is not Hermitian.")
    return float(value.real)


def expectation(rho: DensityOperator, pauli: PauliString) -> float:
    """
    Tr(P rho), clamped to [-1, 1] for reporting.
    """
    return float(np.clip(raw_expectation(rho, pauli), -1.0, 1.0))


def hs_distance(a: DensityOperator, b: DensityOperator) -> float:
    """
    Hilbert-Schmidt (Schatten-2) distance.
    """
    _check_same_register(a, b)
    return float(np.linalg.norm(a.data - b.data, "fro"))


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """
    Full Schatten-1 norm of a - b (no 1/2 factor; the diameter of the state space is 2).
    """
    _check_same_register(a, b)
    return float(np.sum(np.abs(np.linalg.eigvalsh(a.data - b.data))))


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    """
    Traces out every qubit not listed in keep; the kept qubits retain their relative order.
    """
    keep = sorted(set(keep))
    if not keep or any(not 0 <= q < rho.n for q in keep):
        raise InvalidArgumentError(f"Kept qubits {keep} are not valid indices below {rho.n}.")

    tensor = rho.data.reshape([2] * (2 * rho.n))
    for qubit in sorted(set(range(rho.n)) - set(keep), reverse=True):
        half = tensor.ndim // 2
        tensor = np.trace(tensor, axis1=qubit, axis2=qubit + half)
    dim = 2 ** len(keep)
    return DensityOperator(tensor.reshape(dim, dim), check_psd=False)
