# reservoir_service.py

import math
from functools import reduce
from typing import List, Optional

import numpy as np

from models.density_operator import DensityOperator
from models.errors import InvalidArgumentError
from models.projector import JlProjector
from models.reservoir import ReservoirConfig, SubReservoirParams, Topology
from services.gates import embed_operator, gate_cswap, gate_h, gate_rx, gate_ry
from services.projection_service import project
from services.qcore_service import apply_unitary, partial_trace


def _check_lambda(lam: float):
    if not 0.0 < lam < 1.0:
        raise InvalidArgumentError(f"Contraction lambda must lie in (0, 1), got {lam}.")


def _parity_signs(n: int) -> np.ndarray:
    """
    Z eigenvalues per qubit for every basis index, shape (2^n, n); qubit 0 is the MSB.
    """
    indices = np.arange(2 ** n)
    bits = (indices[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1 - 2 * bits


def build_entangler(params: SubReservoirParams, topo: Topology) -> np.ndarray:
    """
    W = prod_j R_x(theta_x^j) prod_j R_z(theta_z^j) prod_(i,j) R_zz(theta_zz^ij).

    The R_zz block acts first (edge-list order), then R_z, then R_x. Both diagonal blocks
    are assembled as one phase vector.
    """
    if params.n != topo.n or params.theta_zz.shape[0] != len(topo.edges):
        raise InvalidArgumentError(
            f"Parameters (n={params.n}, {params.theta_zz.shape[0]} couplings) do not match topology "
            f"(n={topo.n}, {len(topo.edges)} edges)."
        )
    n = topo.n
    signs = _parity_signs(n)
    phase = -0.5 * (signs @ params.theta_z)
    for angle, (i, j) in zip(params.theta_zz, topo.edges):
        phase = phase - 0.5 * angle * signs[:, i] * signs[:, j]
    diagonal = np.exp(1j * phase)

    x_block = reduce(np.kron, (gate_rx(angle) for angle in params.theta_x))
    return x_block * diagonal[None, :]


def encoding_angles(z: np.ndarray) -> np.ndarray:
    """
    theta(z_j) = pi tanh(z_j), in (-pi, pi).
    """
    return math.pi * np.tanh(z)


def injection_unitary(params: SubReservoirParams, topo: Topology, z: np.ndarray,
                      entangler: Optional[np.ndarray] = None) -> np.ndarray:
    """
    V(x) = W (x)_j R_y(pi tanh(z_j)).

    :param entangler: Precomputed W for these parameters, to skip rebuilding it per step.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (topo.n,):
        raise InvalidArgumentError(f"Reservoir coordinates have shape {z.shape}, expected ({topo.n},).")
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("Reservoir coordinates must be finite.")
    if entangler is None:
        entangler = build_entangler(params, topo)
    encoding = reduce(np.kron, (gate_ry(angle) for angle in encoding_angles(z)))
    return entangler @ encoding


def _plus_matrix(n: int) -> np.ndarray:
    return np.full((2 ** n, 2 ** n), 1.0 / 2 ** n, dtype=complex)


def reset_channel(rho: DensityOperator, lam: float) -> DensityOperator:
    """
    E_lambda(rho) = lambda rho + (1 - lambda) |+><+|^{(x) n}.
    """
    _check_lambda(lam)
    return DensityOperator(lam * rho.data + (1.0 - lam) * _plus_matrix(rho.n), check_psd=False)


def dilation_prepared_state(rho: DensityOperator, lam: float) -> DensityOperator:
    """
    The 2n+1 qubit register of the SWAP dilation just before the controlled-SWAPs:
    reservoir qubits 0..n-1, ancillas n..2n-1 after H on |0>, coin 2n after R_y(theta_lambda)
    with theta_lambda = 2 arcsin sqrt(1 - lambda).
    """
    _check_lambda(lam)
    n = rho.n
    theta = 2.0 * math.asin(math.sqrt(1.0 - lam))
    ancilla = DensityOperator.zero_state(n)
    coin = DensityOperator.zero_state(1)
    register = rho.tensor(ancilla).tensor(coin)

    local = [gate_h()] * n + [gate_ry(theta)]
    preparation = reduce(np.kron, [np.eye(2 ** n, dtype=complex)] + local)
    return apply_unitary(register, preparation)


def dilation_reset_channel(rho: DensityOperator, lam: float) -> DensityOperator:
    """
    Realizes E_lambda through its coin-controlled SWAP dilation on 2n+1 qubits and traces
    out ancillas and coin. Dense; intended for small n as an equivalence oracle.
    """
    n = rho.n
    total = 2 * n + 1
    coin = 2 * n
    register = dilation_prepared_state(rho, lam)

    swaps = np.eye(2 ** total, dtype=complex)
    cswap = gate_cswap()
    for qubit in range(n):
        swaps = embed_operator(cswap, [coin, qubit, n + qubit], total) @ swaps
    register = apply_unitary(register, swaps)
    return partial_trace(register, list(range(n)))


def _step_matrix(rho: np.ndarray, x: np.ndarray, params: SubReservoirParams, topo: Topology,
                 projector: JlProjector, entangler: np.ndarray, plus: np.ndarray) -> np.ndarray:
    unitary = injection_unitary(params, topo, project(projector, x), entangler=entangler)
    evolved = unitary @ rho @ unitary.conj().T
    return params.lam * evolved + (1.0 - params.lam) * plus


def _check_projector(projector: JlProjector, topo: Topology):
    if projector.n != topo.n:
        raise InvalidArgumentError(f"Projector outputs {projector.n} coordinates, reservoir has {topo.n} qubits.")


def step(rho: DensityOperator, x: np.ndarray, params: SubReservoirParams, topo: Topology,
         projector: JlProjector) -> DensityOperator:
    """
    One reservoir update T(rho, x) = E_lambda(V(x) rho V(x)^dagger).
    """
    _check_projector(projector, topo)
    if rho.n != topo.n:
        raise InvalidArgumentError(f"State has {rho.n} qubits, reservoir has {topo.n}.")
    unitary = injection_unitary(params, topo, project(projector, x))
    return reset_channel(apply_unitary(rho, unitary), params.lam)


def embed_window(window: np.ndarray, params: SubReservoirParams, topo: Topology, projector: JlProjector,
                 initial_state: Optional[DensityOperator] = None,
                 entangler: Optional[np.ndarray] = None) -> DensityOperator:
    """
    Folds the reservoir update over the window, oldest point first, starting from
    |+><+|^{(x) n} (or from initial_state when given).

    :param window: Array of shape (w, d).
    :return: The final state rho_tau.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 2 or window.shape[0] == 0:
        raise InvalidArgumentError(f"Window must be a non-empty (w, d) array, got shape {window.shape}.")
    _check_projector(projector, topo)
    if entangler is None:
        entangler = build_entangler(params, topo)

    plus = _plus_matrix(topo.n)
    if initial_state is not None and initial_state.n != topo.n:
        raise InvalidArgumentError(f"Initial state has {initial_state.n} qubits, reservoir has {topo.n}.")
    rho = plus if initial_state is None else initial_state.data
    for x in window:
        rho = _step_matrix(rho, x, params, topo, projector, entangler, plus)
    return DensityOperator(rho, check_psd=False)


def embed_multiplexed(window: np.ndarray, config: ReservoirConfig, projector: JlProjector,
                      entanglers: Optional[List[np.ndarray]] = None) -> List[DensityOperator]:
    """
    Embeds the same window under every sub-reservoir, in order r = 0..R-1.
    """
    if entanglers is None:
        entanglers = [build_entangler(sub, config.topology) for sub in config.subs]
    return [
        embed_window(window, sub, config.topology, projector, entangler=entangler)
        for sub, entangler in zip(config.subs, entanglers)
    ]
