# measurement_service.py

import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist

from models.density_operator import DensityOperator
from models.errors import InvalidArgumentError
from models.features import FEATURE_TOL, FeatureVector, ShadowPlan, Snapshot
from models.pauli import ObservableSet
from services.gates import gate_h

logger = logging.getLogger(__name__)

DEFAULT_SHADOW_CONSTANT = 34.0
DEFAULT_SHADOW_BASE = 1.5

# Rotations taking the X, Y, Z eigenbases to the computational basis (codes 1, 2, 3).
_S_DAGGER = np.diag([1.0, -1j])
_BASIS_ROTATIONS = {
    1: gate_h(),
    2: gate_h() @ _S_DAGGER,
    3: np.eye(2, dtype=complex),
}
_BASIS_LETTERS = {1: "X", 2: "Y", 3: "Z"}

RngLike = Union[np.random.Generator, Sequence[np.random.Generator]]


def _check_states(states: Sequence[DensityOperator], obs: ObservableSet):
    if len(states) == 0:
        raise InvalidArgumentError("At least one reservoir state is required.")
    for r, state in enumerate(states):
        if state.n != obs.n:
            raise InvalidArgumentError(f"State {r} has {state.n} qubits, observables act on {obs.n}.")


def exact_features(states: Sequence[DensityOperator], obs: ObservableSet) -> FeatureVector:
    """
    Phi(x) = [Tr(O rho_r) : O in obs] for r = 0..R-1, concatenated sub-reservoir major.
    """
    _check_states(states, obs)
    blocks = []
    for state in states:
        # Tr(O rho) = sum_ij O_ij rho_ji for every O at once
        values = np.einsum("oij,ji->o", obs.matrices, state.data)
        if np.max(np.abs(values.imag)) > FEATURE_TOL:
            raise InvalidArgumentError("Expectation values have non-negligible imaginary parts.")
        blocks.append(values.real)
    features = np.concatenate(blocks)
    if np.max(np.abs(features)) > 1.0 + FEATURE_TOL:
        raise InvalidArgumentError("Expectation values exceed 1 in magnitude; state is not normalized.")
    return FeatureVector(features, R=len(states), n_obs=len(obs))


def _basis_distribution(rho: np.ndarray, basis_codes: Tuple[int, ...]) -> np.ndarray:
    """
    Born distribution of rho measured in the product basis, computational index order.
    """
    rotation = reduce(np.kron, (_BASIS_ROTATIONS[code] for code in basis_codes))
    probs = np.einsum("ij,jk,ik->i", rotation, rho, rotation.conj()).real
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def collect_snapshots(rho: DensityOperator, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draws count snapshots with uniformly random single-qubit Pauli bases.

    :return: (bases, outcomes), both (count, n) int8; bases use codes 1=X, 2=Y, 3=Z and
             outcome 0 is the +1 eigenvalue.
    """
    if count < 1:
        raise InvalidArgumentError(f"Snapshot count must be positive, got {count}.")
    n = rho.n
    bases = rng.integers(1, 4, size=(count, n), dtype=np.int8)
    draws = rng.random(count)

    combo_index = (bases.astype(np.int64) - 1) @ (3 ** np.arange(n - 1, -1, -1))
    outcome_index = np.empty(count, dtype=np.int64)
    for combo in np.unique(combo_index):
        rows = np.nonzero(combo_index == combo)[0]
        cdf = np.cumsum(_basis_distribution(rho.data, tuple(int(c) for c in bases[rows[0]])))
        outcome_index[rows] = np.minimum(np.searchsorted(cdf, draws[rows], side="right"), 2 ** n - 1)

    outcomes = ((outcome_index[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1).astype(np.int8)
    return bases, outcomes


def collect_snapshot(rho: DensityOperator, rng: np.random.Generator) -> Snapshot:
    bases, outcomes = collect_snapshots(rho, 1, rng)
    return Snapshot("".join(_BASIS_LETTERS[int(code)] for code in bases[0]), outcomes[0])


def snapshot_estimates(bases: np.ndarray, outcomes: np.ndarray, obs: ObservableSet) -> np.ndarray:
    """
    Single-shot shadow estimates, shape (snapshots, |O|): 3^|supp O| times the product of
    +-1 outcomes on the support when every supported qubit was measured in the observable's
    letter, else 0.
    """
    codes = obs.codes[None, :, :]
    mask = codes != 0
    matches = np.all((bases[:, None, :] == codes) | ~mask, axis=2)
    signs = np.where(mask, 1 - 2 * outcomes[:, None, :].astype(np.int64), 1)
    products = np.prod(signs, axis=2)
    scale = 3.0 ** mask[0].sum(axis=1)
    return np.where(matches, products, 0).astype(float) * scale[None, :]


def median_of_means(bases: np.ndarray, outcomes: np.ndarray, obs: ObservableSet, plan: ShadowPlan) -> np.ndarray:
    """
    Splits the snapshots into plan.groups consecutive batches, averages each, and returns
    the per-observable median of the batch means.
    """
    means = np.empty((plan.groups, len(obs)))
    for group in range(plan.groups):
        rows = slice(group * plan.per_group, (group + 1) * plan.per_group)
        means[group] = snapshot_estimates(bases[rows], outcomes[rows], obs).mean(axis=0)
    return np.median(means, axis=0)


def estimate_features(rho_list: Sequence[DensityOperator], obs: ObservableSet, plan: ShadowPlan,
                      rng: RngLike) -> FeatureVector:
    """
    Classical-shadow estimate of the feature vector.

    :param rng: One generator shared by every state, or one generator per state.
    """
    _check_states(rho_list, obs)
    if plan.k < obs.k:
        raise InvalidArgumentError(f"Shadow plan was sized for k={plan.k}, observables have k={obs.k}.")
    streams = [rng] * len(rho_list) if isinstance(rng, np.random.Generator) else list(rng)
    if len(streams) != len(rho_list):
        raise InvalidArgumentError(f"Got {len(streams)} random streams for {len(rho_list)} states.")

    blocks = []
    for state, stream in zip(rho_list, streams):
        bases, outcomes = collect_snapshots(state, plan.total_snapshots, stream)
        blocks.append(median_of_means(bases, outcomes, obs, plan))
    return FeatureVector(np.concatenate(blocks), R=len(rho_list), n_obs=len(obs))


def snapshot_budget(k: int, eps_cs: float, n_obs: int, constant: float = DEFAULT_SHADOW_CONSTANT,
                    base: float = DEFAULT_SHADOW_BASE) -> int:
    """
    ceil(C_s base^k eps_cs^-2 ln |O|), at least 1.
    """
    if k < 1:
        raise InvalidArgumentError(f"Locality must be at least 1, got {k}.")
    if not 0.0 < eps_cs < 1.0:
        raise InvalidArgumentError(f"eps_cs must lie in (0, 1), got {eps_cs}.")
    if n_obs < 1:
        raise InvalidArgumentError(f"Observable count must be positive, got {n_obs}.")
    if constant <= 0.0 or base <= 0.0:
        raise InvalidArgumentError("Budget constant and base must be positive.")
    return max(1, math.ceil(constant * base ** k * eps_cs ** -2 * math.log(n_obs) - 1e-9))


@dataclass
class InjectivityReport:
    """
    Outcome of the pairwise feature-collision audit.
    """
    min_pairwise_distance: float
    collisions: List[Tuple[int, int]] = field(default_factory=list)
    tol: float = 1e-8

    @property
    def injective(self) -> bool:
        return not self.collisions

    def pretty_print(self):
        print(f"{'min distance':<16} {'collisions':<12} {'tol':<10}")
        print("=" * 40)
        print(f"{self.min_pairwise_distance:<16.6e} {len(self.collisions):<12d} {self.tol:<10.1e}")


def injectivity_audit(features: Union[np.ndarray, Sequence[FeatureVector]], tol: float = 1e-8) -> InjectivityReport:
    """
    Exhaustive pairwise Euclidean distances; a pair collides when its distance is below tol.
    """
    matrix = as_feature_matrix(features)
    if matrix.shape[0] < 2:
        raise InvalidArgumentError(f"Injectivity audit needs at least 2 feature vectors, got {matrix.shape[0]}.")
    # pdist order matches the row-major upper triangle
    pair_distances = pdist(matrix)
    upper = np.triu_indices(matrix.shape[0], k=1)
    collisions = [(int(i), int(j)) for i, j, dist in zip(*upper, pair_distances) if dist < tol]
    if collisions:
        logger.warning("Injectivity audit found %d colliding pairs (tol=%g).", len(collisions), tol)
    return InjectivityReport(float(pair_distances.min()), collisions, tol)


def as_feature_matrix(features: Union[np.ndarray, Sequence[FeatureVector]]) -> np.ndarray:
    """
    Stacks feature vectors into an (N, D) float matrix; arrays pass through.
    """
    if isinstance(features, np.ndarray):
        matrix = np.atleast_2d(features.astype(float))
    else:
        rows = [f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=float) for f in features]
        if len({row.shape for row in rows}) > 1:
            raise InvalidArgumentError("Feature vectors have inconsistent lengths.")
        matrix = np.stack(rows) if rows else np.empty((0, 0))
    return matrix
