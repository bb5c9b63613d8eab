# features.py

import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from models.errors import InvalidArgumentError

FEATURE_TOL = 1e-10


class Snapshot:
    """
    One classical shadow: a measurement basis and an outcome bit per qubit.
    """

    def __init__(self, bases: str, outcomes: Sequence[int]):
        """
        :param bases: One of X, Y, Z per qubit, e.g. "XZY".
        :param outcomes: One bit per qubit; 0 is the +1 eigenvalue of the basis.
        """
        self.bases = bases.upper()
        self.outcomes: Tuple[int, ...] = tuple(int(bit) for bit in outcomes)
        self._validate_snapshot()

    def _validate_snapshot(self):
        if len(self.bases) != len(self.outcomes) or not self.bases:
            raise InvalidArgumentError("A snapshot needs exactly one basis and one outcome per qubit.")
        if any(symbol not in "XYZ" for symbol in self.bases):
            raise InvalidArgumentError(f"Snapshot bases '{self.bases}' must be drawn from X, Y, Z.")
        if any(bit not in (0, 1) for bit in self.outcomes):
            raise InvalidArgumentError(f"Snapshot outcomes {self.outcomes} must be bits.")

    @property
    def n(self) -> int:
        return len(self.bases)

    def __repr__(self) -> str:
        return f"Snapshot(bases='{self.bases}', outcomes={self.outcomes})"


class FeatureVector:
    """
    Moment map output Phi(x): R blocks of |O| expectation values, sub-reservoir major.
    """

    def __init__(self, values: Sequence[float], R: int, n_obs: int):
        """
        :param values: Length R * n_obs; block r holds the observables of sub-reservoir r.
        :param R: Number of sub-reservoirs.
        :param n_obs: Size of the observable set.
        """
        array = np.array(values, dtype=float)
        if array.shape != (R * n_obs,):
            raise InvalidArgumentError(f"Feature vector has shape {array.shape}, expected ({R * n_obs},).")
        array.setflags(write=False)
        self.values = array
        self.R = R
        self.n_obs = n_obs

    def block(self, r: int) -> np.ndarray:
        return self.values[r * self.n_obs:(r + 1) * self.n_obs]

    def is_bounded(self, tol: float = FEATURE_TOL) -> bool:
        return bool(np.all(np.abs(self.values) <= 1.0 + tol))

    def to_dict(self) -> Dict[str, Any]:
        return {"R": self.R, "n_obs": self.n_obs, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureVector":
        return cls(data["values"], data["R"], data["n_obs"])

    def __len__(self) -> int:
        return self.values.shape[0]


class ShadowPlan:
    """
    Snapshot budget M split into B median-of-means groups of M // B snapshots each.
    """

    def __init__(self, total_snapshots: int, groups: int = 10, eps_cs: Optional[float] = None, k: int = 2):
        """
        :param total_snapshots: Requested M; truncated down to a multiple of groups.
        :param groups: Number of median-of-means batches B.
        :param eps_cs: Accuracy target the budget was planned for, if any.
        :param k: Observable locality the budget was planned for.
        """
        if groups < 1:
            raise InvalidArgumentError(f"Median-of-means needs at least one group, got {groups}.")
        if total_snapshots < groups:
            raise InvalidArgumentError(f"Snapshot budget {total_snapshots} is smaller than the group count {groups}.")
        self.groups = groups
        self.per_group = total_snapshots // groups
        self.total_snapshots = self.per_group * groups
        self.eps_cs = eps_cs
        self.k = k

    @classmethod
    def from_budget(cls, k: int, eps_cs: float, n_obs: int, groups: int = 10,
                    constant: float = 34.0, base: float = 1.5) -> "ShadowPlan":
        """
        Plans M from the snapshot budget formula.
        """
        from services.measurement_service import snapshot_budget
        budget = snapshot_budget(k, eps_cs, n_obs, constant=constant, base=base)
        return cls(max(budget, groups), groups=groups, eps_cs=eps_cs, k=k)

    def to_dict(self) -> Dict[str, Any]:
        return {"total_snapshots": self.total_snapshots, "groups": self.groups,
                "per_group": self.per_group, "eps_cs": self.eps_cs, "k": self.k}

    def __repr__(self) -> str:
        return f"ShadowPlan(M={self.total_snapshots}, B={self.groups})"


def expected_noise_floor(plan: ShadowPlan, weight: int) -> float:
    """
    Per-group standard error bound sqrt(3^weight / per_group) of a weight-limited Pauli estimate.
    """
    return math.sqrt(3 ** weight / plan.per_group)
