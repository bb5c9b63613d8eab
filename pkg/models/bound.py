# bound.py

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict

from models.errors import InvalidArgumentError


@dataclass(frozen=True)
class BoundInputs:
    """
    Quantities entering the generalization bound for N weakly dependent windows.
    """
    N: int
    w: int
    g: int
    Lambda: float
    Upsilon_Y: float
    nu: float
    xi: float
    R: int
    n_obs: int
    lambda_star: float
    delta: float = 0.05
    beta_g: float = 0.0

    def __post_init__(self):
        self._validate_inputs()

    def _validate_inputs(self):
        if self.N < 2 or self.N % 2:
            raise InvalidArgumentError(f"N must be a positive even number (mu = N / 2), got {self.N}.")
        if not self.nu > 1.0:
            raise InvalidArgumentError(f"nu > 1 is required by the bound, got nu={self.nu}.")
        if self.w < 1 or self.g < 0:
            raise InvalidArgumentError(f"Need w >= 1 and g >= 0, got w={self.w}, g={self.g}.")
        if self.Lambda < 0.0 or self.Upsilon_Y < 0.0:
            raise InvalidArgumentError("Norm budget Lambda and label bound Upsilon_Y must be non-negative.")
        if not (math.isfinite(self.xi) and self.xi > 0.0):
            raise InvalidArgumentError(f"Length-scale xi must be positive, got {self.xi}.")
        if self.R < 1 or self.n_obs < 1:
            raise InvalidArgumentError(f"Need R >= 1 and |O| >= 1, got R={self.R}, |O|={self.n_obs}.")
        if not 0.0 <= self.lambda_star < 1.0:
            raise InvalidArgumentError(f"lambda_star must lie in [0, 1), got {self.lambda_star}.")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgumentError(f"Confidence delta must lie in (0, 1), got {self.delta}.")
        if self.beta_g < 0.0:
            raise InvalidArgumentError(f"beta_g must be non-negative, got {self.beta_g}.")

    @property
    def mu(self) -> int:
        return self.N // 2

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    rademacher_term: float
    mixing_penalty: float
    truncation_term: float
    total: float
    delta_prime: float
    vacuous: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def pretty_print(self):
        print(f"{'rademacher':<14} {'mixing':<14} {'truncation':<14} {'total':<14} {'delta_prime':<14} {'vacuous':<8}")
        print("=" * 82)
        print(f"{self.rademacher_term:<14.6g} {self.mixing_penalty:<14.6g} {self.truncation_term:<14.6g} "
              f"{self.total:<14.6g} {self.delta_prime:<14.6g} {str(self.vacuous):<8}")
