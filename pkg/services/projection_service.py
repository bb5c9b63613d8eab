# projection_service.py

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from models.errors import InvalidArgumentError
from models.projector import JlProjector

DEFAULT_JL_CONSTANT = 4.0
# Guards ceil() against round-off pushing an exact integer just above itself.
_CEIL_SLACK = 1e-9


def make_projector(n: int, d: int, seed: int) -> JlProjector:
    return JlProjector(n=n, d=d, seed=seed)


def project(projector: JlProjector, x: np.ndarray) -> np.ndarray:
    """
    Returns z = Pi x.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (projector.d,):
        raise InvalidArgumentError(f"Input has shape {x.shape}, expected ({projector.d},).")
    return projector.matrix @ x


def required_qubits(eps_pr: float, delta_pr: float, w: int, N: int,
                    constant: float = DEFAULT_JL_CONSTANT) -> int:
    """
    Qubit count ceil(C eps^-2 ln(w N / delta)) needed for the JL guarantee over w*N points.

    :param eps_pr: Distortion tolerance in (0, 1].
    :param delta_pr: Failure probability in (0, 1).
    :param w: Window length.
    :param N: Number of windows.
    :param constant: The constant hidden in the Omega(.) statement.
    """
    if not 0.0 < eps_pr <= 1.0:
        raise InvalidArgumentError(f"eps_pr must lie in (0, 1], got {eps_pr}.")
    if not 0.0 < delta_pr < 1.0:
        raise InvalidArgumentError(f"delta_pr must lie in (0, 1), got {delta_pr}.")
    if w < 1 or N < 1:
        raise InvalidArgumentError(f"w and N must be positive, got w={w}, N={N}.")
    if constant <= 0.0:
        raise InvalidArgumentError(f"JL constant must be positive, got {constant}.")
    value = constant * eps_pr ** -2 * math.log(w * N / delta_pr)
    return max(1, math.ceil(value - _CEIL_SLACK))


@dataclass(frozen=True)
class DistortionReport:
    """
    Extremes of ||Pi u - Pi v||^2 / ||u - v||^2 over all distinct pairs.
    """
    max_over: float
    max_under: float
    passed: bool
    pairs_checked: int


def check_distortion(projector: JlProjector, points: np.ndarray, eps: float) -> DistortionReport:
    """
    Exhaustive pairwise check of (1 - eps)||u-v||^2 <= ||Pi u - Pi v||^2 <= (1 + eps)||u-v||^2.
    Identical pairs are skipped; if every pair is identical the check passes with ratios 1.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        raise InvalidArgumentError(f"Distortion check needs at least 2 points, got {points.shape[0]}.")
    if points.shape[1] != projector.d:
        raise InvalidArgumentError(f"Points have dimension {points.shape[1]}, expected {projector.d}.")

    projected = points @ projector.matrix.T
    max_over, max_under = 1.0, 1.0
    ratios = []
    for i, j in combinations(range(points.shape[0]), 2):
        original = float(np.sum((points[i] - points[j]) ** 2))
        if original == 0.0:
            continue
        ratios.append(float(np.sum((projected[i] - projected[j]) ** 2)) / original)

    if ratios:
        max_over, max_under = max(ratios), min(ratios)
    passed = max_over <= 1.0 + eps and max_under >= 1.0 - eps
    return DistortionReport(max_over=max_over, max_under=max_under, passed=passed, pairs_checked=len(ratios))
