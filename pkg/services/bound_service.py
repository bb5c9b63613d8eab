# bound_service.py

import itertools
import logging
import math
from dataclasses import replace
from typing import Callable, Dict, Iterator, Sequence, Tuple

from models.bound import BoundInputs, BoundReport
from models.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


def bound(inputs: BoundInputs) -> BoundReport:
    """
    Evaluates the three terms of the generalization bound:

        rademacher = 4 sqrt(2) Lambda (Lambda + Upsilon) / sqrt(N)
        mixing     = 3 (Lambda + Upsilon)^2 sqrt(log(4 / delta')) / sqrt(N)
        truncation = (4 Lambda (Lambda + Upsilon) / xi) sqrt(nu R |O| / (nu - 1)) lambda*^w

    with delta' = delta - 4 (mu - 1) beta_g. A non-positive delta' makes the bound vacuous;
    every term except the truncation is then reported as +inf.
    """
    reach = inputs.Lambda + inputs.Upsilon_Y
    root_n = math.sqrt(inputs.N)
    delta_prime = inputs.delta - 4.0 * (inputs.mu - 1) * inputs.beta_g

    truncation = (4.0 * inputs.Lambda * reach / inputs.xi) \
        * math.sqrt(inputs.nu * inputs.R * inputs.n_obs / (inputs.nu - 1.0)) \
        * inputs.lambda_star ** inputs.w

    if delta_prime <= 0.0:
        logger.warning("Bound is vacuous: delta=%g <= 4 (mu - 1) beta_g=%g.",
                       inputs.delta, inputs.delta - delta_prime)
        return BoundReport(math.inf, math.inf, truncation, math.inf, delta_prime, True)

    rademacher = 4.0 * math.sqrt(2.0) * inputs.Lambda * reach / root_n
    mixing = 3.0 * reach ** 2 * math.sqrt(math.log(4.0 / delta_prime)) / root_n
    return BoundReport(rademacher, mixing, truncation, rademacher + mixing + truncation, delta_prime, False)


def beta_from_geometric(beta0: float, beta1: float, g: float) -> float:
    """
    beta0 * exp(-beta1 * g) for a geometrically beta-mixing input process.
    """
    if beta0 < 0.0 or beta1 <= 0.0 or g < 0.0:
        raise InvalidArgumentError(f"Need beta0 >= 0, beta1 > 0 and g >= 0, got {beta0}, {beta1}, {g}.")
    return beta0 * math.exp(-beta1 * g)


def window_mixing_upper(beta_io_at: Callable[[float], float], k: int, s: int, w: int) -> float:
    """
    Upper bound beta_IO(k s - w) on the k-step mixing coefficient of the windows process.
    """
    lag = k * s - w
    if lag <= 0:
        raise InvalidArgumentError(f"k * s must exceed w (got k={k}, s={s}, w={w}).")
    return beta_io_at(lag)


def bound_grid(base: BoundInputs, axes: Dict[str, Sequence]) -> Iterator[Tuple[BoundInputs, BoundReport]]:
    """
    Evaluates the bound over the Cartesian product of the given parameter axes,
    in row-major order of the axes as given.
    """
    names = list(axes)
    for values in itertools.product(*(axes[name] for name in names)):
        inputs = replace(base, **dict(zip(names, values)))
        yield inputs, bound(inputs)
