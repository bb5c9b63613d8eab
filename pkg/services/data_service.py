# data_service.py

import hashlib
import logging
import math
from typing import Optional, Tuple

import numpy as np

from models.errors import DataError, InvalidArgumentError
from models.varma import FunctionalSpec, VarmaModel, VarmaSpec
from models.window_dataset import WindowDataset
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

_COEFFICIENT_STREAM = 0
_INNOVATION_STREAM = 1


def make_varma(spec: VarmaSpec) -> VarmaModel:
    """
    Draws a stable VARMA(p, q): Phi_i = a_i U_i with unit-norm Gaussian directions U_i and
    uniform weights a_i normalized to sum to gamma, Theta_j = eta rho^(j-1) V_j, Theta_0 = I.
    """
    rng = np.random.default_rng(derive_seed(spec.seed, _COEFFICIENT_STREAM))
    d = spec.d

    raw_phi = rng.standard_normal((spec.p, d, d))
    directions = raw_phi / np.linalg.norm(raw_phi, ord=2, axis=(1, 2))[:, None, None]
    weights = rng.uniform(0.0, 1.0, size=spec.p)
    while weights.sum() == 0.0:
        weights = rng.uniform(0.0, 1.0, size=spec.p)
    amplitudes = spec.gamma * weights / weights.sum()
    phi = amplitudes[:, None, None] * directions

    theta = np.empty((spec.q + 1, d, d))
    theta[0] = np.eye(d)
    if spec.q:
        raw_theta = rng.standard_normal((spec.q, d, d))
        ma_directions = raw_theta / np.linalg.norm(raw_theta, ord=2, axis=(1, 2))[:, None, None]
        ma_amplitudes = spec.eta * spec.rho_ma ** np.arange(spec.q)
        theta[1:] = ma_amplitudes[:, None, None] * ma_directions

    model = VarmaModel(phi, theta)
    logger.debug("VARMA(%d, %d) drawn: sum ||Phi_i|| = %.12f, companion radius = %.6f",
                 spec.p, spec.q, model.spectral_norm_sum(), model.spectral_radius())
    return model


def simulate(model: VarmaModel, spec: VarmaSpec) -> np.ndarray:
    """
    Runs the Z recursion from a zero past for burn_in + length steps and returns tanh of the
    last length states, shape (length, d).
    """
    if model.d != spec.d:
        raise InvalidArgumentError(f"Model dimension {model.d} does not match the VARMA dimension {spec.d}.")
    steps = spec.burn_in + spec.length
    rng = np.random.default_rng(derive_seed(spec.seed, _INNOVATION_STREAM))
    innovations = rng.normal(0.0, spec.sigma, size=(steps, spec.d))

    states = np.zeros((steps, spec.d))
    for t in range(steps):
        value = np.zeros(spec.d)
        for i in range(1, min(model.p, t) + 1):
            value += model.phi[i - 1] @ states[t - i]
        for j in range(0, min(model.q, t) + 1):
            value += model.theta[j] @ innovations[t - j]
        states[t] = value
    return np.tanh(states[spec.burn_in:])


def series_hash(series: np.ndarray) -> str:
    array = np.ascontiguousarray(series, dtype=np.float64)
    return hashlib.sha256(array.tobytes() + str(array.shape).encode()).hexdigest()


def label(series: np.ndarray, t: int, spec: FunctionalSpec, w: int) -> float:
    """
    Window-truncated label at end index t.

    forecast:   u^T X_{t+1}
    exp_fading: sum_k alpha^k u^T X_{t-k}, k < w
    volterra:   exp_fading + 1/2 (sum_k alpha^k v^T X_{t-k})^2, the factored double sum
    """
    T = series.shape[0]
    if w < 1:
        raise InvalidArgumentError(f"Window length must be positive, got {w}.")
    if series.ndim != 2 or series.shape[1] != spec.d:
        raise InvalidArgumentError(f"Series of shape {series.shape} does not match functional dimension {spec.d}.")
    if t - w + 1 < 0:
        raise DataError(f"Index {t} has only {t + 1} history points, window needs {w}.")
    if t + spec.future_points >= T:
        raise DataError(f"Index {t} needs {spec.future_points} future point(s) in a series of length {T}.")

    if spec.kind == "forecast":
        return float(spec.u @ series[t + 1])

    lagged = series[t - w + 1:t + 1][::-1]
    decay = spec.alpha ** np.arange(w)
    value = float(decay @ (lagged @ spec.u))
    if spec.kind == "volterra":
        value += 0.5 * float(decay @ (lagged @ spec.v)) ** 2
    return value


def label_bound(spec: FunctionalSpec, w: int) -> float:
    """
    Analytic sup |y| over inputs in (-1, 1)^d, using |u^T x| < sqrt(d).
    """
    reach = math.sqrt(spec.d)
    if spec.kind == "forecast":
        return reach
    geometric = (1.0 - spec.alpha ** w) / (1.0 - spec.alpha)
    linear = reach * geometric
    if spec.kind == "exp_fading":
        return linear
    return linear + 0.5 * (reach * geometric) ** 2


def _end_indices(T: int, future: int, w: int, s: int, N: int) -> np.ndarray:
    required = N * s + w + future
    if T < required:
        raise DataError(f"Series of length {T} is too short for {N} windows (w={w}, s={s}); "
                        f"need T >= {required}.")
    last = T - 1 - future
    return last - s * np.arange(N - 1, -1, -1, dtype=np.int64)


def make_windows(series: np.ndarray, labels_spec: FunctionalSpec, w: int, s: int, N: int,
                 reserve_future: Optional[int] = None) -> WindowDataset:
    """
    N windows whose end indices are spaced by s, the newest ending at T - 1 (T - 2 when the
    label needs a future point), returned in chronological order.

    :param reserve_future: Points left free after the newest window; defaults to what the label
                           needs. Reserving 1 for every task gives all tasks the same windows.
    """
    series = np.asarray(series, dtype=float)
    if N < 1:
        raise InvalidArgumentError(f"Window count must be positive, got {N}.")
    if w < 1 or s < w:
        raise InvalidArgumentError(f"Need 1 <= w <= s, got w={w}, s={s}.")
    future = labels_spec.future_points if reserve_future is None else int(reserve_future)
    if future < labels_spec.future_points:
        raise InvalidArgumentError(f"The {labels_spec.kind} label needs {labels_spec.future_points} free future point(s).")
    ends = _end_indices(series.shape[0], future, w, s, N)

    windows = np.stack([series[end - w + 1:end + 1] for end in ends])
    labels = np.array([label(series, int(end), labels_spec, w) for end in ends])
    return WindowDataset(windows, labels, w, s, ends, series_hash(series), labels_spec.kind)


def split_windows(series: np.ndarray, labels_spec: FunctionalSpec, w: int, s: int,
                  n_train: int, n_test: int, reserve_future: Optional[int] = None) -> Tuple[WindowDataset, WindowDataset]:
    """
    Cuts n_train + 1 + n_test stride-spaced windows and drops the middle slot, so the test
    windows start a full stride after the last training window.
    """
    if n_train < 1 or n_test < 1:
        raise InvalidArgumentError(f"Split sizes must be positive, got train={n_train}, test={n_test}.")
    full = make_windows(series, labels_spec, w, s, n_train + 1 + n_test, reserve_future)

    def _take(rows: slice) -> WindowDataset:
        return WindowDataset(full.windows[rows], full.labels[rows], w, s, full.end_indices[rows],
                             full.source_hash, full.kind)

    train, test = _take(slice(0, n_train)), _take(slice(n_train + 1, None))
    if train.time_range()[1] >= test.time_range()[0]:
        raise DataError("Training and test windows overlap in time.")
    logger.debug("Split %s windows: train ends at %d, test starts at %d",
                 labels_spec.kind, train.time_range()[1], test.time_range()[0])
    return train, test
