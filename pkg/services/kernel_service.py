# kernel_service.py

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.special import gammaln, kv, kve

from models.errors import InvalidArgumentError, NumericalRankError
from models.features import FeatureVector
from models.krr_model import REGULARIZER_CONVENTIONS, KrrModel, MaternParams, TunerConfig
from services.measurement_service import as_feature_matrix

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
# Largest half-integer order served by the closed-form sums.
_MAX_CLOSED_ORDER = 40

Features = Union[np.ndarray, Sequence[FeatureVector]]


def _half_integer_order(nu: float):
    """
    Returns p when nu = p + 1/2 for an integer 0 <= p <= _MAX_CLOSED_ORDER, else None.
    """
    p = nu - 0.5
    if p >= 0 and abs(p - round(p)) < 1e-12 and round(p) <= _MAX_CLOSED_ORDER:
        return int(round(p))
    return None


def bessel_k(nu: float, x, method: str = "auto"):
    """
    Modified Bessel function of the second kind K_nu(x), x > 0.

    :param method: "auto" uses the closed form for half-integer orders and the general path
                   otherwise; "closed" forces the closed form; "general" forces scipy's kv.
    """
    nu = abs(float(nu))
    values = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise InvalidArgumentError("bessel_k requires finite x > 0.")

    order = _half_integer_order(nu)
    if method == "closed" and order is None:
        raise InvalidArgumentError(f"No closed form for order nu={nu}.")
    if method not in ("auto", "closed", "general"):
        raise InvalidArgumentError(f"Unknown Bessel method '{method}'.")

    if order is not None and method != "general":
        # K_{p+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_j (p+j)! / (j! (p-j)!) (2x)^{-j}
        series = sum(
            math.factorial(order + j) / (math.factorial(j) * math.factorial(order - j)) * (2.0 * values) ** -j
            for j in range(order + 1)
        )
        result = np.sqrt(math.pi / (2.0 * values)) * np.exp(-values) * series
    else:
        result = kv(nu, values)
    return float(result) if np.ndim(x) == 0 else result


def matern_profile(params: MaternParams, s, method: str = "auto"):
    """
    phi(s) = 2^{1-nu} / Gamma(nu) (sqrt(2 nu) s / xi)^nu K_nu(sqrt(2 nu) s / xi), with phi(0) = 1.

    :param s: Non-negative distance (scalar or array).
    :param method: As for bessel_k.
    """
    distances = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(np.isnan(distances)) or np.any(distances < 0.0):
        raise InvalidArgumentError("Matern profile requires non-negative distances.")
    nu = params.nu
    t = math.sqrt(2.0 * nu) * distances / params.xi
    result = np.ones_like(t)
    positive = t > 0.0
    tp = t[positive]

    order = _half_integer_order(nu)
    if method not in ("auto", "closed", "general"):
        raise InvalidArgumentError(f"Unknown Bessel method '{method}'.")
    if method == "closed" and order is None:
        raise InvalidArgumentError(f"No closed-form Matern profile for nu={nu}.")

    if order is not None and method != "general":
        # exp(-t) p!/(2p)! sum_i (p+i)! / (i! (p-i)!) (2t)^{p-i}
        scale = math.factorial(order) / math.factorial(2 * order)
        poly = sum(
            math.factorial(order + i) / (math.factorial(i) * math.factorial(order - i)) * (2.0 * tp) ** (order - i)
            for i in range(order + 1)
        )
        result[positive] = scale * poly * np.exp(-tp)
    else:
        # log-space with the exponentially scaled kve to survive large t
        log_phi = (1.0 - nu) * math.log(2.0) - gammaln(nu) + nu * np.log(tp) + np.log(kve(nu, tp)) - tp
        result[positive] = np.exp(log_phi)

    result = np.minimum(result, 1.0)
    return float(result[0]) if np.ndim(s) == 0 else result.reshape(np.shape(s))


def kernel_eval(params: MaternParams, a: Union[FeatureVector, np.ndarray], b: Union[FeatureVector, np.ndarray]) -> float:
    """
    kappa(a, b) = phi(||a - b||).
    """
    va = a.values if isinstance(a, FeatureVector) else np.asarray(a, dtype=float)
    vb = b.values if isinstance(b, FeatureVector) else np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise InvalidArgumentError(f"Feature lengths differ: {va.shape} vs {vb.shape}.")
    return matern_profile(params, float(np.linalg.norm(va - vb)))


def _gram_from_distances(params: MaternParams, distances: np.ndarray) -> np.ndarray:
    K = matern_profile(params, distances)
    np.fill_diagonal(K, 1.0)
    return K


def gram(params: MaternParams, features: Features) -> np.ndarray:
    """
    Symmetric N x N Gram matrix with unit diagonal.
    """
    matrix = as_feature_matrix(features)
    if matrix.shape[0] < 1:
        raise InvalidArgumentError("Gram matrix needs at least one feature vector.")
    if matrix.shape[0] == 1:
        return np.ones((1, 1))
    return _gram_from_distances(params, squareform(pdist(matrix)))


def cross_gram(params: MaternParams, rows: Features, columns: Features) -> np.ndarray:
    """
    Rectangular kernel matrix K[i, j] = kappa(rows_i, columns_j).
    """
    left, right = as_feature_matrix(rows), as_feature_matrix(columns)
    if left.shape[1] != right.shape[1]:
        raise InvalidArgumentError(f"Feature lengths differ: {left.shape[1]} vs {right.shape[1]}.")
    return matern_profile(params, cdist(left, right))


def _ridge(lambda_reg: float, n_samples: int, regularizer: str) -> float:
    if regularizer not in REGULARIZER_CONVENTIONS:
        raise InvalidArgumentError(f"Unknown regularizer convention '{regularizer}'.")
    return lambda_reg * n_samples if regularizer == "n_scaled" else lambda_reg


def _solve_dual(K: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    """
    Solves (K + ridge I) alpha = y by Cholesky, falling back to a pivoted symmetric solve.
    """
    system = K + ridge * np.eye(K.shape[0])
    if ridge == 0.0 and np.linalg.matrix_rank(K) < K.shape[0]:
        raise NumericalRankError(
            f"Gram matrix is numerically singular (rank {np.linalg.matrix_rank(K)} < {K.shape[0]}); "
            "raise lambda_reg above 0."
        )
    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
        return scipy.linalg.cho_solve(factor, y)
    except np.linalg.LinAlgError:
        logger.warning("Cholesky factorization failed; using a pivoted symmetric solve.")
        try:
            return scipy.linalg.solve(system, y, assume_a="sym")
        except np.linalg.LinAlgError as exc:
            raise NumericalRankError(f"KRR system is singular: {exc}; raise lambda_reg.") from exc


def krr_fit(params: MaternParams, lambda_reg: float, features: Features, y: Sequence[float],
            regularizer: str = "n_scaled") -> KrrModel:
    """
    Fits alpha = (K + N lambda I)^{-1} y (or (K + lambda I)^{-1} y with the plain convention).
    """
    support = as_feature_matrix(features)
    labels = np.asarray(y, dtype=float)
    if support.shape[0] < 1 or labels.shape != (support.shape[0],):
        raise InvalidArgumentError(f"Need one label per feature vector, got {labels.shape} for {support.shape[0]}.")
    if lambda_reg < 0.0:
        raise InvalidArgumentError(f"lambda_reg must be non-negative, got {lambda_reg}.")

    K = gram(params, support)
    ridge = _ridge(lambda_reg, support.shape[0], regularizer)
    alpha = _solve_dual(K, labels, ridge)
    residual = float(np.linalg.norm(K @ alpha + ridge * alpha - labels))
    if residual > RESIDUAL_TOL * max(np.linalg.norm(labels), 1e-300):
        logger.warning("KRR residual %.3e exceeds %.0e * ||y||; the system is ill-conditioned.", residual, RESIDUAL_TOL)
    return KrrModel(params, lambda_reg, support, alpha, labels, gram=K, regularizer=regularizer, residual=residual)


def krr_predict(model: KrrModel, features_new: Features) -> np.ndarray:
    """
    y_hat_j = sum_i alpha_i kappa(support_i, new_j).
    """
    new = as_feature_matrix(features_new)
    if new.shape[1] != model.feature_dim:
        raise InvalidArgumentError(f"New features have length {new.shape[1]}, model expects {model.feature_dim}.")
    return cross_gram(model.matern, new, model.support) @ model.alpha


def rkhs_norm(model: KrrModel) -> float:
    """
    sqrt(alpha^T K alpha).
    """
    K = model.gram if model.gram is not None else gram(model.matern, model.support)
    return math.sqrt(max(float(model.alpha @ K @ model.alpha), 0.0))


def mse(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    return float(np.mean((np.asarray(y_true, dtype=float) - np.asarray(y_pred, dtype=float)) ** 2))


@dataclass(frozen=True)
class TuneTrial:
    nu: float
    xi: float
    val_mse: float


@dataclass
class TuneResult:
    """
    Selected hyper-parameters, their validation MSE and every evaluated trial.
    """
    params: MaternParams
    val_mse: float
    trials: List[TuneTrial] = field(default_factory=list)

    def __iter__(self):
        return iter((self.params, self.val_mse))


def tune(cfg: TunerConfig, features: Features, y: Sequence[float]) -> TuneResult:
    """
    Single seeded train/validation split; for each nu in the grid, a bounded scalar search
    over log10(xi) minimizes validation MSE. Ties go to smaller nu, then smaller xi.
    """
    matrix = as_feature_matrix(features)
    labels = np.asarray(y, dtype=float)
    N = matrix.shape[0]
    if N < 5 or labels.shape != (N,):
        raise InvalidArgumentError(f"Tuning needs at least 5 labelled samples, got {N}.")

    order = np.random.default_rng(cfg.split_seed).permutation(N)
    n_val = min(max(1, int(round(cfg.val_ratio * N))), N - 1)
    val_idx, train_idx = order[:n_val], order[n_val:]
    train_dist = squareform(pdist(matrix[train_idx])) if train_idx.size > 1 else np.zeros((1, 1))
    val_dist = cdist(matrix[val_idx], matrix[train_idx])
    y_train, y_val = labels[train_idx], labels[val_idx]
    ridge = _ridge(cfg.lambda_reg, train_idx.size, cfg.regularizer)

    trials: List[TuneTrial] = []
    bounds = (math.log10(cfg.xi_bounds[0]), math.log10(cfg.xi_bounds[1]))
    for nu in cfg.nu_grid:
        evaluations = []

        def objective(log_xi: float) -> float:
            params = MaternParams(nu, 10.0 ** log_xi)
            try:
                alpha = _solve_dual(_gram_from_distances(params, train_dist), y_train, ridge)
            except NumericalRankError:
                return math.inf
            value = mse(y_val, matern_profile(params, val_dist) @ alpha)
            evaluations.append(TuneTrial(nu, params.xi, value))
            return value

        minimize_scalar(objective, bounds=bounds, method="bounded",
                        options={"maxiter": cfg.xi_maxiter, "xatol": 1e-4})
        trials.extend(evaluations)
        best_nu = min(evaluations, key=lambda trial: (trial.val_mse, trial.xi))
        logger.info("nu=%.2f: best xi=%.4g with validation MSE %.4e", nu, best_nu.xi, best_nu.val_mse)

    best = min(trials, key=lambda trial: (trial.val_mse, trial.nu, trial.xi))
    return TuneResult(MaternParams(best.nu, best.xi), best.val_mse, trials)
