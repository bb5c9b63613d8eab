# krr_model.py

import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from models.errors import InvalidArgumentError

REGULARIZER_CONVENTIONS = ("n_scaled", "plain")


class MaternParams:
    """
    Matern profile hyper-parameters: smoothness nu and length-scale xi.
    """

    def __init__(self, nu: float, xi: float):
        """
        :param nu: Smoothness, finite and > 0.
        :param xi: Length-scale, finite and > 0.
        """
        self.nu = float(nu)
        self.xi = float(xi)
        if not (math.isfinite(self.nu) and self.nu > 0.0):
            raise InvalidArgumentError(f"Matern smoothness nu must be finite and positive, got {nu}.")
        if not (math.isfinite(self.xi) and self.xi > 0.0):
            raise InvalidArgumentError(f"Matern length-scale xi must be finite and positive, got {xi}.")

    def to_dict(self) -> Dict[str, Any]:
        return {"nu": self.nu, "xi": self.xi}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MaternParams":
        return cls(data["nu"], data["xi"])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MaternParams) and (self.nu, self.xi) == (other.nu, other.xi)

    def __repr__(self) -> str:
        return f"MaternParams(nu={self.nu}, xi={self.xi:.6g})"


class KrrModel:
    """
    Trained kernel ridge readout h(.) = sum_i alpha_i kappa(support_i, .).
    """

    def __init__(self, matern: MaternParams, lambda_reg: float, support: np.ndarray, alpha: np.ndarray,
                 y_train: np.ndarray, gram: Optional[np.ndarray] = None, regularizer: str = "n_scaled",
                 residual: float = 0.0):
        """
        :param matern: Kernel hyper-parameters.
        :param lambda_reg: Ridge strength (>= 0).
        :param support: N x D training feature matrix.
        :param alpha: N dual coefficients.
        :param y_train: N training labels.
        :param gram: Training Gram matrix, kept for norm computations.
        :param regularizer: "n_scaled" solves (K + N lambda I), "plain" solves (K + lambda I).
        :param residual: ||(K + c I) alpha - y|| of the solve.
        """
        self.matern = matern
        self.lambda_reg = float(lambda_reg)
        self.support = np.asarray(support, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.y_train = np.asarray(y_train, dtype=float)
        self.gram = gram
        self.regularizer = regularizer
        self.residual = float(residual)
        self._validate_model()

    def _validate_model(self):
        if self.lambda_reg < 0.0:
            raise InvalidArgumentError(f"lambda_reg must be non-negative, got {self.lambda_reg}.")
        if self.regularizer not in REGULARIZER_CONVENTIONS:
            raise InvalidArgumentError(f"Unknown regularizer convention '{self.regularizer}'.")
        N = self.support.shape[0]
        if self.support.ndim != 2 or self.alpha.shape != (N,) or self.y_train.shape != (N,):
            raise InvalidArgumentError("Support, alpha and labels must agree on the number of samples.")

    @property
    def n_samples(self) -> int:
        return self.support.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.support.shape[1]

    @property
    def ridge(self) -> float:
        """
        The constant actually added to the Gram diagonal.
        """
        return self.lambda_reg * (self.n_samples if self.regularizer == "n_scaled" else 1.0)

    def scaled(self, factor: float) -> "KrrModel":
        """
        Same support and kernel with alpha multiplied by factor (h -> factor * h).
        """
        return KrrModel(self.matern, self.lambda_reg, self.support, factor * self.alpha, self.y_train,
                        gram=self.gram, regularizer=self.regularizer, residual=self.residual)

    def to_dict(self, support_key: Optional[str] = None) -> Dict[str, Any]:
        """
        Hyper-parameters, dual coefficients and labels; the support is referenced by cache key
        and row count instead of being stored.
        """
        return {
            "matern": self.matern.to_dict(),
            "lambda_reg": self.lambda_reg,
            "regularizer": self.regularizer,
            "alpha": self.alpha.tolist(),
            "y_train": self.y_train.tolist(),
            "support_key": support_key,
            "support_rows": self.n_samples,
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], support: np.ndarray) -> "KrrModel":
        """
        Rebuilds a model from to_dict output and the first support_rows rows of the resolved support.
        """
        support = np.asarray(support, dtype=float)
        rows = data["support_rows"]
        if support.ndim != 2 or support.shape[0] < rows:
            raise InvalidArgumentError(f"Support has shape {support.shape}, the model needs {rows} rows.")
        return cls(MaternParams.from_dict(data["matern"]), data["lambda_reg"], support[:rows],
                   np.array(data["alpha"]), np.array(data["y_train"]), regularizer=data["regularizer"],
                   residual=data.get("residual", 0.0))


class TunerConfig:
    """
    Train/validation tuning of (nu, xi): grid over nu, bounded search over log10(xi).
    """

    def __init__(self, nu_grid: Sequence[float] = (0.5, 1.5, 2.5, 5.0),
                 xi_bounds: Tuple[float, float] = (1e-3, 1e3), val_ratio: float = 0.2,
                 lambda_reg: float = 1e-6, xi_maxiter: int = 80, split_seed: int = 0,
                 regularizer: str = "n_scaled"):
        self.nu_grid = tuple(float(nu) for nu in nu_grid)
        self.xi_bounds = (float(xi_bounds[0]), float(xi_bounds[1]))
        self.val_ratio = float(val_ratio)
        self.lambda_reg = float(lambda_reg)
        self.xi_maxiter = int(xi_maxiter)
        self.split_seed = int(split_seed)
        self.regularizer = regularizer
        self._validate_config()

    def _validate_config(self):
        if not self.nu_grid or any(nu <= 0.0 for nu in self.nu_grid):
            raise InvalidArgumentError(f"nu_grid must be a non-empty list of positive values, got {self.nu_grid}.")
        low, high = self.xi_bounds
        if not 0.0 < low < high:
            raise InvalidArgumentError(f"xi_bounds {self.xi_bounds} must satisfy 0 < low < high.")
        if not 0.0 < self.val_ratio < 1.0:
            raise InvalidArgumentError(f"val_ratio must lie in (0, 1), got {self.val_ratio}.")
        if self.lambda_reg < 0.0:
            raise InvalidArgumentError(f"Tuning lambda_reg must be non-negative, got {self.lambda_reg}.")
        if self.xi_maxiter < 1:
            raise InvalidArgumentError(f"xi_maxiter must be positive, got {self.xi_maxiter}.")
        if self.regularizer not in REGULARIZER_CONVENTIONS:
            raise InvalidArgumentError(f"Unknown regularizer convention '{self.regularizer}'.")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu_grid": list(self.nu_grid),
            "xi_bounds": list(self.xi_bounds),
            "val_ratio": self.val_ratio,
            "lambda_reg": self.lambda_reg,
            "xi_maxiter": self.xi_maxiter,
            "split_seed": self.split_seed,
            "regularizer": self.regularizer,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TunerConfig":
        return cls(**data)
