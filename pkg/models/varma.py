# varma.py

from typing import Any, Dict, Optional

import numpy as np

from models.errors import InvalidArgumentError

FUNCTIONAL_KINDS = ("forecast", "exp_fading", "volterra")


class VarmaSpec:
    """
    Parameters of the stable VARMA(p, q) family squashed through tanh.
    """

    def __init__(self, d: int = 3, p: int = 3, q: int = 3, gamma: float = 0.7, eta: float = 0.5,
                 rho_ma: float = 0.5, sigma: float = 1.0, burn_in: int = 1000, length: int = 10000,
                 seed: int = 0):
        """
        :param d: Input dimension.
        :param p: AR order.
        :param q: MA order.
        :param gamma: Stability budget, sum of AR spectral norms, in (0, 1).
        :param eta: Leading MA amplitude (> 0).
        :param rho_ma: MA amplitude decay in (0, 1).
        :param sigma: Innovation standard deviation (>= 0; 0 gives the zero series).
        :param burn_in: Discarded warm-up steps B.
        :param length: Retained length T.
        :param seed: Seed of the coefficient and innovation streams.
        """
        self.d = int(d)
        self.p = int(p)
        self.q = int(q)
        self.gamma = float(gamma)
        self.eta = float(eta)
        self.rho_ma = float(rho_ma)
        self.sigma = float(sigma)
        self.burn_in = int(burn_in)
        self.length = int(length)
        self.seed = int(seed)
        self._validate_spec()

    def _validate_spec(self):
        if self.d < 1:
            raise InvalidArgumentError(f"Dimension d must be positive, got {self.d}.")
        if self.p < 1 or self.q < 0:
            raise InvalidArgumentError(f"Orders must satisfy p >= 1 and q >= 0, got p={self.p}, q={self.q}.")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidArgumentError(f"Stability budget gamma must lie in (0, 1), got {self.gamma}.")
        if self.eta <= 0.0:
            raise InvalidArgumentError(f"MA amplitude eta must be positive, got {self.eta}.")
        if not 0.0 < self.rho_ma < 1.0:
            raise InvalidArgumentError(f"MA decay rho_ma must lie in (0, 1), got {self.rho_ma}.")
        if self.sigma < 0.0:
            raise InvalidArgumentError(f"Innovation std sigma must be non-negative, got {self.sigma}.")
        if self.burn_in < 0 or self.length < 1:
            raise InvalidArgumentError(f"Need burn_in >= 0 and length >= 1, got {self.burn_in}, {self.length}.")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d, "p": self.p, "q": self.q, "gamma": self.gamma, "eta": self.eta,
            "rho_ma": self.rho_ma, "sigma": self.sigma, "burn_in": self.burn_in,
            "length": self.length, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VarmaSpec":
        return cls(**data)


class VarmaModel:
    """
    Generated coefficients: AR matrices Phi_1..Phi_p and MA matrices Theta_0 = I, Theta_1..Theta_q.
    """

    def __init__(self, phi: np.ndarray, theta: np.ndarray):
        """
        :param phi: Array (p, d, d).
        :param theta: Array (q + 1, d, d) whose first entry is the identity.
        """
        self.phi = np.asarray(phi, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        if self.phi.ndim != 3 or self.theta.ndim != 3:
            raise InvalidArgumentError("Coefficient stacks must be 3-D arrays.")
        if not np.allclose(self.theta[0], np.eye(self.theta.shape[1])):
            raise InvalidArgumentError("Theta_0 must be the identity.")

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    @property
    def q(self) -> int:
        return self.theta.shape[0] - 1

    def spectral_norm_sum(self) -> float:
        return float(sum(np.linalg.norm(matrix, 2) for matrix in self.phi))

    def companion_matrix(self) -> np.ndarray:
        """
        The pd x pd companion matrix of the AR recursion.
        """
        d, p = self.d, self.p
        companion = np.zeros((p * d, p * d))
        companion[:d, :] = np.hstack(list(self.phi))
        if p > 1:
            companion[d:, :-d] = np.eye((p - 1) * d)
        return companion

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion_matrix()))))


class FunctionalSpec:
    """
    A label functional: forecast (F1), exponentially fading (F2) or order-2 Volterra (F3).
    """

    def __init__(self, kind: str, u: np.ndarray, v: Optional[np.ndarray] = None, alpha: float = 0.9,
                 seed: Optional[int] = None):
        """
        :param kind: One of forecast, exp_fading, volterra.
        :param u: Unit projection vector.
        :param v: Unit vector orthogonal to u (volterra only).
        :param alpha: Memory decay in (0, 1).
        :param seed: Seed u and v were drawn from, if sampled.
        """
        self.kind = kind
        self.u = np.asarray(u, dtype=float)
        self.v = None if v is None else np.asarray(v, dtype=float)
        self.alpha = float(alpha)
        self.seed = seed
        self._validate_functional()

    def _validate_functional(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise InvalidArgumentError(f"Unknown functional '{self.kind}'; expected one of {FUNCTIONAL_KINDS}.")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentError(f"Decay alpha must lie in (0, 1), got {self.alpha}.")
        if abs(np.linalg.norm(self.u) - 1.0) > 1e-12:
            raise InvalidArgumentError("Projection vector u must have unit norm.")
        if self.kind == "volterra":
            if self.v is None or self.v.shape != self.u.shape:
                raise InvalidArgumentError("The volterra functional needs a second vector v of the same dimension.")
            if abs(np.linalg.norm(self.v) - 1.0) > 1e-12 or abs(float(self.u @ self.v)) > 1e-12:
                raise InvalidArgumentError("Vector v must be a unit vector orthogonal to u.")

    @property
    def d(self) -> int:
        return self.u.shape[0]

    @classmethod
    def sample(cls, kind: str, d: int, seed: int, alpha: float = 0.9) -> "FunctionalSpec":
        """
        u = g / ||g|| with g ~ N(0, I_d); for volterra, an independent v orthogonalized against u.
        """
        rng = np.random.default_rng(seed)
        g = rng.standard_normal(d)
        u = g / np.linalg.norm(g)
        v = None
        if kind == "volterra":
            if d < 2:
                raise InvalidArgumentError("The volterra functional needs d >= 2 to orthogonalize v against u.")
            raw = rng.standard_normal(d)
            raw = raw - (raw @ u) * u
            v = raw / np.linalg.norm(raw)
            # second Gram-Schmidt pass keeps <u, v> at round-off level
            v = v - (v @ u) * u
            v = v / np.linalg.norm(v)
        return cls(kind, u, v, alpha=alpha, seed=seed)

    @property
    def future_points(self) -> int:
        return 1 if self.kind == "forecast" else 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "seed": self.seed,
            "u": self.u.tolist(),
            "v": None if self.v is None else self.v.tolist(),
            "orthogonalized": self.kind == "volterra",
        }
