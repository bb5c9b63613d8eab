# projector.py

from typing import Any, Dict, Optional

import numpy as np

from models.errors import InvalidArgumentError


class JlProjector:
    """
    Gaussian Johnson-Lindenstrauss projection Pi in R^{n x d} with entries i.i.d. N(0, 1/n).
    """

    def __init__(self, n: int, d: int, seed: Optional[int], matrix: Optional[np.ndarray] = None):
        """
        Initializes the projector. The matrix is drawn from the seed unless one is injected.

        :param n: Output (qubit) dimension.
        :param d: Input dimension.
        :param seed: Seed of the PCG64 stream; None only for injected matrices.
        :param matrix: Explicit n x d matrix (tests and audits).
        """
        if n < 1 or d < 1:
            raise InvalidArgumentError(f"Projector dimensions must be positive, got n={n}, d={d}.")
        self.n = n
        self.d = d
        self.seed = seed
        if matrix is None:
            if seed is None:
                raise InvalidArgumentError("A seed is required when no matrix is injected.")
            matrix = np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(n), size=(n, d))
        matrix = np.array(matrix, dtype=float)
        if matrix.shape != (n, d):
            raise InvalidArgumentError(f"Injected matrix has shape {matrix.shape}, expected {(n, d)}.")
        matrix.setflags(write=False)
        self.matrix = matrix

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "JlProjector":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(matrix.shape[0], matrix.shape[1], seed=None, matrix=matrix)

    def to_dict(self) -> Dict[str, Any]:
        """
        Persists seed and dimensions only; the matrix is regenerated on load.
        """
        if self.seed is None:
            raise InvalidArgumentError("Projectors with injected matrices cannot be persisted by seed.")
        return {"n": self.n, "d": self.d, "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "JlProjector":
        return cls(n=data["n"], d=data["d"], seed=data["seed"])

    def __repr__(self) -> str:
        return f"JlProjector(n={self.n}, d={self.d}, seed={self.seed})"
