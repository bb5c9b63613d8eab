# pauli.py

from functools import reduce
from itertools import combinations, product
from math import comb
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from models.errors import InvalidArgumentError

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Integer codes shared with the shadow estimator (0 marks identity).
LETTER_CODES = {"I": 0, "X": 1, "Y": 2, "Z": 3}


class PauliString:
    """
    Tensor product of single-qubit Pauli matrices, written left to right from qubit 0.
    """

    def __init__(self, letters: str):
        """
        Initializes a Pauli string.

        :param letters: One symbol from {I, X, Y, Z} per qubit, e.g. "XIZ".
        """
        self.letters = letters.upper()
        self._validate_letters()

    def _validate_letters(self):
        if not self.letters:
            raise InvalidArgumentError("Pauli string must act on at least one qubit.")
        for symbol in self.letters:
            if symbol not in PAULI_MATRICES:
                raise InvalidArgumentError(f"Symbol '{symbol}' is not a Pauli letter.")

    @classmethod
    def from_support(cls, n: int, support: Dict[int, str]) -> "PauliString":
        """
        Builds an n-qubit string with the given letters on the given qubits and I elsewhere.
        """
        letters = ["I"] * n
        for qubit, symbol in support.items():
            if not 0 <= qubit < n:
                raise InvalidArgumentError(f"Qubit index {qubit} out of range for n={n}.")
            letters[qubit] = symbol
        return cls("".join(letters))

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(1 for symbol in self.letters if symbol != "I")

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(q for q, symbol in enumerate(self.letters) if symbol != "I")

    def codes(self) -> np.ndarray:
        return np.array([LETTER_CODES[symbol] for symbol in self.letters], dtype=np.int8)

    def to_matrix(self) -> np.ndarray:
        """
        Dense 2^n x 2^n matrix representation.
        """
        return reduce(np.kron, (PAULI_MATRICES[symbol] for symbol in self.letters))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PauliString) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    def __str__(self) -> str:
        return self.letters

    def __repr__(self) -> str:
        return f"PauliString('{self.letters}')"


class ObservableSet:
    """
    All non-identity Pauli strings of weight at most k on n qubits, in canonical order:
    ascending weight, then lexicographic qubit support, then letters with X < Y < Z.
    """

    def __init__(self, n: int, k: int = 2):
        """
        :param n: Number of qubits.
        :param k: Locality (maximum weight).
        """
        if n < 1:
            raise InvalidArgumentError(f"Qubit count must be at least 1, got {n}.")
        if k < 1:
            raise InvalidArgumentError(f"Locality k={k} must be at least 1.")
        self.n = n
        self.k = k
        self.strings: List[PauliString] = self._enumerate()
        self._matrices: Optional[np.ndarray] = None
        self._codes: Optional[np.ndarray] = None

    def _enumerate(self) -> List[PauliString]:
        strings = []
        for weight in range(1, self.k + 1):
            for support in combinations(range(self.n), weight):
                for symbols in product("XYZ", repeat=weight):
                    strings.append(PauliString.from_support(self.n, dict(zip(support, symbols))))
        return strings

    @staticmethod
    def expected_size(n: int, k: int) -> int:
        """
        Closed-form count sum_{j=1}^{k} C(n, j) 3^j; equals 3n + 9n(n-1)/2 for k=2.
        """
        return sum(comb(n, j) * 3 ** j for j in range(1, k + 1))

    @property
    def matrices(self) -> np.ndarray:
        """
        Stacked dense matrices, shape (|O|, 2^n, 2^n), built on first use.
        """
        if self._matrices is None:
            stacked = np.stack([string.to_matrix() for string in self.strings])
            stacked.setflags(write=False)
            self._matrices = stacked
        return self._matrices

    @property
    def codes(self) -> np.ndarray:
        """
        Integer letter codes, shape (|O|, n), with 0 for identity.
        """
        if self._codes is None:
            self._codes = np.stack([string.codes() for string in self.strings])
        return self._codes

    def labels(self) -> List[str]:
        return [string.letters for string in self.strings]

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "k": self.k}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ObservableSet":
        return cls(n=data["n"], k=data["k"])

    def __len__(self) -> int:
        return len(self.strings)

    def __iter__(self):
        return iter(self.strings)

    def __getitem__(self, index: int) -> PauliString:
        return self.strings[index]
