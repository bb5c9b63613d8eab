# window_dataset.py

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from models.errors import InvalidArgumentError


class WindowDataset:
    """
    N strided input windows with one scalar label each, in chronological order.
    """

    def __init__(self, windows: np.ndarray, labels: np.ndarray, w: int, s: int, end_indices: np.ndarray,
                 source_hash: str = "", kind: Optional[str] = None):
        """
        :param windows: Array (N, w, d); row 0 of a window is its oldest point.
        :param labels: Array (N,).
        :param w: Window length.
        :param s: Stride between consecutive end indices.
        :param end_indices: Series index of the last point of every window.
        :param source_hash: Content hash of the series the windows were cut from.
        :param kind: Label functional the labels come from.
        """
        self.windows = np.asarray(windows, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self.w = int(w)
        self.s = int(s)
        self.end_indices = np.asarray(end_indices, dtype=np.int64)
        self.source_hash = source_hash
        self.kind = kind
        self._validate_dataset()
        for array in (self.windows, self.labels, self.end_indices):
            array.setflags(write=False)

    def _validate_dataset(self):
        if self.w < 1:
            raise InvalidArgumentError(f"Window length must be positive, got {self.w}.")
        if self.s < self.w:
            raise InvalidArgumentError(f"Stride {self.s} is shorter than the window {self.w}; the gap would be negative.")
        N = self.labels.shape[0]
        if self.windows.ndim != 3 or self.windows.shape[:2] != (N, self.w):
            raise InvalidArgumentError(f"Windows of shape {self.windows.shape} do not match {N} labels of length {self.w}.")
        if self.end_indices.shape != (N,):
            raise InvalidArgumentError("One end index per window is required.")
        if N > 1 and np.any(np.diff(self.end_indices) != self.s):
            raise InvalidArgumentError(f"Consecutive end indices must differ by exactly the stride {self.s}.")

    @property
    def N(self) -> int:
        return self.labels.shape[0]

    @property
    def d(self) -> int:
        return self.windows.shape[2]

    @property
    def g(self) -> int:
        return self.s - self.w

    @property
    def upsilon(self) -> float:
        """
        Empirical label bound max |y|.
        """
        return float(np.max(np.abs(self.labels))) if self.N else 0.0

    def time_range(self) -> Tuple[int, int]:
        """
        First and last series index touched by the windows (the F1 future point included).
        """
        if self.N == 0:
            raise InvalidArgumentError("An empty dataset has no time range.")
        future = 1 if self.kind == "forecast" else 0
        return int(self.end_indices[0]) - self.w + 1, int(self.end_indices[-1]) + future

    def prefix(self, count: int) -> "WindowDataset":
        """
        The first count windows in chronological order.
        """
        if not 0 < count <= self.N:
            raise InvalidArgumentError(f"Prefix size {count} must lie in [1, {self.N}].")
        return WindowDataset(self.windows[:count], self.labels[:count], self.w, self.s,
                             self.end_indices[:count], self.source_hash, self.kind)

    def rows(self) -> List[List[Any]]:
        """
        One CSV row per window: id, first index, last index, label.
        """
        return [[i, int(end) - self.w + 1, int(end), repr(float(y))]
                for i, (end, y) in enumerate(zip(self.end_indices, self.labels))]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N, "w": self.w, "s": self.s, "g": self.g, "kind": self.kind,
            "source_hash": self.source_hash, "upsilon": self.upsilon,
            "end_indices": self.end_indices.tolist(),
        }

    def pretty_print(self):
        print(f"{'window':<8} {'start':<8} {'end':<8} {'label':<12}")
        print("=" * 40)
        for window_id, start, end, label in self.rows():
            print(f"{window_id:<8} {start:<8} {end:<8} {float(label):<12.6f}")
