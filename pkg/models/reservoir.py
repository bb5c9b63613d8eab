# reservoir.py

import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from graphviz import Graph

from models.errors import InvalidArgumentError
from utils.seeding import RESERVOIR_STREAM, derive_seed

DEFAULT_LAMBDA_INTERVAL = (0.7, 0.95)


class Topology:
    """
    Qubit connectivity graph (V, E) of a sub-reservoir; edges carry the R_zz couplings.
    """

    def __init__(self, n: int, edges: Sequence[Tuple[int, int]], name: str = "custom"):
        """
        Initializes the topology.

        :param n: Number of qubits.
        :param edges: Ordered list of pairs (i, j) with i < j; order fixes gate order.
        :param name: Generator name recorded in manifests ("ring" or "custom").
        """
        self.n = n
        self.edges: List[Tuple[int, int]] = [(int(i), int(j)) for i, j in edges]
        self.name = name
        self._validate_topology()

    def _validate_topology(self):
        """
        Rejects self-loops, duplicates, unordered pairs and out-of-range indices.
        """
        if self.n < 1:
            raise InvalidArgumentError(f"Topology needs at least one qubit, got {self.n}.")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidArgumentError(f"Self-loop on qubit {i} is not allowed.")
            if i > j:
                raise InvalidArgumentError(f"Edge ({i}, {j}) must be written with i < j.")
            if j >= self.n or i < 0:
                raise InvalidArgumentError(f"Edge ({i}, {j}) references a qubit outside 0..{self.n - 1}.")
            if (i, j) in seen:
                raise InvalidArgumentError(f"Duplicate edge ({i}, {j}).")
            seen.add((i, j))

    @classmethod
    def ring(cls, n: int) -> "Topology":
        """
        Ring (0,1), (1,2), ..., (n-2,n-1), (0,n-1). Degenerates to one edge for n=2, none for n=1.
        """
        edges = [(q, q + 1) for q in range(n - 1)]
        if n > 2:
            edges.append((0, n - 1))
        return cls(n, edges, name="ring")

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "name": self.name, "edges": [list(edge) for edge in self.edges]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Topology":
        if data.get("name") == "ring" and "edges" not in data:
            return cls.ring(data["n"])
        return cls(data["n"], [tuple(edge) for edge in data["edges"]], name=data.get("name", "custom"))

    def pretty_print_edges(self):
        """
        Prints the coupling list in a readable format.
        """
        print(f"{'Edge':<6} {'Qubits':<10}")
        print("=" * 16)
        for index, (i, j) in enumerate(self.edges):
            print(f"{index:<6} {f'q{i} - q{j}':<10}")

    def visualize(self, filename: str = "topology", format: str = "png"):
        """
        Renders the coupling graph with Graphviz and saves it to a file.

        :param filename: The name of the output file (without extension).
        :param format: The output file format (e.g., 'png', 'pdf').
        """
        dot = Graph(name=filename, format=format)
        for qubit in range(self.n):
            dot.node(f"q{qubit}", shape="circle")
        for i, j in self.edges:
            dot.edge(f"q{i}", f"q{j}", label="ZZ")
        dot.render(filename, cleanup=True)
        print(f"Topology visualization saved to {filename}.{format}")


class SubReservoirParams:
    """
    Sampled parameters of one sub-reservoir: entangler angles and contraction rate.
    """

    def __init__(self, theta_x: Sequence[float], theta_z: Sequence[float], theta_zz: Sequence[float],
                 lam: float, seed: Optional[int] = None):
        """
        :param theta_x: One R_x angle per qubit.
        :param theta_z: One R_z angle per qubit.
        :param theta_zz: One R_zz angle per topology edge.
        :param lam: Contraction rate lambda in (0, 1).
        :param seed: Seed the angles were drawn from (None for hand-built parameters).
        """
        self.theta_x = np.array(theta_x, dtype=float)
        self.theta_z = np.array(theta_z, dtype=float)
        self.theta_zz = np.array(theta_zz, dtype=float)
        self.lam = float(lam)
        self.seed = seed
        self._validate_params()

    def _validate_params(self):
        if self.theta_x.shape != self.theta_z.shape or self.theta_x.ndim != 1:
            raise InvalidArgumentError("theta_x and theta_z must be 1-D with one angle per qubit.")
        for name, angles in (("theta_x", self.theta_x), ("theta_z", self.theta_z), ("theta_zz", self.theta_zz)):
            if not np.all(np.isfinite(angles)) or np.any(np.abs(angles) >= math.pi):
                raise InvalidArgumentError(f"All {name} angles must lie in (-pi, pi).")
        if not 0.0 < self.lam < 1.0:
            raise InvalidArgumentError(f"Contraction lambda must lie in (0, 1), got {self.lam}.")

    @property
    def n(self) -> int:
        return self.theta_x.shape[0]

    @classmethod
    def sample(cls, n: int, n_edges: int, seed: int,
               lambda_interval: Tuple[float, float] = DEFAULT_LAMBDA_INTERVAL) -> "SubReservoirParams":
        """
        Draws angles i.i.d. Uniform(-pi, pi) and lambda ~ Uniform(lambda_interval).
        """
        _check_interval(lambda_interval)
        rng = np.random.default_rng(seed)
        theta_x = rng.uniform(-math.pi, math.pi, size=n)
        theta_z = rng.uniform(-math.pi, math.pi, size=n)
        theta_zz = rng.uniform(-math.pi, math.pi, size=n_edges)
        lam = rng.uniform(*lambda_interval)
        return cls(theta_x, theta_z, theta_zz, lam, seed=seed)

    @classmethod
    def zeros(cls, n: int, n_edges: int, lam: float) -> "SubReservoirParams":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n_edges), lam)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "lambda": self.lam,
            "theta_x": self.theta_x.tolist(),
            "theta_z": self.theta_z.tolist(),
            "theta_zz": self.theta_zz.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SubReservoirParams":
        return cls(data["theta_x"], data["theta_z"], data["theta_zz"], data["lambda"], seed=data.get("seed"))


class ReservoirConfig:
    """
    R spatially multiplexed sub-reservoirs sharing one topology.
    """

    def __init__(self, n: int, topology: Topology, subs: Sequence[SubReservoirParams],
                 master_seed: Optional[int] = None,
                 lambda_interval: Tuple[float, float] = DEFAULT_LAMBDA_INTERVAL):
        """
        :param n: Qubits per sub-reservoir.
        :param topology: Shared coupling graph.
        :param subs: One parameter set per sub-reservoir, in multiplexing order.
        :param master_seed: Seed the sub-reservoir seeds were derived from.
        :param lambda_interval: Interval lambda_r was sampled from.
        """
        self.n = n
        self.topology = topology
        self.subs = list(subs)
        self.master_seed = master_seed
        self.lambda_interval = tuple(lambda_interval)
        self._validate_config()

    def _validate_config(self):
        if not self.subs:
            raise InvalidArgumentError("At least one sub-reservoir is required.")
        if self.topology.n != self.n:
            raise InvalidArgumentError(f"Topology has {self.topology.n} qubits, config has {self.n}.")
        for index, sub in enumerate(self.subs):
            if sub.n != self.n or sub.theta_zz.shape[0] != len(self.topology.edges):
                raise InvalidArgumentError(f"Sub-reservoir {index} does not match n={self.n} and the topology.")

    @property
    def R(self) -> int:
        return len(self.subs)

    @property
    def lambda_star(self) -> float:
        return max(sub.lam for sub in self.subs)

    @classmethod
    def sample(cls, n: int, R: int, master_seed: int, topology: Optional[Topology] = None,
               lambda_interval: Tuple[float, float] = DEFAULT_LAMBDA_INTERVAL) -> "ReservoirConfig":
        """
        Draws R independent sub-reservoirs; sub-reservoir r uses the seed derived from
        (master_seed, r).
        """
        if R < 1:
            raise InvalidArgumentError(f"R must be at least 1, got {R}.")
        topology = topology or Topology.ring(n)
        subs = [
            SubReservoirParams.sample(n, len(topology.edges), derive_seed(master_seed, RESERVOIR_STREAM, r),
                                      lambda_interval)
            for r in range(R)
        ]
        return cls(n, topology, subs, master_seed=master_seed, lambda_interval=lambda_interval)

    def to_dict(self, include_angles: bool = False) -> Dict[str, Any]:
        """
        Summary for manifests; raw angles are included only on request.
        """
        data = {
            "n": self.n,
            "R": self.R,
            "master_seed": self.master_seed,
            "lambda_interval": list(self.lambda_interval),
            "topology": self.topology.to_dict(),
            "sub_seeds": [sub.seed for sub in self.subs],
            "lambdas": [sub.lam for sub in self.subs],
        }
        if include_angles:
            data["subs"] = [sub.to_dict() for sub in self.subs]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReservoirConfig":
        topology = Topology.from_dict(data["topology"])
        interval = tuple(data.get("lambda_interval", DEFAULT_LAMBDA_INTERVAL))
        if "subs" in data:
            subs = [SubReservoirParams.from_dict(sub) for sub in data["subs"]]
            return cls(data["n"], topology, subs, master_seed=data.get("master_seed"), lambda_interval=interval)
        return cls.sample(data["n"], data["R"], data["master_seed"], topology=topology, lambda_interval=interval)


def _check_interval(interval: Tuple[float, float]):
    low, high = interval
    if not 0.0 < low <= high < 1.0:
        raise InvalidArgumentError(f"Lambda interval {interval} must satisfy 0 < low <= high < 1.")
