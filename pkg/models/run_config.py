# run_config.py

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from models.errors import ConfigError, InvalidArgumentError
from models.features import ShadowPlan
from models.krr_model import REGULARIZER_CONVENTIONS, MaternParams, TunerConfig
from models.reservoir import ReservoirConfig, Topology
from models.varma import FUNCTIONAL_KINDS, FunctionalSpec, VarmaSpec
from utils.seeding import FUNCTIONAL_STREAM, VARMA_STREAM, derive_seed

VERSION = "0.1.0"
BACKENDS = ("exact", "shadows")


def _section(cls, data: Optional[Dict[str, Any]], path: str):
    """
    Builds a config section, rejecting unknown keys and wrapping validation failures.
    """
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{path}' must be a JSON object, got {type(data).__name__}.")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) {unknown} in section '{path}'; allowed: {sorted(known)}.")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, InvalidArgumentError) as error:
        raise ConfigError(f"Invalid value in section '{path}': {error}") from error


@dataclass(frozen=True)
class DataSection:
    d: int = 3
    p: int = 3
    q: int = 3
    gamma: float = 0.7
    eta: float = 0.5
    rho_ma: float = 0.5
    sigma: float = 1.0
    burn_in: int = 1000
    length: Optional[int] = None
    alpha: float = 0.9
    tasks: Tuple[str, ...] = FUNCTIONAL_KINDS
    w: int = 25
    s: int = 100
    n_train: int = 200
    n_test: int = 200
    n_grid: Tuple[int, ...] = (100, 200, 400, 800, 1600)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.tasks or any(task not in FUNCTIONAL_KINDS for task in self.tasks):
            raise ConfigError(f"data.tasks must be drawn from {FUNCTIONAL_KINDS}, got {self.tasks}.")
        if len(set(self.tasks)) != len(self.tasks):
            raise ConfigError(f"data.tasks has duplicates: {self.tasks}.")
        if not 1 <= self.w <= self.s:
            raise ConfigError(f"data needs 1 <= w <= s, got w={self.w}, s={self.s}.")
        if self.n_train < 2 or self.n_test < 1:
            raise ConfigError(f"data needs n_train >= 2 and n_test >= 1, got {self.n_train}, {self.n_test}.")
        if not self.n_grid or min(self.n_grid) < 2 or list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError(f"data.n_grid must be increasing sizes >= 2, got {self.n_grid}.")
        if self.length is not None and self.length < self.required_length():
            raise ConfigError(f"data.length={self.length} is too short; need at least {self.required_length()}.")
        # validates the VARMA fields
        self.varma_spec(0)

    @property
    def n_train_max(self) -> int:
        return max(self.n_train, self.n_grid[-1])

    def required_length(self) -> int:
        """
        Series length holding n_train_max + 1 + n_test windows plus one forecast point.
        """
        return (self.n_train_max + 1 + self.n_test) * self.s + self.w + 1

    def varma_spec(self, master_seed: int) -> VarmaSpec:
        return VarmaSpec(d=self.d, p=self.p, q=self.q, gamma=self.gamma, eta=self.eta, rho_ma=self.rho_ma,
                         sigma=self.sigma, burn_in=self.burn_in, length=self.length or self.required_length(),
                         seed=derive_seed(master_seed, VARMA_STREAM))

    def functional(self, task: str, master_seed: int) -> FunctionalSpec:
        index = FUNCTIONAL_KINDS.index(task)
        return FunctionalSpec.sample(task, self.d, derive_seed(master_seed, FUNCTIONAL_STREAM, index), self.alpha)


@dataclass(frozen=True)
class ReservoirSection:
    n: int = 5
    R: int = 3
    lambda_interval: Tuple[float, float] = (0.7, 0.95)
    topology: str = "ring"

    def __post_init__(self):
        object.__setattr__(self, "lambda_interval", tuple(self.lambda_interval))
        if self.n < 1 or self.R < 1:
            raise ConfigError(f"reservoir needs n >= 1 and R >= 1, got n={self.n}, R={self.R}.")
        if self.topology != "ring":
            raise ConfigError(f"Only the 'ring' topology is configurable, got '{self.topology}'.")
        low, high = self.lambda_interval
        if not 0.0 < low <= high < 1.0:
            raise ConfigError(f"reservoir.lambda_interval {self.lambda_interval} must satisfy 0 < low <= high < 1.")

    def build(self, master_seed: int) -> ReservoirConfig:
        return ReservoirConfig.sample(self.n, self.R, master_seed, topology=Topology.ring(self.n),
                                      lambda_interval=self.lambda_interval)


@dataclass(frozen=True)
class MeasurementSection:
    backend: str = "exact"
    shots: int = 1000
    groups: int = 10
    k: int = 2
    audit_tol: float = 1e-8

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"measurement.backend must be one of {BACKENDS}, got '{self.backend}'.")
        if self.k < 1:
            raise ConfigError(f"measurement.k must be at least 1, got {self.k}.")
        if self.groups < 1 or self.shots < self.groups:
            raise ConfigError(f"measurement needs 1 <= groups <= shots, got {self.groups}, {self.shots}.")

    def plan(self) -> ShadowPlan:
        return ShadowPlan(self.shots, groups=self.groups, k=self.k)


@dataclass(frozen=True)
class KernelSection:
    tune: bool = True
    nu_grid: Tuple[float, ...] = (0.5, 1.5, 2.5, 5.0)
    xi_bounds: Tuple[float, float] = (1e-3, 1e3)
    val_ratio: float = 0.2
    lambda_reg: float = 1e-6
    xi_maxiter: int = 80
    split_seed: int = 0
    regularizer: str = "n_scaled"
    tune_windows: Optional[int] = None
    nu: Optional[float] = None
    xi: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "nu_grid", tuple(self.nu_grid))
        object.__setattr__(self, "xi_bounds", tuple(self.xi_bounds))
        self.tuner_config()
        if self.tune_windows is not None and self.tune_windows < 5:
            raise ConfigError(f"kernel.tune_windows must be at least 5, got {self.tune_windows}.")
        if not self.tune and (self.nu is None or self.xi is None):
            raise ConfigError("kernel.tune=false needs fixed kernel.nu and kernel.xi.")
        if self.nu is not None and self.xi is not None:
            self.fixed()

    def tuner_config(self) -> TunerConfig:
        return TunerConfig(self.nu_grid, self.xi_bounds, self.val_ratio, self.lambda_reg, self.xi_maxiter,
                           self.split_seed, self.regularizer)

    def fixed(self) -> MaternParams:
        return MaternParams(self.nu, self.xi)


def default_reg_grid() -> Tuple[float, ...]:
    return tuple(float(value) for value in np.logspace(-12, 2, 16))


@dataclass(frozen=True)
class ReadoutSection:
    lambda_reg: float = 1e-6
    grid: Tuple[float, ...] = field(default_factory=default_reg_grid)
    regularizer: str = "n_scaled"

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(value) for value in self.grid))
        if self.lambda_reg < 0.0 or not self.grid or min(self.grid) < 0.0:
            raise ConfigError("readout.lambda_reg and every readout.grid value must be non-negative.")
        if self.regularizer not in REGULARIZER_CONVENTIONS:
            raise ConfigError(f"readout.regularizer must be one of {REGULARIZER_CONVENTIONS}.")


@dataclass(frozen=True)
class BoundSection:
    delta: float = 0.05
    beta_g: float = 0.0
    beta0: Optional[float] = None
    beta1: Optional[float] = None
    Lambda: Optional[float] = None
    Upsilon_Y: Optional[float] = None
    w_grid: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "w_grid", tuple(int(w) for w in self.w_grid))
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"bound.delta must lie in (0, 1), got {self.delta}.")
        if self.beta_g < 0.0:
            raise ConfigError(f"bound.beta_g must be non-negative, got {self.beta_g}.")
        if (self.beta0 is None) != (self.beta1 is None):
            raise ConfigError("bound.beta0 and bound.beta1 must be given together.")
        if any(w < 1 for w in self.w_grid):
            raise ConfigError(f"bound.w_grid values must be positive, got {self.w_grid}.")


@dataclass(frozen=True)
class RunConfig:
    """
    Resolved run configuration: one section per pipeline stage plus run-wide settings.
    """
    data: DataSection = field(default_factory=DataSection)
    reservoir: ReservoirSection = field(default_factory=ReservoirSection)
    measurement: MeasurementSection = field(default_factory=MeasurementSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    readout: ReadoutSection = field(default_factory=ReadoutSection)
    bound: BoundSection = field(default_factory=BoundSection)
    seed: int = 0
    workers: int = 1
    output_dir: str = "runs/default"
    progress: bool = False

    _SECTIONS = {
        "data": DataSection, "reservoir": ReservoirSection, "measurement": MeasurementSection,
        "kernel": KernelSection, "readout": ReadoutSection, "bound": BoundSection,
    }

    def __post_init__(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}.")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}.")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("The run configuration must be a JSON object.")
        scalars = {"seed", "workers", "output_dir", "progress"}
        unknown = sorted(set(data) - set(cls._SECTIONS) - scalars)
        if unknown:
            raise ConfigError(f"Unknown top-level key(s) {unknown}.")
        sections = {name: _section(kind, data.get(name), name) for name, kind in cls._SECTIONS.items()}
        try:
            return cls(**sections, **{key: data[key] for key in scalars if key in data})
        except TypeError as error:
            raise ConfigError(f"Invalid top-level value: {error}") from error

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        """
        Reads a JSON configuration file; None gives the defaults.
        """
        if path is None:
            return cls()
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except OSError as error:
            raise ConfigError(f"Cannot read config file '{path}': {error}") from error
        except json.JSONDecodeError as error:
            raise ConfigError(f"Config file '{path}' is not valid JSON: {error}") from error
        return cls.from_dict(data)

    def with_overrides(self, seed: Optional[int] = None, backend: Optional[str] = None,
                       workers: Optional[int] = None, output_dir: Optional[str] = None,
                       progress: Optional[bool] = None) -> "RunConfig":
        """
        Applies command-line overrides on top of the file values.
        """
        config = self
        if backend is not None:
            config = replace(config, measurement=replace(config.measurement, backend=backend))
        updates = {key: value for key, value in
                   (("seed", seed), ("workers", workers), ("output_dir", output_dir), ("progress", progress)) if value is not None}
        return replace(config, **updates) if updates else config

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["data"]["length"] = self.data.length or self.data.required_length()
        return json.loads(json.dumps(data))

    def config_hash(self) -> str:
        payload = {key: value for key, value in self.to_dict().items() if key not in ("workers", "progress", "output_dir")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def task_seeds(self) -> Dict[str, int]:
        return {task: derive_seed(self.seed, FUNCTIONAL_STREAM, FUNCTIONAL_KINDS.index(task))
                for task in self.data.tasks}

