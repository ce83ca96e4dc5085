"""Run configuration: one JSON document covering every pipeline stage.

Each block maps onto the corresponding module's own config type; defaults
reproduce the reference setup (RCC-centered training range, 10 kW/m^2 flux on
a 7 mm slab, 100-node grid, CFL 0.2, Adam at 0.006 for 2000 epochs, reliability
levels 95/99/99.999%, 10000 particles).  An empty JSON object is therefore a
complete, runnable configuration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .heatsim import ThermalScenario
from .pinn import TrainingConfig
from .reliability import ParameterPrior, PriorSpec


class ConfigError(ValueError):
    """Configuration file missing, malformed, or failing validation."""


@dataclass(frozen=True)
class TargetBlock:
    T_critical: float = 250.0
    R_levels: tuple[float, ...] = (0.95, 0.99, 0.99999)
    sigma_target: float = 5.0

    def __post_init__(self) -> None:
        if self.sigma_target <= 0:
            raise ConfigError("sigma_target must be positive")
        if not self.R_levels:
            raise ConfigError("at least one reliability level is required")
        for r in self.R_levels:
            if not 0.0 < r < 1.0:
                raise ConfigError(f"reliability level must lie in (0, 1), got {r}")


@dataclass(frozen=True)
class PriorBlock:
    k_dist: str = "uniform"
    k_low: float = 0.1
    k_high: float = 1.3
    k_mean: float = 0.0
    k_std: float = 1.0
    rho_cp_dist: str = "uniform"
    rho_cp_low: float = 0.8e6
    rho_cp_high: float = 2.4e6
    rho_cp_mean: float = 0.0
    rho_cp_std: float = 1.0
    k_max: float = 1.0

    def to_spec(self) -> PriorSpec:
        try:
            return PriorSpec(
                k=ParameterPrior(self.k_dist, low=self.k_low, high=self.k_high,
                                 mean=self.k_mean, std=self.k_std),
                rho_cp=ParameterPrior(self.rho_cp_dist, low=self.rho_cp_low,
                                      high=self.rho_cp_high, mean=self.rho_cp_mean,
                                      std=self.rho_cp_std),
                k_max=self.k_max,
            )
        except ValueError as err:
            raise ConfigError(f"prior block: {err}") from err


@dataclass(frozen=True)
class SamplerBlock:
    n_particles: int = 10_000
    ess_threshold_ratio: float = 0.5
    mutation_steps: int = 5
    mcmc_chains: int = 3
    mcmc_steps: int = 1000
    seed: int = 0
    workers: int = 1
    fdm_check_subsample: int = 0  # 0 = re-verify every sample through the FDM

    def __post_init__(self) -> None:
        if self.n_particles < 2:
            raise ConfigError("n_particles must be >= 2")
        if not 0.0 < self.ess_threshold_ratio <= 1.0:
            raise ConfigError("ess_threshold_ratio must lie in (0, 1]")
        if self.mutation_steps < 0 or self.mcmc_chains < 1 or self.mcmc_steps < 1:
            raise ConfigError("sampler counts out of range")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.fdm_check_subsample < 0:
            raise ConfigError("fdm_check_subsample must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    scenario: ThermalScenario = field(default_factory=ThermalScenario)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    target: TargetBlock = field(default_factory=TargetBlock)
    prior: PriorBlock = field(default_factory=PriorBlock)
    sampler: SamplerBlock = field(default_factory=SamplerBlock)
    output_dir: str = "out"


_BLOCKS = {
    "scenario": ThermalScenario,
    "training": TrainingConfig,
    "target": TargetBlock,
    "prior": PriorBlock,
    "sampler": SamplerBlock,
}

_TUPLE_FIELDS = {"loss_weights", "k_range", "rho_cp_range", "hidden", "R_levels"}


def _build_block(cls, name: str, data: dict):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}' block: {', '.join(sorted(unknown))}")
    coerced = {k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
               for k, v in data.items()}
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid '{name}' block: {err}") from err


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top-level configuration must be a JSON object")
    unknown = set(data) - set(_BLOCKS) - {"output_dir"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    blocks = {
        name: _build_block(cls, name, data.get(name, {}))
        for name, cls in _BLOCKS.items()
    }
    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    cfg = RunConfig(output_dir=out, **blocks)
    cfg.prior.to_spec()  # fail fast on invalid prior parameters
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    data = {name: asdict(getattr(cfg, name)) for name in _BLOCKS}
    data["output_dir"] = cfg.output_dir
    return data
