"""
Configuration for the SIFA experiment suite
Holds every tunable of the algorithms, the domains and the process itself
"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Load environment variables
load_dotenv()


class Statistic(str, Enum):
    """Statistic of a parent's feasible-children fitnesses used as surrogate target"""
    MEAN = "mu"
    MAX = "M"
    MIN = "m"


class EmitterKind(str, Enum):
    """Bin-selection policy of CMAP-Elites"""
    RANDOM = "random"
    OPTIMIZING = "optimizing"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Fi2PopConfig(_Section):
    """Generational loop settings shared by FI-2Pop and CMAP-Elites"""
    generations: int = Field(default=50, ge=1, description="Number of generations")
    offspring_per_generation: int = Field(default=10, ge=1, description="Offspring per population per generation")
    crossover_probability: float = Field(default=0.7, ge=0.0, le=1.0, description="Chance a parent pair is recombined")
    mutation_probability: float = Field(default=0.9, ge=0.0, le=1.0, description="Chance a child is mutated")
    mutation_rate: float = Field(default=0.1, ge=0.0, le=1.0, description="Per-gene mutation probability")
    population_capacity: int = Field(default=20, ge=1, description="Capacity of each FI-2Pop population")
    initial_samples: int = Field(default=20, ge=1, description="Random genomes sampled before the first generation")
    init_attempts: int = Field(default=1000, ge=1, description="Sampling budget while a population is still empty")


class SifaConfig(_Section):
    """Surrogate infeasible fitness acquirement settings"""
    epsilon_init: float = Field(default=0.001, gt=0.0, description="Infeasible fitness before the first model update")
    statistic: Statistic = Field(default=Statistic.MEAN, description="Child-fitness statistic to predict")
    train_epochs_per_update: int = Field(default=5, ge=1, description="Full passes over the ledger per update")
    learning_rate: float = Field(default=0.01, gt=0.0, description="SGD step size")
    hidden_layers: Tuple[int, ...] = Field(default=(32, 32), description="Hidden layer widths")


class GridConfig(_Section):
    """Behavior grid of CMAP-Elites"""
    bins_per_axis: int = Field(default=32, ge=1)
    # None means: take the domain's natural behavior range
    bc1_range: Optional[Tuple[float, float]] = None
    bc2_range: Optional[Tuple[float, float]] = None
    feasible_capacity: int = Field(default=5, ge=1, description="N_f, feasible elites per bin")
    infeasible_capacity: int = Field(default=5, ge=1, description="N_i, infeasible solutions per bin")

    @model_validator(mode="after")
    def _check_ranges(self) -> "GridConfig":
        for name in ("bc1_range", "bc2_range"):
            bounds = getattr(self, name)
            if bounds is not None and not bounds[0] < bounds[1]:
                raise ValueError(f"{name} must satisfy low < high, got {bounds}")
        return self

    def with_ranges(self, bc1: Tuple[float, float], bc2: Tuple[float, float]) -> "GridConfig":
        """Fill unset ranges from the domain"""
        return self.model_copy(update={
            "bc1_range": self.bc1_range or tuple(bc1),
            "bc2_range": self.bc2_range or tuple(bc2),
        })


class BanditConfig(_Section):
    """Epsilon-greedy bandit over (emitter, statistic) arms"""
    epsilon: float = Field(default=0.2, ge=0.0, le=1.0, description="Exploration rate")
    delta: float = Field(default=1e-9, gt=0.0, description="Guard against division by zero in percentage increase")


class FitnessTargets(_Section):
    """Kernel centers/widths of the synthetic feasible fitness"""
    centers: Tuple[float, float, float, float] = (0.5, 0.5, 1.5, 2.0)
    widths: Tuple[float, float, float, float] = (0.2, 0.2, 0.5, 0.8)
    symmetry_weight: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def _check_widths(self) -> "FitnessTargets":
        if any(w <= 0 for w in self.widths):
            raise ValueError("every kernel width must be positive")
        return self


class VoxelConfig(_Section):
    """Voxel spaceship domain"""
    lattice_size: int = Field(default=8, ge=1, description="Edge of the cubic lattice")
    genome_length: int = Field(default=32, ge=1, description="Number of block genes")
    min_active_probability: float = Field(default=0.15, gt=0.0, le=1.0, description="Lowest per-genome active density of random genomes")
    initial_active_probability: float = Field(default=0.5, gt=0.0, le=1.0, description="Highest per-genome active density of random genomes")
    targets: FitnessTargets = Field(default_factory=FitnessTargets)

    @model_validator(mode="after")
    def _check_density(self) -> "VoxelConfig":
        if self.min_active_probability > self.initial_active_probability:
            raise ValueError("min_active_probability must not exceed initial_active_probability")
        return self


class HalfSpace(_Section):
    """Linear constraint a . x <= b"""
    a: List[float]
    b: float = 0.0


class NumericConfig(_Section):
    """Constrained numeric oracle domain"""
    dimension: int = Field(default=2, ge=1)
    lower: float = -5.0
    upper: float = 5.0
    sigma: float = Field(default=0.3, gt=0.0, description="Gaussian mutation width")
    constraints: List[HalfSpace] = Field(default_factory=lambda: [HalfSpace(a=[1.0, 0.0], b=0.0)])

    @model_validator(mode="after")
    def _check(self) -> "NumericConfig":
        if not self.lower < self.upper:
            raise ValueError("lower must be below upper")
        for c in self.constraints:
            if len(c.a) != self.dimension:
                raise ValueError(f"constraint has {len(c.a)} coefficients, dimension is {self.dimension}")
        return self


@dataclass
class SystemConfig:
    """Process-level settings"""
    # Logging
    verbose: bool = os.getenv("SIFA_VERBOSE", "0").lower() in ("1", "true", "yes")
    log_level: str = os.getenv("SIFA_LOG_LEVEL", "INFO")
    log_file: Optional[str] = os.getenv("SIFA_LOG_FILE") or None

    # Outputs
    results_dir: str = os.getenv("SIFA_RESULTS_DIR", "results")

    # Performance
    workers: int = int(os.getenv("SIFA_WORKERS", "1"))  # Seeds run in parallel


# Global config instances
fi2pop_config = Fi2PopConfig()
sifa_config = SifaConfig()
grid_config = GridConfig()
bandit_config = BanditConfig()
voxel_config = VoxelConfig()
numeric_config = NumericConfig()
system_config = SystemConfig()


def setup_logging(config: SystemConfig = system_config) -> None:
    """Configure the root logger from SystemConfig"""
    level = logging.DEBUG if config.verbose else getattr(logging, config.log_level.upper(), logging.INFO)
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if config.log_file:
        handlers.append(logging.FileHandler(config.log_file, mode="a"))
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def get_config_summary() -> dict:
    """Summary of the active default configuration"""
    return {
        "fi2pop": {
            "generations": fi2pop_config.generations,
            "offspring_per_generation": fi2pop_config.offspring_per_generation,
            "population_capacity": fi2pop_config.population_capacity,
        },
        "sifa": {
            "epsilon_init": sifa_config.epsilon_init,
            "statistic": sifa_config.statistic.value,
            "learning_rate": sifa_config.learning_rate,
        },
        "grid": {
            "bins_per_axis": grid_config.bins_per_axis,
            "feasible_capacity": grid_config.feasible_capacity,
            "infeasible_capacity": grid_config.infeasible_capacity,
        },
        "bandit": {
            "epsilon": bandit_config.epsilon,
        },
        "system": {
            "verbose": system_config.verbose,
            "results_dir": system_config.results_dir,
            "workers": system_config.workers,
        },
    }


if __name__ == "__main__":
    import json
    print(json.dumps(get_config_summary(), indent=2))
