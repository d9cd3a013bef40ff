"""
Population machinery shared by FI-2Pop and CMAP-Elites
Solutions, populations, selection, truncation and evaluation
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .errors import EmptyPopulation, PopulationKindError


class FeasibilityKind(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Feasibility:
    """Feasible, or Infeasible(violations) with violations >= 1"""
    kind: FeasibilityKind
    violations: int = 0

    def __post_init__(self):
        if self.kind is FeasibilityKind.INFEASIBLE and self.violations < 1:
            raise ValueError("an infeasible solution violates at least one constraint")
        if self.kind is FeasibilityKind.FEASIBLE and self.violations != 0:
            raise ValueError("a feasible solution has no violations")

    @classmethod
    def feasible(cls) -> "Feasibility":
        return cls(FeasibilityKind.FEASIBLE)

    @classmethod
    def infeasible(cls, violations: int) -> "Feasibility":
        return cls(FeasibilityKind.INFEASIBLE, violations)

    @property
    def is_feasible(self) -> bool:
        return self.kind is FeasibilityKind.FEASIBLE


@dataclass(eq=False)
class Solution:
    """
    A genome together with everything evaluation learned about it

    fitness is the feasible fitness for feasible solutions and the
    policy-assigned infeasible fitness otherwise; it may be reassigned
    later by the surrogate.
    """
    id: int
    genome: Any
    feasibility: Feasibility
    fitness: float
    behavior: Tuple[float, float]
    features: np.ndarray
    parent_ids: List[int] = field(default_factory=list)
    generation_born: int = 0
    phenotype: Any = None

    def __post_init__(self):
        if not self.fitness >= 0.0:
            raise ValueError(f"fitness must be non-negative, got {self.fitness}")

    @property
    def is_feasible(self) -> bool:
        return self.feasibility.is_feasible

    @property
    def violations(self) -> int:
        return self.feasibility.violations


@dataclass
class Population:
    """Bounded list of solutions sharing one feasibility kind"""
    kind: FeasibilityKind
    capacity: int = 20
    members: List[Solution] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        for member in self.members:
            self._check(member)

    def _check(self, solution: Solution) -> None:
        if solution.feasibility.kind is not self.kind:
            raise PopulationKindError(
                f"solution {solution.id} is {solution.feasibility.kind.value}, population is {self.kind.value}"
            )

    def add(self, solution: Solution) -> None:
        self._check(solution)
        self.members.append(solution)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Solution]:
        return iter(self.members)

    @property
    def ids(self) -> List[int]:
        return [m.id for m in self.members]

    def best(self) -> Optional[Solution]:
        if not self.members:
            return None
        return min(self.members, key=rank_key)

    def max_fitness(self) -> float:
        return max((m.fitness for m in self.members), default=0.0)

    def mean_fitness(self) -> float:
        if not self.members:
            return 0.0
        return float(np.mean([m.fitness for m in self.members]))


class RngStream:
    """
    Seeded random stream

    Backed by numpy's PCG64, whose output for a given seed is fixed across
    platforms and numpy releases.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def random(self) -> float:
        return float(self._generator.random())

    def integers(self, low: int, high: Optional[int] = None) -> int:
        """Uniform integer in [low, high), or [0, low) when high is omitted"""
        return int(self._generator.integers(low, high))

    def uniform(self, low: float, high: float, size: Optional[int] = None):
        return self._generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Optional[int] = None):
        return self._generator.normal(loc, scale, size)

    def spawn(self, key: int) -> "RngStream":
        """Independent child stream determined by (seed, key) only"""
        child = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, int(key)])
        return RngStream(int(child.generate_state(1, dtype=np.uint64)[0]))


class IdSource:
    """Monotonic solution ids for one run"""

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)

    def next(self) -> int:
        return next(self._counter)


class Domain(Protocol):
    """Problem plugged into the algorithms"""

    @property
    def feature_dim(self) -> int: ...

    @property
    def behavior_ranges(self) -> Tuple[Tuple[float, float], Tuple[float, float]]: ...

    def random_genome(self, rng: RngStream) -> Any: ...

    def decode(self, genome: Any) -> Any: ...

    def constraint_violations(self, phenotype: Any) -> Sequence[Any]: ...

    def feasible_fitness(self, phenotype: Any) -> float: ...

    def behavior(self, phenotype: Any) -> Tuple[float, float]: ...

    def features(self, phenotype: Any) -> np.ndarray: ...

    def crossover(self, a: Any, b: Any, rng: RngStream) -> Tuple[Any, Any]: ...

    def mutate(self, genome: Any, rate: float, rng: RngStream) -> Any: ...


def rank_key(solution: Solution) -> Tuple[float, int]:
    # fitness descending, then older (lower id) first
    return (-solution.fitness, solution.id)


def select_parents(pop: Population, n: int, rng: RngStream) -> List[Solution]:
    """
    Binary tournament selection with replacement

    Args:
        pop: Population to draw from
        n: Number of parents
        rng: Random stream

    Returns:
        n parents; each is the fitter of two uniform draws, ties going to the lower id
    """
    if len(pop) == 0:
        raise EmptyPopulation(f"cannot select from an empty {pop.kind.value} population")
    if n < 1:
        raise ValueError("n must be at least 1")
    members = pop.members
    parents = []
    for _ in range(n):
        a = members[rng.integers(len(members))]
        b = members[rng.integers(len(members))]
        parents.append(min(a, b, key=rank_key))
    return parents


def truncate(pop: Population) -> Population:
    """Keep the `capacity` fittest members, fitness-descending, ties to the lower id"""
    survivors = sorted(pop.members, key=rank_key)[:pop.capacity]
    return Population(kind=pop.kind, capacity=pop.capacity, members=survivors)


def evaluate(
    genome: Any,
    domain: Domain,
    solution_id: int,
    generation: int = 0,
    parent_ids: Sequence[int] = (),
) -> Solution:
    """
    Decode and assess a genome

    Infeasible solutions come back with fitness 0.0; the caller's
    infeasible-fitness policy assigns the real value.

    Raises:
        InvalidGenome: the domain cannot decode the genome
    """
    phenotype = domain.decode(genome)
    violations = len(domain.constraint_violations(phenotype))
    if violations == 0:
        feasibility = Feasibility.feasible()
        fitness = float(domain.feasible_fitness(phenotype))
    else:
        feasibility = Feasibility.infeasible(violations)
        fitness = 0.0
    return Solution(
        id=solution_id,
        genome=genome,
        feasibility=feasibility,
        fitness=fitness,
        behavior=tuple(float(v) for v in domain.behavior(phenotype)),
        features=np.asarray(domain.features(phenotype), dtype=float),
        parent_ids=list(parent_ids),
        generation_born=generation,
        phenotype=phenotype,
    )
