"""
FI-2Pop
Feasible and infeasible populations evolved side by side; offspring are
routed by their own feasibility, infeasible fitness comes from a pluggable
policy
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .config import Fi2PopConfig, fi2pop_config
from .errors import EmptyRun, InitFailure, NotInfeasible
from .population import (
    Domain,
    FeasibilityKind,
    IdSource,
    Population,
    RngStream,
    Solution,
    evaluate,
    select_parents,
    truncate,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OffspringEvent:
    """One (parent, child) edge produced by a generation"""
    parent_id: int
    parent_feasible: bool
    parent_features: np.ndarray
    child_id: int
    child_feasible: bool
    child_fitness: float
    generation: int


@dataclass
class GenerationRecord:
    generation: int
    elite_feasible_fitness: float
    avg_feasible_fitness: float
    elite_infeasible_fitness: float
    avg_infeasible_fitness: float
    feasible_size: int
    infeasible_size: int
    coverage: Optional[float] = None  # CMAP-Elites only
    arm: Optional[str] = None         # bandit-driven runs only


@dataclass
class Fi2PopResult:
    records: List[GenerationRecord]
    feasible: Population
    infeasible: Population
    elite: Optional[Solution]


class InfeasibleFitnessPolicy(Protocol):
    """How infeasible solutions get their fitness"""

    def assign(self, solution: Solution) -> float:
        """Fitness for a freshly evaluated infeasible solution"""
        ...

    def observe(self, events: Sequence[OffspringEvent], populations: Sequence[Population]) -> None:
        """Called once per generation after offspring are routed, before truncation"""
        ...


def standard_infeasible_fitness(violations: int) -> float:
    """Inverse of the number of violated constraints"""
    if violations < 1:
        raise NotInfeasible("a solution without violations has no infeasible fitness")
    return 1.0 / violations


class StandardPolicy:
    """Classic FI-2Pop: infeasible fitness is 1 / violations"""
    name = "standard"

    def assign(self, solution: Solution) -> float:
        return standard_infeasible_fitness(solution.violations)

    def observe(self, events: Sequence[OffspringEvent], populations: Sequence[Population]) -> None:
        pass


def breed(
    pop: Population,
    n: int,
    domain: Domain,
    cfg: Fi2PopConfig,
    rng: RngStream,
    ids: IdSource,
    generation: int,
) -> List[Tuple[Solution, Solution]]:
    """
    Produce n evaluated children from one population

    Parents are paired; each pair is recombined with crossover_probability
    and every child is mutated with mutation_probability. A child is
    attributed to the parent whose genome prefix it carries.

    Returns:
        (primary parent, child) pairs
    """
    parents = select_parents(pop, n + n % 2, rng)
    offspring: List[Tuple[Solution, Solution]] = []
    for a, b in zip(parents[0::2], parents[1::2]):
        if rng.random() < cfg.crossover_probability:
            genome_a, genome_b = domain.crossover(a.genome, b.genome, rng)
        else:
            genome_a, genome_b = a.genome, b.genome
        for parent, other, genome in ((a, b, genome_a), (b, a, genome_b)):
            if rng.random() < cfg.mutation_probability:
                genome = domain.mutate(genome, cfg.mutation_rate, rng)
            child = evaluate(
                genome, domain, ids.next(), generation,
                parent_ids=list(dict.fromkeys((parent.id, other.id))),
            )
            offspring.append((parent, child))
    return offspring[:n]


def assign_infeasible(solution: Solution, policy: InfeasibleFitnessPolicy) -> Solution:
    if not solution.is_feasible:
        solution.fitness = policy.assign(solution)
    return solution


def make_event(parent: Solution, child: Solution, generation: int) -> OffspringEvent:
    return OffspringEvent(
        parent_id=parent.id,
        parent_feasible=parent.is_feasible,
        parent_features=parent.features,
        child_id=child.id,
        child_feasible=child.is_feasible,
        child_fitness=child.fitness,
        generation=generation,
    )


def step_generation(
    feas: Population,
    infeas: Population,
    domain: Domain,
    policy: InfeasibleFitnessPolicy,
    cfg: Fi2PopConfig = fi2pop_config,
    rng: Optional[RngStream] = None,
    ids: Optional[IdSource] = None,
    generation: int = 1,
) -> Tuple[Population, Population, List[OffspringEvent]]:
    """
    One FI-2Pop generation

    Each non-empty population breeds offspring_per_generation children from
    its own parents. Children join the population matching their
    feasibility, the policy observes the generation's events, then both
    populations are truncated.

    Returns:
        (feasible population, infeasible population, offspring events)
    """
    if len(feas) == 0 and len(infeas) == 0:
        raise EmptyRun("both populations are empty")
    rng = rng or RngStream(0)
    if ids is None:
        ids = IdSource(max(feas.ids + infeas.ids, default=-1) + 1)

    offspring: List[Tuple[Solution, Solution]] = []
    for pop in (feas, infeas):
        if len(pop):
            offspring += breed(pop, cfg.offspring_per_generation, domain, cfg, rng, ids, generation)

    next_feas = Population(FeasibilityKind.FEASIBLE, feas.capacity, list(feas.members))
    next_infeas = Population(FeasibilityKind.INFEASIBLE, infeas.capacity, list(infeas.members))
    events = []
    for parent, child in offspring:
        assign_infeasible(child, policy)
        (next_feas if child.is_feasible else next_infeas).add(child)
        events.append(make_event(parent, child, generation))

    policy.observe(events, [next_infeas])
    return truncate(next_feas), truncate(next_infeas), events


def initialize(
    domain: Domain,
    policy: InfeasibleFitnessPolicy,
    cfg: Fi2PopConfig,
    rng: RngStream,
    ids: IdSource,
) -> Tuple[Population, Population]:
    """
    Seed both populations from one stream of random genomes

    Samples at least initial_samples genomes and keeps going while either
    population is empty, up to init_attempts.
    """
    feas = Population(FeasibilityKind.FEASIBLE, cfg.population_capacity)
    infeas = Population(FeasibilityKind.INFEASIBLE, cfg.population_capacity)
    attempts = 0
    while attempts < cfg.init_attempts and (
        attempts < cfg.initial_samples or len(feas) == 0 or len(infeas) == 0
    ):
        solution = assign_infeasible(evaluate(domain.random_genome(rng), domain, ids.next(), 0), policy)
        (feas if solution.is_feasible else infeas).add(solution)
        attempts += 1
    if len(feas) == 0 and len(infeas) == 0:
        raise InitFailure(f"no solution produced in {attempts} attempts")
    logger.debug("Initialized after %d samples: %d feasible, %d infeasible", attempts, len(feas), len(infeas))
    return truncate(feas), truncate(infeas)


def make_record(
    generation: int,
    feas: Population,
    infeas: Population,
    elite_fitness: float,
) -> GenerationRecord:
    return GenerationRecord(
        generation=generation,
        elite_feasible_fitness=elite_fitness,
        avg_feasible_fitness=feas.mean_fitness(),
        elite_infeasible_fitness=infeas.max_fitness(),
        avg_infeasible_fitness=infeas.mean_fitness(),
        feasible_size=len(feas),
        infeasible_size=len(infeas),
    )


def run(
    domain: Domain,
    policy: InfeasibleFitnessPolicy,
    cfg: Fi2PopConfig = fi2pop_config,
    rng: Optional[RngStream] = None,
) -> Fi2PopResult:
    """
    Full FI-2Pop run

    Args:
        domain: Problem to optimize
        policy: Infeasible fitness policy (StandardPolicy or SifaPolicy)
        cfg: Loop settings
        rng: Random stream; the whole run is a function of its seed

    Returns:
        Fi2PopResult with one GenerationRecord per generation; the elite is
        the fittest feasible solution ever retained
    """
    rng = rng or RngStream(0)
    ids = IdSource()
    feas, infeas = initialize(domain, policy, cfg, rng, ids)
    elite = feas.best()

    records = []
    for generation in range(1, cfg.generations + 1):
        feas, infeas, events = step_generation(feas, infeas, domain, policy, cfg, rng, ids, generation)
        best = feas.best()
        if best is not None and (elite is None or best.fitness > elite.fitness):
            elite = best
        record = make_record(generation, feas, infeas, elite.fitness if elite else 0.0)
        records.append(record)
        logger.debug(
            "gen %d: elite %.4f avg %.4f | infeasible top %.4f avg %.4f | sizes %d/%d",
            generation, record.elite_feasible_fitness, record.avg_feasible_fitness,
            record.elite_infeasible_fitness, record.avg_infeasible_fitness,
            record.feasible_size, record.infeasible_size,
        )
    return Fi2PopResult(records=records, feasible=feas, infeasible=infeas, elite=elite)
