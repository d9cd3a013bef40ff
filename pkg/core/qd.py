"""
CMAP-Elites
A behavior grid whose bins hold a feasible and an infeasible subpopulation,
random and optimizing emitters, and an epsilon-greedy bandit choosing the
(emitter, statistic) pair each generation
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import (
    BanditConfig,
    EmitterKind,
    Fi2PopConfig,
    GridConfig,
    Statistic,
    bandit_config,
    fi2pop_config,
    grid_config,
)
from .errors import BanditError, EmptyGrid, InitFailure, InvalidBehavior
from .fi2pop import (
    GenerationRecord,
    InfeasibleFitnessPolicy,
    OffspringEvent,
    assign_infeasible,
    breed,
    make_event,
)
from .population import (
    Domain,
    FeasibilityKind,
    IdSource,
    Population,
    RngStream,
    Solution,
    evaluate,
    truncate,
)

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

GRID_COLUMNS = ["i", "j", "best_feasible_fitness", "feasible_count", "infeasible_count"]


@dataclass
class Bin:
    cell: Cell
    feasible: Population
    infeasible: Population

    def is_empty(self) -> bool:
        return len(self.feasible) == 0 and len(self.infeasible) == 0

    def best_fitness(self) -> float:
        """Best fitness over both subpopulations; an empty side contributes nothing"""
        return max((m.fitness for m in (*self.feasible, *self.infeasible)), default=-math.inf)


class Grid:
    """bins_per_axis x bins_per_axis bins, created on first use"""

    def __init__(self, cfg: GridConfig = grid_config):
        if cfg.bc1_range is None or cfg.bc2_range is None:
            raise ValueError("grid needs both behavior ranges; see GridConfig.with_ranges")
        self.cfg = cfg
        self.bins: Dict[Cell, Bin] = {}

    @property
    def size(self) -> int:
        return self.cfg.bins_per_axis ** 2

    def bin(self, cell: Cell) -> Bin:
        b = self.bins.get(cell)
        if b is None:
            b = Bin(
                cell=cell,
                feasible=Population(FeasibilityKind.FEASIBLE, self.cfg.feasible_capacity),
                infeasible=Population(FeasibilityKind.INFEASIBLE, self.cfg.infeasible_capacity),
            )
            self.bins[cell] = b
        return b

    def non_empty_bins(self) -> List[Bin]:
        """Non-empty bins in lexicographic cell order"""
        return [self.bins[c] for c in sorted(self.bins) if not self.bins[c].is_empty()]

    def solutions(self) -> Iterator[Solution]:
        for b in self.non_empty_bins():
            yield from b.feasible
            yield from b.infeasible

    def feasible_solutions(self) -> List[Solution]:
        return [m for b in self.non_empty_bins() for m in b.feasible]

    def infeasible_solutions(self) -> List[Solution]:
        return [m for b in self.non_empty_bins() for m in b.infeasible]

    def infeasible_populations(self) -> List[Population]:
        return [b.infeasible for b in self.non_empty_bins() if len(b.infeasible)]

    def elite(self) -> Optional[Solution]:
        feasible = self.feasible_solutions()
        if not feasible:
            return None
        return min(feasible, key=lambda s: (-s.fitness, s.id))

    def export(self, path: Union[str, Path]) -> Path:
        """Snapshot: one row per non-empty cell; best is blank without feasible members"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = [
            {
                "i": b.cell[0],
                "j": b.cell[1],
                "best_feasible_fitness": b.feasible.max_fitness() if len(b.feasible) else None,
                "feasible_count": len(b.feasible),
                "infeasible_count": len(b.infeasible),
            }
            for b in self.non_empty_bins()
        ]
        pd.DataFrame(rows, columns=GRID_COLUMNS).to_csv(path, index=False)
        return path


def _axis_index(value: float, bounds: Tuple[float, float], n: int) -> int:
    lo, hi = bounds
    if value <= lo:
        return 0
    if value >= hi:
        return n - 1
    return min(int((value - lo) / (hi - lo) * n), n - 1)


def bin_index(bc: Sequence[float], grid_cfg: GridConfig = grid_config) -> Cell:
    """Uniform partition of each range; out-of-range values clamp to the boundary cell"""
    if len(bc) != 2 or not all(math.isfinite(v) for v in bc):
        raise InvalidBehavior(f"behavior must be two finite values, got {bc!r}")
    n = grid_cfg.bins_per_axis
    return (_axis_index(bc[0], grid_cfg.bc1_range, n), _axis_index(bc[1], grid_cfg.bc2_range, n))


def insert(grid: Grid, solution: Solution) -> Grid:
    """Place a solution in its own cell's matching subpopulation, then truncate it"""
    b = grid.bin(bin_index(solution.behavior, grid.cfg))
    if solution.is_feasible:
        b.feasible.add(solution)
        b.feasible = truncate(b.feasible)
    else:
        b.infeasible.add(solution)
        b.infeasible = truncate(b.infeasible)
    return grid


def random_emitter(grid: Grid, rng: RngStream) -> Bin:
    """Uniform choice over non-empty bins"""
    candidates = grid.non_empty_bins()
    if not candidates:
        raise EmptyGrid("no bin holds a solution")
    return candidates[rng.integers(len(candidates))]


def optimizing_emitter(grid: Grid) -> Bin:
    """Bin with the highest subpopulation best; ties go to the smallest (i, j)"""
    candidates = grid.non_empty_bins()
    if not candidates:
        raise EmptyGrid("no bin holds a solution")
    best = candidates[0]
    for b in candidates[1:]:
        if b.best_fitness() > best.best_fitness():
            best = b
    return best


def coverage(grid: Grid) -> float:
    """Fraction of all cells holding at least one feasible solution"""
    covered = sum(1 for b in grid.bins.values() if len(b.feasible))
    return covered / grid.size


def select_bin(grid: Grid, emitter: EmitterKind, rng: RngStream) -> Bin:
    if emitter is EmitterKind.OPTIMIZING:
        return optimizing_emitter(grid)
    return random_emitter(grid, rng)


def step(
    grid: Grid,
    emitter: EmitterKind,
    domain: Domain,
    policy: InfeasibleFitnessPolicy,
    cfg: Fi2PopConfig = fi2pop_config,
    rng: Optional[RngStream] = None,
    ids: Optional[IdSource] = None,
    generation: int = 1,
) -> Tuple[Grid, List[OffspringEvent]]:
    """
    One CMAP-Elites generation

    The emitter picks a bin; its feasible and infeasible subpopulations each
    breed offspring_per_generation children, which are inserted grid-wide
    by their own behavior.
    """
    rng = rng or RngStream(0)
    if ids is None:
        ids = IdSource(max((s.id for s in grid.solutions()), default=-1) + 1)
    selected = select_bin(grid, emitter, rng)

    offspring: List[Tuple[Solution, Solution]] = []
    for pop in (selected.feasible, selected.infeasible):
        if len(pop):
            offspring += breed(pop, cfg.offspring_per_generation, domain, cfg, rng, ids, generation)

    events = []
    for parent, child in offspring:
        insert(grid, assign_infeasible(child, policy))
        events.append(make_event(parent, child, generation))
    policy.observe(events, grid.infeasible_populations())
    return grid, events


# ---------------------------------------------------------------------------
# Epsilon-greedy bandit
# ---------------------------------------------------------------------------

Arm = Tuple[EmitterKind, Statistic]


def default_arms() -> List[Arm]:
    """{random, optimizing} x {mean, max, min}"""
    return list(product(
        (EmitterKind.RANDOM, EmitterKind.OPTIMIZING),
        (Statistic.MEAN, Statistic.MAX, Statistic.MIN),
    ))


def arm_label(arm: Arm) -> str:
    emitter, statistic = arm
    return f"{emitter.value}:{statistic.value}"


@dataclass
class BanditState:
    arms: List[Arm]
    epsilon: float = 0.2
    delta: float = 1e-9
    value_estimates: List[float] = field(default_factory=list)
    pull_counts: List[int] = field(default_factory=list)
    previous_avg_feasible_fitness: float = 0.0
    previous_coverage: float = 0.0
    last_arm: Optional[int] = None
    rewards: Dict[int, List[float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.arms:
            raise ValueError("bandit needs at least one arm")
        if not self.value_estimates:
            self.value_estimates = [0.0] * len(self.arms)
        if not self.pull_counts:
            self.pull_counts = [0] * len(self.arms)

    @classmethod
    def from_config(cls, cfg: BanditConfig = bandit_config, arms: Optional[List[Arm]] = None) -> "BanditState":
        return cls(arms=arms or default_arms(), epsilon=cfg.epsilon, delta=cfg.delta)


def bandit_select(state: BanditState, rng: RngStream) -> int:
    """With probability epsilon a uniform arm, otherwise the best estimate (lowest index on ties)"""
    if rng.random() < state.epsilon:
        arm = rng.integers(len(state.arms))
    else:
        arm = int(np.argmax(state.value_estimates))
    state.last_arm = arm
    return arm


def percentage_increase(new: float, previous: float, delta: float = 1e-9) -> float:
    return (new - previous) / max(previous, delta)


def bandit_update(
    state: BanditState,
    arm: int,
    new_avg_feasible_fitness: float,
    new_coverage: float,
) -> BanditState:
    """
    Reward the arm with the percentage increase of average feasible fitness
    plus the percentage increase of coverage
    """
    if state.last_arm is not None and arm != state.last_arm:
        raise BanditError(f"arm {arm} updated but arm {state.last_arm} was selected")
    reward = (
        percentage_increase(new_avg_feasible_fitness, state.previous_avg_feasible_fitness, state.delta)
        + percentage_increase(new_coverage, state.previous_coverage, state.delta)
    )
    state.pull_counts[arm] += 1
    state.value_estimates[arm] += (reward - state.value_estimates[arm]) / state.pull_counts[arm]
    state.rewards.setdefault(arm, []).append(reward)
    state.previous_avg_feasible_fitness = new_avg_feasible_fitness
    state.previous_coverage = new_coverage
    return state


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class CmapResult:
    records: List[GenerationRecord]
    grid: Grid
    elite: Optional[Solution]


def avg_feasible_fitness(grid: Grid) -> float:
    feasible = grid.feasible_solutions()
    if not feasible:
        return 0.0
    return float(np.mean([s.fitness for s in feasible]))


def grid_record(generation: int, grid: Grid, arm: Optional[str] = None) -> GenerationRecord:
    feasible = [s.fitness for s in grid.feasible_solutions()]
    infeasible = [s.fitness for s in grid.infeasible_solutions()]
    return GenerationRecord(
        generation=generation,
        elite_feasible_fitness=max(feasible, default=0.0),
        avg_feasible_fitness=float(np.mean(feasible)) if feasible else 0.0,
        elite_infeasible_fitness=max(infeasible, default=0.0),
        avg_infeasible_fitness=float(np.mean(infeasible)) if infeasible else 0.0,
        feasible_size=len(feasible),
        infeasible_size=len(infeasible),
        coverage=coverage(grid),
        arm=arm,
    )


def initialize_grid(
    domain: Domain,
    policy: InfeasibleFitnessPolicy,
    cfg: Fi2PopConfig,
    grid_cfg: GridConfig,
    rng: RngStream,
    ids: IdSource,
) -> Grid:
    """Insert random genomes until initial_samples are placed and some bin is non-empty"""
    grid = Grid(grid_cfg)
    attempts = 0
    while attempts < cfg.init_attempts and (attempts < cfg.initial_samples or not grid.non_empty_bins()):
        insert(grid, assign_infeasible(evaluate(domain.random_genome(rng), domain, ids.next(), 0), policy))
        attempts += 1
    if not grid.non_empty_bins():
        raise InitFailure(f"no solution placed in {attempts} attempts")
    return grid


def run_cmap_elites(
    domain: Domain,
    policy: InfeasibleFitnessPolicy,
    cfg: Fi2PopConfig = fi2pop_config,
    grid_cfg: GridConfig = grid_config,
    rng: Optional[RngStream] = None,
    emitter: EmitterKind = EmitterKind.RANDOM,
    bandit: Optional[BanditState] = None,
) -> CmapResult:
    """
    Full CMAP-Elites run

    With a bandit, each generation's arm fixes both the emitter and, for a
    SIFA policy, the statistic the surrogate is trained on.
    """
    rng = rng or RngStream(0)
    grid_cfg = grid_cfg.with_ranges(*domain.behavior_ranges)
    ids = IdSource()
    grid = initialize_grid(domain, policy, cfg, grid_cfg, rng, ids)
    if bandit is not None:
        bandit.previous_avg_feasible_fitness = avg_feasible_fitness(grid)
        bandit.previous_coverage = coverage(grid)

    records = []
    for generation in range(1, cfg.generations + 1):
        label = None
        current = emitter
        if bandit is not None:
            arm = bandit_select(bandit, rng)
            current, statistic = bandit.arms[arm]
            if hasattr(policy, "statistic"):
                policy.statistic = statistic
            label = arm_label(bandit.arms[arm])
        grid, _ = step(grid, current, domain, policy, cfg, rng, ids, generation)
        if bandit is not None:
            bandit_update(bandit, arm, avg_feasible_fitness(grid), coverage(grid))
        record = grid_record(generation, grid, label)
        records.append(record)
        logger.debug(
            "gen %d%s: elite %.4f avg %.4f coverage %.4f",
            generation, f" [{label}]" if label else "",
            record.elite_feasible_fitness, record.avg_feasible_fitness, record.coverage,
        )
    return CmapResult(records=records, grid=grid, elite=grid.elite())
