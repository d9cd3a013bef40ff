"""
Problem domains
A voxel spaceship domain with hard block constraints and a soft symmetry
bonus, and a linear-constrained numeric domain whose ground truth is easy to
check by hand
"""

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np

from .config import FitnessTargets, NumericConfig, VoxelConfig, numeric_config, voxel_config
from .errors import GenomeMismatch, InvalidGenome, InvalidStructure
from .population import RngStream


# ---------------------------------------------------------------------------
# Voxel spaceships
# ---------------------------------------------------------------------------

class BlockType(str, Enum):
    COCKPIT = "cockpit"
    ENGINE = "engine"
    THRUSTER = "thruster"
    ARMOR = "armor"
    CONTAINER = "container"

    @property
    def functional(self) -> bool:
        return self in REQUIRED_BLOCKS


BLOCK_TYPES: Tuple[BlockType, ...] = tuple(BlockType)
REQUIRED_BLOCKS = frozenset({BlockType.COCKPIT, BlockType.ENGINE, BlockType.THRUSTER})


class Gene(NamedTuple):
    x: int
    y: int
    z: int
    block_type: BlockType
    active: bool


class Block(NamedTuple):
    x: int
    y: int
    z: int
    block_type: BlockType

    @property
    def cell(self) -> Tuple[int, int, int]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class VoxelGenome:
    genes: Tuple[Gene, ...]

    def __len__(self) -> int:
        return len(self.genes)

    @property
    def active_count(self) -> int:
        return sum(1 for g in self.genes if g.active)


@dataclass(frozen=True)
class VoxelStructure:
    """Blocks on a bounded lattice; colocated blocks are kept"""
    blocks: Tuple[Block, ...]
    lattice_size: int = 8

    @property
    def cells(self) -> frozenset:
        return frozenset(b.cell for b in self.blocks)


@dataclass(frozen=True)
class MetricVector:
    functional_ratio: float  # m1
    fill_ratio: float        # m2
    major_medium: float      # m3
    major_smallest: float    # m4

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.functional_ratio, self.fill_ratio, self.major_medium, self.major_smallest)


@dataclass(frozen=True)
class Violation:
    kind: str  # "intersection" or "missing"
    detail: str


def decode(genome: VoxelGenome, lattice_size: int = 8) -> VoxelStructure:
    """One block per active gene, coordinates clamped into the lattice"""
    if not isinstance(genome, VoxelGenome):
        raise InvalidGenome(f"expected VoxelGenome, got {type(genome).__name__}")
    top = lattice_size - 1
    blocks = tuple(
        Block(min(max(g.x, 0), top), min(max(g.y, 0), top), min(max(g.z, 0), top), g.block_type)
        for g in genome.genes
        if g.active
    )
    if not blocks:
        raise InvalidGenome("genome has no active genes")
    return VoxelStructure(blocks=blocks, lattice_size=lattice_size)


def _occupancy(structure: VoxelStructure) -> Counter:
    return Counter(b.cell for b in structure.blocks)


def constraint_violations(structure: VoxelStructure) -> List[Violation]:
    """
    Hard constraints only: one violation per cell holding two or more blocks,
    one per required block type that is absent
    """
    violations = [
        Violation("intersection", f"{cell} holds {count} blocks")
        for cell, count in sorted(_occupancy(structure).items())
        if count >= 2
    ]
    present = {b.block_type for b in structure.blocks}
    violations.extend(
        Violation("missing", t.value) for t in BLOCK_TYPES if t in REQUIRED_BLOCKS and t not in present
    )
    return violations


def _extents(structure: VoxelStructure) -> np.ndarray:
    coords = np.array([b.cell for b in structure.blocks])
    return coords.max(axis=0) - coords.min(axis=0) + 1


def metrics(structure: VoxelStructure) -> MetricVector:
    if not structure.blocks:
        raise InvalidStructure("structure has no blocks")
    extents = _extents(structure)
    major, medium, smallest = sorted((int(e) for e in extents), reverse=True)
    functional = sum(1 for b in structure.blocks if b.block_type.functional)
    return MetricVector(
        functional_ratio=functional / len(structure.blocks),
        fill_ratio=len(structure.cells) / float(np.prod(extents)),
        major_medium=major / medium,
        major_smallest=major / smallest,
    )


def symmetry(structure: VoxelStructure) -> float:
    """
    Best overlap over the three reflections about the bounding-box mid-planes

    Fraction of filled cells whose mirror image is also filled; block types
    are ignored.
    """
    if not structure.blocks:
        raise InvalidStructure("structure has no blocks")
    cells = structure.cells
    coords = np.array(sorted(cells))
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    best = 0.0
    for axis in range(3):
        mirrored = coords.copy()
        mirrored[:, axis] = lo[axis] + hi[axis] - coords[:, axis]
        hits = sum(1 for row in mirrored if tuple(int(v) for v in row) in cells)
        best = max(best, hits / len(cells))
    return best


def feasible_fitness(mv: MetricVector, structure: VoxelStructure, targets: FitnessTargets) -> float:
    """Sum of Gaussian kernels around the metric targets plus the weighted symmetry bonus"""
    total = 0.0
    for value, center, width in zip(mv.as_tuple(), targets.centers, targets.widths):
        total += math.exp(-((value - center) ** 2) / (2.0 * width ** 2))
    return total + targets.symmetry_weight * symmetry(structure)


def behavior(mv: MetricVector) -> Tuple[float, float]:
    return (mv.major_medium, mv.major_smallest)


def features(structure: VoxelStructure, genome_length: int = 32) -> np.ndarray:
    """
    12 values in [0,1]: per-type counts, block total, the four metrics,
    intersection count and missing-required count
    """
    if not structure.blocks:
        raise InvalidStructure("structure has no blocks")
    mv = metrics(structure)
    type_counts = Counter(b.block_type for b in structure.blocks)
    occupancy = _occupancy(structure)
    intersections = sum(1 for count in occupancy.values() if count >= 2)
    present = set(type_counts)
    missing = sum(1 for t in REQUIRED_BLOCKS if t not in present)
    lattice = float(structure.lattice_size)
    vector = [type_counts.get(t, 0) / genome_length for t in BLOCK_TYPES]
    vector += [
        len(structure.blocks) / genome_length,
        mv.functional_ratio,
        mv.fill_ratio,
        mv.major_medium / lattice,
        mv.major_smallest / lattice,
        intersections / max(1, genome_length // 2),
        missing / len(REQUIRED_BLOCKS),
    ]
    return np.clip(np.asarray(vector, dtype=float), 0.0, 1.0)


def one_point_crossover(a: VoxelGenome, b: VoxelGenome, cut: int) -> Tuple[VoxelGenome, VoxelGenome]:
    """Children a[:cut] + b[cut:] and b[:cut] + a[cut:]"""
    if len(a) != len(b):
        raise GenomeMismatch(f"genome lengths differ: {len(a)} vs {len(b)}")
    return (
        VoxelGenome(a.genes[:cut] + b.genes[cut:]),
        VoxelGenome(b.genes[:cut] + a.genes[cut:]),
    )


def crossover(a: VoxelGenome, b: VoxelGenome, rng: RngStream) -> Tuple[VoxelGenome, VoxelGenome]:
    if len(a) != len(b):
        raise GenomeMismatch(f"genome lengths differ: {len(a)} vs {len(b)}")
    return one_point_crossover(a, b, rng.integers(len(a)))


def _repair(genes: List[Gene], rng: RngStream) -> List[Gene]:
    if not any(g.active for g in genes):
        i = rng.integers(len(genes))
        genes[i] = genes[i]._replace(active=True)
    return genes


def mutate(genome: VoxelGenome, rate: float, rng: RngStream, lattice_size: int = 8) -> VoxelGenome:
    """
    Perturb each gene with probability `rate`

    A mutation flips the active flag (1/4 of mutations), nudges one
    coordinate by one cell, or re-draws the block type. At least one gene
    stays active.
    """
    top = lattice_size - 1
    genes = list(genome.genes)
    for i, gene in enumerate(genes):
        if rng.random() >= rate:
            continue
        roll = rng.random()
        if roll < 0.25:
            genes[i] = gene._replace(active=not gene.active)
        elif roll < 0.625:
            axis = "xyz"[rng.integers(3)]
            step = 1 if rng.integers(2) else -1
            value = min(max(getattr(gene, axis) + step, 0), top)
            genes[i] = gene._replace(**{axis: value})
        else:
            genes[i] = gene._replace(block_type=BLOCK_TYPES[rng.integers(len(BLOCK_TYPES))])
    return VoxelGenome(tuple(_repair(genes, rng)))


def random_genome(rng: RngStream, config: VoxelConfig = voxel_config) -> VoxelGenome:
    """
    Genes scattered inside a random sub-box of the lattice

    Every axis of the box draws its own extent and every genome its own
    active density, so samples range from dense cubes to sparse rods and
    slabs.
    """
    size = config.lattice_size
    extents = [1 + rng.integers(size) for _ in range(3)]
    origin = [rng.integers(size - e + 1) for e in extents]
    density = rng.uniform(config.min_active_probability, config.initial_active_probability)
    genes = [
        Gene(
            x=origin[0] + rng.integers(extents[0]),
            y=origin[1] + rng.integers(extents[1]),
            z=origin[2] + rng.integers(extents[2]),
            block_type=BLOCK_TYPES[rng.integers(len(BLOCK_TYPES))],
            active=rng.random() < density,
        )
        for _ in range(config.genome_length)
    ]
    return VoxelGenome(tuple(_repair(genes, rng)))


def export_structure(structure: VoxelStructure, path: Union[str, Path]) -> Path:
    """Write one `x y z TYPE` line per block"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{b.x} {b.y} {b.z} {b.block_type.name}" for b in structure.blocks]
    path.write_text("\n".join(lines) + "\n")
    return path


class VoxelDomain:
    """Spaceship domain bound to a VoxelConfig"""

    def __init__(self, config: VoxelConfig = voxel_config):
        self.config = config

    @property
    def feature_dim(self) -> int:
        return 12

    @property
    def behavior_ranges(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        return ((1.0, 5.0), (1.0, 5.0))

    def random_genome(self, rng: RngStream) -> VoxelGenome:
        return random_genome(rng, self.config)

    def decode(self, genome: VoxelGenome) -> VoxelStructure:
        return decode(genome, self.config.lattice_size)

    def constraint_violations(self, structure: VoxelStructure) -> List[Violation]:
        return constraint_violations(structure)

    def feasible_fitness(self, structure: VoxelStructure) -> float:
        return feasible_fitness(metrics(structure), structure, self.config.targets)

    def behavior(self, structure: VoxelStructure) -> Tuple[float, float]:
        return behavior(metrics(structure))

    def features(self, structure: VoxelStructure) -> np.ndarray:
        return features(structure, self.config.genome_length)

    def crossover(self, a: VoxelGenome, b: VoxelGenome, rng: RngStream) -> Tuple[VoxelGenome, VoxelGenome]:
        return crossover(a, b, rng)

    def mutate(self, genome: VoxelGenome, rate: float, rng: RngStream) -> VoxelGenome:
        return mutate(genome, rate, rng, self.config.lattice_size)


# ---------------------------------------------------------------------------
# Numeric oracle domain
# ---------------------------------------------------------------------------

class NumericDomain:
    """
    x in [lower, upper]^d, fitness exp(-|x|^2 / 2d), constraints a_j . x <= b_j

    The genome is the vector itself. For d = 1 both behavior components are x_1.
    """

    def __init__(self, config: NumericConfig = numeric_config):
        self.config = config
        self._a = np.array([c.a for c in config.constraints], dtype=float).reshape(-1, config.dimension)
        self._b = np.array([c.b for c in config.constraints], dtype=float)

    @property
    def feature_dim(self) -> int:
        return self.config.dimension

    @property
    def behavior_ranges(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        span = (self.config.lower, self.config.upper)
        return (span, span)

    def random_genome(self, rng: RngStream) -> np.ndarray:
        return np.asarray(rng.uniform(self.config.lower, self.config.upper, self.config.dimension), dtype=float)

    def decode(self, genome: Sequence[float]) -> np.ndarray:
        try:
            x = np.asarray(genome, dtype=float)
        except (TypeError, ValueError) as e:
            raise InvalidGenome(f"not a numeric vector: {e}") from e
        if x.shape != (self.config.dimension,) or not np.all(np.isfinite(x)):
            raise InvalidGenome(f"expected {self.config.dimension} finite values, got shape {x.shape}")
        return x

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        """g_j(x) = a_j . x - b_j"""
        return self._a @ x - self._b

    def constraint_violations(self, x: np.ndarray) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.constraint_values(x) > 0.0)]

    def feasible_fitness(self, x: np.ndarray) -> float:
        return float(np.exp(-float(x @ x) / (2.0 * self.config.dimension)))

    def behavior(self, x: np.ndarray) -> Tuple[float, float]:
        clipped = np.clip(x, self.config.lower, self.config.upper)
        second = clipped[1] if self.config.dimension >= 2 else clipped[0]
        return (float(clipped[0]), float(second))

    def features(self, x: np.ndarray) -> np.ndarray:
        return (x - self.config.lower) / (self.config.upper - self.config.lower)

    def crossover(self, a: np.ndarray, b: np.ndarray, rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
        """Uniform blend with one random weight"""
        if np.shape(a) != np.shape(b):
            raise GenomeMismatch(f"genome shapes differ: {np.shape(a)} vs {np.shape(b)}")
        w = rng.random()
        return w * a + (1.0 - w) * b, (1.0 - w) * a + w * b

    def mutate(self, genome: np.ndarray, rate: float, rng: RngStream) -> np.ndarray:
        x = np.array(genome, dtype=float)
        for i in range(x.shape[0]):
            if rng.random() < rate:
                x[i] += rng.normal(0.0, self.config.sigma)
        return np.clip(x, self.config.lower, self.config.upper)
