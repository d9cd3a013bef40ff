"""
Pydantic models for request/response validation
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class MetricSummary(BaseModel):
    """Mean and standard deviation of one final-generation metric across seeds"""
    mean: Optional[float] = Field(default=None, description="Blank when the metric does not apply")
    std: Optional[float] = Field(default=None)


class ExperimentSummary(BaseModel):
    """Summary of one method's multi-seed run"""
    slug: str = Field(..., description="File-safe method name")
    method: str = Field(..., description="Method display name")
    domain: str = Field(..., description="Voxel or Numeric")
    generations: int = Field(..., description="Generations per run")
    seeds: List[int] = Field(..., description="Seeds in run order")
    finals: List[float] = Field(..., description="Final elite feasible fitness per seed")
    metrics: Dict[str, MetricSummary] = Field(..., description="Metric name to mean/std")


class ExperimentListItem(BaseModel):
    """Summary entry for listings"""
    slug: str
    method: str
    domain: str
    generations: int
    num_seeds: int


class HistoryRow(BaseModel):
    """One generation of one seed"""
    generation: int
    elite_feas_fitness: float
    avg_feas_fitness: float
    elite_infeas_fitness: float
    avg_infeas_fitness: float
    coverage: Optional[float] = Field(default=None, description="CMAP-Elites only")
    arm: Optional[str] = Field(default=None, description="Bandit arm, EB-CMAPElites only")


class HistoryResponse(BaseModel):
    slug: str
    seed: int
    rows: List[HistoryRow]


class CompareRequest(BaseModel):
    """Methods to compare, by slug"""
    slugs: List[str] = Field(..., min_length=2, description="At least two method slugs")


class MetricRowModel(BaseModel):
    method: str
    metric: str
    mean: Optional[float] = None
    std: Optional[float] = None


class SignTestModel(BaseModel):
    """Paired sign test on final elite feasible fitness"""
    method_a: str
    method_b: str
    wins_a: int
    wins_b: int
    ties: int
    p_value: float
    mean_difference: float
    underpowered: bool
    outcome: str = Field(..., description="'<method> better', 'inconclusive' or 'underpowered'")


class CompareResponse(BaseModel):
    methods: List[str]
    seeds: List[int]
    rows: List[MetricRowModel]
    tests: List[SignTestModel]
