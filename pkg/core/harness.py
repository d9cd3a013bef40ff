"""
Experiment harness
Runs a method over many seeds, writes per-generation histories and a summary
CSV per method, and compares summaries with a paired sign test

Usage:
    python -m core.harness run --config configs/default.json --method Mu-FI2Pop --seeds 20
    python -m core.harness compare --inputs results/summary_fi2pop.csv results/summary_mean-fi2pop.csv
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from itertools import combinations, repeat
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.stats import binomtest
from tqdm import tqdm

from . import fi2pop
from .config import (
    BanditConfig,
    EmitterKind,
    Fi2PopConfig,
    GridConfig,
    NumericConfig,
    SifaConfig,
    Statistic,
    VoxelConfig,
    setup_logging,
    system_config,
)
from .domains import NumericDomain, VoxelDomain, export_structure
from .errors import ConfigError, EvolutionError, SeedMismatch
from .fi2pop import GenerationRecord, StandardPolicy
from .population import Domain, RngStream
from .qd import BanditState, run_cmap_elites
from .sifa import SifaPolicy

logger = logging.getLogger(__name__)

METRICS = [
    "elite_feas_fitness",
    "avg_feas_fitness",
    "elite_infeas_fitness",
    "avg_infeas_fitness",
    "coverage",
]
INFEASIBLE_METRICS = ("elite_infeas_fitness", "avg_infeas_fitness")
MIN_SIGN_TEST_SEEDS = 6
SIGN_TEST_ALPHA = 0.05


class Method(str, Enum):
    """Algorithm variants; the value is the display name, `slug` names files"""
    FI2POP = "FI2Pop"
    MAX_FI2POP = "M-FI2Pop"
    MEAN_FI2POP = "Mu-FI2Pop"
    MIN_FI2POP = "m-FI2Pop"
    CMAP_ELITES = "CMAPElites"
    MAX_CMAP_ELITES = "M-CMAPElites"
    MEAN_CMAP_ELITES = "Mu-CMAPElites"
    MIN_CMAP_ELITES = "m-CMAPElites"
    E_MAX_CMAP_ELITES = "EM-CMAPElites"
    E_MEAN_CMAP_ELITES = "EMu-CMAPElites"
    E_MIN_CMAP_ELITES = "Em-CMAPElites"
    EB_CMAP_ELITES = "EB-CMAPElites"

    @classmethod
    def _missing_(cls, value):
        for member in cls:
            if member.slug == value:
                return member
        return None

    @property
    def slug(self) -> str:
        return _SLUGS[self]

    @property
    def uses_grid(self) -> bool:
        return "CMAPElites" in self.value

    @property
    def uses_bandit(self) -> bool:
        return self is Method.EB_CMAP_ELITES

    @property
    def emitter(self) -> EmitterKind:
        if self.value.startswith("E"):
            return EmitterKind.OPTIMIZING
        return EmitterKind.RANDOM

    @property
    def statistic(self) -> Optional[Statistic]:
        """Surrogate target, None for the standard infeasible fitness"""
        return _STATISTICS.get(self)


_SLUGS = {
    Method.FI2POP: "fi2pop",
    Method.MAX_FI2POP: "max-fi2pop",
    Method.MEAN_FI2POP: "mean-fi2pop",
    Method.MIN_FI2POP: "min-fi2pop",
    Method.CMAP_ELITES: "cmap-elites",
    Method.MAX_CMAP_ELITES: "max-cmap-elites",
    Method.MEAN_CMAP_ELITES: "mean-cmap-elites",
    Method.MIN_CMAP_ELITES: "min-cmap-elites",
    Method.E_MAX_CMAP_ELITES: "e-max-cmap-elites",
    Method.E_MEAN_CMAP_ELITES: "e-mean-cmap-elites",
    Method.E_MIN_CMAP_ELITES: "e-min-cmap-elites",
    Method.EB_CMAP_ELITES: "eb-cmap-elites",
}

_STATISTICS = {
    Method.MAX_FI2POP: Statistic.MAX,
    Method.MEAN_FI2POP: Statistic.MEAN,
    Method.MIN_FI2POP: Statistic.MIN,
    Method.MAX_CMAP_ELITES: Statistic.MAX,
    Method.MEAN_CMAP_ELITES: Statistic.MEAN,
    Method.MIN_CMAP_ELITES: Statistic.MIN,
    Method.E_MAX_CMAP_ELITES: Statistic.MAX,
    Method.E_MEAN_CMAP_ELITES: Statistic.MEAN,
    Method.E_MIN_CMAP_ELITES: Statistic.MIN,
    # the bandit switches the statistic every generation
    Method.EB_CMAP_ELITES: Statistic.MEAN,
}


class DomainKind(str, Enum):
    VOXEL = "Voxel"
    NUMERIC = "Numeric"


class ExperimentConfig(BaseModel):
    """One method on one domain over a seed set, with every module section nested"""
    model_config = ConfigDict(extra="forbid")

    method: Method = Field(default=Method.FI2POP, description="Algorithm variant")
    domain: DomainKind = Field(default=DomainKind.VOXEL, description="Problem domain")
    generations: int = Field(default=50, ge=1, description="Generations per run")
    base_seed: int = Field(default=0, ge=0, description="First seed when `seeds` is not given")
    num_seeds: int = Field(default=20, ge=1, description="Number of sequential seeds from base_seed")
    seeds: Optional[List[int]] = Field(default=None, description="Explicit seed list")
    workers: int = Field(default_factory=lambda: max(1, system_config.workers), ge=1, description="Seeds run in parallel")

    fi2pop: Fi2PopConfig = Field(default_factory=Fi2PopConfig)
    sifa: SifaConfig = Field(default_factory=SifaConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    bandit: BanditConfig = Field(default_factory=BanditConfig)
    voxel: VoxelConfig = Field(default_factory=VoxelConfig)
    numeric: NumericConfig = Field(default_factory=NumericConfig)

    @field_validator("method", mode="before")
    @classmethod
    def _accept_slug(cls, value: Any) -> Any:
        if isinstance(value, str):
            try:
                return Method(value)
            except ValueError:
                pass
        return value

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, seeds: Optional[List[int]]) -> Optional[List[int]]:
        if seeds is None:
            return seeds
        if not seeds:
            raise ValueError("seed list is empty")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        if any(not 0 <= s < 2 ** 64 for s in seeds):
            raise ValueError("seeds must be unsigned 64-bit integers")
        return seeds

    def seed_list(self) -> List[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + i for i in range(self.num_seeds)]

    @model_validator(mode="after")
    def _nested_generations(self) -> "ExperimentConfig":
        # an explicit top-level value wins, else an explicit fi2pop.generations
        if "generations" not in self.model_fields_set and "generations" in self.fi2pop.model_fields_set:
            self.generations = self.fi2pop.generations
        return self

    def loop_config(self) -> Fi2PopConfig:
        return self.fi2pop.model_copy(update={"generations": self.generations})


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a raw config mapping

    Raises:
        ConfigError: with the dotted path of the first offending field
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(first["msg"], field_path=path) from e


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read a JSON config file (or start from defaults) and apply CLI overrides"""
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}", field_path="config") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"not valid JSON ({e.msg} at line {e.lineno})", field_path="config") from e
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", field_path="config")
    data.update(overrides or {})
    return parse_config(data)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def build_domain(cfg: ExperimentConfig) -> Domain:
    if cfg.domain is DomainKind.NUMERIC:
        return NumericDomain(cfg.numeric)
    return VoxelDomain(cfg.voxel)


def build_policy(cfg: ExperimentConfig, domain: Domain, seed: int):
    statistic = cfg.method.statistic
    if statistic is None:
        return StandardPolicy()
    sifa_cfg = cfg.sifa.model_copy(update={"statistic": statistic})
    # surrogate init draws from its own child stream
    return SifaPolicy(domain.feature_dim, sifa_cfg, seed=RngStream(seed).spawn(1).seed)


def history_frame(records: Sequence[GenerationRecord], method: Method) -> pd.DataFrame:
    rows = []
    for r in records:
        row = {
            "generation": r.generation,
            "elite_feas_fitness": r.elite_feasible_fitness,
            "avg_feas_fitness": r.avg_feasible_fitness,
            "elite_infeas_fitness": r.elite_infeasible_fitness,
            "avg_infeas_fitness": r.avg_infeasible_fitness,
            "coverage": r.coverage,
        }
        if method.uses_bandit:
            row["arm"] = r.arm
        rows.append(row)
    columns = ["generation", *METRICS] + (["arm"] if method.uses_bandit else [])
    return pd.DataFrame(rows, columns=columns)


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: Union[str, Path]) -> List[GenerationRecord]:
    """One run of the configured method; writes that seed's files and returns its history"""
    out = Path(out_dir)
    slug = cfg.method.slug
    rng = RngStream(seed)
    domain = build_domain(cfg)
    policy = build_policy(cfg, domain, seed)
    loop = cfg.loop_config()

    if cfg.method.uses_grid:
        bandit = BanditState.from_config(cfg.bandit) if cfg.method.uses_bandit else None
        result = run_cmap_elites(domain, policy, loop, cfg.grid, rng, cfg.method.emitter, bandit)
        result.grid.export(out / f"grid_{slug}_{seed}.csv")
    else:
        result = fi2pop.run(domain, policy, loop, rng)

    history_frame(result.records, cfg.method).to_csv(out / f"history_{slug}_{seed}.csv", index=False)
    if cfg.domain is DomainKind.VOXEL and result.elite is not None:
        export_structure(result.elite.phenotype, out / f"elite_{slug}_{seed}.txt")
    if isinstance(policy, SifaPolicy):
        policy.ledger.dump(out / f"ledger_{slug}_{seed}.csv", cfg.sifa.epsilon_init)

    final = result.records[-1]
    logger.info(
        "%s seed %d: elite %.4f avg %.4f%s",
        cfg.method.value, seed, final.elite_feasible_fitness, final.avg_feasible_fitness,
        f" coverage {final.coverage:.4f}" if final.coverage is not None else "",
    )
    return result.records


def summarize(cfg: ExperimentConfig, seeds: Sequence[int], histories: Sequence[Sequence[GenerationRecord]]) -> pd.DataFrame:
    """Mean and standard deviation across seeds of the final-generation metrics"""
    finals = history_frame([h[-1] for h in histories], cfg.method)
    row: Dict[str, Any] = {
        "method": cfg.method.value,
        "domain": cfg.domain.value,
        "generations": cfg.generations,
        "num_seeds": len(seeds),
    }
    for metric in METRICS:
        blank = (metric == "coverage" and not cfg.method.uses_grid) or (
            metric in INFEASIBLE_METRICS and cfg.method.uses_bandit
        )
        if blank:
            row[f"{metric}_mean"] = row[f"{metric}_std"] = None
            continue
        values = finals[metric].to_numpy(dtype=float)
        row[f"{metric}_mean"] = float(np.mean(values))
        row[f"{metric}_std"] = float(np.std(values))
    row["seeds"] = " ".join(str(s) for s in seeds)
    row["final_elite_feas_fitness"] = " ".join(repr(float(v)) for v in finals["elite_feas_fitness"])
    return pd.DataFrame([row])


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """
    Run every seed of an experiment and write its summary

    Args:
        cfg: Validated experiment configuration
        out_dir: Results directory (defaults to SystemConfig.results_dir)

    Returns:
        One-row summary frame, also written to summary_<slug>.csv
    """
    out = Path(out_dir or system_config.results_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = cfg.seed_list()
    logger.info("Running %s on %s: %d seeds x %d generations", cfg.method.value, cfg.domain.value, len(seeds), cfg.generations)

    progress = dict(total=len(seeds), desc=cfg.method.slug, disable=not system_config.verbose)
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            histories = list(tqdm(pool.map(run_seed, repeat(cfg), seeds, repeat(out)), **progress))
    else:
        histories = [run_seed(cfg, seed, out) for seed in tqdm(seeds, **progress)]

    summary = summarize(cfg, seeds, histories)
    path = out / f"summary_{cfg.method.slug}.csv"
    summary.to_csv(path, index=False)
    logger.info("Summary written to %s", path)
    return summary


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

@dataclass
class MetricRow:
    method: str
    metric: str
    mean: Optional[float]
    std: Optional[float]


@dataclass
class SignTest:
    """Paired comparison of final elite feasible fitness over shared seeds"""
    method_a: str
    method_b: str
    wins_a: int
    wins_b: int
    ties: int
    p_value: float
    mean_difference: float
    underpowered: bool

    @property
    def outcome(self) -> str:
        if self.underpowered:
            return "underpowered"
        if self.p_value < SIGN_TEST_ALPHA:
            return f"{self.method_a} better" if self.wins_a > self.wins_b else f"{self.method_b} better"
        return "inconclusive"


@dataclass
class CompareReport:
    methods: List[str]
    seeds: List[int]
    rows: List[MetricRow]
    tests: List[SignTest]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "methods": self.methods,
            "seeds": self.seeds,
            "rows": [asdict(r) for r in self.rows],
            "tests": [{**asdict(t), "outcome": t.outcome} for t in self.tests],
        }

    def render(self) -> str:
        lines = [f"{'method':<16}" + "".join(f"{m:>26}" for m in METRICS)]
        width = len(METRICS)
        for i, method in enumerate(self.methods):
            cells = []
            for r in self.rows[i * width:(i + 1) * width]:
                cells.append(f"{'-':>26}" if r.mean is None else f"{f'{r.mean:.4f} ± {r.std:.4f}':>26}")
            lines.append(f"{method:<16}" + "".join(cells))
        lines.append("")
        for t in self.tests:
            lines.append(
                f"{t.method_a} vs {t.method_b}: {t.wins_a}-{t.wins_b} ({t.ties} ties), "
                f"p={t.p_value:.3g}, mean diff {t.mean_difference:+.4f} -> {t.outcome}"
            )
        return "\n".join(lines)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame([{**asdict(t), "outcome": t.outcome} for t in self.tests]).to_csv(path, index=False)
        return path


def _blank(value: Any) -> Optional[float]:
    return None if pd.isna(value) else float(value)


def read_summary(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        frame = pd.read_csv(path, dtype={"seeds": str, "final_elite_feas_fitness": str})
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}", field_path="inputs") from e
    if len(frame) != 1:
        raise ConfigError(f"{path} holds {len(frame)} rows, expected 1", field_path="inputs")
    row = frame.iloc[0]
    try:
        return {
            "method": str(row["method"]),
            "domain": str(row["domain"]),
            "generations": int(row["generations"]),
            "seeds": [int(s) for s in str(row["seeds"]).split()],
            "finals": [float(v) for v in str(row["final_elite_feas_fitness"]).split()],
            "metrics": {m: {"mean": _blank(row[f"{m}_mean"]), "std": _blank(row[f"{m}_std"])} for m in METRICS},
        }
    except KeyError as e:
        raise ConfigError(f"{path} is not a summary file, missing column {e}", field_path="inputs") from e


def sign_test(name_a: str, finals_a: Sequence[float], name_b: str, finals_b: Sequence[float]) -> SignTest:
    """Two-sided sign test; ties are dropped"""
    a, b = np.asarray(finals_a, dtype=float), np.asarray(finals_b, dtype=float)
    wins_a, wins_b = int(np.sum(a > b)), int(np.sum(a < b))
    n = wins_a + wins_b
    p_value = float(binomtest(wins_a, n, 0.5).pvalue) if n else 1.0
    return SignTest(
        method_a=name_a,
        method_b=name_b,
        wins_a=wins_a,
        wins_b=wins_b,
        ties=len(a) - n,
        p_value=p_value,
        mean_difference=float(np.mean(a - b)),
        underpowered=len(a) < MIN_SIGN_TEST_SEEDS,
    )


def compare(paths: Sequence[Union[str, Path]]) -> CompareReport:
    """
    Mean ± std table and pairwise sign tests over summary files

    Raises:
        ConfigError: fewer than two summaries
        SeedMismatch: the summaries were run on different seed sets
    """
    if len(paths) < 2:
        raise ConfigError("need at least two summaries", field_path="inputs")
    summaries = [read_summary(p) for p in paths]
    seeds = summaries[0]["seeds"]
    for s in summaries[1:]:
        if sorted(s["seeds"]) != sorted(seeds):
            raise SeedMismatch(f"{s['method']} ran seeds {s['seeds']}, {summaries[0]['method']} ran {seeds}")

    rows = [
        MetricRow(s["method"], metric, **s["metrics"][metric])
        for s in summaries
        for metric in METRICS
    ]
    # pair finals by seed per input; two summaries may share a method name
    aligned = [dict(zip(s["seeds"], s["finals"])) for s in summaries]
    tests = [
        sign_test(
            summaries[i]["method"], [aligned[i][k] for k in seeds],
            summaries[j]["method"], [aligned[j][k] for k in seeds],
        )
        for i, j in combinations(range(len(summaries)), 2)
    ]
    return CompareReport(methods=[s["method"] for s in summaries], seeds=seeds, rows=rows, tests=tests)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="core.harness", description="Constrained quality-diversity experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one method over many seeds")
    run.add_argument("--config", type=str, default=None, help="JSON experiment config")
    run.add_argument("--method", type=str, default=None, help="method name or slug, e.g. Mu-FI2Pop or mean-fi2pop")
    run.add_argument("--domain", type=str, default=None, help="Voxel or Numeric")
    run.add_argument("--seeds", type=int, default=None, help="number of sequential seeds from base_seed")
    run.add_argument("--generations", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out-dir", type=str, default=None, help="results directory")

    cmp = sub.add_parser("compare", help="compare summary CSVs")
    cmp.add_argument("--inputs", nargs="+", required=True, help="summary_<method>.csv files")
    cmp.add_argument("--out", type=str, default=None, help="write the sign tests as CSV")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for name in ("method", "domain", "generations", "workers"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.seeds is not None:
        overrides["num_seeds"] = args.seeds
        overrides["seeds"] = None
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        if args.command == "run":
            cfg = load_config(args.config, _overrides(args))
            run_experiment(cfg, args.out_dir)
        else:
            report = compare(args.inputs)
            print(report.render())
            if args.out:
                report.write(args.out)
    except EvolutionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
