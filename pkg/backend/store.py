"""
On-disk result store over the harness CSV outputs
"""

import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd

from core.config import system_config
from core.harness import CompareReport, ExperimentConfig, compare, read_summary, run_experiment

logger = logging.getLogger(__name__)

_SUMMARY = re.compile(r"^summary_(?P<slug>[a-z0-9-]+)\.csv$")


class ResultStore:
    """Index of summary_*.csv / history_*.csv files under one results directory"""

    def __init__(self, root: Optional[Union[str, Path]] = None):
        self.root = Path(root or system_config.results_dir)

    def summary_path(self, slug: str) -> Path:
        return self.root / f"summary_{slug}.csv"

    def history_path(self, slug: str, seed: int) -> Path:
        return self.root / f"history_{slug}_{seed}.csv"

    def list_summaries(self) -> List[Dict[str, Any]]:
        """All summaries on disk, sorted by slug"""
        if not self.root.is_dir():
            return []
        items = []
        for path in sorted(self.root.glob("summary_*.csv")):
            match = _SUMMARY.match(path.name)
            if match is None:
                continue
            summary = read_summary(path)
            items.append({
                "slug": match["slug"],
                "method": summary["method"],
                "domain": summary["domain"],
                "generations": summary["generations"],
                "num_seeds": len(summary["seeds"]),
            })
        return items

    def get_summary(self, slug: str) -> Optional[Dict[str, Any]]:
        """
        One summary by method slug

        Returns:
            Summary dict, or None when no such summary was written
        """
        path = self.summary_path(slug)
        if not path.is_file():
            return None
        return {"slug": slug, **read_summary(path)}

    def get_history(self, slug: str, seed: int) -> Optional[List[Dict[str, Any]]]:
        path = self.history_path(slug, seed)
        if not path.is_file():
            return None
        frame = pd.read_csv(path)
        rows = []
        for record in frame.to_dict(orient="records"):
            row = {k: (None if pd.isna(v) else v) for k, v in record.items()}
            row["generation"] = int(row["generation"])
            for key in ("elite_feas_fitness", "avg_feas_fitness", "elite_infeas_fitness", "avg_infeas_fitness", "coverage"):
                if row.get(key) is not None:
                    row[key] = float(row[key])
            rows.append(row)
        return rows

    def compare(self, slugs: Sequence[str]) -> Optional[CompareReport]:
        paths = [self.summary_path(s) for s in slugs]
        if not all(p.is_file() for p in paths):
            return None
        return compare(paths)

    def run(self, cfg: ExperimentConfig) -> Dict[str, Any]:
        """Run an experiment into this store and return its summary"""
        logger.info("Running %s into %s", cfg.method.value, self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        run_experiment(cfg, self.root)
        return self.get_summary(cfg.method.slug)
