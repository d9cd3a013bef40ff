"""
Surrogate infeasible fitness acquirement
Infeasible parents are scored by a regressor trained to predict a statistic
of their feasible children's fitness, weighted by how often they produce
feasible children at all
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import mean_squared_error
from sklearn.neural_network import MLPRegressor

from .config import SifaConfig, Statistic, sifa_config
from .errors import FeatureDimError, IgnoredEvent, NoData, NoOffspringYet
from .fi2pop import OffspringEvent
from .population import Population, Solution, rank_key

logger = logging.getLogger(__name__)

_TARGET_COLUMNS = (("mean", Statistic.MEAN), ("max", Statistic.MAX), ("min", Statistic.MIN))

__all__ = [
    "Statistic",
    "LedgerEntry",
    "OffspringLedger",
    "SurrogateModel",
    "SifaPolicy",
    "record_offspring",
    "weighted_statistic",
    "train_increment",
    "acquire_fitness",
    "reassign",
]


@dataclass
class LedgerEntry:
    """Feasible-children fitnesses and children tally of one infeasible parent"""
    parent_id: int
    parent_features: np.ndarray
    feasible_child_fitnesses: List[float] = field(default_factory=list)
    total_children: int = 0

    @property
    def feasible_probability(self) -> float:
        if self.total_children == 0:
            return 0.0
        return len(self.feasible_child_fitnesses) / self.total_children


class OffspringLedger:
    """Per-parent offspring records of one run"""

    def __init__(self):
        self.entries: Dict[int, LedgerEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, parent_id: int) -> bool:
        return parent_id in self.entries

    def __getitem__(self, parent_id: int) -> LedgerEntry:
        return self.entries[parent_id]

    def record(self, event: OffspringEvent) -> LedgerEntry:
        """
        Count a child against its infeasible parent

        Raises:
            IgnoredEvent: the parent is feasible; the ledger is left untouched
        """
        if event.parent_feasible:
            raise IgnoredEvent(f"parent {event.parent_id} is feasible")
        entry = self.entries.get(event.parent_id)
        if entry is None:
            entry = LedgerEntry(event.parent_id, np.asarray(event.parent_features, dtype=float))
            self.entries[event.parent_id] = entry
        entry.total_children += 1
        if event.child_feasible:
            entry.feasible_child_fitnesses.append(float(event.child_fitness))
        return entry

    def training_set(self, statistic: Statistic, epsilon_init: float) -> Tuple[np.ndarray, np.ndarray]:
        """Features and weighted-statistic targets of every entry, in parent-id order"""
        entries = [self.entries[k] for k in sorted(self.entries)]
        if not entries:
            raise NoData("ledger is empty")
        X = np.vstack([e.parent_features for e in entries])
        y = np.array([weighted_statistic(e, statistic, epsilon_init) for e in entries])
        return X, y

    def dump(self, path: Union[str, Path], epsilon_init: float = sifa_config.epsilon_init) -> Path:
        """Debug export: one row per parent with p and the three targets"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = []
        for parent_id in sorted(self.entries):
            entry = self.entries[parent_id]
            rows.append({
                "parent_id": parent_id,
                "total_children": entry.total_children,
                "feasible_children": len(entry.feasible_child_fitnesses),
                "p": entry.feasible_probability,
                **{f"{name}_target": weighted_statistic(entry, s, epsilon_init) for name, s in _TARGET_COLUMNS},
            })
        columns = ["parent_id", "total_children", "feasible_children", "p", *(f"{name}_target" for name, _ in _TARGET_COLUMNS)]
        pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
        return path


def record_offspring(ledger: OffspringLedger, event: OffspringEvent) -> OffspringLedger:
    ledger.record(event)
    return ledger


def weighted_statistic(entry: LedgerEntry, stat: Statistic, epsilon_init: float) -> float:
    """
    stat(feasible child fitnesses) x P(feasible child)

    Falls back to epsilon_init for a parent with no feasible child yet.

    Raises:
        NoOffspringYet: the entry has no children at all
    """
    if entry.total_children == 0:
        raise NoOffspringYet(f"parent {entry.parent_id} has no recorded children")
    fitnesses = entry.feasible_child_fitnesses
    if not fitnesses:
        return epsilon_init
    lo, hi = min(fitnesses), max(fitnesses)
    if stat is Statistic.MAX:
        value = hi
    elif stat is Statistic.MIN:
        value = lo
    else:
        # clipped so rounding never lifts the mean outside [min, max]
        value = min(max(math.fsum(fitnesses) / len(fitnesses), lo), hi)
    return value * (len(fitnesses) / entry.total_children)


class SurrogateModel:
    """
    Fully-connected ReLU regressor from domain features to acquired fitness

    Wraps scikit-learn's MLPRegressor trained with plain SGD; each call to
    `fit_epochs` runs whole passes over the examples through `partial_fit`.
    The weights are initialized on the first update from `seed`.
    """

    def __init__(self, input_dim: int, cfg: SifaConfig = sifa_config, seed: int = 0):
        self.input_dim = int(input_dim)
        self.cfg = cfg
        self.seed = int(seed) % (2 ** 32)
        self.training_steps = 0
        self.regressor = MLPRegressor(
            hidden_layer_sizes=tuple(cfg.hidden_layers),
            activation="relu",
            solver="sgd",
            learning_rate="constant",
            learning_rate_init=cfg.learning_rate,
            alpha=0.0,
            momentum=0.9,
            shuffle=True,
            random_state=self.seed,
        )

    @property
    def trained(self) -> bool:
        return self.training_steps > 0

    @property
    def epsilon_init(self) -> float:
        return self.cfg.epsilon_init

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise FeatureDimError(f"expected {self.input_dim} features, got {X.shape[1]}")
        return X

    def fit_epochs(self, X: np.ndarray, y: np.ndarray, epochs: int) -> None:
        X = self._check(X)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=ConvergenceWarning)
            for _ in range(epochs):
                self.regressor.partial_fit(X, y)
        self.training_steps += 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Raw predictions; before the first update every prediction is epsilon_init"""
        X = self._check(X)
        if not self.trained:
            return np.full(X.shape[0], self.epsilon_init)
        return np.asarray(self.regressor.predict(X), dtype=float).reshape(-1)

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(mean_squared_error(y, self.predict(X)))


def train_increment(
    model: SurrogateModel,
    examples: Sequence[Tuple[np.ndarray, float]],
) -> Tuple[SurrogateModel, float]:
    """
    train_epochs_per_update passes of SGD on mean-squared error

    Returns:
        (model, mean-squared error after training)
    """
    if not examples:
        raise NoData("no training examples")
    X = np.vstack([np.asarray(f, dtype=float) for f, _ in examples])
    y = np.array([float(t) for _, t in examples])
    if not np.all(np.isfinite(y)):
        raise ValueError("training targets must be finite")
    model.fit_epochs(X, y, model.cfg.train_epochs_per_update)
    loss = model.loss(X, y)
    logger.debug("surrogate update %d on %d examples, mse %.6g", model.training_steps, len(y), loss)
    return model, loss


def acquire_fitness(model: SurrogateModel, features: np.ndarray) -> float:
    """Surrogate prediction floored at epsilon_init"""
    prediction = float(model.predict(features)[0])
    if not math.isfinite(prediction):
        return model.epsilon_init
    return max(prediction, model.epsilon_init)


def reassign(model: SurrogateModel, infeasible_pop: Population) -> Population:
    """Re-score every infeasible member with the surrogate and re-sort by the new fitness"""
    if len(infeasible_pop):
        X = np.vstack([m.features for m in infeasible_pop])
        predictions = model.predict(X)
        for member, prediction in zip(infeasible_pop, predictions):
            value = float(prediction)
            member.fitness = max(value, model.epsilon_init) if math.isfinite(value) else model.epsilon_init
        infeasible_pop.members.sort(key=rank_key)
    return infeasible_pop


class SifaPolicy:
    """
    Infeasible fitness policy backed by an offspring ledger and a surrogate

    Infeasible solutions score epsilon_init until the surrogate has been
    updated once; after every generation that brought new ledger data the
    surrogate is trained on the full ledger and every infeasible population
    it is shown gets reassigned.
    """

    def __init__(self, feature_dim: int, cfg: SifaConfig = sifa_config, seed: int = 0):
        self.cfg = cfg
        self.statistic = cfg.statistic
        self.ledger = OffspringLedger()
        self.model = SurrogateModel(feature_dim, cfg, seed)
        self.last_loss: Optional[float] = None

    @property
    def name(self) -> str:
        return f"sifa-{self.statistic.value}"

    def assign(self, solution: Solution) -> float:
        if not self.model.trained:
            return self.cfg.epsilon_init
        return acquire_fitness(self.model, solution.features)

    def observe(self, events: Sequence[OffspringEvent], populations: Sequence[Population]) -> None:
        fresh = 0
        for event in events:
            if event.parent_feasible:
                continue
            self.ledger.record(event)
            fresh += 1
        if fresh == 0:
            return
        X, y = self.ledger.training_set(self.statistic, self.cfg.epsilon_init)
        _, self.last_loss = train_increment(self.model, list(zip(X, y)))
        for pop in populations:
            reassign(self.model, pop)
