import math

import numpy as np
import pytest

from core.config import SifaConfig, Statistic
from core.errors import FeatureDimError, IgnoredEvent, NoData, NoOffspringYet
from core.fi2pop import OffspringEvent
from core.population import FeasibilityKind, Population, RngStream
from core.sifa import (
    LedgerEntry,
    OffspringLedger,
    SifaPolicy,
    SurrogateModel,
    acquire_fitness,
    reassign,
    record_offspring,
    train_increment,
    weighted_statistic,
)

EPS = 0.001


def event(parent_id, child_feasible, child_fitness=0.0, parent_feasible=False, features=(0.2, 0.8)):
    return OffspringEvent(
        parent_id=parent_id,
        parent_feasible=parent_feasible,
        parent_features=np.asarray(features, dtype=float),
        child_id=1000 + parent_id,
        child_feasible=child_feasible,
        child_fitness=child_fitness,
        generation=1,
    )


def entry_with(fitnesses, total):
    return LedgerEntry(0, np.zeros(2), list(fitnesses), total)


def test_weighted_statistic_values():
    entry = entry_with([1.0, 2.0, 3.0], 6)
    assert math.isclose(weighted_statistic(entry, Statistic.MEAN, EPS), 1.0)
    assert math.isclose(weighted_statistic(entry, Statistic.MAX, EPS), 1.5)
    assert math.isclose(weighted_statistic(entry, Statistic.MIN, EPS), 0.5)


def test_weighted_statistic_without_feasible_children():
    assert weighted_statistic(entry_with([], 4), Statistic.MEAN, EPS) == EPS


def test_weighted_statistic_without_children():
    with pytest.raises(NoOffspringYet):
        weighted_statistic(entry_with([], 0), Statistic.MAX, EPS)


@pytest.mark.parametrize("stat", list(Statistic))
def test_weighted_statistic_shrinks_with_more_children(stat):
    targets = [weighted_statistic(entry_with([1.5, 2.5], total), stat, EPS) for total in range(2, 30)]
    assert all(a > b for a, b in zip(targets, targets[1:]))


def test_weighted_statistic_oracle():
    rng = RngStream(99)
    for parent_id in range(1000):
        ledger = OffspringLedger()
        raw = []
        for _ in range(1 + rng.integers(30)):
            feasible = rng.random() < 0.4
            fitness = float(rng.uniform(0.0, 5.0)) if feasible else 0.0
            raw.append((feasible, fitness))
            ledger.record(event(parent_id, feasible, fitness))
        entry = ledger[parent_id]
        feasible_fitnesses = [f for ok, f in raw if ok]
        if not feasible_fitnesses:
            for stat in Statistic:
                assert weighted_statistic(entry, stat, EPS) == EPS
            continue
        p = len(feasible_fitnesses) / len(raw)
        expected = {
            Statistic.MEAN: float(np.mean(feasible_fitnesses)) * p,
            Statistic.MAX: max(feasible_fitnesses) * p,
            Statistic.MIN: min(feasible_fitnesses) * p,
        }
        got = {stat: weighted_statistic(entry, stat, EPS) for stat in Statistic}
        for stat in Statistic:
            assert abs(got[stat] - expected[stat]) <= 1e-12
        assert got[Statistic.MIN] <= got[Statistic.MEAN] <= got[Statistic.MAX]


def test_ledger_ignores_feasible_parents():
    ledger = OffspringLedger()
    with pytest.raises(IgnoredEvent):
        ledger.record(event(1, True, 2.0, parent_feasible=True))
    assert len(ledger) == 0


def test_ledger_counts_children():
    ledger = OffspringLedger()
    for e in (event(3, True, 2.0), event(3, False), event(3, True, 4.0)):
        record_offspring(ledger, e)
    entry = ledger[3]
    assert entry.total_children == 3
    assert entry.feasible_child_fitnesses == [2.0, 4.0]
    assert math.isclose(entry.feasible_probability, 2 / 3)


def test_training_set_in_parent_order():
    ledger = OffspringLedger()
    ledger.record(event(9, True, 1.0, features=(0.9, 0.9)))
    ledger.record(event(2, False, features=(0.1, 0.1)))
    X, y = ledger.training_set(Statistic.MAX, EPS)
    np.testing.assert_allclose(X, [[0.1, 0.1], [0.9, 0.9]])
    np.testing.assert_allclose(y, [EPS, 1.0])


def test_training_set_empty():
    with pytest.raises(NoData):
        OffspringLedger().training_set(Statistic.MEAN, EPS)


def test_ledger_dump(tmp_path):
    ledger = OffspringLedger()
    ledger.record(event(1, True, 2.0))
    ledger.record(event(1, False))
    lines = ledger.dump(tmp_path / "ledger.csv").read_text().splitlines()
    assert lines[0] == "parent_id,total_children,feasible_children,p,mean_target,max_target,min_target"
    assert lines[1] == "1,2,1,0.5,1.0,1.0,1.0"


def test_untrained_model_predicts_epsilon():
    model = SurrogateModel(3, SifaConfig(), seed=0)
    np.testing.assert_allclose(model.predict(np.zeros((2, 3))), [EPS, EPS])


def test_feature_dim_checked():
    model = SurrogateModel(3, SifaConfig(), seed=0)
    with pytest.raises(FeatureDimError):
        model.predict(np.zeros((1, 4)))


def test_train_on_nothing():
    with pytest.raises(NoData):
        train_increment(SurrogateModel(2), [])


def test_single_example_converges():
    model = SurrogateModel(4, SifaConfig(), seed=1)
    examples = [(np.array([0.2, 0.4, 0.6, 0.8]), 1.5)]
    loss = None
    for _ in range(500):
        model, loss = train_increment(model, examples)
        if loss < 1e-4:
            break
    assert loss < 1e-4


def test_conflicting_targets_reach_their_mean():
    model = SurrogateModel(2, SifaConfig(), seed=2)
    x = np.array([0.5, 0.5])
    examples = [(x, 0.0), (x, 1.0)]
    for _ in range(500):
        model, loss = train_increment(model, examples)
    assert abs(loss - 0.25) <= 0.05


def test_acquire_fitness_is_floored():
    model = SurrogateModel(2, SifaConfig(), seed=3)
    examples = [(np.array([0.3, 0.7]), -1.0)]
    for _ in range(100):
        train_increment(model, examples)
    assert acquire_fitness(model, np.array([0.3, 0.7])) == EPS


def test_reassign_rescores_and_sorts(solution_factory):
    model = SurrogateModel(2, SifaConfig(), seed=4)
    examples = [(np.array([0.0, 0.0]), 0.1), (np.array([1.0, 1.0]), 2.0)]
    for _ in range(300):
        train_increment(model, examples)
    pop = Population(FeasibilityKind.INFEASIBLE, 20, [
        solution_factory(0, 0.5, violations=1, features=[0.0, 0.0]),
        solution_factory(1, 0.5, violations=2, features=[1.0, 1.0]),
    ])
    reassign(model, pop)
    assert pop.ids == [1, 0]
    assert all(m.fitness >= EPS for m in pop)


def test_policy_before_and_after_training(solution_factory):
    policy = SifaPolicy(2, SifaConfig(), seed=0)
    candidate = solution_factory(5, 0.0, violations=1, features=[0.5, 0.5])
    assert policy.assign(candidate) == EPS

    policy.observe([event(1, True, 3.0, parent_feasible=True)], [])
    assert not policy.model.trained

    pop = Population(FeasibilityKind.INFEASIBLE, 20, [candidate])
    policy.observe([event(1, True, 3.0), event(1, False)], [pop])
    assert policy.model.trained
    assert policy.last_loss is not None
    assert len(policy.ledger) == 1
    assert policy.assign(candidate) >= EPS
    assert policy.name == "sifa-mu"


def test_empty_ledger_dump_has_header_only(tmp_path):
    lines = OffspringLedger().dump(tmp_path / "ledger.csv").read_text().splitlines()
    assert lines == ["parent_id,total_children,feasible_children,p,mean_target,max_target,min_target"]
