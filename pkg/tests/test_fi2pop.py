import numpy as np
import pytest

from core.config import Fi2PopConfig
from core.errors import EmptyRun, NotInfeasible
from core.fi2pop import (
    StandardPolicy,
    initialize,
    run,
    standard_infeasible_fitness,
    step_generation,
)
from core.population import FeasibilityKind, IdSource, Population, RngStream, evaluate


def numeric_populations(domain, policy, feasible_xs, infeasible_xs):
    ids = IdSource()
    feas = Population(FeasibilityKind.FEASIBLE)
    infeas = Population(FeasibilityKind.INFEASIBLE)
    for x in feasible_xs:
        feas.add(evaluate(np.array(x), domain, ids.next()))
    for x in infeasible_xs:
        s = evaluate(np.array(x), domain, ids.next())
        s.fitness = policy.assign(s)
        infeas.add(s)
    return feas, infeas, ids


def test_standard_infeasible_fitness():
    assert standard_infeasible_fitness(1) == 1.0
    assert standard_infeasible_fitness(4) == 0.25
    with pytest.raises(NotInfeasible):
        standard_infeasible_fitness(0)


def test_step_routes_and_counts(numeric_domain, rng):
    policy = StandardPolicy()
    feas, infeas, ids = numeric_populations(
        numeric_domain, policy,
        [[-1.0, 0.0], [-2.0, 1.0], [-0.5, -0.5]],
        [[1.0, 0.0], [2.0, 2.0], [0.5, -1.0]],
    )
    new_feas, new_infeas, events = step_generation(feas, infeas, numeric_domain, policy, Fi2PopConfig(), rng, ids, 1)
    assert len(events) == 20
    assert len(new_feas) <= 20 and len(new_infeas) <= 20
    assert len(new_feas) + len(new_infeas) == 26
    assert all(m.is_feasible for m in new_feas)
    assert not any(m.is_feasible for m in new_infeas)
    assert sum(1 for e in events if e.parent_feasible) == 10
    children = {m.id: m for m in (*new_feas, *new_infeas)}
    for e in events:
        assert children[e.child_id].is_feasible == e.child_feasible
        assert e.generation == 1


def test_step_with_one_empty_population(numeric_domain, rng):
    policy = StandardPolicy()
    feas, infeas, ids = numeric_populations(numeric_domain, policy, [], [[1.0, 0.0], [3.0, 1.0]])
    _, _, events = step_generation(feas, infeas, numeric_domain, policy, Fi2PopConfig(), rng, ids, 1)
    assert len(events) == 10
    assert not any(e.parent_feasible for e in events)


def test_step_with_both_empty_raises(numeric_domain, rng):
    empty_f = Population(FeasibilityKind.FEASIBLE)
    empty_i = Population(FeasibilityKind.INFEASIBLE)
    with pytest.raises(EmptyRun):
        step_generation(empty_f, empty_i, numeric_domain, StandardPolicy(), Fi2PopConfig(), rng)


def test_truncation_keeps_capacity(numeric_domain):
    policy = StandardPolicy()
    xs = [[-0.1 * i, 0.0] for i in range(20)]
    feas, infeas, ids = numeric_populations(numeric_domain, policy, xs, [[1.0, 1.0]])
    new_feas, _, _ = step_generation(feas, infeas, numeric_domain, policy, Fi2PopConfig(), RngStream(1), ids, 1)
    assert len(new_feas) == 20
    fitnesses = [m.fitness for m in new_feas]
    assert fitnesses == sorted(fitnesses, reverse=True)


def test_initialize_fills_both(voxel_domain, rng):
    feas, infeas = initialize(voxel_domain, StandardPolicy(), Fi2PopConfig(), rng, IdSource())
    assert len(feas) > 0 and len(infeas) > 0


def test_run_records_and_elite(voxel_domain, short_loop):
    result = run(voxel_domain, StandardPolicy(), short_loop, RngStream(7))
    assert [r.generation for r in result.records] == [1, 2, 3, 4, 5]
    elites = [r.elite_feasible_fitness for r in result.records]
    assert elites == sorted(elites)
    assert result.elite is not None
    assert result.elite.fitness == elites[-1]
    assert all(r.coverage is None for r in result.records)


def test_run_is_deterministic(voxel_domain, short_loop):
    a = run(voxel_domain, StandardPolicy(), short_loop, RngStream(3))
    b = run(voxel_domain, StandardPolicy(), short_loop, RngStream(3))
    assert a.records == b.records


def test_standard_fitness_holds_for_every_member(voxel_domain):
    cfg = Fi2PopConfig(generations=50)
    policy = StandardPolicy()
    rng, ids = RngStream(21), IdSource()
    feas, infeas = initialize(voxel_domain, policy, cfg, rng, ids)
    for generation in range(1, cfg.generations + 1):
        feas, infeas, _ = step_generation(feas, infeas, voxel_domain, policy, cfg, rng, ids, generation)
        for member in infeas:
            assert member.fitness == 1.0 / member.violations


def test_numeric_run_finds_feasible_optimum(numeric_domain):
    result = run(numeric_domain, StandardPolicy(), Fi2PopConfig(generations=50), RngStream(0))
    # best feasible point is near the origin on the x1 <= 0 side
    assert result.elite.fitness > 0.6
    assert result.elite.genome[0] <= 0.0
