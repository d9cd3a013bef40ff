import math
from collections import Counter

import numpy as np
import pytest

from core.config import BanditConfig, EmitterKind, Fi2PopConfig, GridConfig, Statistic
from core.errors import BanditError, EmptyGrid, InvalidBehavior
from core.fi2pop import StandardPolicy
from core.population import IdSource, RngStream
from core.qd import (
    BanditState,
    Grid,
    bandit_select,
    bandit_update,
    bin_index,
    coverage,
    default_arms,
    initialize_grid,
    insert,
    optimizing_emitter,
    random_emitter,
    run_cmap_elites,
    step,
)
from core.sifa import SifaPolicy


def test_bin_index_examples(grid_cfg):
    assert bin_index((1.0, 1.0), grid_cfg) == (0, 0)
    assert bin_index((5.0, 5.0), grid_cfg) == (31, 31)
    assert bin_index((9.0, 0.2), grid_cfg) == (31, 0)
    assert bin_index((3.0, 1.125), grid_cfg) == (16, 1)


def test_bin_index_rejects_non_finite(grid_cfg):
    with pytest.raises(InvalidBehavior):
        bin_index((math.nan, 1.0), grid_cfg)
    with pytest.raises(InvalidBehavior):
        bin_index((1.0, math.inf), grid_cfg)


def test_grid_needs_ranges():
    with pytest.raises(ValueError):
        Grid(GridConfig())


def test_insert_truncates_bin(grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    for i in range(7):
        insert(grid, solution_factory(i, float(i), behavior=(2.0, 2.0)))
    insert(grid, solution_factory(10, 0.3, violations=1, behavior=(2.0, 2.0)))
    b = grid.bin(bin_index((2.0, 2.0), grid_cfg))
    assert b.feasible.ids == [6, 5, 4, 3, 2]
    assert b.infeasible.ids == [10]
    assert len(grid.non_empty_bins()) == 1


def test_emitters_on_empty_grid(grid_cfg, rng):
    grid = Grid(grid_cfg)
    with pytest.raises(EmptyGrid):
        random_emitter(grid, rng)
    with pytest.raises(EmptyGrid):
        optimizing_emitter(grid)


def test_optimizing_emitter_uses_both_sides(grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    insert(grid, solution_factory(0, 1.0, behavior=(1.0, 1.0)))
    insert(grid, solution_factory(1, 2.0, violations=1, behavior=(4.0, 4.0)))
    assert optimizing_emitter(grid).cell == bin_index((4.0, 4.0), grid_cfg)


def test_optimizing_emitter_ties_to_smallest_cell(grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    insert(grid, solution_factory(0, 1.0, behavior=(4.0, 1.0)))
    insert(grid, solution_factory(1, 1.0, behavior=(1.0, 4.0)))
    assert optimizing_emitter(grid).cell == bin_index((1.0, 4.0), grid_cfg)


def test_random_emitter_picks_non_empty(grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    insert(grid, solution_factory(0, 1.0, behavior=(1.0, 1.0)))
    insert(grid, solution_factory(1, 0.5, violations=1, behavior=(3.0, 3.0)))
    rng = RngStream(0)
    picked = {random_emitter(grid, rng).cell for _ in range(100)}
    assert picked == {(0, 0), bin_index((3.0, 3.0), grid_cfg)}


def test_random_emitter_is_uniform(grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    insert(grid, solution_factory(0, 1.0, behavior=(1.0, 1.0)))
    insert(grid, solution_factory(1, 3.0, behavior=(3.0, 3.0)))
    rng = RngStream(12)
    counts = Counter(random_emitter(grid, rng).cell for _ in range(10_000))
    assert len(counts) == 2
    assert all(abs(n - 5000) <= 300 for n in counts.values())


def test_coverage_counts_feasible_cells_only(grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    assert coverage(grid) == 0.0
    insert(grid, solution_factory(0, 1.0, behavior=(1.0, 1.0)))
    insert(grid, solution_factory(1, 1.0, violations=1, behavior=(3.0, 3.0)))
    assert coverage(grid) == 1 / 1024


def test_coverage_ceiling(grid_cfg):
    values = np.linspace(1.0, 5.0, 401)
    cells = {bin_index((m3, m4), grid_cfg) for m3 in values for m4 in values if m4 >= m3}
    assert len(cells) / 1024 <= 0.5 + 1 / 32


def test_step_emits_children(voxel_domain, grid_cfg):
    rng, ids = RngStream(2), IdSource()
    policy = StandardPolicy()
    grid = initialize_grid(voxel_domain, policy, Fi2PopConfig(), grid_cfg, rng, ids)
    before = sum(1 for _ in grid.solutions())
    grid, events = step(grid, EmitterKind.RANDOM, voxel_domain, policy, Fi2PopConfig(), rng, ids, 1)
    assert len(events) in (10, 20)
    assert sum(1 for _ in grid.solutions()) >= before
    for b in grid.non_empty_bins():
        assert len(b.feasible) <= grid_cfg.feasible_capacity
        assert len(b.infeasible) <= grid_cfg.infeasible_capacity


@pytest.mark.parametrize("emitter", [EmitterKind.RANDOM, EmitterKind.OPTIMIZING])
def test_coverage_never_drops(voxel_domain, emitter):
    for seed in range(3):
        result = run_cmap_elites(
            voxel_domain, StandardPolicy(), Fi2PopConfig(generations=15), GridConfig(), RngStream(seed), emitter,
        )
        covs = [r.coverage for r in result.records]
        assert covs == sorted(covs)
        elites = [r.elite_feasible_fitness for r in result.records]
        assert elites == sorted(elites)


def test_default_arms():
    arms = default_arms()
    assert len(arms) == 6
    assert {e for e, _ in arms} == set(EmitterKind)
    assert {s for _, s in arms} == set(Statistic)


def test_greedy_select_ties_to_lowest_index():
    state = BanditState.from_config(BanditConfig(epsilon=0.0))
    assert bandit_select(state, RngStream(0)) == 0
    state.value_estimates[3] = 0.5
    assert bandit_select(state, RngStream(0)) == 3


def test_exploring_select_is_uniform():
    state = BanditState(arms=default_arms()[:4], epsilon=1.0)
    rng = RngStream(31)
    counts = Counter(bandit_select(state, rng) for _ in range(10_000))
    assert sorted(counts) == [0, 1, 2, 3]
    assert all(abs(n - 2500) <= 200 for n in counts.values())


def test_bandit_update_reward():
    state = BanditState.from_config(BanditConfig(epsilon=0.0))
    state.previous_avg_feasible_fitness = 1.0
    state.previous_coverage = 0.1
    arm = bandit_select(state, RngStream(0))
    bandit_update(state, arm, 1.1, 0.12)
    assert math.isclose(state.value_estimates[arm], 0.1 + 0.2)
    assert state.pull_counts[arm] == 1
    assert state.previous_coverage == 0.12


def test_bandit_update_from_zero_uses_delta():
    state = BanditState.from_config(BanditConfig(epsilon=0.0, delta=1e-3))
    arm = bandit_select(state, RngStream(0))
    bandit_update(state, arm, 0.0, 0.001)
    assert math.isclose(state.value_estimates[arm], 1.0)


def test_bandit_rejects_other_arm():
    state = BanditState.from_config(BanditConfig(epsilon=0.0))
    bandit_select(state, RngStream(0))
    with pytest.raises(BanditError):
        bandit_update(state, 4, 1.0, 0.1)


def test_bandit_values_are_reward_means():
    state = BanditState.from_config(BanditConfig(epsilon=1.0))
    rng = RngStream(5)
    avg, cov = 1.0, 0.01
    state.previous_avg_feasible_fitness, state.previous_coverage = avg, cov
    for t in range(60):
        arm = bandit_select(state, rng)
        avg, cov = avg * (1 + 0.01 * (t % 3)), cov + 0.001 * (t % 2)
        bandit_update(state, arm, avg, cov)
    for arm, rewards in state.rewards.items():
        assert math.isclose(state.value_estimates[arm], float(np.mean(rewards)), abs_tol=1e-12)
        assert state.pull_counts[arm] == len(rewards)


def test_bandit_run_switches_policy_statistic(voxel_domain):
    policy = SifaPolicy(voxel_domain.feature_dim, seed=0)
    bandit = BanditState.from_config()
    result = run_cmap_elites(
        voxel_domain, policy, Fi2PopConfig(generations=6), GridConfig(), RngStream(1), bandit=bandit,
    )
    assert len(result.records) == 6
    assert all(r.arm is not None and r.coverage is not None for r in result.records)
    assert sum(bandit.pull_counts) == 6


def test_grid_export(tmp_path, grid_cfg, solution_factory):
    grid = Grid(grid_cfg)
    insert(grid, solution_factory(0, 2.5, behavior=(1.0, 1.0)))
    insert(grid, solution_factory(1, 0.5, violations=1, behavior=(5.0, 5.0)))
    lines = grid.export(tmp_path / "grid.csv").read_text().splitlines()
    assert lines == [
        "i,j,best_feasible_fitness,feasible_count,infeasible_count",
        "0,0,2.5,1,0",
        "31,31,,0,1",
    ]
