import functools
import itertools
import math

import numpy as np
import pytest

from wpt_scheduler.dynamics import QueueMatrix, RewardWeights, SystemState, reward, step_slot
from wpt_scheduler.exceptions import ConfigError, OutputError, ResourceLimitError, SchedulerError
from wpt_scheduler.mdp import (MdpConfig, PlanMode, RandomStreams, approx_value, compute_gap,
                               enumerate_state_space, exact_value_iteration, plan_schedule,
                               sampled_value_iteration)
from wpt_scheduler.policies import PolicyKind, select_all, selection_distribution
from wpt_scheduler.stochastics import (ArrivalProcess, SystemModel, make_chain,
                                       make_uniform_chain)
from wpt_scheduler.topology import (ConflictGraph, Topology, TransmissionSetMatrix,
                                    enumerate_transmission_sets, is_independent)


def _small_scenario(q_max=2):
    topology = Topology(ConflictGraph(2, [(0, 1)]), ((0, 1), (2, 3)), ((0,), (1,)))
    return SystemModel(
        topology=topology,
        station_chains=(make_uniform_chain([1, 2]),) * 4,
        sensor_chains=(make_uniform_chain([50, 100]),) * 2,
        arrivals=ArrivalProcess.from_pmf(4, [0.6, 0.3, 0.1]),
        q_max=q_max,
    )


def _oracle_model():
    """Two conflicting APs with sticky channels, small enough to brute force"""
    topology = Topology(ConflictGraph(2, [(0, 1)]), ((0,), (1,)), ((0,), ()))
    sticky = make_chain([1, 2], [[0.8, 0.2], [0.3, 0.7]])
    return SystemModel(
        topology=topology,
        station_chains=(sticky, make_uniform_chain([1, 3])),
        sensor_chains=(make_chain([10, 20], [[0.5, 0.5], [0.1, 0.9]]),),
        arrivals=ArrivalProcess.bernoulli(2, [0.5, 0.7]),
        q_max=2,
    )


def _random_oracle_model():
    topology = Topology(ConflictGraph(1), ((0, 1),), ((0,),))
    return SystemModel(
        topology=topology,
        station_chains=(make_uniform_chain([1, 2]), make_uniform_chain([2])),
        sensor_chains=(make_uniform_chain([30]),),
        arrivals=ArrivalProcess.bernoulli(2, [0.4, 0.9]),
        q_max=1,
    )


def _deterministic_model():
    topology = Topology(ConflictGraph(2, [(0, 1)]), ((0, 1), (2,)), ((), (0,)))
    return SystemModel(
        topology=topology,
        station_chains=(make_uniform_chain([2]), make_uniform_chain([1]),
                        make_uniform_chain([3])),
        sensor_chains=(make_uniform_chain([20]),),
        arrivals=ArrivalProcess.bernoulli(3, [1.0, 0.0, 1.0]),
        q_max=3,
    )


def _actions(model):
    return enumerate_transmission_sets(model.topology.graph)


def _immediate_best(state, model, actions, kind, weights):
    zero = (0,) * model.topology.n_stations
    best = -math.inf
    for action in actions:
        selections = select_all(kind, action, state, model)
        best = max(best, reward(step_slot(state, action, selections, zero, model), weights))
    return best


def _expectimax(model, actions, kind, weights, gamma, horizon):
    """Recursive expectimax over explicitly enumerated outcomes"""
    zero = (0,) * model.topology.n_stations
    n_station_links = model.topology.n_stations
    arrival_supports = [model.arrivals.support(j) for j in range(model.topology.n_stations)]

    @functools.lru_cache(maxsize=None)
    def value(t, state):
        if t == horizon:
            return 0.0
        links = state.station_channels + state.sensor_channels
        best = -math.inf
        for action in actions:
            total = 0.0
            for selections, p_sel in selection_distribution(kind, action, state, model):
                result = step_slot(state, action, selections, zero, model)
                future = 0.0
                for combo in itertools.product(*arrival_supports):
                    p_arrival = math.prod(p for _, p in combo)
                    lengths = tuple(min(q + count, model.q_max) for q, (count, _)
                                    in zip(result.next_queues.lengths, combo))
                    queues = QueueMatrix(lengths, model.topology.stations, model.q_max)
                    for nxt in itertools.product(*[range(c.n_states) for c in model.chains]):
                        p_link = math.prod(chain.transition[cur, new] for chain, cur, new
                                           in zip(model.chains, links, nxt))
                        if p_link == 0:
                            continue
                        successor = SystemState(queues, nxt[:n_station_links],
                                                nxt[n_station_links:])
                        future += p_arrival * p_link * value(t + 1, successor)
                total += p_sel * (reward(result, weights) + gamma * future)
            best = max(best, total)
        return best

    return value


def test_small_scenario_state_count_and_indexing():
    space = enumerate_state_space(_small_scenario())
    assert len(space) == 5184
    for index in range(0, len(space), 7):
        assert space.index_of(space.state_at(index)) == index
    assert space.state_at(0).queues.lengths == (0, 0, 0, 0)
    assert list(space.initial_indices()) == list(range(64))


def test_tiny_state_spaces():
    single = Topology(ConflictGraph(1), ((0,),), ((),))
    model = SystemModel(single, (make_uniform_chain([1]),), (), ArrivalProcess.bernoulli(1, 0.5),
                        q_max=0)
    assert len(enumerate_state_space(model)) == 1

    model = SystemModel(single, (make_uniform_chain([1, 2]),), (),
                        ArrivalProcess.bernoulli(1, 0.5), q_max=2)
    space = enumerate_state_space(model)
    assert len(space) == 6
    assert len({space.index_of(state) for state in space}) == 6


def test_state_space_limits():
    with pytest.raises(ResourceLimitError):
        enumerate_state_space(_small_scenario(), cap=5000)
    with pytest.raises(ResourceLimitError):
        enumerate_state_space(_small_scenario(q_max=None))


def test_config_validation():
    with pytest.raises(ConfigError):
        MdpConfig(horizon=0)
    with pytest.raises(ConfigError):
        MdpConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        MdpConfig(samples=0)
    with pytest.raises(ConfigError):
        MdpConfig(horizon=2, depth=3)


def test_zero_horizon_is_all_zero():
    model = _small_scenario()
    space = enumerate_state_space(model)
    table = exact_value_iteration(space, _actions(model), MdpConfig(horizon=1),
                                  PolicyKind.MAX_WEIGHT, horizon=0)
    assert table.values.shape == (1, 5184)
    assert not table.values.any()
    assert table.horizon == 0


def test_one_stage_is_best_immediate_reward():
    model = _small_scenario()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=1)
    table = exact_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT)

    for index in range(0, len(space), 11):
        state = space.state_at(index)
        expected = _immediate_best(state, model, actions, PolicyKind.MAX_WEIGHT, cfg.weights)
        assert table.values[0, index] == pytest.approx(expected)


def test_zero_discount_is_myopic():
    model = _oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=3, gamma=0.0)
    table = exact_value_iteration(space, actions, cfg, PolicyKind.MAX_QUEUE)

    for index, state in enumerate(space):
        expected = _immediate_best(state, model, actions, PolicyKind.MAX_QUEUE, cfg.weights)
        assert table.values[0, index] == pytest.approx(expected)


@pytest.mark.parametrize("kind", [PolicyKind.MAX_WEIGHT, PolicyKind.MAX_CSI])
def test_exact_matches_expectimax(kind):
    model = _oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=3, gamma=0.9, weights=RewardWeights(1.0, 0.05))
    table = exact_value_iteration(space, actions, cfg, kind)
    oracle = _expectimax(model, actions, kind, cfg.weights, cfg.gamma, cfg.horizon)

    for index, state in enumerate(space):
        assert table.values[0, index] == pytest.approx(oracle(0, state), abs=1e-9)
        assert table.values[1, index] == pytest.approx(oracle(1, state), abs=1e-9)


def test_exact_matches_expectimax_with_random_selection():
    model = _random_oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=4)
    table = exact_value_iteration(space, actions, cfg, PolicyKind.RANDOM)
    oracle = _expectimax(model, actions, PolicyKind.RANDOM, cfg.weights, cfg.gamma, cfg.horizon)

    for index, state in enumerate(space):
        assert table.values[0, index] == pytest.approx(oracle(0, state), abs=1e-9)


def test_value_monotone_in_weights():
    model = _oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    low = exact_value_iteration(space, actions, MdpConfig(horizon=3, weights=RewardWeights(1, 0.01)),
                                PolicyKind.MAX_WEIGHT)
    high = exact_value_iteration(space, actions, MdpConfig(horizon=3, weights=RewardWeights(2, 0.05)),
                                 PolicyKind.MAX_WEIGHT)
    assert np.all(high.values >= low.values - 1e-12)


def test_values_non_decreasing_with_stages_left():
    model = _oracle_model()
    space = enumerate_state_space(model)
    table = exact_value_iteration(space, _actions(model), MdpConfig(horizon=4),
                                  PolicyKind.MAX_WEIGHT)
    for t in range(table.horizon):
        assert np.all(table.values[t] >= table.values[t + 1] - 1e-12)


def test_stored_actions_are_independent_sets():
    model = _small_scenario()
    actions = _actions(model)
    space = enumerate_state_space(model)
    table = exact_value_iteration(space, actions, MdpConfig(horizon=2), PolicyKind.MAX_WEIGHT)
    for index in np.unique(table.actions):
        assert is_independent(model.topology.graph, actions[int(index)])


def test_sampled_matches_exact_on_deterministic_model():
    model = _deterministic_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=3, samples=5)
    exact = exact_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT)
    sampled = sampled_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT,
                                      np.random.default_rng(0))
    assert np.allclose(exact.values, sampled.values)


def test_sampled_close_to_exact_with_many_samples():
    model = _oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=3, samples=2000)
    exact = exact_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT)
    sampled = sampled_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT,
                                      np.random.default_rng(1))
    assert sampled.initial_value(initial="uniform") == pytest.approx(
        exact.initial_value(initial="uniform"), rel=0.05)


def test_sampled_is_reproducible():
    model = _oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=2, samples=20)
    first = sampled_value_iteration(space, actions, cfg, PolicyKind.RANDOM,
                                    np.random.default_rng(3))
    second = sampled_value_iteration(space, actions, cfg, PolicyKind.RANDOM,
                                     np.random.default_rng(3))
    assert np.array_equal(first.values, second.values)


def test_sampled_one_stage_backup_is_exact_for_random():
    model = _random_oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=1, samples=3)
    exact = exact_value_iteration(space, actions, cfg, PolicyKind.RANDOM)
    for seed in range(3):
        sampled = sampled_value_iteration(space, actions, cfg, PolicyKind.RANDOM,
                                          np.random.default_rng(seed))
        assert np.allclose(exact.values, sampled.values)


def test_lookahead_scores_random_selection_in_expectation():
    model = _random_oracle_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=1)
    table = exact_value_iteration(space, actions, cfg, PolicyKind.RANDOM)

    for index, state in enumerate(space):
        for seed in range(3):
            value, _ = approx_value(state, 0, cfg, PolicyKind.RANDOM, model, actions,
                                    np.random.default_rng(seed))
            assert value == pytest.approx(table.values[0, index])


def test_full_depth_lookahead_equals_exact_on_deterministic_model():
    model = _deterministic_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=3, samples=1, depth=3)
    table = exact_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT)
    rng = np.random.default_rng(0)

    for index, state in enumerate(space):
        value, action_index = approx_value(state, 0, cfg, PolicyKind.MAX_WEIGHT, model,
                                           actions, rng)
        assert value == pytest.approx(table.values[0, index])
        assert table.value(0, state) == pytest.approx(value)
        assert action_index is not None


def test_lookahead_past_horizon():
    model = _deterministic_model()
    cfg = MdpConfig(horizon=2)
    state = enumerate_state_space(model).state_at(0)
    assert approx_value(state, 2, cfg, PolicyKind.MAX_WEIGHT, model, _actions(model),
                        np.random.default_rng(0)) == (0.0, None)


def test_lookahead_budget():
    model = _oracle_model()
    cfg = MdpConfig(horizon=5, depth=3, samples=10, lookahead_budget=50)
    state = enumerate_state_space(model).state_at(0)
    with pytest.raises(ResourceLimitError):
        approx_value(state, 0, cfg, PolicyKind.MAX_WEIGHT, model, _actions(model),
                     np.random.default_rng(0))


def test_single_action_schedule_repeats_it():
    topology = Topology(ConflictGraph(1), ((0, 1),), ((0,),))
    model = SystemModel(topology, (make_uniform_chain([1, 2]),) * 2, (make_uniform_chain([50]),),
                        ArrivalProcess.bernoulli(2, 0.5))
    actions = TransmissionSetMatrix([(1,)])
    state = SystemState(model.empty_queues(), (0, 1), (0,))
    schedule = plan_schedule(state, MdpConfig(horizon=6), PolicyKind.MAX_WEIGHT,
                             PlanMode.APPROXIMATE, model, actions, np.random.default_rng(0))

    assert len(schedule) == 6
    assert schedule.actions == [(1,)] * 6
    assert schedule.action_indices == [0] * 6
    assert schedule.total_reward == pytest.approx(sum(schedule.rewards))


@pytest.mark.parametrize("mode", ["exact", "approximate"])
def test_energy_only_reward_picks_the_sensor_ap(mode):
    graph = ConflictGraph(3, [(0, 1), (1, 2)])
    topology = Topology(graph, ((0,), (1,), (2,)), ((), (0,), ()))
    model = SystemModel(topology, (make_uniform_chain([2]),) * 3, (make_uniform_chain([40]),),
                        ArrivalProcess.bernoulli(3, 0.5), q_max=1, slot_fill_energy=True)
    actions = _actions(model)
    cfg = MdpConfig(horizon=5, weights=RewardWeights(0.0, 1.0))
    state = SystemState(model.empty_queues(), (0, 0, 0), (0,))
    schedule = plan_schedule(state, cfg, PolicyKind.MAX_WEIGHT, mode, model, actions,
                             RandomStreams.from_seed(4))

    assert schedule.actions == [(0, 1, 0)] * 5
    assert schedule.total_reward == pytest.approx(5 * 80.0)


def test_exact_schedule_needs_long_enough_table():
    model = _deterministic_model()
    actions = _actions(model)
    space = enumerate_state_space(model)
    table = exact_value_iteration(space, actions, MdpConfig(horizon=2), PolicyKind.MAX_WEIGHT)
    with pytest.raises(SchedulerError):
        plan_schedule(space.state_at(0), MdpConfig(horizon=3), PolicyKind.MAX_WEIGHT,
                      PlanMode.EXACT, model, actions, np.random.default_rng(0), table=table)


def test_schedule_reproducible_and_reports_slots():
    model = _oracle_model()
    actions = _actions(model)
    state = enumerate_state_space(model).state_at(0)
    cfg = MdpConfig(horizon=8, samples=5)
    seen = []

    first = plan_schedule(state, cfg, PolicyKind.MAX_WEIGHT, PlanMode.APPROXIMATE, model,
                          actions, RandomStreams.from_seed(9),
                          on_slot=lambda t, y, a, r: seen.append(t))
    second = plan_schedule(state, cfg, PolicyKind.MAX_WEIGHT, PlanMode.APPROXIMATE, model,
                           actions, RandomStreams.from_seed(9))

    assert seen == list(range(8))
    assert first.actions == second.actions
    assert first.rewards == second.rewards
    assert first.final_state == second.final_state


def test_max_weight_beats_random_when_one_queue_stays_empty():
    topology = Topology(ConflictGraph(1), ((0, 1),), ((),))
    model = SystemModel(topology, (make_uniform_chain([1]),) * 2, (),
                        ArrivalProcess.bernoulli(2, [1.0, 0.0]), q_max=2)
    actions = _actions(model)
    space = enumerate_state_space(model)
    cfg = MdpConfig(horizon=4)
    weighted = exact_value_iteration(space, actions, cfg, PolicyKind.MAX_WEIGHT)
    random = exact_value_iteration(space, actions, cfg, PolicyKind.RANDOM)

    assert weighted.initial_value() > random.initial_value()
    assert weighted.initial_value(initial="uniform") >= random.initial_value(initial="uniform")


def test_compute_gap_examples():
    assert compute_gap(100.0, 90.0) == pytest.approx(10.0)
    assert compute_gap(50.0, 60.0) == pytest.approx(20.0)
    assert compute_gap(10.0, 10.0) == 0.0
    assert compute_gap(0.0, 5.0) is None
    assert compute_gap(-1.0, 5.0) is None


def test_initial_value_options():
    model = _oracle_model()
    space = enumerate_state_space(model)
    table = exact_value_iteration(space, _actions(model), MdpConfig(horizon=1),
                                  PolicyKind.MAX_WEIGHT)
    assert table.initial_value(initial="uniform") == pytest.approx(np.mean(table.values[0]))
    with pytest.raises(ValueError):
        table.initial_value(initial="full")


def test_value_table_exports(tmp_path):
    model = _deterministic_model()
    space = enumerate_state_space(model)
    table = exact_value_iteration(space, _actions(model), MdpConfig(horizon=2),
                                  PolicyKind.MAX_WEIGHT)

    csv_path = tmp_path / "values.csv"
    table.save_csv(str(csv_path))
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "stage,state_index,value,action_index"
    assert len(lines) == 1 + 3 * len(space)
    assert lines[-1].startswith(f"2,{len(space) - 1},0,")
    assert lines[-1].endswith(",-1")

    npz_path = tmp_path / "values.npz"
    table.save_npz(str(npz_path))
    with np.load(npz_path) as data:
        assert np.array_equal(data["values"], table.values)
        assert np.array_equal(data["actions"], table.actions)

    with pytest.raises(OutputError):
        table.save_csv(str(tmp_path / "missing" / "values.csv"))
