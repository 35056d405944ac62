#!/usr/bin/env python3
"""
Finite-horizon MDP for the WPT scheduler

State-space enumeration, exact backward induction, sampled (Monte-Carlo)
backups, the receding-horizon lookahead and schedule planning.

Stages run t = 0..T-1 with V_T = 0 as the terminal value; a horizon of T
slots therefore has T decision stages. State indices follow the canonical
order: queues by StationId, then station links, then sensor links, each
digit in C order, so index = queue_index * n_channel_configs + channel_index.
"""

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .dynamics import (QueueMatrix, RewardWeights, SlotResult, SystemState,
                       next_state, reward, step_slot)
from .exceptions import ConfigError, OutputError, ResourceLimitError, SchedulerError
from .policies import PolicyKind, select_all, selection_distribution
from .stochastics import (SystemModel, sample_arrivals, sample_outcomes,
                          step_channels)
from .topology import TransmissionSet, TransmissionSetMatrix

DEFAULT_STATE_CAP = 10 ** 7
DEFAULT_LOOKAHEAD_BUDGET = 10 ** 6
ARRIVAL_SUPPORT_CAP = 10 ** 6


@dataclass(frozen=True)
class MdpConfig:
    """Planning parameters"""

    horizon: int = 10000                    # T
    gamma: float = 1.0                      # discount
    samples: int = 100                      # N outcomes per sampled backup
    depth: int = 1                          # lookahead depth H
    weights: RewardWeights = field(default_factory=RewardWeights)
    state_cap: int = DEFAULT_STATE_CAP
    lookahead_budget: int = DEFAULT_LOOKAHEAD_BUDGET

    def __post_init__(self):
        problems = []
        if self.horizon < 1:
            problems.append("T must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            problems.append("gamma must be in [0, 1]")
        if self.samples < 1:
            problems.append("N must be at least 1")
        if self.depth < 1:
            problems.append("H must be at least 1")
        if self.depth > self.horizon:
            problems.append("H cannot exceed T")
        if problems:
            raise ConfigError("; ".join(problems))


class PlanMode(Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


class StateSpace:
    """All states of a model with finite q_max, addressed by a perfect index"""

    def __init__(self, model: SystemModel):
        if model.q_max is None:
            raise ResourceLimitError("Exact enumeration needs a finite q_max")

        self.model = model
        self.q_max = int(model.q_max)
        self.n_queues = model.topology.n_stations
        self.queue_shape = (self.q_max + 1,) * self.n_queues
        self.link_shape = tuple(chain.n_states for chain in model.chains)
        self.n_queue_configs = int(math.prod(self.queue_shape))
        self.n_channel_configs = int(math.prod(self.link_shape))

        # queue_levels[i] are the lengths of queue config i, channel_indices[c] the link states
        self.queue_levels = np.array(
            np.unravel_index(np.arange(self.n_queue_configs), self.queue_shape)
        ).T.astype(np.int64)
        self.channel_indices = np.array(
            np.unravel_index(np.arange(self.n_channel_configs), self.link_shape)
        ).T.astype(np.int64)
        self.queue_radix = np.array(
            [(self.q_max + 1) ** (self.n_queues - 1 - j) for j in range(self.n_queues)],
            dtype=np.int64,
        )
        self.channel_radix = np.array(
            [int(math.prod(self.link_shape[k + 1:])) for k in range(len(self.link_shape))],
            dtype=np.int64,
        )

    def __len__(self) -> int:
        return self.n_queue_configs * self.n_channel_configs

    def __iter__(self) -> Iterator[SystemState]:
        for i in range(len(self)):
            yield self.state_at(i)

    def __getitem__(self, index: int) -> SystemState:
        return self.state_at(index)

    def index_of(self, state: SystemState) -> int:
        q_idx = int(np.dot(state.queues.lengths, self.queue_radix))
        links = state.station_channels + state.sensor_channels
        c_idx = int(np.dot(links, self.channel_radix))
        return q_idx * self.n_channel_configs + c_idx

    def state_at(self, index: int) -> SystemState:
        q_idx, c_idx = divmod(int(index), self.n_channel_configs)
        lengths = tuple(int(v) for v in self.queue_levels[q_idx])
        links = tuple(int(v) for v in self.channel_indices[c_idx])
        n_station_links = self.model.topology.n_stations
        queues = QueueMatrix(lengths, self.model.topology.stations, self.q_max)
        return SystemState(queues, links[:n_station_links], links[n_station_links:])

    def link_states(self) -> np.ndarray:
        """Link state indices of every state, shape (len, n_links)"""
        return np.tile(self.channel_indices, (self.n_queue_configs, 1))

    def initial_indices(self) -> np.ndarray:
        """States with empty queues (one per channel configuration)"""
        return np.arange(self.n_channel_configs)


@dataclass
class ValueTable:
    """V_t(y) for t = 0..T and the maximising action index for t = 0..T-1"""

    values: np.ndarray      # shape (T + 1, n_states)
    actions: np.ndarray     # shape (T, n_states)
    space: StateSpace

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def value(self, t: int, state: SystemState) -> float:
        return float(self.values[t, self.space.index_of(state)])

    def best_action(self, t: int, state: SystemState) -> int:
        return int(self.actions[t, self.space.index_of(state)])

    def initial_value(self, t: int = 0, initial: str = "empty") -> float:
        """
        Expected V_t over an initial distribution

        Args:
            t: Stage
            initial: "empty" (empty queues, uniform channels) or "uniform"
                (every enumerated state equally likely)
        """
        if initial == "uniform":
            return float(np.mean(self.values[t]))
        if initial != "empty":
            raise ValueError(f"Unknown initial distribution '{initial}'")
        return float(np.mean(self.values[t, self.space.initial_indices()]))

    def save_csv(self, path: str) -> None:
        """
        Dump rows (stage, state_index, value, action_index); the terminal
        stage has action_index -1

        Raises:
            OutputError: If the file cannot be written
        """
        n_stages, n_states = self.values.shape
        terminal = np.full((1, n_states), -1, dtype=np.int64)
        frame = pd.DataFrame({
            "stage": np.repeat(np.arange(n_stages), n_states),
            "state_index": np.tile(np.arange(n_states), n_stages),
            "value": self.values.ravel(),
            "action_index": np.vstack([self.actions, terminal]).ravel(),
        })
        try:
            frame.to_csv(path, index=False, float_format="%.6g", lineterminator="\n",
                         encoding="utf-8")
        except OSError as e:
            raise OutputError(path, str(e)) from e

    def save_npz(self, path: str) -> None:
        try:
            np.savez_compressed(path, values=self.values, actions=self.actions)
        except OSError as e:
            raise OutputError(path, str(e)) from e


@dataclass(frozen=True)
class GapReport:
    """Exact versus approximate expected reward for one horizon and policy"""

    horizon: int
    policy: PolicyKind
    exact_value: float
    approx_value: float             # mean over seeds
    gap_pct: Optional[float]        # mean gap over seeds, None when undefined
    gap_median: Optional[float]
    gap_std: Optional[float]
    seeds: int


def enumerate_state_space(model: SystemModel, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """
    Cartesian product of queue levels {0..q_max} and link chain states

    Raises:
        ResourceLimitError: If q_max is unset or the count exceeds the cap
    """
    if model.q_max is None:
        raise ResourceLimitError("Exact enumeration needs a finite q_max")
    count = (model.q_max + 1) ** model.topology.n_stations
    for chain in model.chains:
        count *= chain.n_states
    if count > cap:
        raise ResourceLimitError(
            f"State space has {count} states, above the cap of {cap}; shrink the scenario"
        )
    return StateSpace(model)


class _ActionTables:
    """
    Post-service queue levels and immediate rewards for every (action,
    selection outcome, state), built once with step_slot
    """

    def __init__(self, space: StateSpace, actions: TransmissionSetMatrix, kind: PolicyKind,
                 model: SystemModel, weights: RewardWeights):
        n_states = len(space)
        zero_arrivals = (0,) * space.n_queues
        self.post: List[np.ndarray] = []       # per action: (n_combos, n_states, n_queues)
        self.rewards: List[np.ndarray] = []    # per action: (n_combos, n_states)
        self.weights: List[np.ndarray] = []    # per action: (n_combos,)

        for action in actions:
            first = selection_distribution(kind, action, space.state_at(0), model)
            n_combos = len(first)
            post = np.zeros((n_combos, n_states, space.n_queues), dtype=np.int64)
            rewards = np.zeros((n_combos, n_states))
            for s in range(n_states):
                state = space.state_at(s)
                for c, (selections, _) in enumerate(
                        selection_distribution(kind, action, state, model)):
                    result = step_slot(state, action, selections, zero_arrivals, model)
                    post[c, s] = result.next_queues.lengths
                    rewards[c, s] = reward(result, weights)
            self.post.append(post)
            self.rewards.append(rewards)
            self.weights.append(np.array([w for _, w in first]))


def _arrival_support(model: SystemModel) -> Tuple[np.ndarray, np.ndarray]:
    """Joint arrival vectors with positive probability and their probabilities"""
    supports = [model.arrivals.support(j) for j in range(model.topology.n_stations)]
    size = math.prod(len(s) for s in supports)
    if size > ARRIVAL_SUPPORT_CAP:
        raise ResourceLimitError(f"Joint arrival support has {size} outcomes")
    vectors = []
    probs = []
    for combo in itertools.product(*supports):
        vectors.append([count for count, _ in combo])
        probs.append(math.prod(p for _, p in combo))
    probs = np.array(probs)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise SchedulerError(f"Arrival probabilities sum to {probs.sum()}")
    return np.array(vectors, dtype=np.int64), probs


def _channel_expectation(space: StateSpace, v_next: np.ndarray) -> np.ndarray:
    """W[q, c] = sum over c' of P(c' | c) V(q, c'), one link at a time"""
    w = v_next.reshape((space.n_queue_configs,) + space.link_shape)
    for k, chain in enumerate(space.model.chains):
        w = np.moveaxis(np.tensordot(w, chain.transition, axes=([1 + k], [1])), -1, 1 + k)
    return w.reshape(space.n_queue_configs, space.n_channel_configs)


def _queue_index(space: StateSpace, levels: np.ndarray) -> np.ndarray:
    """Queue config index of (..., n_queues) levels, clipped at q_max"""
    return np.minimum(levels, space.q_max) @ space.queue_radix


def exact_value_iteration(space: StateSpace, actions: TransmissionSetMatrix, cfg: MdpConfig,
                          kind: PolicyKind, model: Optional[SystemModel] = None,
                          horizon: Optional[int] = None) -> ValueTable:
    """
    Backward induction with exact transition expectations

    Station selection inside each backup follows `kind`; RANDOM is averaged
    over all selection outcomes. The transition probability factorises into
    independent link transitions and per-queue arrivals.

    Args:
        space: Enumerated state space
        actions: Transmission sets
        cfg: Planning parameters (gamma, weights)
        kind: Station selection rule
        model: System model (defaults to the space's model)
        horizon: Number of stages (defaults to cfg.horizon, may be 0)

    Returns:
        ValueTable with V_T = 0
    """
    model = model or space.model
    horizon = cfg.horizon if horizon is None else horizon
    n_states = len(space)
    tables = _ActionTables(space, actions, kind, model, cfg.weights)
    arrival_vectors, arrival_probs = _arrival_support(model)
    channel_of_state = np.arange(n_states) % space.n_channel_configs

    values = np.zeros((horizon + 1, n_states))
    best = np.zeros((horizon, n_states), dtype=np.int64)

    for t in range(horizon - 1, -1, -1):
        w = _channel_expectation(space, values[t + 1])
        q_values = np.empty((len(actions), n_states))
        for a in range(len(actions)):
            total = np.zeros(n_states)
            for c, combo_weight in enumerate(tables.weights[a]):
                post = tables.post[a][c]
                expected = np.zeros(n_states)
                for vector, prob in zip(arrival_vectors, arrival_probs):
                    q_next = _queue_index(space, post + vector)
                    expected += prob * w[q_next, channel_of_state]
                total += combo_weight * (tables.rewards[a][c] + cfg.gamma * expected)
            q_values[a] = total
        values[t] = q_values.max(axis=0)
        best[t] = q_values.argmax(axis=0)

    return ValueTable(values, best, space)


def _inverse_cdf(uniforms: np.ndarray, cdf_rows: np.ndarray) -> np.ndarray:
    """
    Sample indices from per-row CDFs: uniforms has shape (rows, n), cdf_rows
    (rows, m); the result counts the CDF steps each uniform has passed
    """
    drawn = np.zeros(uniforms.shape, dtype=np.int64)
    for j in range(cdf_rows.shape[1] - 1):
        drawn += uniforms >= cdf_rows[:, j, None]
    return drawn


def sampled_value_iteration(space: StateSpace, actions: TransmissionSetMatrix, cfg: MdpConfig,
                            kind: PolicyKind, rng: np.random.Generator,
                            model: Optional[SystemModel] = None,
                            horizon: Optional[int] = None) -> ValueTable:
    """
    Backward induction where every expectation is replaced by the mean over
    cfg.samples sampled outcomes

    At each stage one set of N exogenous outcomes (link transitions and
    arrivals) is drawn per state and shared by all actions. The immediate
    reward stays exact; RANDOM draws a selection outcome per sample only to
    pick the post-service queues of the future term.
    """
    model = model or space.model
    horizon = cfg.horizon if horizon is None else horizon
    n_states = len(space)
    n = cfg.samples
    tables = _ActionTables(space, actions, kind, model, cfg.weights)
    links = space.link_states()
    rows = np.arange(n_states)[:, None]
    arrival_cdfs = [np.cumsum(pmf) for pmf in model.arrivals.pmfs]

    values = np.zeros((horizon + 1, n_states))
    best = np.zeros((horizon, n_states), dtype=np.int64)

    for t in range(horizon - 1, -1, -1):
        next_channel = np.zeros((n_states, n), dtype=np.int64)
        for k, chain in enumerate(model.chains):
            drawn = _inverse_cdf(rng.random((n_states, n)), chain.cdf[links[:, k]])
            next_channel += drawn * space.channel_radix[k]

        arrivals = [
            _inverse_cdf(rng.random((n_states, n)), np.broadcast_to(cdf, (n_states, cdf.size)))
            for cdf in arrival_cdfs
        ]

        q_values = np.empty((len(actions), n_states))
        v_next = values[t + 1]
        for a in range(len(actions)):
            n_combos = len(tables.weights[a])
            immediate = tables.weights[a] @ tables.rewards[a]
            if n_combos == 1:
                combo = np.zeros((n_states, n), dtype=np.int64)
            else:
                combo = rng.choice(n_combos, size=(n_states, n), p=tables.weights[a])

            q_next = np.zeros((n_states, n), dtype=np.int64)
            for j in range(space.n_queues):
                level = tables.post[a][combo, rows, j] + arrivals[j]
                q_next += np.minimum(level, space.q_max) * space.queue_radix[j]
            index = q_next * space.n_channel_configs + next_channel
            q_values[a] = immediate + cfg.gamma * v_next[index].mean(axis=1)

        values[t] = q_values.max(axis=0)
        best[t] = q_values.argmax(axis=0)

    return ValueTable(values, best, space)


def _check_lookahead_budget(n_actions: int, samples: int, depth: int, budget: int) -> None:
    leaves = n_actions ** depth * samples ** max(depth - 1, 0)
    if leaves > budget:
        raise ResourceLimitError(
            f"Lookahead of depth {depth} needs {leaves} evaluations, budget is {budget}"
        )


def approx_value(state: SystemState, t: int, cfg: MdpConfig, kind: PolicyKind,
                 model: SystemModel, actions: TransmissionSetMatrix, rng: np.random.Generator,
                 horizon: Optional[int] = None) -> Tuple[float, Optional[int]]:
    """
    Sampled Bellman value of a single state, truncated at depth H

    For every action: immediate reward plus gamma times the mean value of N
    sampled successors, recursing until the depth (or the horizon) runs out.

    Args:
        state: Current state
        t: Stage
        cfg: Planning parameters
        kind: Station selection rule
        model: System model
        actions: Transmission sets
        rng: Generator for sampling and random selection
        horizon: Horizon T (defaults to cfg.horizon)

    Returns:
        (value estimate, index of the best action), index None when no stage is left

    Raises:
        ResourceLimitError: If the lookahead would exceed cfg.lookahead_budget
    """
    horizon = cfg.horizon if horizon is None else horizon
    depth = min(cfg.depth, horizon - t)
    if depth <= 0:
        return 0.0, None
    _check_lookahead_budget(len(actions), cfg.samples, depth, cfg.lookahead_budget)
    return _lookahead(state, depth, cfg, kind, model, actions, rng)


def _lookahead(state: SystemState, depth: int, cfg: MdpConfig, kind: PolicyKind,
               model: SystemModel, actions: TransmissionSetMatrix,
               rng: np.random.Generator) -> Tuple[float, Optional[int]]:
    zero_arrivals = (0,) * model.topology.n_stations
    best_value = -math.inf
    best_index = None
    for index, action in enumerate(actions):
        # Scored on the selection the policy will make, in expectation for RANDOM
        value = 0.0
        for selections, weight in selection_distribution(kind, action, state, model):
            result = step_slot(state, action, selections, zero_arrivals, model)
            branch = reward(result, cfg.weights)
            if depth > 1 and cfg.gamma > 0:
                post = SystemState(result.next_queues, state.station_channels,
                                   state.sensor_channels)
                future = 0.0
                for outcome in sample_outcomes(post, cfg.samples, model, rng):
                    future += outcome.weight * _lookahead(
                        outcome.state, depth - 1, cfg, kind, model, actions, rng)[0]
                branch += cfg.gamma * future
            value += weight * branch
        if value > best_value:
            best_value = value
            best_index = index
    return best_value, best_index


@dataclass
class RandomStreams:
    """Independent generators for the parts of a simulated trajectory"""

    channels: np.random.Generator
    arrivals: np.random.Generator
    policy: np.random.Generator
    planner: np.random.Generator

    @classmethod
    def from_seed(cls, seed: Union[int, np.random.SeedSequence]) -> "RandomStreams":
        sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = sequence.spawn(4)
        return cls(*(np.random.default_rng(child) for child in children))

    @classmethod
    def shared(cls, rng: np.random.Generator) -> "RandomStreams":
        return cls(rng, rng, rng, rng)


@dataclass
class Schedule:
    """Transmission sets applied over a horizon and what they produced"""

    actions: List[TransmissionSet]
    action_indices: List[int]
    results: List[SlotResult]
    rewards: List[float]
    final_state: SystemState

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


SlotCallback = Callable[[int, SystemState, TransmissionSet, SlotResult], None]


def plan_schedule(start: SystemState, cfg: MdpConfig, kind: PolicyKind,
                  mode: Union[PlanMode, str], model: SystemModel,
                  actions: TransmissionSetMatrix,
                  rng: Union[np.random.Generator, RandomStreams],
                  table: Optional[ValueTable] = None,
                  on_slot: Optional[SlotCallback] = None) -> Schedule:
    """
    Run T slots forward from `start`, choosing each slot's transmission set
    from the value table (exact) or a fresh lookahead (approximate)

    Args:
        start: Initial state
        cfg: Planning parameters, cfg.horizon slots are simulated
        kind: Station selection rule
        mode: PlanMode or its string value
        model: System model
        actions: Transmission sets
        rng: One generator for everything, or separate streams
        table: Precomputed exact table (exact mode builds one if missing)
        on_slot: Called after each slot with (t, state, action, result)

    Returns:
        Schedule of length cfg.horizon
    """
    mode = PlanMode(mode)
    streams = rng if isinstance(rng, RandomStreams) else RandomStreams.shared(rng)

    if mode is PlanMode.EXACT and table is None:
        space = enumerate_state_space(model, cfg.state_cap)
        table = exact_value_iteration(space, actions, cfg, kind, model)
    if mode is PlanMode.EXACT and table.horizon < cfg.horizon:
        raise SchedulerError(
            f"Value table covers {table.horizon} stages, schedule needs {cfg.horizon}"
        )

    state = start
    chosen: List[TransmissionSet] = []
    indices: List[int] = []
    results: List[SlotResult] = []
    rewards: List[float] = []

    for t in range(cfg.horizon):
        if mode is PlanMode.EXACT:
            index = table.best_action(t, state)
        else:
            _, index = approx_value(state, t, cfg, kind, model, actions, streams.planner)
        action = actions[index]

        selections = select_all(kind, action, state, model, streams.policy)
        arrivals = sample_arrivals(model.arrivals, streams.arrivals)
        result = step_slot(state, action, selections, arrivals, model)
        stations, sensors = step_channels(model, state, streams.channels)

        chosen.append(action)
        indices.append(index)
        results.append(result)
        rewards.append(reward(result, cfg.weights))
        if on_slot is not None:
            on_slot(t, state, action, result)
        state = next_state(result, stations, sensors)

    return Schedule(chosen, indices, results, rewards, state)


def compute_gap(exact_value: float, approx_value: float) -> Optional[float]:
    """Percentage gap |exact - approx| / exact * 100, None when exact <= 0"""
    if exact_value <= 0:
        return None
    return abs(exact_value - approx_value) / exact_value * 100.0
