#!/usr/bin/env python3
"""
Random processes for the WPT scheduler
Markov channel chains, packet arrivals and outcome sampling
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import QueueMatrix, SystemState
from .exceptions import ModelError, SchedulerError
from .topology import Topology

# IEEE 802.11g data rates in Mbit/s
DOT11G_RATES_MBPS = (6, 9, 12, 18, 24, 36, 48, 54)

# Harvested energy per packet (uJ) for sensor links
SENSOR_ENERGY_UJ = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)

ROW_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class ChannelChain:
    """Finite-state Markov chain for one link; values are packets/slot or uJ/packet"""

    values: Tuple[float, ...]
    transition: np.ndarray

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ModelError("A channel chain needs at least one state")
        if any(v < 0 for v in values):
            raise ModelError(f"Channel state values must be non-negative: {values}")

        matrix = np.array(self.transition, dtype=float)
        n = len(values)
        if matrix.shape != (n, n):
            raise ModelError(f"Transition matrix shape {matrix.shape}, expected {(n, n)}")
        if np.any(matrix < 0):
            raise ModelError("Transition probabilities must be non-negative")
        if not np.allclose(matrix.sum(axis=1), 1.0, rtol=0.0, atol=ROW_TOLERANCE):
            raise ModelError("Transition matrix rows must sum to 1")
        matrix.setflags(write=False)

        cdf = np.cumsum(matrix, axis=1)
        cdf[:, -1] = 1.0
        cdf.setflags(write=False)

        object.__setattr__(self, "values", values)
        object.__setattr__(self, "transition", matrix)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def n_states(self) -> int:
        return len(self.values)

    @property
    def cdf(self) -> np.ndarray:
        return self._cdf


def make_chain(values: Sequence[float], transition: Sequence[Sequence[float]]) -> ChannelChain:
    return ChannelChain(tuple(values), np.asarray(transition, dtype=float))


def make_uniform_chain(values: Sequence[float]) -> ChannelChain:
    """Chain where every state moves to any state with probability 1/|values|"""
    if not values:
        raise ModelError("A channel chain needs at least one state")
    n = len(values)
    return ChannelChain(tuple(values), np.full((n, n), 1.0 / n))


def step_channel(chain: ChannelChain, index: int, rng: np.random.Generator) -> int:
    """Sample the next state index from the current state's transition row"""
    if chain.n_states == 1:
        return 0
    u = rng.random()
    return int(min(np.searchsorted(chain.cdf[index], u, side='right'), chain.n_states - 1))


def dot11g_packet_rates(packet_bytes: int = 65535, slot_seconds: float = 0.1,
                        rates_mbps: Sequence[float] = DOT11G_RATES_MBPS) -> Tuple[float, ...]:
    """
    Whole packets per slot for each PHY rate

    Args:
        packet_bytes: Packet (aggregate) size in bytes
        slot_seconds: Slot length
        rates_mbps: PHY rates in Mbit/s

    Returns:
        Packets per slot, floored
    """
    if packet_bytes <= 0 or slot_seconds <= 0:
        raise ModelError("packet_bytes and slot_seconds must be positive")
    bits = packet_bytes * 8
    return tuple(float(int(rate * 1e6 * slot_seconds // bits)) for rate in rates_mbps)


class ArrivalProcess:
    """Per-station i.i.d. arrivals, each queue with its own pmf over packet counts"""

    def __init__(self, pmfs: Sequence[Sequence[float]]):
        """
        Args:
            pmfs: pmfs[j][k] is the probability that k packets arrive at station j
        """
        cleaned = []
        for j, pmf in enumerate(pmfs):
            arr = np.array(pmf, dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ModelError(f"Arrival pmf of station {j} must be a non-empty list")
            if np.any(arr < 0) or abs(arr.sum() - 1.0) > ROW_TOLERANCE:
                raise ModelError(f"Arrival pmf of station {j} is not a distribution: {pmf}")
            arr.setflags(write=False)
            cleaned.append(arr)
        self.pmfs: Tuple[np.ndarray, ...] = tuple(cleaned)
        self._cdfs = tuple(self._cdf(pmf) for pmf in self.pmfs)

    @staticmethod
    def _cdf(pmf: np.ndarray) -> np.ndarray:
        cdf = np.cumsum(pmf)
        cdf[-1] = 1.0
        return cdf

    @classmethod
    def bernoulli(cls, n_stations: int, probability: Union[float, Sequence[float]],
                  batch: int = 1) -> "ArrivalProcess":
        """Batch of `batch` packets with probability p, else nothing"""
        if batch < 1:
            raise ModelError("Arrival batch size must be at least 1")
        if np.isscalar(probability):
            probs = [float(probability)] * n_stations
        else:
            probs = [float(p) for p in probability]
            if len(probs) != n_stations:
                raise ModelError(f"Expected {n_stations} arrival probabilities, got {len(probs)}")
        pmfs = []
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ModelError(f"Arrival probability {p} outside [0, 1]")
            pmf = [0.0] * (batch + 1)
            pmf[0] = 1.0 - p
            pmf[batch] += p
            pmfs.append(pmf)
        return cls(pmfs)

    @classmethod
    def from_pmf(cls, n_stations: int, pmf: Sequence[float]) -> "ArrivalProcess":
        """Same count distribution at every station"""
        return cls([list(pmf)] * n_stations)

    @property
    def n_stations(self) -> int:
        return len(self.pmfs)

    def mean_rate(self, station: int) -> float:
        pmf = self.pmfs[station]
        return float(np.dot(np.arange(pmf.size), pmf))

    def support(self, station: int) -> List[Tuple[int, float]]:
        """(count, probability) pairs with positive probability"""
        return [(k, float(p)) for k, p in enumerate(self.pmfs[station]) if p > 0]

    def counts_from_uniforms(self, uniforms: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of one uniform per station"""
        return np.array([
            min(int(np.searchsorted(cdf, u, side='right')), cdf.size - 1)
            for cdf, u in zip(self._cdfs, uniforms)
        ], dtype=int)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Stochastic parameters of a topology plus the slot accounting switches"""

    topology: Topology
    station_chains: Tuple[ChannelChain, ...]
    sensor_chains: Tuple[ChannelChain, ...]
    arrivals: ArrivalProcess
    q_max: Optional[int] = None
    slot_fill_energy: bool = False

    def __post_init__(self):
        object.__setattr__(self, "station_chains", tuple(self.station_chains))
        object.__setattr__(self, "sensor_chains", tuple(self.sensor_chains))
        if len(self.station_chains) != self.topology.n_stations:
            raise SchedulerError("One channel chain per station link is required")
        if len(self.sensor_chains) != self.topology.n_sensors:
            raise SchedulerError("One channel chain per sensor link is required")
        if self.arrivals.n_stations != self.topology.n_stations:
            raise SchedulerError("One arrival pmf per station queue is required")
        if self.q_max is not None and self.q_max < 0:
            raise SchedulerError("q_max must be non-negative")

    @property
    def chains(self) -> Tuple[ChannelChain, ...]:
        """Station links followed by sensor links"""
        return self.station_chains + self.sensor_chains

    def empty_queues(self) -> QueueMatrix:
        return QueueMatrix.empty(self.topology, self.q_max)


@dataclass(frozen=True)
class OutcomeSample:
    """Sampled next state and its weight p(omega)"""

    state: SystemState
    weight: float


def sample_arrivals(proc: ArrivalProcess, rng: np.random.Generator) -> Tuple[int, ...]:
    """Packets arriving at every station queue in one slot"""
    return tuple(int(c) for c in proc.counts_from_uniforms(rng.random(proc.n_stations)))


def step_channels(model: SystemModel, state: SystemState,
                  rng: np.random.Generator) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Advance every link chain by one slot"""
    stations = tuple(step_channel(chain, idx, rng)
                     for chain, idx in zip(model.station_chains, state.station_channels))
    sensors = tuple(step_channel(chain, idx, rng)
                    for chain, idx in zip(model.sensor_chains, state.sensor_channels))
    return stations, sensors


def initial_state(model: SystemModel, rng: np.random.Generator) -> SystemState:
    """Empty queues, channel states drawn uniformly"""
    stations = tuple(int(rng.integers(chain.n_states)) for chain in model.station_chains)
    sensors = tuple(int(rng.integers(chain.n_states)) for chain in model.sensor_chains)
    return SystemState(model.empty_queues(), stations, sensors)


def sample_outcomes(state: SystemState, n: int, model: SystemModel,
                    rng: np.random.Generator) -> List[OutcomeSample]:
    """
    Draw n next states by simulating channel transitions and arrivals

    `state` carries the queues left after service; arrivals are added and
    clipped at q_max. Each sample has weight 1/n.

    Args:
        state: Post-service state
        n: Number of outcomes
        model: System model
        rng: Seeded generator

    Returns:
        List of n weighted outcomes
    """
    if n < 1:
        raise ValueError("Sample count must be at least 1")
    weight = 1.0 / n
    outcomes = []
    for _ in range(n):
        arrivals = sample_arrivals(model.arrivals, rng)
        lengths = [q + a for q, a in zip(state.queues.lengths, arrivals)]
        if model.q_max is not None:
            lengths = [min(v, model.q_max) for v in lengths]
        stations, sensors = step_channels(model, state, rng)
        next_y = SystemState(state.queues.replace(lengths), stations, sensors)
        outcomes.append(OutcomeSample(next_y, weight))
    return outcomes
