#!/usr/bin/env python3
"""
Slot dynamics for the WPT scheduler
Packet service, queue update, energy delivery and reward for one slot
"""

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Mapping, Optional, Sequence, Tuple

from .exceptions import InvalidActionError
from .topology import Topology, active_aps, is_independent

if TYPE_CHECKING:
    from .stochastics import SystemModel


@dataclass(frozen=True)
class QueueMatrix:
    """Queue length Q_aj for every station, grouped by AP"""

    lengths: Tuple[int, ...]                 # indexed by StationId
    groups: Tuple[Tuple[int, ...], ...]      # stations of each AP
    q_max: Optional[int] = None

    def __post_init__(self):
        lengths = tuple(int(v) for v in self.lengths)
        if any(v < 0 for v in lengths):
            raise ValueError(f"Negative queue length in {lengths}")
        if self.q_max is not None and any(v > self.q_max for v in lengths):
            raise ValueError(f"Queue length above q_max={self.q_max} in {lengths}")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def empty(cls, topology: Topology, q_max: Optional[int] = None) -> "QueueMatrix":
        return cls((0,) * topology.n_stations, topology.stations, q_max)

    def get(self, station: int) -> int:
        return self.lengths[station]

    def of_ap(self, ap: int) -> Tuple[int, ...]:
        """Queue lengths of the AP's stations in ascending StationId order"""
        return tuple(self.lengths[s] for s in self.groups[ap])

    def replace(self, lengths: Sequence[int]) -> "QueueMatrix":
        return QueueMatrix(tuple(lengths), self.groups, self.q_max)


@dataclass(frozen=True)
class SystemState:
    """Snapshot y_t = (Q_t, C_t) at the start of a slot"""

    queues: QueueMatrix
    station_channels: Tuple[int, ...]   # chain state index per station link
    sensor_channels: Tuple[int, ...]    # chain state index per sensor link


@dataclass(frozen=True)
class RewardWeights:
    """Weights gamma_d (per packet) and gamma_e (per uJ)"""

    data: float = 1.0
    energy: float = 0.01

    def __post_init__(self):
        if self.data < 0 or self.energy < 0:
            raise ValueError("Reward weights must be non-negative")
        if self.data == 0 and self.energy == 0:
            raise ValueError("Reward weights cannot both be zero")


@dataclass(frozen=True)
class SlotResult:
    """Outcome of one slot"""

    transmitted: Dict[int, int]          # T_k per active AP
    total_transmitted: int               # T(t)
    energy: float                        # E(t) in uJ
    sensor_energy: Dict[int, float]      # uJ per sensor of an active AP
    selections: Dict[int, int]           # j* per active AP
    next_queues: QueueMatrix
    dropped: int = 0
    arrivals: Tuple[int, ...] = field(default=(), repr=False)


def transmit_count(queue_len: int, channel_rate: float) -> int:
    """Packets sent: min(queue, rate) with the rate floored to whole packets"""
    return min(int(queue_len), int(math.floor(channel_rate)))


def total_queue(q: QueueMatrix, ap: int) -> int:
    """Total queue length X_a of an AP"""
    return sum(q.of_ap(ap))


def reward(result: SlotResult, w: RewardWeights) -> float:
    return w.data * result.total_transmitted + w.energy * result.energy


def step_slot(state: SystemState, action: Sequence[int], selections: Mapping[int, int],
              arrivals: Sequence[int], model: "SystemModel") -> SlotResult:
    """
    Evolve the system through one slot

    Active APs serve their selected queue from pre-arrival packets; arrivals
    are added afterwards and become servable next slot. With q_max set,
    lengths clip at q_max and the overflow is counted as dropped.

    Args:
        state: State at the start of the slot
        action: Transmission set
        selections: Selected station j* for every active AP
        arrivals: Packets arriving at each station queue
        model: System model (topology, chains, q_max, slot accounting)

    Returns:
        SlotResult with the next queue matrix

    Raises:
        InvalidActionError: If the set is not independent or a selection is invalid
    """
    topology = model.topology
    if not is_independent(topology.graph, action):
        raise InvalidActionError(f"Transmission set {tuple(action)} is not independent")

    active = active_aps(action)
    if set(selections) != set(active):
        raise InvalidActionError(
            f"Selections for APs {sorted(selections)} do not match active APs {active}"
        )

    lengths = list(state.queues.lengths)
    transmitted: Dict[int, int] = {}
    sensor_energy: Dict[int, float] = {}
    energy = 0.0

    for ap in active:
        station = selections[ap]
        if station not in topology.stations[ap]:
            raise InvalidActionError(f"Station {station} is not associated with AP {ap}")

        rate = model.station_chains[station].values[state.station_channels[station]]
        sent = transmit_count(lengths[station], rate)
        transmitted[ap] = sent
        lengths[station] -= sent

        credited = int(math.floor(rate)) if model.slot_fill_energy else sent
        for sensor in topology.sensors[ap]:
            chain = model.sensor_chains[sensor]
            delivered = chain.values[state.sensor_channels[sensor]] * credited
            sensor_energy[sensor] = delivered
            energy += delivered

    dropped = 0
    for station, count in enumerate(arrivals):
        lengths[station] += int(count)
        if model.q_max is not None and lengths[station] > model.q_max:
            dropped += lengths[station] - model.q_max
            lengths[station] = model.q_max

    return SlotResult(
        transmitted=transmitted,
        total_transmitted=sum(transmitted.values()),
        energy=energy,
        sensor_energy=sensor_energy,
        selections=dict(selections),
        next_queues=state.queues.replace(lengths),
        dropped=dropped,
        arrivals=tuple(int(a) for a in arrivals),
    )


def next_state(result: SlotResult, station_channels: Sequence[int],
               sensor_channels: Sequence[int]) -> SystemState:
    """Combine a slot's queues with the channel indices of the next slot"""
    return SystemState(result.next_queues, tuple(station_channels), tuple(sensor_channels))
