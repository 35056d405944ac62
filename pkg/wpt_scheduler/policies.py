#!/usr/bin/env python3
"""
Station selection policies for the WPT scheduler
Each active AP picks one of its stations per slot
"""

import itertools
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import QueueMatrix, SystemState
from .exceptions import PolicyError
from .stochastics import SystemModel
from .topology import active_aps


class PolicyKind(Enum):
    """Per-AP station selection rule"""
    MAX_WEIGHT = "maxweight"    # argmax alpha * Q
    MAX_QUEUE = "maxqueue"      # argmax Q
    MAX_CSI = "maxcsi"          # argmax alpha
    RANDOM = "random"           # uniform over the AP's stations

    @classmethod
    def parse(cls, text: str) -> "PolicyKind":
        """
        Parse a config/CLI policy name

        Raises:
            PolicyError: If the name is unknown
        """
        key = str(text).strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        for kind in cls:
            if kind.value == key:
                return kind
        names = ", ".join(kind.value for kind in cls)
        raise PolicyError(f"Unknown policy '{text}' (expected one of: {names})")

    @property
    def is_deterministic(self) -> bool:
        return self is not PolicyKind.RANDOM


def select_station(kind: PolicyKind, ap: int, q: QueueMatrix, channel_rates: Sequence[float],
                   rng: Optional[np.random.Generator] = None) -> int:
    """
    Pick the station an AP serves

    Ties go to the lowest StationId.

    Args:
        kind: Selection rule
        ap: AP making the choice
        q: Queue matrix
        channel_rates: alpha_aj for the AP's stations in ascending StationId order
        rng: Generator, required for RANDOM

    Returns:
        Selected StationId

    Raises:
        PolicyError: If the AP has no stations or inputs are inconsistent
    """
    stations = q.groups[ap]
    if not stations:
        raise PolicyError(f"AP {ap} has no stations to select from")
    if len(channel_rates) != len(stations):
        raise PolicyError(
            f"AP {ap} has {len(stations)} stations but {len(channel_rates)} channel rates"
        )

    if kind is PolicyKind.RANDOM:
        if rng is None:
            raise PolicyError("Random selection needs a random generator")
        return stations[int(rng.integers(len(stations)))]

    queues = q.of_ap(ap)
    if kind is PolicyKind.MAX_WEIGHT:
        scores = [alpha * length for alpha, length in zip(channel_rates, queues)]
    elif kind is PolicyKind.MAX_QUEUE:
        scores = list(queues)
    else:
        scores = list(channel_rates)

    # max() keeps the first maximum, i.e. the lowest StationId
    best = max(range(len(stations)), key=lambda i: scores[i])
    return stations[best]


def channel_rates_of(ap: int, state: SystemState, model: SystemModel) -> List[float]:
    """alpha_aj(t) for every station of the AP"""
    return [model.station_chains[s].values[state.station_channels[s]]
            for s in model.topology.stations[ap]]


def select_all(kind: PolicyKind, action: Sequence[int], state: SystemState,
               model: SystemModel, rng: Optional[np.random.Generator] = None) -> Dict[int, int]:
    """
    Apply the selection rule at every active AP

    Returns:
        Map ApId -> StationId for active APs only
    """
    return {
        ap: select_station(kind, ap, state.queues, channel_rates_of(ap, state, model), rng)
        for ap in active_aps(action)
    }


def selection_distribution(kind: PolicyKind, action: Sequence[int], state: SystemState,
                           model: SystemModel) -> List[Tuple[Dict[int, int], float]]:
    """
    Every selection map the rule can produce, with its probability

    Deterministic rules give one map with probability 1; RANDOM gives the
    product of uniform choices at the active APs.
    """
    if kind.is_deterministic:
        return [(select_all(kind, action, state, model), 1.0)]

    aps = active_aps(action)
    groups = [model.topology.stations[ap] for ap in aps]
    weight = 1.0 / float(np.prod([len(g) for g in groups])) if groups else 1.0
    return [(dict(zip(aps, combo)), weight) for combo in itertools.product(*groups)]
