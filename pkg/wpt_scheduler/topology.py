#!/usr/bin/env python3
"""
Topology for the WPT scheduler
WLAN conflict graph, station/sensor association and transmission-set enumeration
"""

import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .exceptions import InvalidActionError, OutputError, TopologyError

# Binary activation vector indexed by ApId (1 = AP transmits)
TransmissionSet = Tuple[int, ...]


class ConflictGraph:
    """Undirected interference graph over APs 0..n-1"""

    def __init__(self, n_aps: int, edges: Iterable[Tuple[int, int]] = ()):
        """
        Build a conflict graph

        Args:
            n_aps: Number of APs (vertices are 0..n_aps-1)
            edges: Pairs of conflicting APs

        Raises:
            TopologyError: On self-loops or out-of-range endpoints
        """
        if n_aps < 1:
            raise TopologyError("A conflict graph needs at least one AP")

        graph = nx.Graph()
        graph.add_nodes_from(range(n_aps))
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"Self-loop on AP {a}")
            if not (0 <= a < n_aps and 0 <= b < n_aps):
                raise TopologyError(f"Edge ({a}, {b}) outside 0..{n_aps - 1}")
            graph.add_edge(a, b)

        self._graph = nx.freeze(graph)
        self._neighbors = tuple(frozenset(self._graph.neighbors(ap)) for ap in range(n_aps))

    @property
    def n_aps(self) -> int:
        return self._graph.number_of_nodes()

    @property
    def vertices(self) -> range:
        return range(self.n_aps)

    @property
    def graph(self) -> nx.Graph:
        """Frozen networkx view of the graph"""
        return self._graph

    def edges(self) -> List[Tuple[int, int]]:
        """Sorted edge list with the smaller ApId first"""
        return sorted(tuple(sorted(edge)) for edge in self._graph.edges())

    def neighbors(self, ap: int) -> frozenset:
        return self._neighbors[ap]

    def conflicts(self, a: int, b: int) -> bool:
        return b in self._neighbors[a]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConflictGraph):
            return NotImplemented
        return self.n_aps == other.n_aps and self.edges() == other.edges()

    def __hash__(self) -> int:
        return hash((self.n_aps, tuple(self.edges())))

    def __repr__(self) -> str:
        return f"ConflictGraph(n_aps={self.n_aps}, edges={self.edges()})"


class TransmissionSetMatrix:
    """Ordered collection of distinct transmission sets (the columns of matrix A)"""

    def __init__(self, sets: Sequence[TransmissionSet]):
        seen = set()
        ordered: List[TransmissionSet] = []
        for tset in sets:
            tset = tuple(int(v) for v in tset)
            if tset in seen:
                continue
            seen.add(tset)
            ordered.append(tset)
        self._sets: Tuple[TransmissionSet, ...] = tuple(ordered)

    def __len__(self) -> int:
        return len(self._sets)

    def __iter__(self) -> Iterator[TransmissionSet]:
        return iter(self._sets)

    def __getitem__(self, index: int) -> TransmissionSet:
        return self._sets[index]

    def __contains__(self, tset: object) -> bool:
        return tset in self._sets

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransmissionSetMatrix):
            return NotImplemented
        return self._sets == other._sets

    def __repr__(self) -> str:
        return f"TransmissionSetMatrix({list(self._sets)})"

    def index(self, tset: TransmissionSet) -> int:
        return self._sets.index(tuple(tset))

    def as_array(self) -> np.ndarray:
        """Matrix A with one column per transmission set"""
        if not self._sets:
            return np.zeros((0, 0), dtype=np.int8)
        return np.array(self._sets, dtype=np.int8).T


@dataclass(frozen=True)
class Topology:
    """Conflict graph plus the stations S_d(a) and sensors S_e(a) of every AP"""

    graph: ConflictGraph
    stations: Tuple[Tuple[int, ...], ...]
    sensors: Tuple[Tuple[int, ...], ...]
    _station_owner: Tuple[int, ...] = field(init=False, repr=False, compare=False)
    _sensor_owner: Tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n_aps = self.graph.n_aps
        stations = tuple(tuple(sorted(int(s) for s in group)) for group in self.stations)
        sensors = tuple(tuple(sorted(int(s) for s in group)) for group in self.sensors)
        if len(stations) != n_aps or len(sensors) != n_aps:
            raise TopologyError("Station and sensor maps must list every AP")

        for ap, group in enumerate(stations):
            if not group:
                raise TopologyError(f"AP {ap} has no stations")

        object.__setattr__(self, "stations", stations)
        object.__setattr__(self, "sensors", sensors)
        object.__setattr__(self, "_station_owner", self._owners(stations, "station"))
        object.__setattr__(self, "_sensor_owner", self._owners(sensors, "sensor"))

    @staticmethod
    def _owners(groups: Tuple[Tuple[int, ...], ...], kind: str) -> Tuple[int, ...]:
        """Map each dense ID to its AP, checking every ID 0..n-1 appears exactly once"""
        owner: Dict[int, int] = {}
        for ap, group in enumerate(groups):
            for ident in group:
                if ident in owner:
                    raise TopologyError(f"{kind} {ident} belongs to APs {owner[ident]} and {ap}")
                owner[ident] = ap
        if sorted(owner) != list(range(len(owner))):
            raise TopologyError(f"{kind} IDs must be dense 0..{len(owner) - 1}")
        return tuple(owner[i] for i in range(len(owner)))

    @property
    def n_aps(self) -> int:
        return self.graph.n_aps

    @property
    def n_stations(self) -> int:
        return len(self._station_owner)

    @property
    def n_sensors(self) -> int:
        return len(self._sensor_owner)

    def station_owner(self, station: int) -> int:
        return self._station_owner[station]

    def sensor_owner(self, sensor: int) -> int:
        return self._sensor_owner[sensor]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_aps": self.n_aps,
            "edges": [list(edge) for edge in self.graph.edges()],
            "stations": {str(ap): list(group) for ap, group in enumerate(self.stations)},
            "sensors": {str(ap): list(group) for ap, group in enumerate(self.sensors)},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Topology":
        """
        Build a topology from its JSON form

        Raises:
            TopologyError: If fields are missing or inconsistent
        """
        try:
            n_aps = int(data["n_aps"])
            edges = [tuple(edge) for edge in data.get("edges", [])]
            station_map = data["stations"]
            sensor_map = data.get("sensors", {})
        except (KeyError, TypeError, ValueError) as e:
            raise TopologyError(f"Malformed topology: {e}") from e

        graph = ConflictGraph(n_aps, edges)
        stations = tuple(tuple(station_map.get(str(ap), [])) for ap in range(n_aps))
        sensors = tuple(tuple(sensor_map.get(str(ap), [])) for ap in range(n_aps))
        return cls(graph, stations, sensors)


def build_random_topology(n_aps: int, edge_prob: float, max_stations: int,
                          max_sensors: int, rng: np.random.Generator) -> Topology:
    """
    Draw a random topology

    Every AP pair conflicts independently with probability edge_prob. The
    uniform draws for the pairs come first, so two calls from the same seed
    with different edge_prob give nested edge sets and identical stations.

    Args:
        n_aps: Number of APs
        edge_prob: Probability that a pair of APs interferes
        max_stations: Each AP gets 1..max_stations stations
        max_sensors: Each AP gets 0..max_sensors sensors
        rng: Seeded generator

    Returns:
        Topology with dense station and sensor IDs assigned in AP order

    Raises:
        TopologyError: On invalid counts or probability
    """
    if n_aps < 1:
        raise TopologyError("n_aps must be at least 1")
    if max_stations < 1:
        raise TopologyError("max_stations must be at least 1")
    if max_sensors < 0:
        raise TopologyError("max_sensors must be non-negative")
    if not 0.0 <= edge_prob <= 1.0:
        raise TopologyError(f"edge_prob {edge_prob} outside [0, 1]")

    pairs = [(a, b) for a in range(n_aps) for b in range(a + 1, n_aps)]
    draws = rng.random(len(pairs))
    edges = [pair for pair, u in zip(pairs, draws) if u < edge_prob]

    station_counts = rng.integers(1, max_stations + 1, size=n_aps)
    sensor_counts = rng.integers(0, max_sensors + 1, size=n_aps)

    stations = []
    sensors = []
    next_station = 0
    next_sensor = 0
    for ap in range(n_aps):
        stations.append(tuple(range(next_station, next_station + int(station_counts[ap]))))
        next_station += int(station_counts[ap])
        sensors.append(tuple(range(next_sensor, next_sensor + int(sensor_counts[ap]))))
        next_sensor += int(sensor_counts[ap])

    return Topology(ConflictGraph(n_aps, edges), tuple(stations), tuple(sensors))


def enumerate_transmission_sets(graph: ConflictGraph) -> TransmissionSetMatrix:
    """
    Greedy transmission sets: one start per AP in ascending ID order, then add
    every AP (ascending ID) that conflicts with no member so far

    Args:
        graph: Conflict graph

    Returns:
        Deduplicated sets in discovery order
    """
    sets: List[TransmissionSet] = []
    for start in graph.vertices:
        members = [start]
        for ap in graph.vertices:
            if ap == start:
                continue
            if not any(graph.conflicts(ap, member) for member in members):
                members.append(ap)
        sets.append(_as_vector(members, graph.n_aps))
    return TransmissionSetMatrix(sets)


def enumerate_maximal_sets(graph: ConflictGraph) -> TransmissionSetMatrix:
    """
    Every maximal independent set, found as the maximal cliques of the
    complement graph. Exponential in the worst case; meant for small graphs.

    Args:
        graph: Conflict graph

    Returns:
        Sets ordered by their sorted member lists
    """
    complement = nx.complement(graph.graph)
    cliques = sorted(sorted(clique) for clique in nx.find_cliques(complement))
    return TransmissionSetMatrix([_as_vector(clique, graph.n_aps) for clique in cliques])


def is_independent(graph: ConflictGraph, tset: Sequence[int]) -> bool:
    """
    Check that no conflict edge joins two active APs

    Raises:
        InvalidActionError: If the vector length does not match the graph
    """
    if len(tset) != graph.n_aps:
        raise InvalidActionError(
            f"Transmission set has {len(tset)} entries, graph has {graph.n_aps} APs"
        )
    active = [ap for ap, flag in enumerate(tset) if flag]
    for i, a in enumerate(active):
        for b in active[i + 1:]:
            if graph.conflicts(a, b):
                return False
    return True


def active_aps(tset: Sequence[int]) -> List[int]:
    return [ap for ap, flag in enumerate(tset) if flag]


def _as_vector(members: Iterable[int], n_aps: int) -> TransmissionSet:
    vector = [0] * n_aps
    for ap in members:
        vector[ap] = 1
    return tuple(vector)


def load_topology(path: str) -> Topology:
    """
    Load a topology JSON file

    Raises:
        TopologyError: If the file is missing, unreadable or malformed
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise TopologyError(f"Cannot read topology file {path}: {e}") from e
    return Topology.from_dict(data)


def save_topology(topology: Topology, path: str) -> None:
    """
    Write a topology JSON file atomically

    Raises:
        OutputError: If the file cannot be written
    """
    temp_path = f"{path}.tmp"
    try:
        with open(temp_path, 'w', encoding='utf-8') as f:
            json.dump(topology.to_dict(), f, indent=2)
        os.replace(temp_path, path)
    except OSError as e:
        try:
            if os.path.exists(temp_path):
                os.remove(temp_path)
        except OSError:
            pass
        raise OutputError(path, str(e)) from e


def select_enumerator(name: Optional[str]):
    """Return the enumerator for a config name ("greedy" or "brute")"""
    if name in (None, "", "greedy"):
        return enumerate_transmission_sets
    if name == "brute":
        return enumerate_maximal_sets
    raise TopologyError(f"Unknown enumeration method: {name}")
