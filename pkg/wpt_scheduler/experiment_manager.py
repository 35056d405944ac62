#!/usr/bin/env python3
"""
Experiment Manager for the WPT scheduler
Runs single simulations, parameter sweeps and the exact-versus-approximate gap study
"""

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .config_manager import ConfigManager
from .exceptions import ConfigError, ModelError, OutputError
from .log_manager import LogManager
from .mdp import (GapReport, PlanMode, RandomStreams, Schedule, compute_gap,
                  enumerate_state_space, exact_value_iteration, plan_schedule,
                  sampled_value_iteration)
from .plugin_manager import PluginManager
from .policies import PolicyKind
from .stochastics import (ArrivalProcess, ChannelChain, SystemModel, dot11g_packet_rates,
                          initial_state, make_chain, make_uniform_chain)
from .topology import (Topology, TransmissionSetMatrix, active_aps, build_random_topology,
                       load_topology, select_enumerator)

RUN_HEADER = ["policy", "seed", "slots", "mean_queue", "total_energy_uJ", "total_packets",
              "drops", "mean_active_aps", "min_ap_share"]
SWEEP_HEADER = ["axis", "axis_value", "policy", "mean_queue", "std_queue", "mean_energy_uJ",
                "std_energy_uJ", "runs"]
GAP_HEADER = ["horizon", "policy", "exact_value", "approx_value", "gap_pct", "seeds"]

SWEEP_AXES = ("arrival", "interference")


@dataclass(frozen=True)
class RunMetrics:
    """Aggregates of one simulated trajectory"""

    policy: PolicyKind
    seed: int
    slots: int
    mean_queue: float                   # time average of X_a, averaged over APs
    total_energy: float                 # uJ
    sensor_energy: Tuple[float, ...]    # uJ per sensor
    total_packets: int
    drops: int
    mean_active_aps: float
    min_ap_share: float                 # smallest fraction of slots an AP was active

    def as_row(self) -> Dict[str, Any]:
        return {
            "policy": self.policy.value,
            "seed": self.seed,
            "slots": self.slots,
            "mean_queue": self.mean_queue,
            "total_energy_uJ": self.total_energy,
            "total_packets": self.total_packets,
            "drops": self.drops,
            "mean_active_aps": self.mean_active_aps,
            "min_ap_share": self.min_ap_share,
        }


def summarize_schedule(schedule: Schedule, topology: Topology, policy: PolicyKind,
                       seed: int) -> RunMetrics:
    """Compute run aggregates over the completed slots of a schedule"""
    slots = len(schedule)
    n_aps = topology.n_aps
    sensor_energy = np.zeros(topology.n_sensors)
    active_slots = np.zeros(n_aps)
    queue_sum = 0.0
    total_energy = 0.0
    total_packets = 0
    drops = 0

    for action, result in zip(schedule.actions, schedule.results):
        queue_sum += sum(result.next_queues.lengths) / n_aps
        total_energy += result.energy
        total_packets += result.total_transmitted
        drops += result.dropped
        for sensor, energy in result.sensor_energy.items():
            sensor_energy[sensor] += energy
        for ap in active_aps(action):
            active_slots[ap] += 1

    if slots == 0:
        return RunMetrics(policy, seed, 0, 0.0, 0.0, tuple(sensor_energy), 0, 0, 0.0, 0.0)
    return RunMetrics(
        policy=policy,
        seed=seed,
        slots=slots,
        mean_queue=queue_sum / slots,
        total_energy=total_energy,
        sensor_energy=tuple(float(e) for e in sensor_energy),
        total_packets=total_packets,
        drops=drops,
        mean_active_aps=float(active_slots.sum()) / slots,
        min_ap_share=float(active_slots.min()) / slots,
    )


def emit_csv(rows: Sequence[Dict[str, Any]], path: str, header: Sequence[str]) -> None:
    """
    Write rows as a UTF-8 CSV with a fixed header; numbers get 6 significant
    digits and missing values are written as NA

    Raises:
        OutputError: If the file cannot be written
    """
    frame = pd.DataFrame([{column: row.get(column) for column in header} for row in rows],
                         columns=list(header))
    directory = os.path.dirname(os.path.abspath(path))
    temp_path = f"{path}.tmp"
    try:
        os.makedirs(directory, exist_ok=True)
        frame.to_csv(temp_path, index=False, float_format="%.6g", na_rep="NA",
                     lineterminator="\n", encoding="utf-8")
        os.replace(temp_path, path)
    except OSError as e:
        try:
            if os.path.exists(temp_path):
                os.remove(temp_path)
        except OSError:
            pass
        raise OutputError(path, str(e)) from e


def sweep_trends(rows: Sequence[Dict[str, Any]]) -> Dict[str, Dict[str, Optional[float]]]:
    """
    Spearman rank correlation of mean energy and mean queue against the axis
    value, per policy

    Returns:
        {policy: {"energy_rho": rho, "queue_rho": rho}}, rho None when undefined
    """
    by_policy: Dict[str, List[Dict[str, Any]]] = {}
    for row in rows:
        by_policy.setdefault(row["policy"], []).append(row)

    trends = {}
    for policy, items in by_policy.items():
        axis = [r["axis_value"] for r in items]
        result = {}
        for name, column in (("energy_rho", "mean_energy_uJ"), ("queue_rho", "mean_queue")):
            values = [r[column] for r in items]
            if len(items) < 2 or len(set(values)) < 2 or len(set(axis)) < 2:
                result[name] = None
                continue
            rho = stats.spearmanr(axis, values).correlation
            result[name] = None if np.isnan(rho) else float(rho)
        trends[policy] = result
    return trends


class ExperimentManager:
    """Builds models from the configuration and runs the studies"""

    def __init__(self, config_manager: ConfigManager,
                 log_manager: Optional[LogManager] = None,
                 plugin_manager: Optional[PluginManager] = None):
        """
        Initialize experiment manager

        Args:
            config_manager: Loaded (and validated) configuration
            log_manager: Study log writer (None disables file logging)
            plugin_manager: Loaded plugins (None for no plugins)
        """
        self.config_manager = config_manager
        self.log_manager = log_manager or LogManager(None)
        self.plugin_manager = plugin_manager
        self._fixed_topology: Optional[Topology] = None

    # =========================================================================
    # Model construction
    # =========================================================================

    def _chain(self, values: Sequence[float], transition: Any) -> ChannelChain:
        try:
            if isinstance(transition, str):
                return make_uniform_chain(list(values))
            return make_chain(values, transition)
        except ModelError as e:
            raise ConfigError(f"Invalid channel profile: {e}") from e

    def station_values(self) -> List[float]:
        station = self.config_manager.get("channels.station")
        if station["values"]:
            return [float(v) for v in station["values"]]
        return list(dot11g_packet_rates(station["packet_bytes"], station["slot_seconds"],
                                        station["rates_mbps"]))

    def build_topology(self, rng: np.random.Generator, edge_prob: Optional[float] = None) -> Topology:
        """
        Topology of one run: the configured file if any, else a fresh random one

        Args:
            rng: Topology stream of the run
            edge_prob: Edge probability override (interference sweep)
        """
        topo = self.config_manager.get_topology_config()
        if topo["file"]:
            if self._fixed_topology is None:
                self._fixed_topology = load_topology(topo["file"])
            return self._fixed_topology
        return build_random_topology(
            int(topo["n_aps"]),
            float(topo["edge_prob"] if edge_prob is None else edge_prob),
            int(topo["max_stations"]),
            int(topo["max_sensors"]),
            rng,
        )

    def build_arrivals(self, n_stations: int, probability: Optional[float] = None) -> ArrivalProcess:
        arrivals = self.config_manager.get("arrivals")
        try:
            if probability is None and arrivals["pmf"]:
                return ArrivalProcess.from_pmf(n_stations, arrivals["pmf"])
            p = arrivals["probability"] if probability is None else probability
            return ArrivalProcess.bernoulli(n_stations, float(p), int(arrivals["batch"]))
        except ModelError as e:
            raise ConfigError(f"Invalid arrival settings: {e}") from e

    def build_model(self, topology: Topology, arrival_probability: Optional[float] = None,
                    slot_fill_energy: Optional[bool] = None) -> SystemModel:
        """
        Stochastic parameters for a topology from the configuration

        Args:
            topology: Topology of the run
            arrival_probability: Bernoulli probability override (arrival sweep)
            slot_fill_energy: Energy accounting override (interference sweep)
        """
        station_cfg = self.config_manager.get("channels.station")
        sensor_cfg = self.config_manager.get("channels.sensor")
        station_chain = self._chain(self.station_values(), station_cfg["transition"])
        sensor_chain = self._chain(sensor_cfg["values"], sensor_cfg["transition"])
        dynamics = self.config_manager.get("dynamics")
        return SystemModel(
            topology=topology,
            station_chains=(station_chain,) * topology.n_stations,
            sensor_chains=(sensor_chain,) * topology.n_sensors,
            arrivals=self.build_arrivals(topology.n_stations, arrival_probability),
            q_max=dynamics["q_max"],
            slot_fill_energy=bool(dynamics["slot_fill_energy"] if slot_fill_energy is None
                                  else slot_fill_energy),
        )

    def transmission_sets(self, topology: Topology) -> TransmissionSetMatrix:
        enumerate_sets = select_enumerator(self.config_manager.get("topology.enumeration"))
        return enumerate_sets(topology.graph)

    @staticmethod
    def run_seed_sequence(seed: int, run_index: int) -> np.random.SeedSequence:
        """Seed of run `run_index`; independent of policy and sweep value"""
        return np.random.SeedSequence(int(seed), spawn_key=(int(run_index),))

    # =========================================================================
    # Studies
    # =========================================================================

    def run_simulation(self, policy: PolicyKind, seed: int, run_index: int = 0,
                       arrival_probability: Optional[float] = None,
                       edge_prob: Optional[float] = None,
                       slot_fill_energy: Optional[bool] = None,
                       study: str = "run", label: str = "") -> RunMetrics:
        """
        Simulate T slots under the receding-horizon planner

        Topology, channel and arrival streams depend only on (seed, run_index),
        so every policy sees the same topology and exogenous trajectories.

        Args:
            policy: Station selection rule
            seed: Base seed
            run_index: Run number within a study
            arrival_probability: Arrival probability override
            edge_prob: Edge probability override
            slot_fill_energy: Energy accounting override
            study: Study name for logs and plugins
            label: Extra context for logs

        Returns:
            RunMetrics of the run
        """
        cfg = self.config_manager.get_mdp_config()
        topo_seq, channel_seq, arrival_seq, policy_seq, planner_seq = \
            self.run_seed_sequence(seed, run_index).spawn(5)

        topology = self.build_topology(np.random.default_rng(topo_seq), edge_prob)
        model = self.build_model(topology, arrival_probability, slot_fill_energy)
        actions = self.transmission_sets(topology)
        streams = RandomStreams(
            channels=np.random.default_rng(channel_seq),
            arrivals=np.random.default_rng(arrival_seq),
            policy=np.random.default_rng(policy_seq),
            planner=np.random.default_rng(planner_seq),
        )
        start = initial_state(model, streams.channels)

        run = {"policy": policy.value, "seed": seed, "run_index": run_index, "label": label}
        self.log_manager.log_run_start(study, policy.value, seed,
                                       f"run {run_index} {label}".strip())
        on_slot = None
        if self.plugin_manager and self.plugin_manager.has_plugins:
            self.plugin_manager.call_run_start(run)

            def on_slot(t, state, action, result):
                self.plugin_manager.call_slot(run, t, state, action, result)

        schedule = plan_schedule(start, cfg, policy, PlanMode.APPROXIMATE, model, actions,
                                 streams, on_slot=on_slot)
        metrics = summarize_schedule(schedule, topology, policy, seed)

        self.log_manager.log_run_end(study, policy.value, seed, metrics.as_row())
        if self.plugin_manager and self.plugin_manager.has_plugins:
            self.plugin_manager.call_run_end(run, metrics)
        return metrics

    def _workers(self) -> int:
        return max(1, int(self.config_manager.get("experiment.workers", 1)))

    def _start_study(self, study: str, description: str) -> None:
        self.log_manager.log_study_start(study, description)
        if self.plugin_manager:
            self.plugin_manager.call_study_start(study)

    def _end_study(self, study: str, rows: List[Dict[str, Any]]) -> None:
        for row in rows:
            self.log_manager.log_row(study, row)
        self.log_manager.log_study_end(study, len(rows))
        if self.plugin_manager:
            self.plugin_manager.call_study_end(study, rows)

    def run_policies(self, policies: Optional[Sequence[PolicyKind]] = None,
                     seed: Optional[int] = None) -> List[RunMetrics]:
        """One paired run per policy; the `run` subcommand"""
        policies = list(policies or self.config_manager.get_policies())
        seed = self.config_manager.get_seed() if seed is None else seed
        self._start_study("run", f"policies={[p.value for p in policies]} seed={seed}")

        with ThreadPoolExecutor(max_workers=self._workers()) as pool:
            futures = [pool.submit(self.run_simulation, policy, seed) for policy in policies]
            results = [future.result() for future in futures]

        self._end_study("run", [m.as_row() for m in results])
        return results

    def run_sweep(self, axis: str) -> List[Dict[str, Any]]:
        """
        Cross product of axis values, policies and runs

        The interference sweep credits energy for the whole slot of every
        active AP when experiment.interference_slot_fill is set.

        Args:
            axis: "arrival" (Bernoulli probability) or "interference" (edge probability)

        Returns:
            One row per (axis value, policy) in SWEEP_HEADER layout
        """
        if axis not in SWEEP_AXES:
            raise ConfigError(f"Unknown sweep axis '{axis}' (expected arrival or interference)")
        if axis == "arrival":
            values = self.config_manager.get_arrival_sweep()
        else:
            if self.config_manager.get("topology.file"):
                raise ConfigError("The interference sweep needs generated topologies; "
                                  "unset topology.file")
            values = self.config_manager.get_interference_sweep()
        if not values:
            raise ConfigError(f"The {axis} sweep list is empty")

        policies = self.config_manager.get_policies()
        runs = self.config_manager.get_runs()
        seed = self.config_manager.get_seed()
        slot_fill = bool(self.config_manager.get("dynamics.slot_fill_energy")
                         or self.config_manager.get("experiment.interference_slot_fill", True))
        study = f"sweep-{axis}"
        self._start_study(study, f"values={values} policies={[p.value for p in policies]} "
                                 f"runs={runs} seed={seed}")

        tasks = [(value, policy, run) for value in values for policy in policies
                 for run in range(runs)]

        def execute(task):
            value, policy, run = task
            overrides = ({"arrival_probability": value} if axis == "arrival"
                         else {"edge_prob": value, "slot_fill_energy": slot_fill})
            return self.run_simulation(policy, seed, run, study=study,
                                       label=f"{axis}={value:g}", **overrides)

        with ThreadPoolExecutor(max_workers=self._workers()) as pool:
            results = list(pool.map(execute, tasks))

        grouped: Dict[Tuple[float, PolicyKind], List[RunMetrics]] = {}
        for (value, policy, _), metrics in zip(tasks, results):
            grouped.setdefault((value, policy), []).append(metrics)

        rows = []
        for value in values:
            for policy in policies:
                group = grouped[(value, policy)]
                queues = np.array([m.mean_queue for m in group])
                energies = np.array([m.total_energy for m in group])
                rows.append({
                    "axis": axis,
                    "axis_value": float(value),
                    "policy": policy.value,
                    "mean_queue": float(queues.mean()),
                    "std_queue": float(queues.std()),
                    "mean_energy_uJ": float(energies.mean()),
                    "std_energy_uJ": float(energies.std()),
                    "runs": len(group),
                })

        self._end_study(study, rows)
        return rows

    def run_gap_study(self, horizons: Optional[Sequence[int]] = None,
                      policies: Optional[Sequence[PolicyKind]] = None,
                      seeds: Optional[int] = None) -> List[GapReport]:
        """
        Compare exact and sampled expected rewards over horizons

        One exact table and one sampled table per seed are computed with the
        longest horizon; the problem is time-homogeneous, so the horizon-h
        value is read at stage T_max - h.

        Args:
            horizons: Horizons T to report (defaults to the configured list)
            policies: Policies (defaults to the configured list)
            seeds: Seeds for the sampled tables (defaults to experiment.gap_seeds)

        Returns:
            One GapReport per (horizon, policy), horizons outermost

        Raises:
            ResourceLimitError: If the scenario cannot be enumerated
        """
        horizons = sorted(set(int(h) for h in (horizons or self.config_manager.get_horizons())))
        if not horizons or horizons[0] < 1:
            raise ConfigError("Gap horizons must be positive integers")
        policies = list(policies or self.config_manager.get_policies())
        seeds = int(seeds or self.config_manager.get("experiment.gap_seeds"))
        base_seed = self.config_manager.get_seed()
        initial = self.config_manager.get("experiment.gap_initial", "uniform")
        t_max = horizons[-1]

        topo_seq = self.run_seed_sequence(base_seed, 0).spawn(1)[0]
        topology = self.build_topology(np.random.default_rng(topo_seq))
        model = self.build_model(topology)
        actions = self.transmission_sets(topology)
        cfg = dataclasses.replace(self.config_manager.get_mdp_config(), horizon=t_max, depth=1)
        space = enumerate_state_space(model, cfg.state_cap)

        study = "gap"
        self._start_study(study, f"states={len(space)} horizons={horizons} seeds={seeds} "
                                 f"N={cfg.samples}")

        def evaluate(policy: PolicyKind):
            exact = exact_value_iteration(space, actions, cfg, policy, model)
            approx_tables = [
                sampled_value_iteration(
                    space, actions, cfg, policy,
                    np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(1, s))),
                    model)
                for s in range(seeds)
            ]
            return exact, approx_tables

        with ThreadPoolExecutor(max_workers=self._workers()) as pool:
            tables = dict(zip(policies, pool.map(evaluate, policies)))

        reports = []
        for h in horizons:
            stage = t_max - h
            for policy in policies:
                exact, approx_tables = tables[policy]
                exact_value = exact.initial_value(stage, initial)
                approx_values = [table.initial_value(stage, initial) for table in approx_tables]
                gaps = [compute_gap(exact_value, v) for v in approx_values]
                defined = np.array([g for g in gaps if g is not None])
                reports.append(GapReport(
                    horizon=h,
                    policy=policy,
                    exact_value=exact_value,
                    approx_value=float(np.mean(approx_values)),
                    gap_pct=float(defined.mean()) if defined.size else None,
                    gap_median=float(np.median(defined)) if defined.size else None,
                    gap_std=float(defined.std()) if defined.size else None,
                    seeds=seeds,
                ))

        self._end_study(study, gap_rows(reports))
        return reports


def gap_rows(reports: Sequence[GapReport]) -> List[Dict[str, Any]]:
    """GapReports in GAP_HEADER layout"""
    return [{
        "horizon": r.horizon,
        "policy": r.policy.value,
        "exact_value": r.exact_value,
        "approx_value": r.approx_value,
        "gap_pct": r.gap_pct,
        "seeds": r.seeds,
    } for r in reports]
