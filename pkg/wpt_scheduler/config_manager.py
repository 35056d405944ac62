#!/usr/bin/env python3
"""
Configuration Manager for the WPT scheduler
Handles loading, validating and saving study configuration in JSON format
"""

import copy
import json
import os
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional

from .dynamics import RewardWeights
from .exceptions import ConfigError, PolicyError
from .mdp import MdpConfig
from .policies import PolicyKind
from .stochastics import DOT11G_RATES_MBPS, SENSOR_ENERGY_UJ


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a deep copy of base; override wins"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(merged.get(key), dict) and isinstance(value, dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def packaged_data_path(name: str) -> str:
    """Path of a file shipped in wpt_scheduler/data"""
    return str(Path(__file__).resolve().parent / "data" / name)


class ConfigManager:
    """Manages study configuration stored in JSON format"""

    DEFAULT_CONFIG = {
        "topology": {
            "file": "",
            "n_aps": 10,
            "edge_prob": 0.3,
            "max_stations": 5,
            "max_sensors": 5,
            "enumeration": "greedy"
        },
        "channels": {
            "station": {
                "values": [],
                "rates_mbps": list(DOT11G_RATES_MBPS),
                "packet_bytes": 65535,
                "slot_seconds": 0.1,
                "transition": "uniform"
            },
            "sensor": {
                "values": list(SENSOR_ENERGY_UJ),
                "transition": "uniform"
            }
        },
        "arrivals": {
            "probability": 0.5,
            "batch": 1,
            "pmf": []
        },
        "dynamics": {
            "q_max": None,
            "slot_fill_energy": False
        },
        "mdp": {
            "T": 10000,
            "gamma": 1.0,
            "N": 100,
            "H": 1,
            "gamma_d": 1.0,
            "gamma_e": 0.01,
            "state_cap": 10000000,
            "lookahead_budget": 1000000
        },
        "experiment": {
            "runs": 20,
            "seed": 0,
            "policies": ["maxweight", "maxqueue", "maxcsi", "random"],
            "arrival_sweep": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            "interference_sweep": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            "horizons": [1, 2, 4, 6, 8, 10],
            "gap_seeds": 20,
            "gap_initial": "uniform",
            "interference_slot_fill": True,
            "workers": 1,
            "output": "results.csv"
        },
        "logging": {
            "log_directory": ""
        },
        "plugins": {
            "directory": ""
        }
    }

    # Desk-scale overlay used by --quick
    QUICK_PROFILE = {
        "topology": {"n_aps": 4},
        "mdp": {"T": 2000},
        "experiment": {"runs": 5, "gap_seeds": 5}
    }

    TRANSITION_NAMES = ("uniform",)
    ENUMERATIONS = ("greedy", "brute")

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize config manager

        Args:
            config_path: Path to a JSON configuration file (None for built-in defaults)

        Raises:
            ConfigError: If the file is missing or is not valid JSON
        """
        self.config_path = config_path
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """
        Load configuration from file and merge it with the defaults

        Returns:
            Configuration dictionary
        """
        if self.config_path is None:
            return copy.deepcopy(self.DEFAULT_CONFIG)

        if not os.path.exists(self.config_path):
            raise ConfigError(f"Config file not found: {self.config_path}")
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                config = json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            raise ConfigError(f"Could not read config {self.config_path}: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"Config {self.config_path} must contain a JSON object")

        config = self._merge_with_defaults(config)

        # Topology files are relative to the config file that names them
        topology_file = config["topology"].get("file") or ""
        if topology_file and not os.path.isabs(topology_file):
            base = os.path.dirname(os.path.abspath(self.config_path))
            config["topology"]["file"] = os.path.join(base, topology_file)
        return config

    def _merge_with_defaults(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """
        Merge user config with defaults to ensure all keys exist

        Unknown top-level sections are dropped.

        Args:
            config: User configuration

        Returns:
            Merged configuration
        """
        known = {key: value for key, value in config.items() if key in self.DEFAULT_CONFIG}
        return _merge(self.DEFAULT_CONFIG, known)

    def apply_quick_profile(self) -> None:
        """Overlay the desk-scale profile (4 APs, T=2000, 5 runs, 5 gap seeds)"""
        self.config = _merge(self.config, self.QUICK_PROFILE)

    def override(self, section: str, key: str, value: Any) -> None:
        """Set one value from the command line"""
        self.config.setdefault(section, {})[key] = value

    def save_config(self, config: Optional[Dict[str, Any]] = None,
                    path: Optional[str] = None) -> bool:
        """
        Save configuration to file atomically

        Uses a write-to-temp-then-rename strategy so an interrupted save
        never leaves a truncated file. The previous file is kept as .backup.

        Args:
            config: Configuration to save (uses self.config if None)
            path: Destination (uses the loaded path if None)

        Returns:
            True if successful, False otherwise
        """
        if config is None:
            config = self.config
        path = path or self.config_path
        if not path:
            print("Error saving config: no path given")
            return False

        temp_path = f"{path}.tmp"
        backup_path = f"{path}.backup"

        try:
            with open(temp_path, 'w', encoding='utf-8') as f:
                json.dump(config, f, indent=2)

            if os.path.exists(path):
                try:
                    shutil.copy2(path, backup_path)
                except IOError as e:
                    print(f"Warning: Could not create config backup: {e}")

            os.replace(temp_path, path)
            return True

        except IOError as e:
            print(f"Error saving config: {e}")
            try:
                if os.path.exists(temp_path):
                    os.remove(temp_path)
            except OSError:
                pass
            return False

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value

        Args:
            key: Section name or dotted path such as "mdp.T"
            default: Returned when the key does not exist

        Returns:
            Configuration value
        """
        node: Any = self.config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> None:
        """
        Set a configuration value

        Args:
            key: Section name or dotted path
            value: Value to set
        """
        parts = key.split(".")
        node = self.config
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def _check_transition(self, name: str, transition: Any, n_values: Optional[int],
                          problems: List[str]) -> None:
        if isinstance(transition, str):
            if transition not in self.TRANSITION_NAMES:
                problems.append(f"channels.{name}.transition must be 'uniform' or a matrix")
            return
        if not isinstance(transition, list) or not all(isinstance(r, list) for r in transition):
            problems.append(f"channels.{name}.transition must be 'uniform' or a matrix")
            return
        if n_values is not None and (len(transition) != n_values
                                     or any(len(r) != n_values for r in transition)):
            problems.append(f"channels.{name}.transition must be {n_values}x{n_values}")
            return
        for row in transition:
            if any(p < 0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                problems.append(f"channels.{name}.transition rows must be distributions")
                return

    def validate(self) -> None:
        """
        Check every rule and report all violations at once

        Raises:
            ConfigError: Listing each violated rule
        """
        try:
            problems = self._collect_problems()
        except (TypeError, KeyError, AttributeError) as e:
            raise ConfigError(f"Invalid configuration: malformed value ({e})") from e
        if problems:
            raise ConfigError("Invalid configuration:\n  " + "\n  ".join(problems))

    def _collect_problems(self) -> List[str]:
        problems: List[str] = []
        topo = self.config["topology"]
        if topo["n_aps"] < 1:
            problems.append("topology.n_aps must be at least 1")
        if not 0.0 <= topo["edge_prob"] <= 1.0:
            problems.append("topology.edge_prob must be in [0, 1]")
        if topo["max_stations"] < 1:
            problems.append("topology.max_stations must be at least 1")
        if topo["max_sensors"] < 0:
            problems.append("topology.max_sensors must be non-negative")
        if topo["enumeration"] not in self.ENUMERATIONS:
            problems.append("topology.enumeration must be 'greedy' or 'brute'")
        if topo["file"] and not os.path.exists(topo["file"]):
            problems.append(f"topology.file not found: {topo['file']}")

        station = self.config["channels"]["station"]
        if station["values"]:
            if any(v < 0 for v in station["values"]):
                problems.append("channels.station.values must be non-negative")
            n_station = len(station["values"])
        else:
            if station["packet_bytes"] <= 0 or station["slot_seconds"] <= 0:
                problems.append("channels.station packet_bytes and slot_seconds must be positive")
            if not station["rates_mbps"]:
                problems.append("channels.station.rates_mbps must not be empty")
            n_station = len(station["rates_mbps"])
        self._check_transition("station", station["transition"], n_station, problems)

        sensor = self.config["channels"]["sensor"]
        if not sensor["values"]:
            problems.append("channels.sensor.values must not be empty")
        elif any(v < 0 for v in sensor["values"]):
            problems.append("channels.sensor.values must be non-negative")
        self._check_transition("sensor", sensor["transition"], len(sensor["values"]), problems)

        arrivals = self.config["arrivals"]
        if arrivals["pmf"]:
            pmf = arrivals["pmf"]
            if any(p < 0 for p in pmf) or abs(sum(pmf) - 1.0) > 1e-9:
                problems.append("arrivals.pmf must sum to 1 with non-negative entries")
        else:
            if not 0.0 <= arrivals["probability"] <= 1.0:
                problems.append("arrivals.probability must be in [0, 1]")
            if arrivals["batch"] < 1:
                problems.append("arrivals.batch must be at least 1")

        q_max = self.config["dynamics"]["q_max"]
        if q_max is not None and q_max < 0:
            problems.append("dynamics.q_max must be null or non-negative")

        mdp = self.config["mdp"]
        if mdp["T"] < 1:
            problems.append("mdp.T must be at least 1")
        if mdp["N"] < 1:
            problems.append("mdp.N must be at least 1")
        if not 1 <= mdp["H"] <= max(mdp["T"], 1):
            problems.append("mdp.H must satisfy 1 <= H <= T")
        if not 0.0 <= mdp["gamma"] <= 1.0:
            problems.append("mdp.gamma must be in [0, 1]")
        if mdp["gamma_d"] < 0 or mdp["gamma_e"] < 0:
            problems.append("mdp.gamma_d and mdp.gamma_e must be non-negative")
        elif mdp["gamma_d"] == 0 and mdp["gamma_e"] == 0:
            problems.append("mdp.gamma_d and mdp.gamma_e cannot both be zero")

        exp = self.config["experiment"]
        if exp["runs"] < 1:
            problems.append("experiment.runs must be at least 1")
        if exp["gap_seeds"] < 1:
            problems.append("experiment.gap_seeds must be at least 1")
        if exp["gap_initial"] not in ("uniform", "empty"):
            problems.append("experiment.gap_initial must be 'uniform' or 'empty'")
        if not isinstance(exp["interference_slot_fill"], bool):
            problems.append("experiment.interference_slot_fill must be true or false")
        if exp["workers"] < 1:
            problems.append("experiment.workers must be at least 1")
        if not exp["arrival_sweep"]:
            problems.append("experiment.arrival_sweep must not be empty")
        elif any(not 0.0 <= p <= 1.0 for p in exp["arrival_sweep"]):
            problems.append("experiment.arrival_sweep values must be in [0, 1]")
        if not exp["interference_sweep"]:
            problems.append("experiment.interference_sweep must not be empty")
        elif any(not 0.0 <= p <= 1.0 for p in exp["interference_sweep"]):
            problems.append("experiment.interference_sweep values must be in [0, 1]")
        if not exp["horizons"] or any(h < 1 for h in exp["horizons"]):
            problems.append("experiment.horizons must be positive integers")
        if not exp["policies"]:
            problems.append("experiment.policies must not be empty")
        for name in exp["policies"]:
            try:
                PolicyKind.parse(name)
            except PolicyError as e:
                problems.append(f"experiment.policies: {e}")
        return problems

    # Typed accessors

    def get_topology_config(self) -> Dict[str, Any]:
        return dict(self.config["topology"])

    def get_mdp_config(self) -> MdpConfig:
        mdp = self.config["mdp"]
        try:
            weights = RewardWeights(float(mdp["gamma_d"]), float(mdp["gamma_e"]))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return MdpConfig(
            horizon=int(mdp["T"]),
            gamma=float(mdp["gamma"]),
            samples=int(mdp["N"]),
            depth=int(mdp["H"]),
            weights=weights,
            state_cap=int(mdp["state_cap"]),
            lookahead_budget=int(mdp["lookahead_budget"]),
        )

    def get_policies(self) -> List[PolicyKind]:
        try:
            return [PolicyKind.parse(name) for name in self.config["experiment"]["policies"]]
        except PolicyError as e:
            raise ConfigError(str(e)) from e

    def get_arrival_sweep(self) -> List[float]:
        return [float(p) for p in self.config["experiment"]["arrival_sweep"]]

    def get_interference_sweep(self) -> List[float]:
        return [float(p) for p in self.config["experiment"]["interference_sweep"]]

    def get_horizons(self) -> List[int]:
        return [int(h) for h in self.config["experiment"]["horizons"]]

    def get_runs(self) -> int:
        return int(self.config["experiment"]["runs"])

    def get_seed(self) -> int:
        return int(self.config["experiment"]["seed"])

    def get_output_path(self) -> str:
        return self.config["experiment"]["output"]

    def get_log_directory(self) -> str:
        return self.config["logging"]["log_directory"]

    def get_plugins_directory(self) -> str:
        return self.config["plugins"]["directory"]
