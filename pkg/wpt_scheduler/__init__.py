"""
WPT Scheduler - joint data and wireless power transfer scheduling for WLANs
"""

__version__ = "0.1.0"
__author__ = "WPT Scheduler Contributors"
__license__ = "MIT"

from .config_manager import ConfigManager
from .dynamics import QueueMatrix, RewardWeights, SlotResult, SystemState, step_slot
from .exceptions import (ConfigError, InvalidActionError, OutputError, PolicyError,
                         ResourceLimitError, SchedulerError, TopologyError)
from .experiment_manager import ExperimentManager, RunMetrics
from .log_manager import LogManager
from .mdp import (MdpConfig, PlanMode, StateSpace, ValueTable, approx_value,
                  enumerate_state_space, exact_value_iteration, plan_schedule,
                  sampled_value_iteration)
from .plugin_manager import PluginManager
from .policies import PolicyKind, select_station
from .stochastics import ArrivalProcess, ChannelChain, SystemModel
from .topology import ConflictGraph, Topology, TransmissionSetMatrix

__all__ = [
    "ConfigManager",
    "LogManager",
    "PluginManager",
    "ExperimentManager",
    "RunMetrics",
    "ConflictGraph",
    "Topology",
    "TransmissionSetMatrix",
    "ChannelChain",
    "ArrivalProcess",
    "SystemModel",
    "QueueMatrix",
    "SystemState",
    "SlotResult",
    "RewardWeights",
    "step_slot",
    "PolicyKind",
    "select_station",
    "MdpConfig",
    "PlanMode",
    "StateSpace",
    "ValueTable",
    "enumerate_state_space",
    "exact_value_iteration",
    "sampled_value_iteration",
    "approx_value",
    "plan_schedule",
    "SchedulerError",
    "ConfigError",
    "TopologyError",
    "InvalidActionError",
    "PolicyError",
    "ResourceLimitError",
    "OutputError",
]
