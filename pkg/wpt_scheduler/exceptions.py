"""
Exception types for the WPT scheduler
"""


class SchedulerError(Exception):
    """Base class for all scheduler errors"""


class ConfigError(SchedulerError):
    """Invalid or unreadable configuration"""


class TopologyError(SchedulerError):
    """Invalid topology parameters or topology file contents"""


class InvalidActionError(SchedulerError):
    """Transmission set or station selection not valid for the topology"""


class PolicyError(SchedulerError):
    """Station selection could not be made"""


class ResourceLimitError(SchedulerError):
    """A configured size cap (state space, lookahead, arrival support) was exceeded"""


class OutputError(SchedulerError):
    """Writing a result file failed"""

    def __init__(self, path: str, reason: str):
        super().__init__(f"Failed to write {path}: {reason}")
        self.path = path
        self.reason = reason


class ModelError(SchedulerError, ValueError):
    """Channel chain or arrival distribution that is not a valid probability model"""
