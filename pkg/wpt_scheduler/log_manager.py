#!/usr/bin/env python3
"""
Log Manager for the WPT scheduler
Handles logging of study progress and run results to disk
"""

import threading
from datetime import datetime
from pathlib import Path
from typing import Any, Mapping, Optional


class LogManager:
    """Manages study logs, one file per study and day"""

    def __init__(self, log_directory: Optional[str] = None):
        """
        Initialize log manager

        Args:
            log_directory: Base directory for logs (None or empty to disable logging)
        """
        self.log_directory = log_directory
        self.enabled = log_directory is not None and log_directory.strip() != ""
        self._write_lock = threading.Lock()  # concurrent runs share a study file

        if self.enabled:
            self._ensure_directory_exists(self.log_directory)

    def set_log_directory(self, log_directory: str) -> None:
        """
        Set or update the log directory

        Args:
            log_directory: Path to log directory

        Raises:
            OSError: If the directory cannot be created
        """
        self.log_directory = log_directory
        self.enabled = log_directory is not None and log_directory.strip() != ""

        if self.enabled and not self._ensure_directory_exists(self.log_directory):
            raise OSError(f"Failed to create log directory: {self.log_directory}")

    def _ensure_directory_exists(self, directory: str) -> bool:
        try:
            Path(directory).mkdir(parents=True, exist_ok=True)
            return True
        except (OSError, PermissionError) as e:
            print(f"Warning: Failed to create directory {directory}: {e}")
            return False

    def _get_log_file_path(self, study: str) -> Optional[str]:
        """
        Get the log file path for a study

        Args:
            study: Study name (e.g. "sweep-arrival")

        Returns:
            Path to log file or None if logging disabled
        """
        if not self.enabled or not self.log_directory:
            return None
        if not self._ensure_directory_exists(self.log_directory):
            return None

        date_str = datetime.now().strftime("%Y-%m-%d")
        filename = f"{self._sanitize_name(study)}-{date_str}.log"
        return str(Path(self.log_directory) / filename)

    def _sanitize_name(self, name: str) -> str:
        """
        Sanitize a study name for use in file paths

        Args:
            name: Name to sanitize

        Returns:
            Name safe for file paths
        """
        # Null bytes and traversal sequences go first
        safe_name = name.replace("\x00", "").replace("..", "")
        for char in '/\\:*?"<>| ':
            safe_name = safe_name.replace(char, "-")

        safe_name = safe_name.strip(". -")
        if not safe_name:
            safe_name = "unnamed"

        if len(safe_name) > 200:
            safe_name = safe_name[:200]

        return safe_name

    def _write_to_log(self, study: str, line: str) -> bool:
        """
        Append a line to the study's log file

        Returns:
            True if successful, False otherwise
        """
        if not self.enabled:
            return False

        log_file = self._get_log_file_path(study)
        if not log_file:
            return False

        try:
            with self._write_lock:
                with open(log_file, 'a', encoding='utf-8') as f:
                    f.write(line + '\n')
            return True
        except (OSError, PermissionError) as e:
            print(f"Warning: Failed to write to log file {log_file}: {e}")
            return False

    @staticmethod
    def _timestamp() -> str:
        return datetime.now().strftime("[%H:%M:%S]")

    @staticmethod
    def _format_fields(fields: Mapping[str, Any]) -> str:
        parts = []
        for key, value in fields.items():
            if isinstance(value, float):
                value = f"{value:.6g}"
            parts.append(f"{key}={value}")
        return " ".join(parts)

    def log_study_start(self, study: str, description: str) -> bool:
        return self._write_to_log(study, f"{self._timestamp()} === {study} started: {description}")

    def log_study_end(self, study: str, rows: int) -> bool:
        return self._write_to_log(study, f"{self._timestamp()} === {study} finished, {rows} rows")

    def log_run_start(self, study: str, policy: str, seed: int, label: str = "") -> bool:
        """
        Log the start of one simulation run

        Args:
            study: Study name
            policy: Policy name
            seed: Run seed
            label: Extra context such as the sweep point
        """
        suffix = f" ({label})" if label else ""
        line = f"{self._timestamp()} --> run policy={policy} seed={seed}{suffix}"
        return self._write_to_log(study, line)

    def log_run_end(self, study: str, policy: str, seed: int, metrics: Mapping[str, Any]) -> bool:
        line = (f"{self._timestamp()} <-- run policy={policy} seed={seed} "
                f"{self._format_fields(metrics)}")
        return self._write_to_log(study, line)

    def log_row(self, study: str, row: Mapping[str, Any]) -> bool:
        """Log one aggregated output row (sweep point or gap entry)"""
        return self._write_to_log(study, f"{self._timestamp()} row {self._format_fields(row)}")

    def log_system(self, study: str, message: str) -> bool:
        return self._write_to_log(study, f"{self._timestamp()} * {message}")
