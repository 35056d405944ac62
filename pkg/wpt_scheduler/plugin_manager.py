"""
Plugin Manager for the WPT scheduler

Handles plugin discovery, loading, and hook execution.
"""

import sys
import importlib.util
from pathlib import Path
from typing import Any, Dict, List, Optional

import pluggy

from .plugin_specs import SchedulerHookSpec


class PluginContext:
    """
    Context object passed to plugins.

    Gives read access to the configuration and a way to write into the
    current study's log.
    """

    def __init__(self, plugin_manager: 'PluginManager'):
        self._pm = plugin_manager
        self.study: Optional[str] = None

    def get_config(self, key: str, default: Any = None) -> Any:
        """Get a configuration value.

        Args:
            key: Config key (dot-separated for nested, e.g. 'mdp.T')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        if not self._pm.config_manager:
            return default
        return self._pm.config_manager.get(key, default)

    def log(self, message: str) -> None:
        """Write a line to the current study's log (or the console without one)."""
        log_manager = self._pm.log_manager
        if log_manager and log_manager.enabled and self.study:
            log_manager.log_system(self.study, f"[plugin] {message}")
        else:
            print(f"[plugin] {message}")


class PluginManager:
    """
    Manages plugin discovery, loading, and hook execution.
    """

    def __init__(self, plugins_dir: Optional[str] = None):
        self.plugins_dir: Optional[Path] = Path(plugins_dir) if plugins_dir else None
        self.loaded_plugins: Dict[str, Any] = {}
        self.config_manager = None
        self.log_manager = None

        self.pm = pluggy.PluginManager("wpt_scheduler")
        self.pm.add_hookspecs(SchedulerHookSpec)
        self.ctx = PluginContext(self)

    def set_managers(self, config_manager, log_manager) -> None:
        """Set references to the config and log managers.

        The plugins directory comes from the config when none was given.
        """
        self.config_manager = config_manager
        self.log_manager = log_manager
        if self.plugins_dir is None and config_manager:
            directory = config_manager.get_plugins_directory()
            if directory:
                self.plugins_dir = Path(directory)

    @property
    def has_plugins(self) -> bool:
        return bool(self.loaded_plugins)

    def discover_and_load_plugins(self) -> int:
        """Discover and load all plugins from the plugins directory.

        Returns:
            Number of plugins loaded
        """
        if not self.plugins_dir or not self.plugins_dir.is_dir():
            return 0

        loaded = 0

        for plugin_file in sorted(self.plugins_dir.glob("*.py")):
            if plugin_file.name.startswith("_"):
                continue
            try:
                if self._load_plugin_file(plugin_file):
                    loaded += 1
            except Exception as e:
                print(f"Error: loading plugin {plugin_file.name}: {e}")

        # Packages (directories with __init__.py)
        for plugin_dir in sorted(self.plugins_dir.iterdir()):
            if plugin_dir.is_dir() and (plugin_dir / "__init__.py").exists():
                if plugin_dir.name.startswith("_"):
                    continue
                try:
                    if self._load_plugin_file(plugin_dir / "__init__.py", plugin_dir.name):
                        loaded += 1
                except Exception as e:
                    print(f"Error: loading plugin package {plugin_dir.name}: {e}")

        return loaded

    def _load_plugin_file(self, plugin_file: Path, plugin_name: Optional[str] = None) -> bool:
        """Load a single plugin file.

        Args:
            plugin_file: Path to plugin .py file
            plugin_name: Registration name (defaults to the file stem)

        Returns:
            True if loaded successfully
        """
        plugin_name = plugin_name or plugin_file.stem

        if plugin_name in self.loaded_plugins:
            print(f"Warning: Plugin {plugin_name} already loaded")
            return False

        spec = importlib.util.spec_from_file_location(
            f"wpt_scheduler_plugin_{plugin_name}",
            plugin_file
        )
        if spec is None or spec.loader is None:
            return False

        module = importlib.util.module_from_spec(spec)
        sys.modules[spec.name] = module

        try:
            spec.loader.exec_module(module)
        except Exception as e:
            print(f"Error: executing plugin {plugin_name}: {e}")
            del sys.modules[spec.name]
            return False

        if hasattr(module, 'Plugin'):
            try:
                plugin_instance = module.Plugin()
            except Exception as e:
                print(f"Error: instantiating Plugin class in {plugin_name}: {e}")
                del sys.modules[spec.name]
                return False
        elif hasattr(module, 'setup'):
            try:
                plugin_instance = module.setup(self.ctx)
            except Exception as e:
                print(f"Error: in setup() for {plugin_name}: {e}")
                del sys.modules[spec.name]
                return False
        else:
            # Module-level hook functions
            plugin_instance = module

        self.pm.register(plugin_instance, name=plugin_name)
        self.loaded_plugins[plugin_name] = {
            'module': module,
            'instance': plugin_instance,
            'file': plugin_file
        }

        print(f"Loaded plugin: {plugin_name}")
        return True

    def unload_plugin(self, plugin_name: str) -> bool:
        if plugin_name not in self.loaded_plugins:
            return False

        self.pm.unregister(name=plugin_name)
        module_name = f"wpt_scheduler_plugin_{plugin_name}"
        if module_name in sys.modules:
            del sys.modules[module_name]

        del self.loaded_plugins[plugin_name]
        return True

    def get_loaded_plugins(self) -> List[str]:
        """Get list of loaded plugin names."""
        return list(self.loaded_plugins.keys())

    # =========================================================================
    # Hook Callers
    # =========================================================================

    def call_study_start(self, study: str) -> None:
        self.ctx.study = study
        try:
            self.pm.hook.on_study_start(ctx=self.ctx, study=study)
        except Exception as e:
            print(f"Error: plugin failed in on_study_start: {e}")

    def call_study_end(self, study: str, rows: List[Dict[str, Any]]) -> None:
        try:
            self.pm.hook.on_study_end(ctx=self.ctx, study=study, rows=rows)
        except Exception as e:
            print(f"Error: plugin failed in on_study_end: {e}")

    def call_run_start(self, run: Dict[str, Any]) -> None:
        try:
            self.pm.hook.on_run_start(ctx=self.ctx, run=run)
        except Exception as e:
            print(f"Error: plugin failed in on_run_start: {e}")

    def call_slot(self, run: Dict[str, Any], slot: int, state, action, result) -> None:
        try:
            self.pm.hook.on_slot(ctx=self.ctx, run=run, slot=slot, state=state,
                                 action=action, result=result)
        except Exception as e:
            print(f"Error: plugin failed in on_slot: {e}")

    def call_run_end(self, run: Dict[str, Any], metrics) -> None:
        try:
            self.pm.hook.on_run_end(ctx=self.ctx, run=run, metrics=metrics)
        except Exception as e:
            print(f"Error: plugin failed in on_run_end: {e}")
