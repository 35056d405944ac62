"""
Plugin hook specifications for the WPT scheduler

This module defines the hooks that plugins can implement.
Plugins observe studies and runs; they cannot change the simulation.
"""

import pluggy

# Project name for pluggy
hookspec = pluggy.HookspecMarker("wpt_scheduler")
hookimpl = pluggy.HookimplMarker("wpt_scheduler")


class SchedulerHookSpec:
    """Hook specifications for WPT scheduler plugins"""

    # =========================================================================
    # Study Hooks
    # =========================================================================

    @hookspec
    def on_study_start(self, ctx, study):
        """Called before a study (run, sweep or gap) starts.

        Args:
            ctx: Plugin context object
            study: Study name, e.g. "sweep-arrival"
        """
        pass

    @hookspec
    def on_study_end(self, ctx, study, rows):
        """Called after a study has produced its output rows.

        Args:
            ctx: Plugin context object
            study: Study name
            rows: List of row dicts written to the CSV
        """
        pass

    # =========================================================================
    # Run Hooks
    # =========================================================================

    @hookspec
    def on_run_start(self, ctx, run):
        """Called before a single simulation run.

        Args:
            ctx: Plugin context object
            run: Dict with policy, seed and label
        """
        pass

    @hookspec
    def on_slot(self, ctx, run, slot, state, action, result):
        """Called after every simulated slot.

        Only dispatched when at least one plugin is loaded.

        Args:
            ctx: Plugin context object
            run: Dict with policy, seed and label
            slot: Slot index t
            state: SystemState at the start of the slot
            action: Transmission set applied
            result: SlotResult of the slot
        """
        pass

    @hookspec
    def on_run_end(self, ctx, run, metrics):
        """Called after a simulation run.

        Args:
            ctx: Plugin context object
            run: Dict with policy, seed and label
            metrics: RunMetrics of the run
        """
        pass
