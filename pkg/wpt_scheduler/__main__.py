#!/usr/bin/env python3
"""
WPT Scheduler - joint data and wireless power transfer scheduling for WLANs
Command-line entry point
"""

import argparse
import sys
from typing import List, Optional

import numpy as np

from .config_manager import ConfigManager, packaged_data_path
from .exceptions import (ConfigError, OutputError, PolicyError, ResourceLimitError,
                         SchedulerError, TopologyError)
from .experiment_manager import (GAP_HEADER, RUN_HEADER, SWEEP_AXES, SWEEP_HEADER,
                                 ExperimentManager, emit_csv, gap_rows, sweep_trends)
from .log_manager import LogManager
from .plugin_manager import PluginManager
from .policies import PolicyKind
from .topology import load_topology, select_enumerator

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_OUTPUT = 4


class SchedulerApplication:
    """Wires the managers together for one CLI invocation"""

    def __init__(self, args: argparse.Namespace):
        config_path = args.config
        if config_path is None and args.command == "gap":
            # The default network is far too large to enumerate
            config_path = packaged_data_path("small_scenario.json")

        self.config = ConfigManager(config_path)
        if args.quick:
            self.config.apply_quick_profile()
        if args.seed is not None:
            self.config.override("experiment", "seed", args.seed)
        if getattr(args, "samples", None) is not None:
            self.config.override("mdp", "N", args.samples)
        self.config.validate()

        self.log = LogManager(self.config.get_log_directory())
        self.plugins = PluginManager()
        self.plugins.set_managers(self.config, self.log)
        self.plugins.discover_and_load_plugins()

        self.experiments = ExperimentManager(self.config, self.log, self.plugins)
        self.out = args.out or self.config.get_output_path()

    def run(self, args: argparse.Namespace) -> int:
        handler = getattr(self, f"cmd_{args.command.replace('-', '_')}")
        return handler(args)

    def cmd_run(self, args: argparse.Namespace) -> int:
        policies = [PolicyKind.parse(args.policy)] if args.policy else None
        results = self.experiments.run_policies(policies)
        emit_csv([m.as_row() for m in results], self.out, RUN_HEADER)
        for m in results:
            print(f"{m.policy.value}: mean queue {m.mean_queue:.4g}, "
                  f"energy {m.total_energy:.6g} uJ, packets {m.total_packets}")
        print(f"Wrote {self.out}")
        return EXIT_OK

    def cmd_sweep(self, args: argparse.Namespace) -> int:
        rows = self.experiments.run_sweep(args.axis)
        emit_csv(rows, self.out, SWEEP_HEADER)
        for policy, trend in sweep_trends(rows).items():
            energy = "NA" if trend["energy_rho"] is None else f"{trend['energy_rho']:+.3f}"
            queue = "NA" if trend["queue_rho"] is None else f"{trend['queue_rho']:+.3f}"
            print(f"{policy}: spearman energy {energy}, queue {queue}")
        print(f"Wrote {self.out}")
        return EXIT_OK

    def cmd_gap(self, args: argparse.Namespace) -> int:
        reports = self.experiments.run_gap_study()
        emit_csv(gap_rows(reports), self.out, GAP_HEADER)
        for r in reports:
            gap = "NA" if r.gap_pct is None else f"{r.gap_pct:.3g}%"
            print(f"T={r.horizon} {r.policy.value}: exact {r.exact_value:.6g}, "
                  f"approx {r.approx_value:.6g}, gap {gap}")
        print(f"Wrote {self.out}")
        return EXIT_OK

    def cmd_enum_sets(self, args: argparse.Namespace) -> int:
        if args.topology:
            topology = load_topology(args.topology)
        else:
            topology = self.experiments.build_topology(
                np.random.default_rng(self.config.get_seed()))
        method = "brute" if args.brute_force else self.config.get("topology.enumeration")
        sets = select_enumerator(method)(topology.graph)
        for tset in sets:
            print(list(tset))
        if args.out:
            rows = [{"set_index": i, "vector": " ".join(str(b) for b in tset)}
                    for i, tset in enumerate(sets)]
            emit_csv(rows, args.out, ["set_index", "vector"])
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wpt-scheduler",
        description="Simulate and plan joint data/energy scheduling in WLANs with wireless power transfer",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="Base seed (overrides experiment.seed)")
    common.add_argument("--out", help="Output CSV path (overrides experiment.output)")
    common.add_argument("--quick", action="store_true",
                        help="Desk-scale profile: 4 APs, T=2000, 5 runs")

    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Simulate each policy once")
    run.add_argument("--policy", help="Only this policy (maxweight, maxqueue, maxcsi, random)")

    sweep = sub.add_parser("sweep", parents=[common], help="Arrival or interference sweep")
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)

    gap = sub.add_parser("gap", parents=[common],
                         help="Exact versus sampled value gap on an enumerable scenario")
    gap.add_argument("--samples", type=int, help="Samples N per backup (overrides mdp.N)")

    enum_sets = sub.add_parser("enum-sets", parents=[common],
                               help="Print the transmission sets of a topology")
    enum_sets.add_argument("--topology", help="Topology JSON file")
    enum_sets.add_argument("--brute-force", action="store_true",
                           help="All maximal independent sets instead of the greedy ones")

    init = sub.add_parser("init-config", help="Write the default configuration")
    init.add_argument("--out", required=True, help="Destination path")
    init.add_argument("--quick", action="store_true", help="Write the desk-scale profile")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)

    if args.command == "init-config":
        config = ConfigManager()
        if args.quick:
            config.apply_quick_profile()
        if not config.save_config(path=args.out):
            print(f"Error: could not write {args.out}", file=sys.stderr)
            return EXIT_OUTPUT
        print(f"Created config: {args.out}")
        return EXIT_OK

    try:
        app = SchedulerApplication(args)
        return app.run(args)
    except (ConfigError, PolicyError, TopologyError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except OutputError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_OUTPUT
    except SchedulerError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
