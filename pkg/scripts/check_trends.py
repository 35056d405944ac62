#!/usr/bin/env python3
"""
Summarise sweep and gap CSVs written by wpt-scheduler
Requires: numpy, pandas and an installed wpt_scheduler
"""

import sys

try:
    import numpy as np
    import pandas as pd
    from wpt_scheduler.experiment_manager import sweep_trends
except ImportError:
    print("Error: numpy, pandas and wpt_scheduler are required to check trends")
    print("Install with: pip install -e .")
    sys.exit(1)


def read_rows(filename: str) -> "pd.DataFrame":
    return pd.read_csv(filename, na_values=["NA"], keep_default_na=False)


def _rho(value) -> str:
    return "NA" if value is None else f"{value:+.3f}"


def check_sweep(frame: "pd.DataFrame") -> None:
    """
    Print the Spearman correlation of energy and queue against the axis value

    Args:
        frame: Rows of a sweep CSV
    """
    print(f"Sweep over {frame['axis'].iloc[0]}:")
    trends = sweep_trends(frame.to_dict("records"))
    for policy in sorted(trends):
        energy = frame.loc[frame["policy"] == policy, "mean_energy_uJ"]
        print(f"  {policy}: energy rho {_rho(trends[policy]['energy_rho'])}, "
              f"queue rho {_rho(trends[policy]['queue_rho'])}, "
              f"energy range {energy.min():.4g}..{energy.max():.4g} uJ")


def check_gap(frame: "pd.DataFrame") -> None:
    """
    Print each policy's gap series and whether it is non-decreasing in T

    Args:
        frame: Rows of a gap CSV
    """
    print("Approximation gap:")
    for policy, items in frame.groupby("policy", sort=True):
        items = items.sort_values("horizon")
        defined = items["gap_pct"].dropna().to_numpy()
        monotone = bool(np.all(np.diff(defined) >= 0)) if defined.size > 1 else True
        series = ", ".join(
            f"T={h}:{'NA' if pd.isna(g) else f'{g:.4g}'}"
            for h, g in zip(items["horizon"], items["gap_pct"])
        )
        print(f"  {policy}: {series} ({'non-decreasing' if monotone else 'not monotone'})")


def main(argv=None):
    """Check every CSV given on the command line"""
    filenames = sys.argv[1:] if argv is None else list(argv)
    if not filenames:
        print("Usage: check_trends.py <results.csv> [...]")
        return 1

    for filename in filenames:
        try:
            frame = read_rows(filename)
        except (OSError, pd.errors.ParserError) as e:
            print(f"Error: cannot read {filename}: {e}")
            return 1
        if frame.empty:
            print(f"{filename}: no rows")
        elif "axis" in frame.columns:
            check_sweep(frame)
        elif "horizon" in frame.columns:
            check_gap(frame)
        else:
            print(f"Warning: {filename} is not a sweep or gap CSV")
    return 0


if __name__ == "__main__":
    sys.exit(main())
