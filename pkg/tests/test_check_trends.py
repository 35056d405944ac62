import importlib.util
from pathlib import Path

from wpt_scheduler.experiment_manager import GAP_HEADER, SWEEP_HEADER, emit_csv

SCRIPT = Path(__file__).resolve().parent.parent / "scripts" / "check_trends.py"


def _load_script():
    spec = importlib.util.spec_from_file_location("check_trends", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _sweep_row(value, policy, energy, queue):
    return {"axis": "arrival", "axis_value": value, "policy": policy, "mean_queue": queue,
            "std_queue": 0.0, "mean_energy_uJ": energy, "std_energy_uJ": 0.0, "runs": 1}


def test_sweep_summary_uses_rank_trends(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    emit_csv([
        _sweep_row(0.1, "maxweight", 10.0, 3.0),
        _sweep_row(0.5, "maxweight", 20.0, 2.0),
        _sweep_row(0.9, "maxweight", 30.0, 1.0),
        _sweep_row(0.1, "random", 5.0, 1.0),
    ], str(path), SWEEP_HEADER)

    assert _load_script().main([str(path)]) == 0
    out = capsys.readouterr().out
    assert "Sweep over arrival:" in out
    assert "maxweight: energy rho +1.000, queue rho -1.000, energy range 10..30 uJ" in out
    assert "random: energy rho NA, queue rho NA" in out


def test_gap_summary_skips_undefined_gaps(tmp_path, capsys):
    path = tmp_path / "gap.csv"
    emit_csv([
        {"horizon": 1, "policy": "maxweight", "exact_value": 10.0, "approx_value": 10.0,
         "gap_pct": 0.0, "seeds": 2},
        {"horizon": 2, "policy": "maxweight", "exact_value": 20.0, "approx_value": 19.9,
         "gap_pct": 0.5, "seeds": 2},
        {"horizon": 1, "policy": "random", "exact_value": 0.0, "approx_value": 0.0,
         "gap_pct": None, "seeds": 2},
        {"horizon": 2, "policy": "random", "exact_value": 5.0, "approx_value": 4.0,
         "gap_pct": 20.0, "seeds": 2},
    ], str(path), GAP_HEADER)

    assert _load_script().main([str(path)]) == 0
    out = capsys.readouterr().out
    assert "maxweight: T=1:0, T=2:0.5 (non-decreasing)" in out
    assert "random: T=1:NA, T=2:20 (non-decreasing)" in out


def test_missing_file_and_usage(tmp_path, capsys):
    script = _load_script()
    assert script.main([]) == 1
    assert script.main([str(tmp_path / "none.csv")]) == 1
    assert "Error: cannot read" in capsys.readouterr().out
