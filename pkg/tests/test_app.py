import numpy as np
import pandas as pd
import pytest

import lp_core
from app import main
from logger import get_daily_logs

TINY_CASE = """SECTION BUS
1 1
2 0
SECTION LINE
1 1 2 100 {rating}
SECTION GEN
1 1 0 100 10 1
2 2 0 100 50 1
"""


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("GRIDRAID_RUN_LOG_DIR", raising=False)
    return tmp_path / "out"


def _write_case(tmp_path, rating="50", target="2"):
    path = tmp_path / "tiny.case"
    path.write_text(TINY_CASE.format(rating=rating).replace("1 1 2 100", f"1 1 {target} 100"), encoding="utf-8")
    return path


def test_validate_shipped_case(out_dir, capsys):
    assert main(["validate", "--out", str(out_dir)]) == 0
    violations = pd.read_csv(out_dir / "violations.csv")
    assert violations.empty
    assert "hợp lệ" in (out_dir / "summary.txt").read_text(encoding="utf-8")
    assert "rts24" in capsys.readouterr().out


def test_validate_reports_violations(tmp_path, out_dir):
    case = _write_case(tmp_path, rating="0")
    assert main(["validate", "--case", str(case), "--out", str(out_dir)]) == 1
    violations = pd.read_csv(out_dir / "violations.csv")
    assert violations["code"].tolist() == ["nonpositive_rating"]
    assert violations["element"].tolist() == ["line:1"]


def test_validate_unparseable_case(tmp_path, out_dir, capsys):
    case = _write_case(tmp_path, target="99")
    assert main(["validate", "--case", str(case), "--out", str(out_dir)]) == 1
    err = capsys.readouterr().err
    assert "error[grid_model.dangling_reference]" in err
    assert "99" in err


def test_missing_case_file(tmp_path, out_dir, capsys):
    assert main(["validate", "--case", str(tmp_path / "none.case"), "--out", str(out_dir)]) == 1
    assert "error[data.missing_file]" in capsys.readouterr().err


def test_dispatch_writes_windows(out_dir, tmp_path, capsys):
    mps = tmp_path / "first.mps"
    code = main(["dispatch", "--mode", "sced-dr", "--scenario", "high", "--windows", "4",
                 "--dump-lp", str(mps), "--out", str(out_dir)])
    assert code == 0
    frame = pd.read_csv(out_dir / "dispatch_high_sced_dr.csv")
    assert not frame.empty
    assert mps.read_text().startswith("NAME")
    out = capsys.readouterr().out
    assert "tổng chi phí" in out


def test_dispatch_plot(out_dir):
    assert main(["dispatch", "--mode", "sced", "--scenario", "low", "--windows", "2",
                 "--plot", "--out", str(out_dir)]) == 0
    assert (out_dir / "net_demand_low_sced.png").stat().st_size > 0


def test_dispatch_bad_cost_list(out_dir, capsys):
    code = main(["dispatch", "--mode", "sced-dr", "--dr-costs", "1,2", "--out", str(out_dir)])
    assert code == 1
    assert "error[cli.bad_number]" in capsys.readouterr().err


def test_attack_line_23(out_dir):
    code = main(["attack", "--scenario", "high", "--target", "23", "--mode", "unlimited",
                 "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "attack_high_23.csv").is_file()
    assert "quá tải" in (out_dir / "summary.txt").read_text(encoding="utf-8")


def test_solver_failure_is_one_line_error(out_dir, capsys, monkeypatch):
    def singular(_):
        raise np.linalg.LinAlgError("Singular matrix")

    monkeypatch.setattr(lp_core.np.linalg, "inv", singular)
    code = main(["attack", "--scenario", "high", "--target", "23", "--mode", "unlimited",
                 "--out", str(out_dir)])
    assert code == 2
    err = capsys.readouterr().err
    assert "Traceback" not in err
    assert [line for line in err.splitlines() if line.startswith("error[")] == [
        line for line in err.splitlines() if line.startswith("error[lp_core.solver]")]
    assert "error[lp_core.solver]" in err


def test_attack_unknown_line(out_dir, capsys):
    code = main(["attack", "--target", "999", "--mode", "limited", "--out", str(out_dir)])
    assert code == 1
    assert "unknown line 999" in capsys.readouterr().err


def test_sweep_q0_with_gnuplot(out_dir):
    code = main(["sweep", "q0", "--targets", "23", "--start", "0", "--stop", "20", "--step", "10",
                 "--gnuplot", "--out", str(out_dir)])
    assert code == 0
    frame = pd.read_csv(out_dir / "q0_high_23.csv")
    assert len(frame) == 6
    script = (out_dir / "q0_high_23.gp").read_text(encoding="utf-8")
    assert "title 'mode=limited'" in script and "title 'mode=unlimited'" in script


def test_sweep_rejects_bad_targets(out_dir, capsys):
    assert main(["sweep", "alpha", "--targets", "10,x", "--out", str(out_dir)]) == 1
    assert "error[cli.bad_id]" in capsys.readouterr().err


def test_study_loading(out_dir):
    assert main(["study", "loading", "--scenarios", "high", "--out", str(out_dir)]) == 0
    frame = pd.read_csv(out_dir / "loading_high_all.csv")
    assert len(frame) == 38


def test_study_unknown_scenario(out_dir, capsys):
    assert main(["study", "benefit", "--scenarios", "extreme", "--out", str(out_dir)]) == 1
    assert "error[data.unknown_scenario]" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["dispatch", "--mode", "foo"],
    ["attack", "--mode", "limited"],
    ["launch"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 3
    assert "error[cli.usage]" in capsys.readouterr().err


def test_help(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert "GRIDRAID_" in out
    assert "alpha_grid" in out


def test_run_log_written(out_dir, tmp_path, monkeypatch):
    runs = tmp_path / "runs"
    monkeypatch.setenv("GRIDRAID_RUN_LOG_DIR", str(runs))
    assert main(["validate", "--out", str(out_dir)]) == 0
    assert main(["attack", "--target", "999", "--mode", "limited", "--out", str(out_dir)]) == 1
    records = get_daily_logs(None, runs)["records"]
    assert [r["command"] for r in records] == ["validate", "attack"]
    assert records[0]["exit_code"] == 0
    assert any(path.endswith("summary.txt") for path in records[0]["output_files"])
    assert records[1]["details"] == {"error": "grid_model.unknown_line"}
