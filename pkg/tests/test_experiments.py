import numpy as np
import pandas as pd
import pytest

from attack import AttackMode
from experiments import (DEMAND_LEVEL_COLUMNS, LOADING_COLUMNS, Q0_SWEEP_COLUMNS, MonotonicityError,
                         SweepSpec, SweepSpecError, check_monotone, first_dr_interval, gnuplot_script,
                         run_alpha_sweep, run_benefit_study, run_demand_level_study, run_loading_profile,
                         run_q0_sweep, study_file_name, write_study_csv)
from grid_model import DemandScenario, UnknownElementError

ALPHA_SWEEP = SweepSpec("alpha", 0.1, 1.0, 0.1)
Q0_SWEEP = SweepSpec("q0", 0.0, 100.0, 10.0)


def test_sweep_grid():
    assert ALPHA_SWEEP.grid() == pytest.approx([0.1 * i for i in range(1, 11)])
    assert len(Q0_SWEEP.grid()) == 11
    assert SweepSpec("q0", 5.0, 5.0, 1.0).grid() == [5.0]


def test_sweep_default_grid():
    sweep = SweepSpec.default("alpha", mode="unlimited")
    assert len(sweep.grid()) == 10
    assert sweep.mode == AttackMode.UNLIMITED
    spec = sweep.attack_spec(23, 0.5)
    assert spec.alpha == 0.5 and spec.q0 == sweep.q0


@pytest.mark.parametrize("args", [
    ("beta", 0.0, 1.0, 0.1),
    ("alpha", 0.1, 1.0, 0.0),
    ("alpha", 0.8, 0.2, 0.1),
    ("alpha", 0.1, 1.5, 0.1),
    ("q0", -10.0, 100.0, 10.0),
])
def test_bad_sweep_rejected(args):
    with pytest.raises(SweepSpecError) as exc:
        SweepSpec(*args)
    assert exc.value.code == "experiments.bad_sweep"


def test_sweep_kind_must_match():
    with pytest.raises(SweepSpecError):
        run_q0_sweep(None, None, 2, ALPHA_SWEEP)
    with pytest.raises(SweepSpecError):
        run_alpha_sweep(None, None, [2], Q0_SWEEP)


def test_alpha_sweep_triangle(triangle_case, triangle_dispatch):
    frame = run_alpha_sweep(triangle_case, None, [2, 1], ALPHA_SWEEP, dispatch_sol=triangle_dispatch)
    assert len(frame) == 20
    assert frame["target_line"].tolist() == [2] * 10 + [1] * 10
    assert (frame["mode"] == "limited").all()
    # Chỉ một nút có DR nên tín hiệu giả không dịch chuyển được trào lưu
    assert frame["loading_rate_post"].to_numpy() == pytest.approx(frame["loading_rate_pre"].to_numpy(), abs=1e-9)
    assert frame["overload_mw"].max() == pytest.approx(0.0, abs=1e-6)


def test_q0_sweep_triangle(triangle_case, triangle_dispatch):
    frame = run_q0_sweep(triangle_case, None, 2, Q0_SWEEP, dispatch_sol=triangle_dispatch)
    assert list(frame.columns) == Q0_SWEEP_COLUMNS
    assert len(frame) == 22
    assert frame["mode"].tolist() == ["limited"] * 11 + ["unlimited"] * 11

    unlimited = frame[frame["mode"] == "unlimited"]
    expected = [(80.0 + min(q0, 20.0) / 6.0) / 80.0 for q0 in unlimited["q0_mw"]]
    assert unlimited["loading_rate_post"].tolist() == pytest.approx(expected, abs=1e-6)

    limited = frame[frame["mode"] == "limited"]
    assert limited["loading_rate_post"].tolist() == pytest.approx([1.0] * 11, abs=1e-6)
    zero = frame[frame["q0_mw"] == 0.0]
    assert zero["loading_rate_post"].tolist() == pytest.approx(zero["loading_rate_pre"].tolist(), abs=1e-9)


def test_q0_sweep_parallel_matches_serial(triangle_case, triangle_dispatch):
    serial = run_q0_sweep(triangle_case, None, 2, Q0_SWEEP, dispatch_sol=triangle_dispatch)
    parallel = run_q0_sweep(triangle_case, None, 2, Q0_SWEEP, dispatch_sol=triangle_dispatch, workers=4)
    pd.testing.assert_frame_equal(serial, parallel)


def test_zero_flow_target_skipped(two_bus_case):
    case = two_bus_case(200.0)
    # Tải đặt ngay tại nút có tổ máy rẻ nên đường dây không mang tải
    scenario = DemandScenario.from_bus_map(case, {1: [50.0, 50.0]})
    sol = first_dr_interval(case, scenario)
    assert run_q0_sweep(case, scenario, 1, Q0_SWEEP, dispatch_sol=sol).empty
    assert run_alpha_sweep(case, scenario, [1], ALPHA_SWEEP, dispatch_sol=sol).empty


def test_unknown_sweep_target(triangle_case, triangle_dispatch):
    with pytest.raises(UnknownElementError) as exc:
        run_alpha_sweep(triangle_case, None, [999], ALPHA_SWEEP, dispatch_sol=triangle_dispatch)
    assert "999" in str(exc.value)


def test_check_monotone():
    frame = pd.DataFrame({
        "target_line": [5, 5, 5, 7, 7],
        "alpha": [0.1, 0.2, 0.3, 0.1, 0.2],
        "loading_rate_post": [0.5, 0.6, 0.6, 0.9, 0.8],
    })
    check_monotone(frame[frame["target_line"] == 5], "target_line", "alpha")
    with pytest.raises(MonotonicityError) as exc:
        check_monotone(frame, "target_line", "alpha")
    assert "target_line=7" in str(exc.value)


def test_benefit_study_two_bus(congested_two_bus):
    case, scenario = congested_two_bus
    (report,) = run_benefit_study(case, [scenario])
    assert report.savings_usd == pytest.approx(390.0)
    assert report.dr_shift_totals_mw == pytest.approx((10.0, 0.0, 0.0))


def test_demand_level_study_triangle(triangle_case):
    low = DemandScenario.from_bus_map(triangle_case, {2: [30.0, 20.0], 3: [40.0, 40.0]}, label="low")
    high = DemandScenario.from_bus_map(triangle_case, {2: [60.0, 20.0], 3: [100.0, 40.0]}, label="high")
    frame = run_demand_level_study(triangle_case, [low, high], target=2, q0=100.0, alpha=0.3, s0=10.0)
    assert list(frame.columns) == DEMAND_LEVEL_COLUMNS
    assert frame["scenario"].tolist() == ["low", "high"]
    assert (frame["mode"] == "unlimited").all()
    assert (frame["delta_loading_rate"] >= -1e-9).all()

    low_row, high_row = frame.iloc[0], frame.iloc[1]
    # Trước tấn công: 1->3 = (30 + 2·40) / 3
    assert low_row["loading_rate_pre"] == pytest.approx(110.0 / 3.0 / 80.0, abs=1e-6)
    # Không có DR theo lịch thì tổng DR giả bị khóa, trào lưu không đổi
    assert low_row["delta_loading_rate"] == pytest.approx(0.0, abs=1e-6)
    assert high_row["loading_rate_pre"] == pytest.approx(1.0, abs=1e-6)
    assert high_row["delta_loading_rate"] == pytest.approx(1.0 / 24.0, abs=1e-6)


def test_loading_profile_triangle(triangle_case, triangle_dispatch):
    frame = run_loading_profile(triangle_case, None, dispatch_sol=triangle_dispatch)
    assert list(frame.columns) == LOADING_COLUMNS
    assert frame["line_id"].tolist() == [2, 1, 3]
    assert frame["loading_rate"].tolist() == pytest.approx([1.0, 0.35, 0.05], abs=1e-6)


def test_loading_profile_shipped_high(rts, rts_first_dr):
    case, _ = rts
    frame = run_loading_profile(case, None, dispatch_sol=rts_first_dr("high"))
    assert len(frame) == 38
    assert sorted(frame["line_id"]) == sorted(line.id for line in case.lines)
    rates = frame["loading_rate"].to_numpy()
    assert (rates[:-1] >= rates[1:] - 1e-12).all()
    assert rates.max() <= 1.0 + 1e-6


def test_alpha_sweep_shipped_high(rts, rts_scenarios, rts_first_dr):
    case, _ = rts
    frame = run_alpha_sweep(case, rts_scenarios["high"], [23], ALPHA_SWEEP,
                            dispatch_sol=rts_first_dr("high"), workers=2)
    assert len(frame) == 10
    assert frame["alpha"].tolist() == pytest.approx(ALPHA_SWEEP.grid())
    assert (frame["loading_rate_post"] >= frame["loading_rate_pre"] - 1e-9).all()
    # DR nằm ở nút 3 và 14 nên chế độ limited vẫn gây quá tải, tăng tuyến tính theo alpha
    assert (frame["overload_mw"] > 0.0).all()
    assert frame["overload_mw"].tolist() == pytest.approx([10.7602 * a for a in frame["alpha"]], abs=1e-3)


def test_q0_sweep_shipped_high_respects_budgets(rts, rts_scenarios, rts_first_dr):
    case, _ = rts
    frame = run_q0_sweep(case, rts_scenarios["high"], 23, Q0_SWEEP, dispatch_sol=rts_first_dr("high"), workers=2)
    assert len(frame) == 22
    assert (frame["dr_budget_used_mw"] <= frame["q0_mw"] + 1e-6).all()
    assert (frame["angle_budget_used_rad"] <= frame["s0_rad"] + 1e-6).all()
    unlimited = frame[frame["mode"] == "unlimited"].set_index("q0_mw")
    assert abs(unlimited.loc[100.0, "attacked_flow_mw"]) == pytest.approx(344.648, abs=1e-3)
    assert unlimited.loc[100.0, "overload_mw"] == pytest.approx(29.648, abs=1e-3)


def test_study_file_name():
    assert study_file_name("alpha", "high", 23) == "alpha_high_23.csv"
    assert study_file_name("benefit", "medium") == "benefit_medium_all.csv"


def test_write_study_csv(tmp_path):
    frame = pd.DataFrame({"q0_mw": [0.0, 10.0], "loading_rate_post": [1.0, 1.0208333]})
    path = write_study_csv(frame, tmp_path / "out", "q0", "high", 23)
    assert path.name == "q0_high_23.csv"
    text = path.read_text()
    assert text.splitlines()[0] == "q0_mw,loading_rate_post"
    assert "1.020833" in text


def test_gnuplot_script_groups(tmp_path):
    script = gnuplot_script(tmp_path / "alpha_high_all.csv", "alpha", "loading_rate_post",
                            "target_line", [10, 23])
    assert "set output 'alpha_high_all.png'" in script
    assert "set datafile separator ','" in script
    assert "title 'target_line=10'" in script
    assert "title 'target_line=23'" in script
    assert script.startswith("set datafile")
    assert "abs(column('target_line') - 23.0) < 1e-9" in script
    assert "strcol" not in script


def test_gnuplot_script_numeric_and_text_groups(tmp_path):
    numeric = gnuplot_script(tmp_path / "q0.csv", "q0_mw", "overload_mw", "alpha", [np.float64(0.3)])
    assert "abs(column('alpha') - 0.3) < 1e-9" in numeric
    assert "title 'alpha=0.3'" in numeric
    text = gnuplot_script(tmp_path / "q0.csv", "q0_mw", "overload_mw", "mode", ["limited"])
    assert "strcol('mode') eq 'limited'" in text


def test_gnuplot_script_single_series(tmp_path):
    script = gnuplot_script(tmp_path / "q0_high_23.csv", "q0_mw", "overload_mw")
    assert "plot 'q0_high_23.csv' using (column('q0_mw')):(column('overload_mw'))" in script
