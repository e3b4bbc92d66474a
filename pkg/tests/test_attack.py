import numpy as np
import pytest

import lp_core
from attack import (ATTACK_CSV_COLUMNS, AttackInput, AttackMode, AttackSpec, AttackSpecError,
                    ZeroFlowTargetError, attack_result_frame, build_fsmi, build_fsmi_direct,
                    false_dr_bounds, run_attack, top_loaded_lines)
from dispatch import DispatchMode, DispatchProblem, solve_window
from grid_model import (Bus, DemandScenario, Generator, GridCase, Line, UnknownElementError,
                        flows_from_angles, net_injections, solve_dc_power_flow)
from lp_core import LpStatus, OracleLimitError, oracle_solve


def _random_triangle(rng) -> GridCase:
    b = rng.uniform(50.0, 150.0, size=3)
    return GridCase(
        buses=(Bus(1, True), Bus(2), Bus(3)),
        lines=(Line(1, 1, 2, b[0], 200.0), Line(2, 1, 3, b[1], 200.0), Line(3, 2, 3, b[2], 200.0)),
        generators=(Generator(1, 1, 0.0, 1000.0, 10.0),),
        name="random_triangle",
    )


def _random_input(case: GridCase, rng) -> AttackInput:
    demand = np.array([0.0, rng.uniform(40.0, 120.0), rng.uniform(40.0, 120.0)])
    dr_max = 0.3 * demand
    scheduled = np.where(rng.random(3) < 0.3, 0.0, rng.uniform(0.0, 1.0, size=3) * dr_max)
    served = demand - scheduled
    generation = float(served.sum())
    injections = {1: generation - served[0], 2: -served[1], 3: -served[2]}
    angles = solve_dc_power_flow(case, injections)
    theta = np.array([angles[bus_id] for bus_id in case.bus_ids])
    zeros = np.zeros(3)
    return AttackInput(
        bus_ids=case.bus_ids,
        line_ids=tuple(line.id for line in case.lines),
        generator_ids=(1,),
        fixed_generation=np.array([generation]),
        fixed_angles=theta,
        scheduled_dr15=scheduled,
        scheduled_dr30=zeros,
        scheduled_dr45=zeros,
        demand_first=demand,
        arrivals_first=zeros,
        dr_max=dr_max,
        pre_attack_flows=flows_from_angles(case, theta),
    )


def test_linearized_budgets_match_direct_form(rng):
    for _ in range(50):
        case = _random_triangle(rng)
        inp = _random_input(case, rng)
        target = inp.line_ids[int(np.argmax(np.abs(inp.pre_attack_flows)))]
        spec = AttackSpec(
            target_line=target,
            alpha=float(rng.uniform(0.0, 1.0)),
            s0=float(rng.uniform(0.0, 0.5)),
            q0=float(rng.uniform(0.0, 60.0)),
            mode=AttackMode.LIMITED if rng.random() < 0.5 else AttackMode.UNLIMITED,
        )
        main = lp_core.solve(build_fsmi(inp, spec, case))
        direct = build_fsmi_direct(inp, spec, case)
        assert len(direct.variables) <= lp_core.ORACLE_MAX_VARIABLES
        assert len(direct.constraints) <= lp_core.ORACLE_MAX_CONSTRAINTS
        expected = oracle_solve(direct)
        assert main.is_optimal and expected.is_optimal
        assert main.objective_value == pytest.approx(expected.objective_value,
                                                     abs=1e-6 * (1 + abs(expected.objective_value)))
        # Điểm theo lịch luôn khả thi
        assert main.objective_value >= abs(inp.pre_attack_flows[inp.line_ids.index(target)]) - 1e-6


def test_triangle_dispatch_is_congested(triangle_dispatch, triangle_case):
    sol = triangle_dispatch
    assert sol.flow_kt[sol.line_position(2), 0] == pytest.approx(80.0)
    assert sol.dr_total_first == pytest.approx([0.0, 0.0, 10.0])
    assert sol.p_gt[:, 0] == pytest.approx([150.0, 0.0])
    assert top_loaded_lines(sol, triangle_case, 1) == [2]


def test_limited_triangle_matches_oracle(triangle_dispatch, triangle_case):
    spec = AttackSpec(target_line=2, alpha=0.5, s0=10.0, q0=100.0, mode=AttackMode.LIMITED)
    inp = AttackInput.from_solution(triangle_dispatch)
    main = lp_core.solve(build_fsmi(inp, spec, triangle_case))
    expected = oracle_solve(build_fsmi_direct(inp, spec, triangle_case))
    assert main.objective_value == pytest.approx(expected.objective_value, abs=1e-6)


def test_zero_dr_budget_pins_schedule(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, q0=0.0, s0=10.0, mode="unlimited"), triangle_case)
    assert result.false_dr == pytest.approx(result.scheduled_dr, abs=1e-6)
    assert result.attacked_flows == pytest.approx(result.pre_attack_flows, abs=1e-6)
    assert result.objective_flow_mw == pytest.approx(abs(result.pre_attack_flow_mw), abs=1e-6)


def test_zero_alpha_pins_schedule(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, alpha=0.0, q0=100.0, mode="limited"), triangle_case)
    assert result.false_dr == pytest.approx(result.scheduled_dr, abs=1e-6)
    assert result.dr_budget_used == pytest.approx(0.0, abs=1e-6)


def test_zero_budgets_reproduce_pre_attack(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, q0=0.0, s0=0.0, mode="unlimited"), triangle_case)
    assert result.attacked_flows == pytest.approx(result.pre_attack_flows, abs=1e-6)
    assert result.overload_mw == pytest.approx(max(0.0, abs(result.pre_attack_flow_mw) - 80.0), abs=1e-6)


def test_unlimited_moves_dr_to_other_bus(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, q0=100.0, s0=10.0, mode="unlimited"), triangle_case)
    # DR giả chuyển hết 10 MW từ nút 3 sang nút 2: 1->3 = 50/3 + 2·100/3
    assert result.false_dr == pytest.approx([0.0, 10.0, 0.0], abs=1e-6)
    assert result.objective_flow_mw == pytest.approx(250.0 / 3.0, abs=1e-6)
    assert result.overload_mw == pytest.approx(10.0 / 3.0, abs=1e-6)
    assert result.dr_budget_used == pytest.approx(20.0, abs=1e-6)
    assert result.flow_increase_mw == pytest.approx(10.0 / 3.0, abs=1e-6)


def test_limited_mode_keeps_channels(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, alpha=1.0, q0=100.0, mode="limited"), triangle_case)
    # Nút 2 không có DR theo lịch nên không thể nhận tín hiệu giả
    assert result.false_dr[1] == pytest.approx(0.0, abs=1e-9)
    assert result.overload_mw == pytest.approx(0.0, abs=1e-6)


def test_attack_monotone_in_q0(triangle_dispatch, triangle_case):
    values = [run_attack(triangle_dispatch, AttackSpec(2, q0=q0, mode="unlimited"), triangle_case).objective_flow_mw
              for q0 in (0.0, 5.0, 10.0, 20.0, 40.0)]
    assert values == pytest.approx([80.0 + min(q0, 20.0) / 6.0 for q0 in (0.0, 5.0, 10.0, 20.0, 40.0)], abs=1e-6)
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_cover_is_consistent(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, q0=15.0, mode="unlimited"), triangle_case)
    sign = np.sign(result.pre_attack_flow_mw)
    assert sign * result.attacked_flows[result.target_position] == pytest.approx(result.objective_flow_mw, abs=1e-6)
    flows = dict(zip(result.line_ids, result.attacked_flows))
    injections = net_injections(triangle_case, flows)
    inp = AttackInput.from_solution(triangle_dispatch)
    generation = inp.nodal_generation(triangle_case)
    for n, bus_id in enumerate(result.bus_ids):
        assert generation[n] - injections[bus_id] == pytest.approx(result.false_load_mw[n], abs=1e-6)
    assert result.angle_budget_used <= 10.0 + 1e-9
    assert result.dr_budget_used <= 15.0 + 1e-6


def test_false_dr_bounds(triangle_dispatch):
    inp = AttackInput.from_solution(triangle_dispatch)
    lower, upper = false_dr_bounds(inp, AttackSpec(2, alpha=0.5, mode="limited"))
    assert lower == pytest.approx([0.0, 0.0, 5.0])
    assert upper == pytest.approx([0.0, 0.0, 15.0])
    lower, upper = false_dr_bounds(inp, AttackSpec(2, mode="unlimited"))
    assert lower == pytest.approx([0.0, 0.0, 0.0])
    assert upper == pytest.approx([0.0, 18.0, 30.0])


def test_zero_flow_target_rejected(two_bus_case, two_bus_scenario):
    case = two_bus_case(200.0)
    problem = DispatchProblem(case, two_bus_scenario(case, (0.0,)), horizon=1, mode=DispatchMode.SCED_DR)
    sol = solve_window(problem, 0)
    with pytest.raises(ZeroFlowTargetError) as exc:
        run_attack(sol, AttackSpec(1), case)
    assert exc.value.line_id == 1
    assert exc.value.code == "attack.zero_flow_target"


def test_unknown_target_rejected(triangle_dispatch, triangle_case):
    with pytest.raises(UnknownElementError) as exc:
        run_attack(triangle_dispatch, AttackSpec(999), triangle_case)
    assert "unknown line 999" in str(exc.value)


def test_attack_needs_sced_dr(triangle_case):
    scenario = DemandScenario.from_bus_map(triangle_case, {2: [60.0, 20.0], 3: [100.0, 40.0]})
    sol = solve_window(DispatchProblem(triangle_case, scenario, horizon=2, mode=DispatchMode.SCED), 0)
    with pytest.raises(AttackSpecError) as exc:
        run_attack(sol, AttackSpec(2), triangle_case)
    assert exc.value.code == "attack.mode_mismatch"


@pytest.mark.parametrize("kwargs, code", [
    ({"alpha": 1.5}, "attack.alpha_range"),
    ({"q0": -1.0}, "attack.negative_budget"),
    ({"s0": -0.1}, "attack.negative_budget"),
    ({"mode": "bogus"}, "attack.bad_mode"),
])
def test_spec_validation(kwargs, code):
    with pytest.raises(AttackSpecError) as exc:
        AttackSpec(target_line=23, **kwargs)
    assert exc.value.code == code


def test_attack_frame(triangle_dispatch, triangle_case):
    result = run_attack(triangle_dispatch, AttackSpec(2, mode="unlimited"), triangle_case)
    frame = attack_result_frame(result, triangle_case)
    assert list(frame.columns) == ATTACK_CSV_COLUMNS
    assert frame["entity_kind"].tolist() == ["line"] * 3 + ["bus"] * 3 + ["summary"]
    summary = frame.iloc[-1]
    assert summary["entity_id"] == 2
    assert summary["overload_mw"] == pytest.approx(10.0 / 3.0, abs=1e-6)


def test_direct_form_size_guard(rts, rts_first_dr):
    case, _ = rts
    inp = AttackInput.from_solution(rts_first_dr("high"))
    with pytest.raises(OracleLimitError):
        build_fsmi_direct(inp, AttackSpec(23, mode="unlimited"), case)


def test_high_scenario_line_23_overloads(rts, rts_first_dr):
    case, _ = rts
    sol = rts_first_dr("high")
    limited = run_attack(sol, AttackSpec(23, alpha=0.3, q0=100.0, s0=10.0, mode=AttackMode.LIMITED), case)
    unlimited = run_attack(sol, AttackSpec(23, alpha=0.3, q0=100.0, s0=10.0, mode=AttackMode.UNLIMITED), case)
    assert limited.overload_mw > 0.0
    assert limited.overload_mw == pytest.approx(3.228, abs=1e-3)
    assert unlimited.overload_mw == pytest.approx(29.648, abs=1e-3)
    assert unlimited.overload_mw >= limited.overload_mw - 1e-6
    for result in (limited, unlimited):
        assert result.loading_rate_post >= result.loading_rate_pre - 1e-9
        assert result.dr_budget_used <= result.spec.q0 + 1e-6
        assert result.angle_budget_used <= result.spec.s0 + 1e-6


def test_high_scenario_schedules_dr_on_two_buses(rts_first_dr):
    # Chế độ limited chỉ phân bổ lại được khi DR nằm ở ít nhất hai nút
    inp = AttackInput.from_solution(rts_first_dr("high"))
    scheduled = dict(zip(inp.bus_ids, inp.scheduled_dr))
    assert scheduled[3] == pytest.approx(20.739, abs=1e-3)
    assert scheduled[14] == pytest.approx(33.753, abs=1e-3)
    assert sum(1 for value in scheduled.values() if value > 1e-6) == 2


# Trào lưu đường dây 23 sau tấn công trên kịch bản cao, alpha = 0.3, s0 = 10
LINE_23_ATTACKED_FLOW = {
    (AttackMode.LIMITED, 0.0): 315.0, (AttackMode.LIMITED, 10.0): 317.594,
    (AttackMode.LIMITED, 20.0): 318.228, (AttackMode.LIMITED, 50.0): 318.228,
    (AttackMode.LIMITED, 100.0): 318.228,
    (AttackMode.UNLIMITED, 0.0): 315.0, (AttackMode.UNLIMITED, 10.0): 318.841,
    (AttackMode.UNLIMITED, 20.0): 322.683, (AttackMode.UNLIMITED, 50.0): 334.194,
    (AttackMode.UNLIMITED, 100.0): 344.648,
}


@pytest.mark.parametrize("mode, q0", sorted(LINE_23_ATTACKED_FLOW))
def test_rts_attack_lp_solution_is_feasible(rts, rts_first_dr, mode, q0):
    case, _ = rts
    spec = AttackSpec(23, alpha=0.3, q0=q0, s0=10.0, mode=mode)
    lp = build_fsmi(AttackInput.from_solution(rts_first_dr("high")), spec, case)
    solution = lp_core.solve(lp)
    assert solution.status == LpStatus.OPTIMAL
    assert lp_core.max_violation(lp, solution.values) <= 1e-6
    assert solution.objective_value == pytest.approx(LINE_23_ATTACKED_FLOW[(mode, q0)], abs=1e-3)


def test_budget_overrun_is_rejected(rts, rts_first_dr, monkeypatch):
    case, _ = rts
    sol = rts_first_dr("high")
    real_solve = lp_core.solve

    def inflated_solve(lp, max_iterations=None):
        result = real_solve(lp, max_iterations)
        values = dict(result.values)
        values["dr_f[14]"] = values["dr_f[14]"] + 50.0
        return lp_core.LpSolution(status=result.status, values=values,
                                  objective_value=result.objective_value, iterations=result.iterations)

    monkeypatch.setattr(lp_core, "solve", inflated_solve)
    with pytest.raises(lp_core.SolverError) as exc:
        run_attack(sol, AttackSpec(23, alpha=0.3, q0=10.0, s0=10.0, mode=AttackMode.UNLIMITED), case)
    assert exc.value.code == "attack.budget_exceeded"
