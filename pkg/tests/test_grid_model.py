import numpy as np
import pytest

from grid_model import (Bus, CaseParseError, DemandScenario, GridCase, Line, UnknownElementError,
                        compute_dc_flows, net_injections, parse_case, parse_case_bundle, parse_scenario,
                        serialize_case, serialize_scenario, solve_dc_power_flow, validate,
                        validate_scenario)
from utils import DataError

MINIMAL_CASE = """
# lưới nhỏ nhất
SECTION BUS
1 1
2 0
SECTION LINE
1 1 2 100 50
SECTION GEN
1 1 0 100 10 1
2 2 0 100 50 1
"""


def test_parse_minimal_case():
    case = parse_case(MINIMAL_CASE, "mini")
    assert len(case.buses) == 2
    assert len(case.lines) == 1
    assert len(case.generators) == 2
    assert case.slack_bus == 1
    assert case.name == "mini"


def test_parse_shipped_case(rts):
    case, scenario = rts
    assert len(case.buses) == 24
    assert len(case.lines) == 38
    assert len(case.generators) == 33
    assert len(case.committed_generators) == 21
    assert case.slack_bus == 13
    assert scenario is not None and scenario.label == "high"
    assert scenario.n_intervals == 4
    assert scenario.peak_mw() == pytest.approx(2281.0, abs=0.01)


def test_shipped_case_capacity(rts):
    case, scenario = rts
    report = validate_scenario(case, scenario)
    assert report.ok
    assert report.committed_capacity_mw == pytest.approx(2792.0)
    assert report.installed_capacity_mw == pytest.approx(3405.0)


def test_dangling_reference_names_bus():
    text = MINIMAL_CASE.replace("1 1 2 100 50", "1 1 99 100 50")
    with pytest.raises(CaseParseError) as exc:
        parse_case(text)
    assert exc.value.code == "grid_model.dangling_reference"
    assert "99" in str(exc.value)
    assert exc.value.line_no is not None


@pytest.mark.parametrize("text, code", [
    (MINIMAL_CASE.replace("SECTION GEN", "SECTION GENS"), "grid_model.unknown_section"),
    (MINIMAL_CASE.replace("2 0\n", "1 0\n"), "grid_model.duplicate_id"),
    ("SECTION BUS\n1 1\nSECTION LINE\n", "grid_model.missing_section"),
    (MINIMAL_CASE + "SECTION PARAMS\nfoo 1\n", "grid_model.unknown_param"),
])
def test_parse_errors(text, code):
    with pytest.raises(CaseParseError) as exc:
        parse_case(text)
    assert exc.value.code == code


def test_parse_bad_number_reports_line():
    text = MINIMAL_CASE.replace("1 1 2 100 50", "1 1 2 abc 50")
    with pytest.raises(CaseParseError) as exc:
        parse_case(text)
    assert "abc" in str(exc.value)
    assert exc.value.line_no == 7


def test_serialize_round_trip(rts):
    case, scenario = rts
    again, again_scenario = parse_case_bundle(serialize_case(case, scenario), case.name)
    assert again == case
    assert again_scenario == scenario


def test_parse_scenario_file(rts):
    case, scenario = rts
    loaded = parse_scenario(serialize_scenario(scenario), case)
    assert loaded == scenario


def test_parse_scenario_requires_load(rts):
    case, _ = rts
    with pytest.raises(CaseParseError) as exc:
        parse_scenario("SECTION PARAMS\ndr_fraction 0.3\n", case)
    assert exc.value.code == "grid_model.missing_section"


def test_validate_multiple_slack_buses():
    case = GridCase((Bus(1, True), Bus(2, True)), (Line(1, 1, 2, 100.0, 50.0),), ())
    report = validate(case)
    assert "multiple_slack_buses" in report.codes()
    assert "multiple slack buses" in report.violations[0].message


def test_validate_zero_rating_names_line():
    case = GridCase((Bus(1, True), Bus(2)), (Line(7, 1, 2, 100.0, 0.0),), ())
    report = validate(case)
    assert not report.ok
    violation = next(v for v in report.violations if v.code == "nonpositive_rating")
    assert violation.element == "line:7"
    assert "7" in violation.message


def test_validate_demand_above_capacity(two_bus_case, two_bus_scenario):
    case = two_bus_case(200.0)
    report = validate_scenario(case, two_bus_scenario(case, (250.0,)))
    assert report.codes() == ["demand_exceeds_capacity"]


def test_unknown_line_message(rts):
    case, _ = rts
    with pytest.raises(UnknownElementError) as exc:
        case.line(999)
    assert "unknown line 999" in str(exc.value)


def test_dc_flow_two_bus():
    case = GridCase((Bus(1, True), Bus(2)), (Line(1, 1, 2, 100.0, 50.0),), ())
    assert compute_dc_flows(case, {1: 0.0, 2: -0.5}) == {1: pytest.approx(50.0)}


def test_dc_flow_zero_angles(rts):
    case, _ = rts
    flows = compute_dc_flows(case, np.zeros(len(case.buses)))
    assert all(flow == 0.0 for flow in flows.values())


def test_dc_flow_rejects_nonzero_slack_angle():
    case = GridCase((Bus(1, True), Bus(2)), (Line(1, 1, 2, 100.0, 50.0),), ())
    with pytest.raises(DataError) as exc:
        compute_dc_flows(case, {1: 0.1, 2: 0.0})
    assert exc.value.code == "grid_model.slack_angle"


def test_dc_flow_triangle_balances(triangle_case):
    # Bơm 150 MW ở nút 1, rút 60 MW ở nút 2 và 90 MW ở nút 3
    angles = solve_dc_power_flow(triangle_case, {1: 150.0, 2: -60.0, 3: -90.0})
    assert angles[2] == pytest.approx(-0.7)
    assert angles[3] == pytest.approx(-0.8)
    flows = compute_dc_flows(triangle_case, angles)
    assert flows[2] == pytest.approx(80.0)
    injections = net_injections(triangle_case, flows)
    assert injections == {1: pytest.approx(150.0), 2: pytest.approx(-60.0), 3: pytest.approx(-90.0)}


def test_dc_flow_antisymmetry(rts, rng):
    case, _ = rts
    theta = rng.normal(scale=0.1, size=len(case.buses))
    theta[case.bus_position(case.slack_bus)] = 0.0
    flows = compute_dc_flows(case, theta)
    reversed_flows = compute_dc_flows(case, -theta)
    for line_id, flow in flows.items():
        assert reversed_flows[line_id] == pytest.approx(-flow)


def test_scenario_rejects_negative_demand(two_bus_case):
    case = two_bus_case(50.0)
    with pytest.raises(DataError) as exc:
        DemandScenario(case.bus_ids, np.array([[0.0], [-1.0]]))
    assert exc.value.code == "grid_model.negative_demand"
