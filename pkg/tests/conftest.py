import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from data_service import DEFAULT_CASE, load_case, resolve_scenario  # noqa: E402
from dispatch import DispatchMode, DispatchProblem, DrCostConfig, roll, solve_window  # noqa: E402
from grid_model import Bus, DemandScenario, Generator, GridCase, Line  # noqa: E402

SCENARIO_LABELS = ("low", "medium", "high")


def _two_bus(rating_mw: float) -> GridCase:
    return GridCase(
        buses=(Bus(1, True), Bus(2)),
        lines=(Line(1, 1, 2, 1000.0, rating_mw),),
        generators=(Generator(1, 1, 0.0, 100.0, 10.0), Generator(2, 2, 0.0, 100.0, 50.0)),
        name="two_bus",
    )


@pytest.fixture
def two_bus_case():
    """Nút 1 có tổ máy rẻ 10 $/MWh, nút 2 có tổ máy đắt 50 $/MWh; giới hạn đường dây tùy chọn"""
    return _two_bus


@pytest.fixture
def two_bus_scenario():
    def make(case: GridCase, bus2_mw, dr_fraction: float = 0.3) -> DemandScenario:
        return DemandScenario.from_bus_map(case, {2: list(bus2_mw)}, dr_fraction=dr_fraction)
    return make


@pytest.fixture
def congested_two_bus(two_bus_case, two_bus_scenario):
    """Đường dây 50 MW, tải nút 2 là (80, 40): DR15 tối ưu là 10 MW ở chu kỳ đầu"""
    case = two_bus_case(50.0)
    return case, two_bus_scenario(case, (80.0, 40.0))


@pytest.fixture
def triangle_case():
    """
    Lưới tam giác: nút 1 (cân bằng, tổ máy rẻ), nút 2 chỉ có tải, nút 3 có tải và tổ máy đắt.
    Điện nạp bằng nhau nên trào lưu 1->3 = W2/3 + 2·W3/3 với W là tải do tổ máy 1 cấp.
    """
    return GridCase(
        buses=(Bus(1, True), Bus(2), Bus(3)),
        lines=(Line(1, 1, 2, 100.0, 200.0), Line(2, 1, 3, 100.0, 80.0), Line(3, 2, 3, 100.0, 200.0)),
        generators=(Generator(1, 1, 0.0, 500.0, 10.0), Generator(2, 3, 0.0, 300.0, 50.0)),
        name="triangle",
    )


@pytest.fixture
def triangle_dispatch(triangle_case):
    """Chu kỳ đầu SCED-DR trên lưới tam giác: đường dây 2 (1-3) đầy tải 80 MW, DR 10 MW ở nút 3"""
    scenario = DemandScenario.from_bus_map(triangle_case, {2: [60.0, 20.0], 3: [100.0, 40.0]})
    problem = DispatchProblem(triangle_case, scenario, horizon=2, mode=DispatchMode.SCED_DR,
                              dr_costs=DrCostConfig(1.0, 2.0, 3.0))
    return solve_window(problem, 0).first_interval()


@pytest.fixture(scope="session")
def rts():
    case, base = load_case(DEFAULT_CASE)
    return case, base


@pytest.fixture(scope="session")
def rts_scenarios(rts):
    case, base = rts
    return {label: resolve_scenario(case, base, label) for label in SCENARIO_LABELS}


@pytest.fixture(scope="session")
def rts_rolls(rts, rts_scenarios):
    """Kết quả cửa sổ trượt trên lưới 24 nút, tính một lần cho mỗi (kịch bản, chế độ)"""
    case, _ = rts
    cache = {}

    def get(label: str, mode: DispatchMode):
        key = (label, mode)
        if key not in cache:
            problem = DispatchProblem(case, rts_scenarios[label], horizon=4, mode=mode)
            cache[key] = roll(problem, rts_scenarios[label].n_intervals)
        return cache[key]
    return get


@pytest.fixture(scope="session")
def rts_first_dr(rts_rolls):
    """Chu kỳ đầu đã thực thi của SCED-DR, điểm xuất phát của tấn công"""
    def get(label: str):
        return rts_rolls(label, DispatchMode.SCED_DR).implemented[0]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
