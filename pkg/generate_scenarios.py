"""
Tạo các kịch bản phụ tải low / medium / high cho lưới 24 nút
Giữ tỷ lệ phân bố tải giữa các nút của chu kỳ đầu kịch bản gốc,
co giãn theo tổng phụ tải hệ thống của từng chu kỳ
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np

from grid_model import DemandScenario, parse_case_bundle, serialize_scenario
from utils import DataError, ensure_dir

logger = logging.getLogger(__name__)

# Tổng phụ tải hệ thống (MW) của 4 chu kỳ 15 phút
SCENARIO_TOTALS: Dict[str, Tuple[float, ...]] = {
    "low": (1700.0, 1750.0, 1720.0, 1680.0),       # không nghẽn
    "medium": (2050.0, 2150.0, 2100.0, 2000.0),    # đường dây 14-16 nghẽn nhẹ
    "high": (2281.0, 2150.0, 2050.0, 1980.0),      # đỉnh 2281 MW ở chu kỳ đầu
}

DEFAULT_CASE = Path(__file__).parent / "data" / "rts24.case"


def generate_scenario(base: DemandScenario, label: str, totals: Sequence[float] = None) -> DemandScenario:
    """
    Sinh kịch bản phụ tải bằng cách phân bổ tổng hệ thống theo tỷ lệ nút của chu kỳ đầu

    Args:
        base: Kịch bản gốc (lấy tỷ lệ phân bố theo nút)
        label: Tên kịch bản (low | medium | high | custom)
        totals: Tổng hệ thống từng chu kỳ; mặc định lấy từ SCENARIO_TOTALS

    Returns:
        DemandScenario mới, giá trị làm tròn 4 chữ số thập phân

    Raises:
        DataError: Nhãn không có trong SCENARIO_TOTALS và không truyền totals, hoặc kịch bản gốc không có tải
    """
    if totals is None:
        if label not in SCENARIO_TOTALS:
            raise DataError(f"Không có tổng phụ tải cho kịch bản '{label}'", "scenarios.unknown_label")
        totals = SCENARIO_TOTALS[label]
    first = base.demand_mw[:, 0]
    if first.sum() <= 0:
        raise DataError("Kịch bản gốc có tổng tải chu kỳ đầu bằng 0", "scenarios.empty_base")

    shares = first / first.sum()
    demand = np.round(np.outer(shares, np.asarray(totals, dtype=float)), 4)
    return DemandScenario(
        bus_ids=base.bus_ids,
        demand_mw=demand,
        dr_fraction=base.dr_fraction,
        interval_minutes=base.interval_minutes,
        label=label,
    )


def write_load_file(scenario: DemandScenario, path) -> Path:
    """Ghi kịch bản ra file chỉ gồm section LOAD và PARAMS"""
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(serialize_scenario(scenario), encoding="utf-8")
    return path


def main(argv=None):
    """Hàm chính"""
    parser = argparse.ArgumentParser(description="Tạo file phụ tải cho các kịch bản low / medium / high")
    parser.add_argument("--case", default=str(DEFAULT_CASE), help="File case có section LOAD làm gốc")
    parser.add_argument("--out", default="data", help="Thư mục ghi file (mặc định: data)")
    parser.add_argument("--labels", default="low,medium,high", help="Các kịch bản cần tạo")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    case, base = parse_case_bundle(Path(args.case).read_text(encoding="utf-8"), Path(args.case).stem)
    if base is None:
        raise SystemExit(f"File {args.case} không có section LOAD")

    for label in [item.strip() for item in args.labels.split(',') if item.strip()]:
        scenario = generate_scenario(base, label)
        path = write_load_file(scenario, Path(args.out) / f"{case.name}_{label}.load")
        logger.info("Đã tạo %s: đỉnh %.1f MW, tổng theo chu kỳ %s", path, scenario.peak_mw(),
                    ", ".join(f"{v:.1f}" for v in scenario.system_demand()))


if __name__ == "__main__":
    main()
