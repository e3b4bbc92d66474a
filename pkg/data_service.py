"""
data_service.py
----------------
Đọc file case từ thư mục data/ và chọn kịch bản phụ tải.

Public functions:
    load_case(path) -> (GridCase, DemandScenario | None)
    get_available_cases(data_dir) -> list
    get_case_info(path) -> dict
    resolve_scenario(case, base, label_or_path) -> DemandScenario
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

from generate_scenarios import SCENARIO_TOTALS, generate_scenario
from grid_model import (DemandScenario, GridCase, parse_case_bundle, parse_scenario,
                        validate, validate_scenario)
from utils import DataError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_CASE = DATA_DIR / "rts24.case"


def load_case(path) -> Tuple[GridCase, Optional[DemandScenario]]:
    """
    Đọc file case

    Args:
        path: Đường dẫn file .case

    Returns:
        Tuple (GridCase, kịch bản trong section LOAD hoặc None)

    Raises:
        DataError: File không tồn tại / không đọc được
        CaseParseError: File sai cú pháp
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Không tìm thấy file case '{path}'", "data.missing_file")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"Không đọc được file case '{path}': {e}", "data.unreadable")
    case, scenario = parse_case_bundle(text, path.stem)
    logger.debug("Đã đọc %s: %d nút, %d đường dây, %d tổ máy", path, len(case.buses),
                 len(case.lines), len(case.generators))
    return case, scenario


def get_available_cases(data_dir=None) -> List[str]:
    """
    Danh sách file .case trong thư mục dữ liệu, sắp theo tên
    """
    directory = Path(data_dir) if data_dir else DATA_DIR
    if not directory.is_dir():
        return []
    return sorted(p.name for p in directory.glob("*.case"))


def get_case_info(path) -> dict:
    """
    Thông tin tổng quan của một file case (kết quả kiểm tra hợp lệ dạng dict)

    Args:
        path: Đường dẫn file .case

    Returns:
        dict với số phần tử, công suất, phụ tải đỉnh và danh sách mã vi phạm
    """
    case, scenario = load_case(path)
    report = validate_scenario(case, scenario) if scenario is not None else validate(case)
    return {
        'name': case.name,
        'buses': report.n_buses,
        'lines': report.n_lines,
        'generators': report.n_generators,
        'committed': report.n_committed,
        'installed_capacity_mw': report.installed_capacity_mw,
        'committed_capacity_mw': report.committed_capacity_mw,
        'scenario': scenario.label if scenario is not None else None,
        'intervals': scenario.n_intervals if scenario is not None else 0,
        'peak_demand_mw': report.peak_demand_mw,
        'ok': report.ok,
        'violations': report.codes(),
    }


def resolve_scenario(case: GridCase, base: Optional[DemandScenario], label_or_path: str) -> DemandScenario:
    """
    Chọn kịch bản phụ tải theo nhãn có sẵn hoặc theo file LOAD/PARAMS

    Nhãn trùng với kịch bản trong file case thì dùng nguyên kịch bản đó;
    nhãn khác được sinh từ tỷ lệ nút của kịch bản gốc.

    Raises:
        DataError: Nhãn không hợp lệ, file không tồn tại, hoặc thiếu kịch bản gốc
    """
    text = str(label_or_path).strip()
    if base is not None and text == base.label:
        return base
    if text in SCENARIO_TOTALS:
        if base is None:
            raise DataError(f"File case không có section LOAD để sinh kịch bản '{text}'",
                            "data.missing_load")
        return generate_scenario(base, text)

    path = Path(text)
    if not path.is_file():
        raise DataError(
            f"Kịch bản '{text}' không phải nhãn ({', '.join(SCENARIO_TOTALS)}) và không phải file",
            "data.unknown_scenario",
        )
    return parse_scenario(path.read_text(encoding="utf-8"), case)
