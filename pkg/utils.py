"""
Module tiện ích chung cho gridraid
Chứa: lớp lỗi dùng chung, format số, parse danh sách số từ dòng lệnh, ghi CSV
"""

from datetime import datetime
from pathlib import Path
from typing import List, Union

import pandas as pd


class GridRaidError(Exception):
    """
    Lỗi gốc của gridraid, mang mã lỗi dạng `<module>.<code>` và exit code cho CLI

    Args:
        message: Thông báo lỗi (luôn chứa id / giá trị gây lỗi)
        code: Mã lỗi theo module, ví dụ `grid_model.dangling_reference`
    """

    exit_code = 1
    default_code = "gridraid.error"

    def __init__(self, message: str, code: str = None):
        super().__init__(message)
        self.code = code or self.default_code


class DataError(GridRaidError, ValueError):
    """Dữ liệu hoặc tham số không hợp lệ (exit code 1)"""

    exit_code = 1
    default_code = "gridraid.data"


class InfeasibleError(GridRaidError, RuntimeError):
    """Bài toán tối ưu không có nghiệm khả thi (exit code 2)"""

    exit_code = 2
    default_code = "gridraid.infeasible"


class UsageError(GridRaidError):
    """Sai cú pháp dòng lệnh (exit code 3)"""

    exit_code = 3
    default_code = "cli.usage"


def format_number(value: float, decimals: int = 2) -> str:
    """
    Format số với số chữ số thập phân cố định

    Args:
        value: Giá trị số cần format
        decimals: Số chữ số thập phân (mặc định 2)

    Returns:
        Chuỗi số đã format
    """
    return f"{value:.{decimals}f}"


def format_mw(value: float) -> str:
    """Format công suất, ví dụ `139.60 MW`"""
    return f"{format_number(value)} MW"


def format_percent(fraction: float, decimals: int = 1) -> str:
    """
    Format tỷ lệ (0..1) thành phần trăm

    Args:
        fraction: Tỷ lệ, ví dụ 0.886
        decimals: Số chữ số thập phân

    Returns:
        Chuỗi dạng `88.6%`
    """
    return f"{fraction * 100:.{decimals}f}%"


def get_current_datetime_iso() -> str:
    """
    Lấy thời gian hiện tại dạng ISO format

    Returns:
        Chuỗi thời gian dạng YYYY-MM-DDTHH:MM:SS
    """
    return datetime.now().strftime('%Y-%m-%dT%H:%M:%S')


def parse_float_list(text: str, expected: int = None) -> List[float]:
    """
    Parse danh sách số thực phân cách bởi dấu phẩy, ví dụ `1,2,3`

    Args:
        text: Chuỗi đầu vào
        expected: Số phần tử bắt buộc (None = không kiểm tra)

    Returns:
        Danh sách số thực

    Raises:
        DataError: Nếu có phần tử không phải số hoặc sai số lượng
    """
    items = [item.strip() for item in str(text).split(',') if item.strip()]
    try:
        values = [float(item) for item in items]
    except ValueError:
        raise DataError(f"Danh sách số không hợp lệ: '{text}'", "cli.bad_number")

    if expected is not None and len(values) != expected:
        raise DataError(
            f"Cần đúng {expected} giá trị, nhận được {len(values)}: '{text}'",
            "cli.bad_number",
        )
    return values


def parse_int_list(text: str) -> List[int]:
    """
    Parse danh sách số nguyên phân cách bởi dấu phẩy, ví dụ `10,28,23`

    Raises:
        DataError: Nếu có phần tử không phải số nguyên
    """
    items = [item.strip() for item in str(text).split(',') if item.strip()]
    try:
        return [int(item) for item in items]
    except ValueError:
        raise DataError(f"Danh sách id không hợp lệ: '{text}'", "cli.bad_id")


def ensure_dir(path: Union[str, Path]) -> Path:
    """Tạo thư mục nếu chưa có và trả về Path"""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_csv(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Ghi DataFrame ra CSV với định dạng ổn định (byte-identical giữa các lần chạy)

    Args:
        df: DataFrame cần ghi
        path: Đường dẫn file CSV

    Returns:
        Path của file đã ghi
    """
    path = Path(path)
    ensure_dir(path.parent)
    df.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path
