"""
config/settings.py
------------------
Bảng tham số mặc định duy nhất của gridraid và hàm đọc cấu hình theo thứ tự:
1. Biến môi trường GRIDRAID_* (nạp từ .env nếu có)
2. Bảng DEFAULTS
3. Giá trị mặc định truyền vào
"""

import os
from typing import Any, Dict, List, Tuple

from utils import DataError

# Import dotenv nếu có
try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False
    load_dotenv = None

if DOTENV_AVAILABLE:
    load_dotenv()


ENV_PREFIX = "GRIDRAID_"

# Bảng mặc định: (giá trị, mô tả hiển thị trong --help)
DEFAULTS: Dict[str, Any] = {
    "alpha": 0.3,
    "q0": 100.0,
    "s0": 10.0,
    "dr_fraction": 0.3,
    "horizon": 4,
    "interval_minutes": 15,
    "dr_costs": (1.0, 2.0, 3.0),
    "alpha_grid": (0.1, 1.0, 0.1),
    "q0_grid": (0.0, 100.0, 10.0),
    "output_dir": "output",
    "terminal_shifts": "forbid",
    "shrink_horizon": True,
    "run_log_dir": "",
}

DESCRIPTIONS: Dict[str, str] = {
    "alpha": "hệ số lệch tín hiệu DR (chế độ limited)",
    "q0": "ngân sách l1 độ lệch DR (MW)",
    "s0": "ngân sách l1 độ lệch góc pha (rad)",
    "dr_fraction": "tỷ lệ tải tham gia DR mỗi nút",
    "horizon": "số chu kỳ nhìn trước của SCED",
    "interval_minutes": "độ dài một chu kỳ (phút)",
    "dr_costs": "chi phí dịch tải 15/30/45 phút ($/MW)",
    "alpha_grid": "lưới quét alpha (from, to, step)",
    "q0_grid": "lưới quét Q0 (from, to, step)",
    "output_dir": "thư mục kết quả (GRIDRAID_OUT)",
    "terminal_shifts": "dịch tải vượt cuối cửa sổ: forbid | free",
    "shrink_horizon": "thu ngắn cửa sổ khi hết dữ liệu tải",
    "run_log_dir": "thư mục nhật ký chạy JSON theo ngày (rỗng = tắt)",
}

# Tên biến môi trường không theo quy tắc GRIDRAID_<KEY>
ENV_ALIASES: Dict[str, str] = {
    "output_dir": "GRIDRAID_OUT",
}


class ConfigError(DataError):
    """Giá trị cấu hình không đọc được"""

    default_code = "config.invalid_value"


def env_name(key: str) -> str:
    """Tên biến môi trường tương ứng với một khóa cấu hình"""
    return ENV_ALIASES.get(key, ENV_PREFIX + key.upper())


def _coerce(key: str, raw: str, template: Any) -> Any:
    """
    Ép kiểu chuỗi từ biến môi trường theo kiểu của giá trị mặc định

    Raises:
        ConfigError: Nếu không ép kiểu được
    """
    try:
        if isinstance(template, bool):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(template, int):
            return int(raw)
        if isinstance(template, float):
            return float(raw)
        if isinstance(template, tuple):
            values = tuple(float(item) for item in raw.split(','))
            if len(values) != len(template):
                raise ValueError(raw)
            return values
    except ValueError:
        raise ConfigError(f"Giá trị cấu hình {env_name(key)}='{raw}' không hợp lệ")
    return raw


def get_setting(key: str, default=None):
    """
    Đọc một tham số cấu hình

    Args:
        key: Khóa cấu hình (ví dụ "alpha", "output_dir")
        default: Giá trị trả về nếu khóa không có trong môi trường lẫn DEFAULTS

    Returns:
        Giá trị đã ép kiểu theo bảng DEFAULTS
    """
    template = DEFAULTS.get(key, default)
    raw = os.getenv(env_name(key))
    if raw is not None and raw != "":
        return _coerce(key, raw, template)
    return template


def describe_defaults() -> List[Tuple[str, str, str]]:
    """
    Bảng mặc định dạng (khóa, giá trị, mô tả) để in trong --help
    """
    rows = []
    for key, value in DEFAULTS.items():
        if isinstance(value, tuple):
            shown = ",".join(f"{item:g}" for item in value)
        else:
            shown = str(value)
        rows.append((key, shown, DESCRIPTIONS.get(key, "")))
    return rows
