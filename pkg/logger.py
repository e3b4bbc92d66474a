"""
Module nhật ký lần chạy của gridraid
Mỗi lệnh CLI (validate, dispatch, attack, sweep, study) để lại một bản ghi lần chạy
trong <run_log_dir>/YYYY-MM-DD.json; các bản ghi cùng ngày nằm chung một file
"""

import json
from datetime import date as Date, datetime, timedelta
from pathlib import Path
from typing import Dict, Iterator, List

import pandas as pd

from utils import DataError, ensure_dir, get_current_datetime_iso

RECORD_KEYS = ("command", "case", "scenario", "mode", "objective_usd", "overload_mw",
               "exit_code", "output_files")

DAY_FORMAT = "%Y-%m-%d"


def _run_file(run_log_dir: Path, day: str) -> Path:
    return Path(run_log_dir) / f"{day}.json"


def append_daily_log(record: Dict, reports_dir) -> Dict:
    """
    Lưu bản ghi một lần chạy CLI vào file nhật ký của hôm nay

    Bản ghi chỉ giữ các trường RECORD_KEYS (trường thiếu thành None), đường dẫn file
    kết quả được đổi sang chuỗi, `details` (tham số tấn công, mã lỗi, ...) giữ nguyên.

    Args:
        record: Thông tin lần chạy, ví dụ {"command": "attack", "overload_mw": 30.5, ...}
        reports_dir: Thư mục nhật ký lần chạy

    Returns:
        {"file_path": file nhật ký, "total_records_today": số lần chạy đã ghi trong ngày}
    """
    today = datetime.now().strftime(DAY_FORMAT)
    run_file = _run_file(ensure_dir(reports_dir), today)

    runs = _read_run_file(run_file, today)
    runs["records"].append(_normalize_run(record))
    _write_run_file(run_file, runs)
    return {"file_path": str(run_file), "total_records_today": len(runs["records"])}


def _read_run_file(run_file: Path, day: str) -> Dict:
    """Nội dung nhật ký của một ngày; file chưa có hoặc không đọc được thì bắt đầu lại từ rỗng"""
    if run_file.exists():
        try:
            return json.loads(run_file.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            pass
    return {"date": day, "records": []}


def _write_run_file(run_file: Path, runs: Dict) -> None:
    try:
        run_file.write_text(json.dumps(runs, indent=4, ensure_ascii=False), encoding="utf-8")
    except OSError as e:
        raise DataError(f"Không thể ghi nhật ký lần chạy {run_file}: {e}", "logger.write_failed")


def _normalize_run(record: Dict) -> Dict:
    run = {key: record.get(key) for key in RECORD_KEYS}
    run["output_files"] = [str(path) for path in record.get("output_files") or []]
    run["generated_at"] = record.get("generated_at", get_current_datetime_iso())
    if "details" in record:
        run["details"] = record["details"]
    return run


def get_daily_logs(date: str = None, reports_dir=None) -> Dict:
    """
    Các lần chạy đã ghi trong một ngày

    Args:
        date: Ngày dạng YYYY-MM-DD (None = hôm nay)
        reports_dir: Thư mục nhật ký lần chạy

    Returns:
        {"date": ngày, "records": [bản ghi lần chạy, ...]}
    """
    day = date or datetime.now().strftime(DAY_FORMAT)
    return _read_run_file(_run_file(reports_dir, day), day)


def _days(start: str, end: str) -> Iterator[str]:
    current: Date = datetime.strptime(start, DAY_FORMAT).date()
    last: Date = datetime.strptime(end, DAY_FORMAT).date()
    while current <= last:
        yield current.strftime(DAY_FORMAT)
        current += timedelta(days=1)


def _runs_between(start_date: str, end_date: str, reports_dir) -> List[Dict]:
    return [{**run, "log_date": day}
            for day in _days(start_date, end_date)
            for run in get_daily_logs(day, reports_dir).get("records", [])]


def export_logs_to_csv(start_date: str, end_date: str = None, reports_dir=None, output_file: str = None) -> str:
    """
    Gộp các lần chạy trong khoảng ngày thành một bảng CSV (một dòng mỗi lần chạy)

    `output_files` được nối bằng dấu `;`, `details` được ghi dưới dạng JSON,
    cột `log_date` cho biết bản ghi lấy từ file ngày nào.

    Args:
        start_date: Ngày đầu (YYYY-MM-DD)
        end_date: Ngày cuối, tính cả ngày này (mặc định = start_date)
        reports_dir: Thư mục nhật ký lần chạy, cũng là nơi ghi file CSV
        output_file: Tên file CSV (mặc định gridraid_runs_<đầu>_to_<cuối>.csv)

    Returns:
        Đường dẫn file CSV

    Raises:
        DataError: Khoảng ngày không có lần chạy nào
    """
    end_date = end_date or start_date
    runs = _runs_between(start_date, end_date, reports_dir)
    if not runs:
        raise DataError(f"Không có lần chạy nào được ghi từ {start_date} đến {end_date}", "logger.no_records")

    frame = pd.DataFrame(runs)
    if "output_files" in frame.columns:
        frame["output_files"] = frame["output_files"].apply(lambda files: ";".join(files or []))
    if "details" in frame.columns:
        frame["details"] = frame["details"].apply(lambda d: json.dumps(d, ensure_ascii=False) if d else "")

    output_path = Path(reports_dir) / (output_file or f"gridraid_runs_{start_date}_to_{end_date}.csv")
    frame.to_csv(output_path, index=False, encoding="utf-8", lineterminator="\n")
    return str(output_path)
