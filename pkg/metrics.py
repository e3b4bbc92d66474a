"""
Module tính các chỉ số đánh giá
Chức năng: tỷ lệ mang tải đường dây, hệ số phụ tải, tổng tải dịch theo loại,
chi phí và tiết kiệm của SCED-DR so với SCED, bảng tóm tắt
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from attack import AttackResult
from dispatch import DispatchMode, DispatchSolution, RollResult
from grid_model import GridCase
from utils import DataError

logger = logging.getLogger(__name__)

COST_DOMINANCE_TOL = 1e-6

SUMMARY_COLUMNS = [
    "scenario", "cost_sced_usd", "cost_sced_dr_usd", "savings_usd",
    "dr15_mw", "dr30_mw", "dr45_mw", "dr_total_mw",
    "load_factor_sced", "load_factor_sced_dr", "peak_sced_mw", "peak_sced_dr_mw",
    "max_loading_rate",
]

OVERLOAD_COLUMNS = [
    "target_line", "mode", "alpha", "q0_mw", "s0_rad", "pre_flow_mw", "attacked_flow_mw",
    "rating_mw", "loading_rate_pre", "loading_rate_post", "overload_mw", "angle_budget_used_rad",
    "dr_budget_used_mw",
]


class MetricsError(DataError):
    default_code = "metrics.invalid_input"


def loading_rate(flow_mw: float, rating_mw: float) -> float:
    """
    Tỷ lệ mang tải |flow| / rating

    Raises:
        MetricsError: rating <= 0
    """
    if rating_mw <= 0:
        raise MetricsError(f"Công suất định mức {rating_mw} MW phải dương", "metrics.nonpositive_rating")
    return abs(flow_mw) / rating_mw


def load_factor(net_demand_series: Sequence[float]) -> float:
    """
    Hệ số phụ tải = trung bình / cực đại của chuỗi tải phục vụ

    Raises:
        MetricsError: Chuỗi rỗng hoặc toàn 0
    """
    series = np.asarray(net_demand_series, dtype=float)
    if series.size == 0:
        raise MetricsError("Chuỗi phụ tải rỗng", "metrics.empty_series")
    peak = float(series.max())
    if peak <= 0:
        raise MetricsError("Chuỗi phụ tải có cực đại <= 0", "metrics.zero_series")
    return float(series.mean()) / peak


def dr_shift_summary(solutions: Sequence[DispatchSolution]) -> Tuple[float, float, float]:
    """
    Tổng tải đã dịch theo loại 15 / 30 / 45 phút, chỉ tính chu kỳ đầu (được thực thi) của mỗi nghiệm
    """
    totals = np.zeros(3)
    for sol in solutions:
        totals += [sol.dr15[:, 0].sum(), sol.dr30[:, 0].sum(), sol.dr45[:, 0].sum()]
    return float(totals[0]), float(totals[1]), float(totals[2])


def bus_load_factors(solutions: Sequence[DispatchSolution]) -> Dict[int, float]:
    """Hệ số phụ tải từng nút trên các chu kỳ đã thực thi; bỏ qua nút không có tải"""
    if not solutions:
        return {}
    served = np.column_stack([sol.net_demand_nt[:, 0] for sol in solutions])
    out = {}
    for n, bus_id in enumerate(solutions[0].bus_ids):
        if served[n].max() > 0:
            out[bus_id] = load_factor(served[n])
    return out


def roll_cost(roll: RollResult) -> float:
    return roll.total_cost_usd()


def line_loading_rates(sol: DispatchSolution, case: GridCase) -> Dict[int, float]:
    """Tỷ lệ mang tải của mọi đường dây ở chu kỳ đầu của nghiệm"""
    return {line.id: loading_rate(sol.flow_kt[k, 0], line.rating_mw) for k, line in enumerate(case.lines)}


def overload_row(result: AttackResult) -> Dict[str, object]:
    """Một dòng của bảng quá tải cho một lần tấn công"""
    spec = result.spec
    return {
        "target_line": spec.target_line,
        "mode": spec.mode.value,
        "alpha": spec.alpha,
        "q0_mw": spec.q0,
        "s0_rad": spec.s0,
        "pre_flow_mw": result.pre_attack_flow_mw,
        "attacked_flow_mw": float(result.attacked_flows[result.target_position]),
        "rating_mw": result.target_rating_mw,
        "loading_rate_pre": result.loading_rate_pre,
        "loading_rate_post": result.loading_rate_post,
        "overload_mw": result.overload_mw,
        "angle_budget_used_rad": result.angle_budget_used,
        "dr_budget_used_mw": result.dr_budget_used,
    }


@dataclass(frozen=True)
class MetricsReport:
    """Chỉ số của một kịch bản: chi phí hai chế độ, tải dịch, hệ số phụ tải, mang tải, quá tải"""

    label: str
    cost_sced_usd: float
    cost_sced_dr_usd: float
    dr_shift_totals_mw: Tuple[float, float, float]
    load_factor_sced: float
    load_factor_sced_dr: float
    peak_sced_mw: float
    peak_sced_dr_mw: float
    line_loading: Dict[int, float] = field(default_factory=dict)
    overloads: Tuple[Dict[str, object], ...] = ()

    @property
    def savings_usd(self) -> float:
        return self.cost_sced_usd - self.cost_sced_dr_usd

    @property
    def dr_total_mw(self) -> float:
        return float(sum(self.dr_shift_totals_mw))

    @property
    def max_loading_rate(self) -> float:
        return max(self.line_loading.values(), default=0.0)

    def with_overloads(self, results: Sequence[AttackResult]) -> "MetricsReport":
        rows = tuple(overload_row(result) for result in results)
        return MetricsReport(**{**self.__dict__, "overloads": self.overloads + rows})


def build_metrics_report(label: str, sced_roll: RollResult, scedr_roll: RollResult,
                         case: GridCase, attacks: Optional[Sequence[AttackResult]] = None) -> MetricsReport:
    """
    Tổng hợp chỉ số từ hai lần chạy cửa sổ trượt trên cùng kịch bản

    Args:
        label: Tên kịch bản
        sced_roll: Kết quả chạy chế độ sced
        scedr_roll: Kết quả chạy chế độ sced_dr
        case: Lưới điện
        attacks: Các lần tấn công cần đưa vào bảng quá tải

    Returns:
        MetricsReport

    Raises:
        MetricsError: Sai chế độ đầu vào hoặc SCED-DR đắt hơn SCED
    """
    if sced_roll.mode != DispatchMode.SCED or scedr_roll.mode != DispatchMode.SCED_DR:
        raise MetricsError("Cần một lần chạy sced và một lần chạy sced_dr", "metrics.mode_mismatch")

    cost_sced = roll_cost(sced_roll)
    cost_dr = roll_cost(scedr_roll)
    if cost_sced - cost_dr < -COST_DOMINANCE_TOL * max(1.0, abs(cost_sced)):
        raise MetricsError(
            f"Kịch bản {label}: chi phí SCED-DR {cost_dr:.4f} $ lớn hơn SCED {cost_sced:.4f} $",
            "metrics.cost_dominance",
        )

    sced_series = sced_roll.net_demand_series()
    dr_series = scedr_roll.net_demand_series()
    report = MetricsReport(
        label=label,
        cost_sced_usd=cost_sced,
        cost_sced_dr_usd=cost_dr,
        dr_shift_totals_mw=dr_shift_summary(scedr_roll.implemented),
        load_factor_sced=load_factor(sced_series),
        load_factor_sced_dr=load_factor(dr_series),
        peak_sced_mw=float(sced_series.max()),
        peak_sced_dr_mw=float(dr_series.max()),
        line_loading=line_loading_rates(scedr_roll.implemented[0], case),
    )
    logger.info("Kịch bản %s: tiết kiệm %.2f $, dịch tải %.2f MW, LF %.4f -> %.4f",
                label, report.savings_usd, report.dr_total_mw,
                report.load_factor_sced, report.load_factor_sced_dr)
    if attacks:
        report = report.with_overloads(attacks)
    return report


def report_to_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        dr15, dr30, dr45 = report.dr_shift_totals_mw
        rows.append({
            "scenario": report.label,
            "cost_sced_usd": report.cost_sced_usd,
            "cost_sced_dr_usd": report.cost_sced_dr_usd,
            "savings_usd": report.savings_usd,
            "dr15_mw": dr15,
            "dr30_mw": dr30,
            "dr45_mw": dr45,
            "dr_total_mw": report.dr_total_mw,
            "load_factor_sced": report.load_factor_sced,
            "load_factor_sced_dr": report.load_factor_sced_dr,
            "peak_sced_mw": report.peak_sced_mw,
            "peak_sced_dr_mw": report.peak_sced_dr_mw,
            "max_loading_rate": report.max_loading_rate,
        })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def overloads_to_frame(results: Sequence[AttackResult]) -> pd.DataFrame:
    return pd.DataFrame([overload_row(result) for result in results], columns=OVERLOAD_COLUMNS)


def render_summary_table(reports: Sequence[MetricsReport]) -> str:
    """Bảng văn bản canh cột để in ra màn hình và ghi summary.txt"""
    frame = report_to_frame(reports)
    if frame.empty:
        return "(không có kết quả)"
    return frame.to_string(index=False, float_format=lambda value: f"{value:.4f}")


def render_frame(frame: pd.DataFrame) -> str:
    """Bảng văn bản canh cột cho một DataFrame bất kỳ"""
    if frame.empty:
        return "(không có kết quả)"
    return frame.to_string(index=False, float_format=lambda value: f"{value:.4f}", na_rep="")
