"""
Module chạy các nghiên cứu
Chức năng: so sánh SCED / SCED-DR theo kịch bản, hồ sơ mang tải trước tấn công,
quét alpha, quét Q0 (limited / unlimited), so sánh theo mức phụ tải.
Kết quả là DataFrame sẵn sàng ghi CSV và vẽ đồ thị.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd

from attack import AttackMode, AttackSpec, ZeroFlowTargetError, run_attack
from config import get_setting
from dispatch import (DispatchMode, DispatchProblem, DispatchSolution,
                      DrCostConfig, RollResult, roll, solve_window)
from grid_model import DemandScenario, GridCase
from metrics import OVERLOAD_COLUMNS, MetricsReport, build_metrics_report, loading_rate, overload_row
from utils import DataError, GridRaidError, write_csv

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MONOTONICITY_TOL = 1e-6

ALPHA_SWEEP_COLUMNS = OVERLOAD_COLUMNS
Q0_SWEEP_COLUMNS = ALPHA_SWEEP_COLUMNS
DEMAND_LEVEL_COLUMNS = [
    "scenario", "target_line", "mode", "pre_flow_mw", "attacked_flow_mw", "rating_mw",
    "loading_rate_pre", "loading_rate_post", "delta_loading_rate", "overload_mw",
]
LOADING_COLUMNS = ["line_id", "from_bus", "to_bus", "flow_mw", "rating_mw", "loading_rate"]


class SweepSpecError(DataError):
    default_code = "experiments.bad_sweep"


class MonotonicityError(GridRaidError):
    """Kết quả quét vi phạm tính đơn điệu theo ngân sách tấn công"""

    exit_code = 1
    default_code = "experiments.monotonicity"


@dataclass(frozen=True)
class SweepSpec:
    """
    Lưới quét một tham số tấn công

    Args:
        swept_parameter: alpha | q0
        start, stop, step: Lưới from..to (gồm cả hai đầu)
        alpha, q0, s0: Giá trị cố định của các tham số không quét
        mode: Chế độ tấn công cho quét alpha
        targets: Các đường dây mục tiêu
    """

    swept_parameter: str
    start: float
    stop: float
    step: float
    alpha: float = 0.3
    q0: float = 100.0
    s0: float = 10.0
    mode: AttackMode = AttackMode.LIMITED
    targets: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.swept_parameter not in ("alpha", "q0"):
            raise SweepSpecError(f"Tham số quét '{self.swept_parameter}' không hợp lệ (alpha | q0)")
        if not self.step > 0:
            raise SweepSpecError(f"step={self.step} phải dương")
        if self.start > self.stop:
            raise SweepSpecError(f"from={self.start} lớn hơn to={self.stop}")
        if self.swept_parameter == "alpha" and not (0.0 <= self.start and self.stop <= 1.0):
            raise SweepSpecError(f"Lưới alpha {self.start}..{self.stop} phải nằm trong [0, 1]")
        if self.swept_parameter == "q0" and self.start < 0:
            raise SweepSpecError(f"Lưới Q0 bắt đầu từ {self.start} < 0")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if not isinstance(self.mode, AttackMode):
            object.__setattr__(self, "mode", AttackMode.parse(self.mode))

    @classmethod
    def default(cls, swept_parameter: str, **kwargs) -> "SweepSpec":
        """Lưới mặc định lấy từ cấu hình (alpha_grid / q0_grid)"""
        start, stop, step = get_setting(f"{swept_parameter}_grid")
        params = {"alpha": get_setting("alpha"), "q0": get_setting("q0"), "s0": get_setting("s0")}
        params.update(kwargs)
        return cls(swept_parameter, start, stop, step, **params)

    def grid(self) -> List[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 10) for i in range(count)]

    def attack_spec(self, target: int, value: float, mode: AttackMode = None) -> AttackSpec:
        params = {"alpha": self.alpha, "q0": self.q0, "s0": self.s0}
        params[self.swept_parameter] = value
        return AttackSpec(target_line=target, mode=mode or self.mode, **params)


def _map_points(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """Áp func lên từng điểm; với workers > 1 chạy song song, thứ tự kết quả luôn theo đầu vào"""
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def roll_scenario(case: GridCase, scenario: DemandScenario, mode: DispatchMode,
                  dr_costs: DrCostConfig = None, n_windows: int = None, horizon: int = None,
                  **problem_kwargs) -> RollResult:
    """Chạy cửa sổ trượt trên toàn bộ kịch bản (mặc định mỗi chu kỳ một cửa sổ)"""
    problem = DispatchProblem(
        case=case,
        scenario=scenario,
        horizon=horizon or get_setting("horizon"),
        mode=mode,
        dr_costs=dr_costs or DrCostConfig.from_settings(),
        **problem_kwargs,
    )
    return roll(problem, n_windows or scenario.n_intervals)


def first_dr_interval(case: GridCase, scenario: DemandScenario, dr_costs: DrCostConfig = None,
                      horizon: int = None) -> DispatchSolution:
    """Chu kỳ đầu được thực thi của SCED-DR, là điểm xuất phát của mọi tấn công"""
    problem = DispatchProblem(
        case=case,
        scenario=scenario,
        horizon=horizon or get_setting("horizon"),
        mode=DispatchMode.SCED_DR,
        dr_costs=dr_costs or DrCostConfig.from_settings(),
    )
    return solve_window(problem, 0).first_interval()


def run_benefit_study(case: GridCase, scenarios: Sequence[DemandScenario],
                      dr_costs: DrCostConfig = None, n_windows: int = None,
                      workers: int = None) -> List[MetricsReport]:
    """
    So sánh SCED và SCED-DR trên từng kịch bản

    Returns:
        Danh sách MetricsReport theo thứ tự kịch bản
    """
    def one(scenario: DemandScenario) -> MetricsReport:
        sced = roll_scenario(case, scenario, DispatchMode.SCED, dr_costs, n_windows)
        sced_dr = roll_scenario(case, scenario, DispatchMode.SCED_DR, dr_costs, n_windows)
        return build_metrics_report(scenario.label, sced, sced_dr, case)

    return _map_points(one, list(scenarios), workers)


def _attack_row(case: GridCase, sol: DispatchSolution, spec: AttackSpec) -> Optional[Dict[str, object]]:
    try:
        result = run_attack(sol, spec, case)
    except ZeroFlowTargetError as e:
        logger.warning("Bỏ qua đường dây %d: %s", spec.target_line, e)
        return None
    return overload_row(result)


def _check_zero_flow_targets(sol: DispatchSolution, targets: Iterable[int], case: GridCase) -> List[int]:
    kept = []
    for target in targets:
        case.line(target)
        flow = sol.flow_kt[sol.line_position(target), 0]
        if abs(flow) <= 1e-6:
            logger.warning("Bỏ qua đường dây %d: trào lưu trước tấn công bằng 0", target)
            continue
        kept.append(target)
    return kept


def check_monotone(frame: pd.DataFrame, group_column: str, x_column: str,
                   y_column: str = "loading_rate_post") -> None:
    """
    Kiểm tra y không giảm theo x trong từng nhóm

    Raises:
        MonotonicityError: Có bước giảm vượt dung sai
    """
    for group, rows in frame.groupby(group_column, sort=False):
        ordered = rows.sort_values(x_column)
        values = ordered[y_column].to_numpy()
        drops = np.diff(values)
        if drops.size and drops.min() < -MONOTONICITY_TOL * max(1.0, float(np.abs(values).max())):
            k = int(np.argmin(drops))
            xs = ordered[x_column].to_numpy()
            raise MonotonicityError(
                f"{y_column} của {group_column}={group} giảm từ {values[k]:.6f} xuống {values[k + 1]:.6f} "
                f"khi {x_column} tăng từ {xs[k]} lên {xs[k + 1]}"
            )


def run_alpha_sweep(case: GridCase, scenario: DemandScenario, targets: Sequence[int],
                    sweep: SweepSpec, dispatch_sol: DispatchSolution = None,
                    workers: int = None) -> pd.DataFrame:
    """
    Quét alpha cho từng đường dây mục tiêu (chế độ limited)

    Returns:
        DataFrame một dòng cho mỗi (mục tiêu, alpha)

    Raises:
        SweepSpecError: sweep không phải quét alpha
        MonotonicityError: Tỷ lệ mang tải sau tấn công giảm khi alpha tăng
    """
    if sweep.swept_parameter != "alpha":
        raise SweepSpecError("run_alpha_sweep cần SweepSpec quét alpha")
    sol = dispatch_sol or first_dr_interval(case, scenario)
    kept = _check_zero_flow_targets(sol, targets, case)
    points = [sweep.attack_spec(target, alpha, AttackMode.LIMITED)
              for target in kept for alpha in sweep.grid()]
    rows = [row for row in _map_points(lambda spec: _attack_row(case, sol, spec), points, workers) if row]
    frame = pd.DataFrame(rows, columns=ALPHA_SWEEP_COLUMNS)
    check_monotone(frame, "target_line", "alpha")
    return frame


def run_q0_sweep(case: GridCase, scenario: DemandScenario, target: int, sweep: SweepSpec,
                 dispatch_sol: DispatchSolution = None, workers: int = None) -> pd.DataFrame:
    """
    Quét Q0 ở cả hai chế độ limited và unlimited cho một đường dây

    Returns:
        DataFrame một dòng cho mỗi (chế độ, Q0); limited trước

    Raises:
        SweepSpecError: sweep không phải quét q0
        MonotonicityError: Tỷ lệ mang tải sau tấn công giảm khi Q0 tăng
    """
    if sweep.swept_parameter != "q0":
        raise SweepSpecError("run_q0_sweep cần SweepSpec quét q0")
    sol = dispatch_sol or first_dr_interval(case, scenario)
    if not _check_zero_flow_targets(sol, [target], case):
        return pd.DataFrame([], columns=Q0_SWEEP_COLUMNS)
    points = [sweep.attack_spec(target, q0, mode)
              for mode in (AttackMode.LIMITED, AttackMode.UNLIMITED) for q0 in sweep.grid()]
    rows = [row for row in _map_points(lambda spec: _attack_row(case, sol, spec), points, workers) if row]
    frame = pd.DataFrame(rows, columns=Q0_SWEEP_COLUMNS)
    check_monotone(frame, "mode", "q0_mw")
    return frame


def run_demand_level_study(case: GridCase, scenarios: Sequence[DemandScenario], target: int,
                           q0: float = None, alpha: float = None, s0: float = None,
                           workers: int = None) -> pd.DataFrame:
    """
    Tấn công unlimited cùng một đường dây trên nhiều mức phụ tải

    Returns:
        DataFrame một dòng cho mỗi kịch bản, cột delta_loading_rate = sau − trước
    """
    spec = AttackSpec(
        target_line=target,
        alpha=get_setting("alpha") if alpha is None else alpha,
        q0=get_setting("q0") if q0 is None else q0,
        s0=get_setting("s0") if s0 is None else s0,
        mode=AttackMode.UNLIMITED,
    )

    def one(scenario: DemandScenario) -> Optional[Dict[str, object]]:
        row = _attack_row(case, first_dr_interval(case, scenario), spec)
        if row is None:
            return None
        return {
            "scenario": scenario.label,
            "target_line": target,
            "mode": row["mode"],
            "pre_flow_mw": row["pre_flow_mw"],
            "attacked_flow_mw": row["attacked_flow_mw"],
            "rating_mw": row["rating_mw"],
            "loading_rate_pre": row["loading_rate_pre"],
            "loading_rate_post": row["loading_rate_post"],
            "delta_loading_rate": row["loading_rate_post"] - row["loading_rate_pre"],
            "overload_mw": row["overload_mw"],
        }

    rows = [row for row in _map_points(one, list(scenarios), workers) if row]
    return pd.DataFrame(rows, columns=DEMAND_LEVEL_COLUMNS)


def run_loading_profile(case: GridCase, scenario: DemandScenario,
                        dispatch_sol: DispatchSolution = None) -> pd.DataFrame:
    """Tỷ lệ mang tải trước tấn công của mọi đường dây, giảm dần (cùng tỷ lệ thì theo id)"""
    sol = dispatch_sol or first_dr_interval(case, scenario)
    rows = []
    for k, line in enumerate(case.lines):
        flow = float(sol.flow_kt[k, 0])
        rows.append({
            "line_id": line.id,
            "from_bus": line.from_bus,
            "to_bus": line.to_bus,
            "flow_mw": flow,
            "rating_mw": line.rating_mw,
            "loading_rate": loading_rate(flow, line.rating_mw),
        })
    frame = pd.DataFrame(rows, columns=LOADING_COLUMNS)
    frame = frame.sort_values(["loading_rate", "line_id"], ascending=[False, True], kind="mergesort")
    return frame.reset_index(drop=True)


def study_file_name(study: str, scenario: str, target=None) -> str:
    return f"{study}_{scenario}_{'all' if target is None else target}.csv"


def write_study_csv(frame: pd.DataFrame, out_dir, study: str, scenario: str, target=None) -> Path:
    """Ghi bảng kết quả theo quy ước `<study>_<scenario>_<target>.csv`"""
    return write_csv(frame, Path(out_dir) / study_file_name(study, scenario, target))


def _group_filter(group_column: str, group: object) -> str:
    """Điều kiện chọn dòng của một nhóm; nhóm số được so theo giá trị để 0.3 và 0.30 là một"""
    if isinstance(group, (int, float, np.number)) and not isinstance(group, bool):
        return f"abs(column('{group_column}') - {float(group)!r}) < 1e-9"
    return f"strcol('{group_column}') eq '{group}'"


def gnuplot_script(csv_path, x_column: str, y_column: str, group_column: str = None,
                   groups: Sequence[object] = ()) -> str:
    """
    Script gnuplot vẽ y theo x từ file CSV, mỗi nhóm một đường

    Args:
        csv_path: File CSV (có dòng tiêu đề)
        x_column, y_column: Tên cột trục x / y
        group_column: Cột phân nhóm (None = một đường)
        groups: Giá trị của cột nhóm cần vẽ

    Returns:
        Nội dung script
    """
    csv_path = Path(csv_path)
    png = csv_path.with_suffix(".png").name
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        f"set output '{png}'",
        f"set xlabel '{x_column}'",
        f"set ylabel '{y_column}'",
        "set key outside right",
        "set grid",
        "set key autotitle columnhead",
    ]
    if group_column and groups:
        plots = [
            f"'{csv_path.name}' using ({_group_filter(group_column, group)} ? column('{x_column}') : 1/0)"
            f":(column('{y_column}')) with linespoints title '{group_column}={group}'"
            for group in groups
        ]
        lines.append("plot " + ", \\\n     ".join(plots))
    else:
        lines.append(f"plot '{csv_path.name}' using (column('{x_column}')):(column('{y_column}')) "
                     f"with linespoints title '{y_column}'")
    return "\n".join(lines) + "\n"
