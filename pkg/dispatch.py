"""
Module điều độ kinh tế có ràng buộc an ninh (SCED) và SCED có đáp ứng phụ tải (SCED-DR)
Chức năng: dựng và giải LP cho một cửa sổ nhìn trước 4 chu kỳ x 15 phút,
chạy giao thức cửa sổ trượt (chỉ thực thi chu kỳ đầu), sổ cái tải dịch chuyển
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import lp_core
from config import get_setting
from grid_model import DemandScenario, GridCase
from lp_core import LinearProgram, LpStatus, Relation, Sense
from utils import DataError, InfeasibleError

logger = logging.getLogger(__name__)

# (tên biến, số chu kỳ dịch) cho DR 15 / 30 / 45 phút
SHIFT_CLASSES: Tuple[Tuple[str, int], ...] = (("dr15", 1), ("dr30", 2), ("dr45", 3))
MAX_SHIFT_OFFSET = 3

CSV_COLUMNS = [
    "window", "interval", "entity_kind", "entity_id", "p_mw", "flow_mw", "loading_rate",
    "theta_rad", "dr15_mw", "dr30_mw", "dr45_mw", "net_demand_mw", "cost_usd",
]


class DispatchMode(str, Enum):
    SCED = "sced"
    SCED_DR = "sced_dr"

    @classmethod
    def parse(cls, text: str) -> "DispatchMode":
        normalized = str(text).strip().lower().replace("-", "_")
        try:
            return cls(normalized)
        except ValueError:
            raise DataError(f"Chế độ điều độ '{text}' không hợp lệ (sced | sced-dr)",
                            "dispatch.bad_mode")


class TerminalShifts(str, Enum):
    """Xử lý tải dịch có thời điểm đến nằm sau cuối cửa sổ"""

    FORBID = "forbid"
    FREE = "free"


class DispatchInfeasibleError(InfeasibleError):
    """Một cửa sổ điều độ không có nghiệm khả thi"""

    default_code = "dispatch.infeasible_window"

    def __init__(self, message: str, window: int, diagnostic: str, code: str = None, scenario: str = None):
        where = f"kịch bản {scenario}, cửa sổ {window}" if scenario else f"cửa sổ {window}"
        super().__init__(f"{where}: {message} ({diagnostic})", code)
        self.window = window
        self.diagnostic = diagnostic
        self.scenario = scenario


@dataclass(frozen=True)
class DrCostConfig:
    """Chi phí bù cho tải dịch 15 / 30 / 45 phút ($/MW mỗi lần dịch)"""

    cost_15: float = 1.0
    cost_30: float = 2.0
    cost_45: float = 3.0

    def __post_init__(self):
        if not 0.0 <= self.cost_15 <= self.cost_30 <= self.cost_45:
            raise DataError(
                f"Cần 0 <= c15 <= c30 <= c45, nhận ({self.cost_15}, {self.cost_30}, {self.cost_45})",
                "dispatch.dr_costs",
            )

    def by_class(self) -> Dict[str, float]:
        return {"dr15": self.cost_15, "dr30": self.cost_30, "dr45": self.cost_45}

    @classmethod
    def from_settings(cls) -> "DrCostConfig":
        return cls(*get_setting("dr_costs"))


@dataclass(frozen=True, eq=False)
class CarryOverLedger:
    """
    Sổ cái tải đã dịch từ các chu kỳ đã thực thi

    inbound_mw[n, k-1] là lượng MW sẽ đến nút n ở chu kỳ thứ k tính từ đầu cửa sổ kế tiếp
    (k = 1 là chính chu kỳ đầu của cửa sổ đó).
    """

    inbound_mw: np.ndarray

    def __post_init__(self):
        inbound = np.array(self.inbound_mw, dtype=float)
        if inbound.ndim != 2 or inbound.shape[1] != MAX_SHIFT_OFFSET:
            raise DataError(f"Sổ cái cần dạng (số nút, {MAX_SHIFT_OFFSET}), nhận {inbound.shape}",
                            "dispatch.ledger_shape")
        if inbound.size and inbound.min() < -1e-9:
            raise DataError("Sổ cái tải dịch có giá trị âm", "dispatch.ledger_negative")
        inbound = np.maximum(inbound, 0.0)
        inbound.setflags(write=False)
        object.__setattr__(self, "inbound_mw", inbound)

    @classmethod
    def empty(cls, n_buses: int) -> "CarryOverLedger":
        return cls(np.zeros((n_buses, MAX_SHIFT_OFFSET)))

    @property
    def n_buses(self) -> int:
        return int(self.inbound_mw.shape[0])

    def arrivals(self, offset: int) -> np.ndarray:
        """Lượng tải đến ở chu kỳ `offset` (1..3) của cửa sổ; ngoài khoảng trả về 0"""
        if 1 <= offset <= MAX_SHIFT_OFFSET:
            return self.inbound_mw[:, offset - 1].copy()
        return np.zeros(self.n_buses)

    def advance(self, dr15: np.ndarray, dr30: np.ndarray, dr45: np.ndarray) -> "CarryOverLedger":
        """
        Sổ cái sau khi thực thi một chu kỳ: cột offset 1 đã được tiêu thụ,
        các cột còn lại lùi một bậc, cộng thêm tải dịch đi của chu kỳ vừa thực thi
        """
        nxt = np.zeros_like(self.inbound_mw)
        nxt[:, 0] = self.inbound_mw[:, 1] + dr15
        nxt[:, 1] = self.inbound_mw[:, 2] + dr30
        nxt[:, 2] = dr45
        return CarryOverLedger(nxt)

    def total_mw(self) -> float:
        return float(self.inbound_mw.sum())

    def is_empty(self, tol: float = 1e-9) -> bool:
        return self.total_mw() <= tol


@dataclass(frozen=True)
class DispatchProblem:
    """
    Bài toán điều độ cho một cửa sổ nhìn trước

    Args:
        case: Lưới điện
        scenario: Phụ tải dự báo (cùng thứ tự nút với case)
        horizon: Số chu kỳ nhìn trước T
        mode: sced hoặc sced_dr
        dr_costs: Chi phí dịch tải
        carry_in: Sổ cái tải dịch từ các cửa sổ trước (None = rỗng)
        terminal_shifts: forbid bỏ biến dịch tải có thời điểm đến sau cuối cửa sổ; free giữ lại
        shrink_horizon: Thu ngắn cửa sổ khi dữ liệu phụ tải hết trước cuối cửa sổ
    """

    case: GridCase
    scenario: DemandScenario
    horizon: int = 4
    mode: DispatchMode = DispatchMode.SCED_DR
    dr_costs: DrCostConfig = field(default_factory=DrCostConfig)
    carry_in: Optional[CarryOverLedger] = None
    terminal_shifts: TerminalShifts = TerminalShifts.FORBID
    shrink_horizon: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", DispatchMode.parse(self.mode)
                           if not isinstance(self.mode, DispatchMode) else self.mode)
        object.__setattr__(self, "terminal_shifts", TerminalShifts(self.terminal_shifts))
        if int(self.horizon) < 1:
            raise DataError(f"horizon={self.horizon} phải >= 1", "dispatch.horizon")
        if not self.scenario.aligned_with(self.case):
            raise DataError("Kịch bản phụ tải không cùng thứ tự nút với case", "dispatch.scenario_mismatch")
        if self.carry_in is None:
            object.__setattr__(self, "carry_in", CarryOverLedger.empty(len(self.case.buses)))
        elif self.carry_in.n_buses != len(self.case.buses):
            raise DataError("Sổ cái tải dịch không khớp số nút của case", "dispatch.ledger_shape")

    def window_length(self, window_start: int) -> int:
        """
        Số chu kỳ thực tế của cửa sổ bắt đầu tại `window_start` (chỉ số 0)

        Raises:
            DataError: Dữ liệu phụ tải không đủ cho cửa sổ
        """
        remaining = self.scenario.n_intervals - window_start
        if window_start < 0 or remaining <= 0:
            raise DataError(
                f"Cửa sổ bắt đầu ở chu kỳ {window_start + 1} nằm ngoài dữ liệu phụ tải "
                f"({self.scenario.n_intervals} chu kỳ)",
                "dispatch.insufficient_demand",
            )
        if remaining < self.horizon:
            if not self.shrink_horizon:
                raise DataError(
                    f"Cửa sổ {window_start + 1}..{window_start + self.horizon} cần phụ tải tới chu kỳ "
                    f"{window_start + self.horizon}, dữ liệu chỉ có {self.scenario.n_intervals}",
                    "dispatch.insufficient_demand",
                )
            return remaining
        return self.horizon


def _var(kind: str, element_id: int, tau: int) -> str:
    return f"{kind}[{element_id},{tau}]"


def _carry_arrivals(problem: DispatchProblem, length: int) -> np.ndarray:
    arrivals = np.zeros((len(problem.case.buses), length))
    for tau in range(min(length, MAX_SHIFT_OFFSET)):
        arrivals[:, tau] = problem.carry_in.arrivals(tau + 1)
    return arrivals


def _add_network(lp: LinearProgram, problem: DispatchProblem, length: int) -> None:
    """Biến tổ máy, góc pha, trào lưu; cận (2), (3), (5) và định nghĩa trào lưu (4)"""
    case = problem.case
    slack = case.slack_bus
    for tau in range(length):
        for gen in case.committed_generators:
            lp.add_variable(_var("p", gen.id, tau), gen.p_min_mw, gen.p_max_mw)
        for bus in case.buses:
            if bus.id == slack:
                lp.add_variable(_var("theta", bus.id, tau), 0.0, 0.0)
            else:
                lp.add_variable(_var("theta", bus.id, tau), -math.inf, math.inf)
        for line in case.lines:
            flow = lp.add_variable(_var("flow", line.id, tau), -line.rating_mw, line.rating_mw)
            b = line.susceptance_mw_per_rad
            lp.add_constraint(
                _var("flowdef", line.id, tau),
                [(flow, 1.0),
                 (_var("theta", line.from_bus, tau), -b),
                 (_var("theta", line.to_bus, tau), b)],
                Relation.EQ, 0.0,
            )


def _network_balance_terms(problem: DispatchProblem, bus_id: int, tau: int) -> List[Tuple[str, float]]:
    case = problem.case
    terms = [(_var("p", gen.id, tau), 1.0) for gen in case.committed_generators if gen.bus == bus_id]
    for line in case.lines:
        if line.to_bus == bus_id:
            terms.append((_var("flow", line.id, tau), 1.0))
        elif line.from_bus == bus_id:
            terms.append((_var("flow", line.id, tau), -1.0))
    return terms


def _generation_cost_terms(problem: DispatchProblem, length: int) -> List[Tuple[str, float]]:
    return [(_var("p", gen.id, tau), gen.cost_per_mwh)
            for tau in range(length) for gen in problem.case.committed_generators]


def build_sced(problem: DispatchProblem, window_start: int) -> LinearProgram:
    """
    Dựng LP SCED cho cửa sổ bắt đầu tại `window_start` (chỉ số 0)

    Hàm mục tiêu Σ c_g P_g,t; cân bằng nút với vế phải d_n,t cộng tải dịch đến từ sổ cái.

    Args:
        problem: Bài toán ở chế độ sced
        window_start: Chu kỳ đầu của cửa sổ

    Returns:
        LinearProgram chưa giải
    """
    if problem.mode != DispatchMode.SCED:
        raise DataError("build_sced cần bài toán ở chế độ sced", "dispatch.mode_mismatch")
    length = problem.window_length(window_start)
    demand = problem.scenario.window(window_start, length)
    arrivals = _carry_arrivals(problem, length)

    lp = LinearProgram(f"sced_w{window_start + 1}")
    _add_network(lp, problem, length)
    for tau in range(length):
        for i, bus in enumerate(problem.case.buses):
            lp.add_constraint(_var("balance", bus.id, tau),
                              _network_balance_terms(problem, bus.id, tau),
                              Relation.EQ, demand[i, tau] + arrivals[i, tau])
    lp.set_objective(_generation_cost_terms(problem, length), Sense.MIN)
    return lp


def _shift_allowed(problem: DispatchProblem, tau: int, offset: int, length: int) -> bool:
    if problem.terminal_shifts == TerminalShifts.FREE:
        return True
    return tau + offset <= length - 1


def build_sced_dr(problem: DispatchProblem, window_start: int) -> LinearProgram:
    """
    Dựng LP SCED-DR: như SCED nhưng cân bằng nút có tải dịch đi / đến,
    trần tham gia dr_fraction · d_n,t và chi phí dịch tải trong hàm mục tiêu
    """
    if problem.mode != DispatchMode.SCED_DR:
        raise DataError("build_sced_dr cần bài toán ở chế độ sced_dr", "dispatch.mode_mismatch")
    length = problem.window_length(window_start)
    demand = problem.scenario.window(window_start, length)
    caps = problem.scenario.dr_fraction * demand
    arrivals = _carry_arrivals(problem, length)
    costs = problem.dr_costs.by_class()

    lp = LinearProgram(f"sced_dr_w{window_start + 1}")
    _add_network(lp, problem, length)
    objective = _generation_cost_terms(problem, length)

    for tau in range(length):
        for i, bus in enumerate(problem.case.buses):
            if caps[i, tau] <= 0.0:
                continue
            shifts = []
            for kind, offset in SHIFT_CLASSES:
                if _shift_allowed(problem, tau, offset, length):
                    name = lp.add_variable(_var(kind, bus.id, tau), 0.0, caps[i, tau])
                    shifts.append((name, 1.0))
                    objective.append((name, costs[kind]))
            if shifts:
                lp.add_constraint(_var("drcap", bus.id, tau), shifts, Relation.LE, caps[i, tau])

    for tau in range(length):
        for i, bus in enumerate(problem.case.buses):
            terms = _network_balance_terms(problem, bus.id, tau)
            for kind, offset in SHIFT_CLASSES:
                outgoing = _var(kind, bus.id, tau)
                if lp.has_variable(outgoing):
                    terms.append((outgoing, 1.0))
                incoming = _var(kind, bus.id, tau - offset)
                if tau - offset >= 0 and lp.has_variable(incoming):
                    terms.append((incoming, -1.0))
            lp.add_constraint(_var("balance", bus.id, tau), terms, Relation.EQ,
                              demand[i, tau] + arrivals[i, tau])

    lp.set_objective(objective, Sense.MIN)
    return lp


@dataclass(frozen=True, eq=False)
class DispatchSolution:
    """
    Nghiệm điều độ của một cửa sổ (hoặc của riêng chu kỳ được thực thi)

    Ma trận theo (phần tử × chu kỳ của cửa sổ); dr15/dr30/dr45 bằng 0 ở chế độ sced.
    """

    mode: DispatchMode
    window_start: int
    generator_ids: Tuple[int, ...]
    bus_ids: Tuple[int, ...]
    line_ids: Tuple[int, ...]
    p_gt: np.ndarray
    theta_nt: np.ndarray
    flow_kt: np.ndarray
    dr15: np.ndarray
    dr30: np.ndarray
    dr45: np.ndarray
    demand_nt: np.ndarray
    carry_in: CarryOverLedger
    dr_fraction: float
    interval_cost_usd: np.ndarray
    objective_usd: float
    lp_iterations: int = 0

    @property
    def horizon(self) -> int:
        return int(self.demand_nt.shape[1])

    @property
    def dr_total(self) -> np.ndarray:
        return self.dr15 + self.dr30 + self.dr45

    @property
    def dr_total_first(self) -> np.ndarray:
        """Tổng tải dự kiến dịch đi tại chu kỳ đầu, theo nút"""
        return self.dr_total[:, 0]

    @property
    def arrivals_nt(self) -> np.ndarray:
        """Tải dịch đến từng chu kỳ: từ sổ cái cộng các lần dịch trong cửa sổ"""
        length = self.horizon
        arrivals = np.zeros_like(self.demand_nt)
        for tau in range(min(length, MAX_SHIFT_OFFSET)):
            arrivals[:, tau] += self.carry_in.arrivals(tau + 1)
        for matrix, (_, offset) in zip((self.dr15, self.dr30, self.dr45), SHIFT_CLASSES):
            if length > offset:
                arrivals[:, offset:] += matrix[:, :length - offset]
        return arrivals

    @property
    def net_demand_nt(self) -> np.ndarray:
        """Tải thực phục vụ: d − dịch đi + dịch đến"""
        return self.demand_nt - self.dr_total + self.arrivals_nt

    def line_position(self, line_id: int) -> int:
        return self.line_ids.index(line_id)

    def bus_position(self, bus_id: int) -> int:
        return self.bus_ids.index(bus_id)

    def first_interval(self) -> "DispatchSolution":
        """Phần nghiệm của chu kỳ đầu, là phần duy nhất được thực thi"""
        first = slice(0, 1)
        return replace(
            self,
            p_gt=self.p_gt[:, first].copy(),
            theta_nt=self.theta_nt[:, first].copy(),
            flow_kt=self.flow_kt[:, first].copy(),
            dr15=self.dr15[:, first].copy(),
            dr30=self.dr30[:, first].copy(),
            dr45=self.dr45[:, first].copy(),
            demand_nt=self.demand_nt[:, first].copy(),
            interval_cost_usd=self.interval_cost_usd[first].copy(),
            objective_usd=float(self.interval_cost_usd[0]),
        )


def _diagnose(problem: DispatchProblem, window_start: int, length: int) -> Tuple[str, str]:
    demand = problem.scenario.window(window_start, length) + _carry_arrivals(problem, length)
    capacity = problem.case.committed_capacity_mw()
    minimum = float(sum(gen.p_min_mw for gen in problem.case.committed_generators))
    totals = demand.sum(axis=0)
    for tau, total in enumerate(totals):
        interval = window_start + tau + 1
        if total > capacity + 1e-6:
            if problem.mode == DispatchMode.SCED_DR:
                # DR chỉ dịch được tối đa dr_fraction của tải chu kỳ
                reducible = problem.scenario.dr_fraction * problem.scenario.window(window_start, length)[:, tau].sum()
                if total - reducible <= capacity + 1e-6:
                    continue
            return ("dispatch.load_shed_impossible",
                    f"phụ tải {total:.1f} MW ở chu kỳ {interval} vượt công suất vận hành {capacity:.1f} MW, "
                    f"không thể sa thải phụ tải")
        if total < minimum - 1e-6:
            return ("dispatch.minimum_generation",
                    f"phụ tải {total:.1f} MW ở chu kỳ {interval} thấp hơn tổng p_min {minimum:.1f} MW")
    return ("dispatch.network_limits",
            "giới hạn nhiệt của đường dây không cho phép phân bố công suất khả thi")


def _matrix(values: Dict[str, float], kind: str, ids: Sequence[int], length: int) -> np.ndarray:
    out = np.zeros((len(ids), length))
    for row, element_id in enumerate(ids):
        for tau in range(length):
            out[row, tau] = values.get(_var(kind, element_id, tau), 0.0)
    return out


def solve_window(problem: DispatchProblem, window_start: int, dump_lp: Optional[str] = None) -> DispatchSolution:
    """
    Dựng và giải một cửa sổ theo chế độ của bài toán

    Args:
        problem: Bài toán điều độ
        window_start: Chu kỳ đầu của cửa sổ (chỉ số 0)
        dump_lp: Nếu có, ghi mô hình ra file MPS tại đường dẫn này

    Returns:
        DispatchSolution của cả cửa sổ

    Raises:
        DispatchInfeasibleError: Cửa sổ không khả thi
    """
    length = problem.window_length(window_start)
    if problem.mode == DispatchMode.SCED:
        lp = build_sced(problem, window_start)
    else:
        lp = build_sced_dr(problem, window_start)
    if dump_lp:
        with open(dump_lp, 'w', encoding='utf-8') as f:
            f.write(lp.to_mps())

    result = lp_core.solve(lp)
    if result.status != LpStatus.OPTIMAL:
        code, diagnostic = _diagnose(problem, window_start, length)
        raise DispatchInfeasibleError(f"LP {result.status.value}", window_start + 1, diagnostic, code,
                                      problem.scenario.label)

    case = problem.case
    gen_ids = tuple(gen.id for gen in case.committed_generators)
    line_ids = tuple(line.id for line in case.lines)
    values = result.values
    p_gt = _matrix(values, "p", gen_ids, length)
    shifts = {kind: _matrix(values, kind, case.bus_ids, length) for kind, _ in SHIFT_CLASSES}

    gen_costs = np.array([gen.cost_per_mwh for gen in case.committed_generators])
    dr_costs = problem.dr_costs.by_class()
    interval_cost = gen_costs @ p_gt
    for kind, _ in SHIFT_CLASSES:
        interval_cost = interval_cost + dr_costs[kind] * shifts[kind].sum(axis=0)

    return DispatchSolution(
        mode=problem.mode,
        window_start=window_start,
        generator_ids=gen_ids,
        bus_ids=case.bus_ids,
        line_ids=line_ids,
        p_gt=p_gt,
        theta_nt=_matrix(values, "theta", case.bus_ids, length),
        flow_kt=_matrix(values, "flow", line_ids, length),
        dr15=shifts["dr15"],
        dr30=shifts["dr30"],
        dr45=shifts["dr45"],
        demand_nt=np.array(problem.scenario.window(window_start, length)),
        carry_in=problem.carry_in,
        dr_fraction=problem.scenario.dr_fraction,
        interval_cost_usd=interval_cost,
        objective_usd=float(result.objective_value),
        lp_iterations=result.iterations,
    )


@dataclass(frozen=True, eq=False)
class RollResult:
    """Kết quả chạy cửa sổ trượt"""

    mode: DispatchMode
    implemented: Tuple[DispatchSolution, ...]
    windows: Tuple[DispatchSolution, ...]
    ledger: CarryOverLedger
    initial_ledger: CarryOverLedger

    def total_cost_usd(self) -> float:
        return float(sum(sol.objective_usd for sol in self.implemented))

    def net_demand_series(self) -> np.ndarray:
        """Tổng tải phục vụ của hệ thống tại từng chu kỳ đã thực thi"""
        return np.array([extract_net_demand(sol)[0] for sol in self.implemented])

    def forecast_series(self) -> np.ndarray:
        return np.array([sol.demand_nt[:, 0].sum() for sol in self.implemented])


def roll(problem: DispatchProblem, n_windows: int) -> RollResult:
    """
    Giao thức cửa sổ trượt: mỗi cửa sổ giải toàn bộ, chỉ thực thi chu kỳ đầu,
    ghi tải dịch đi của chu kỳ đó vào sổ cái rồi trượt sang chu kỳ kế tiếp

    Args:
        problem: Bài toán (carry_in là sổ cái ban đầu)
        n_windows: Số cửa sổ cần chạy

    Returns:
        RollResult gồm các chu kỳ đã thực thi và sổ cái cuối

    Raises:
        DispatchInfeasibleError: Dừng tại cửa sổ không khả thi
    """
    if n_windows < 1:
        raise DataError(f"n_windows={n_windows} phải >= 1", "dispatch.windows")
    ledger = problem.carry_in
    implemented: List[DispatchSolution] = []
    windows: List[DispatchSolution] = []

    for start in range(n_windows):
        window_problem = replace(problem, carry_in=ledger)
        solution = solve_window(window_problem, start)
        first = solution.first_interval()
        windows.append(solution)
        implemented.append(first)
        ledger = ledger.advance(first.dr15[:, 0], first.dr30[:, 0], first.dr45[:, 0])
        logger.info("%s cửa sổ %d: chi phí chu kỳ đầu %.2f $, dịch tải %.2f MW, sổ cái %.2f MW",
                    problem.mode.value, start + 1, first.objective_usd,
                    float(first.dr_total_first.sum()), ledger.total_mw())

    return RollResult(problem.mode, tuple(implemented), tuple(windows), ledger, problem.carry_in)


def extract_net_demand(sol: DispatchSolution) -> np.ndarray:
    """
    Chuỗi tải ròng phục vụ của hệ thống theo chu kỳ: netDmnd_t = Σ_n net_demand[n, t]
    """
    return sol.net_demand_nt.sum(axis=0)


def solutions_to_frame(solutions: Sequence[DispatchSolution], case: GridCase) -> pd.DataFrame:
    """
    Bảng CSV kết quả điều độ: một dòng cho mỗi (cửa sổ, chu kỳ, phần tử)

    entity_kind: gen | line | bus-dr | system; ô không áp dụng để trống.
    """
    ratings = {line.id: line.rating_mw for line in case.lines}
    costs = {gen.id: gen.cost_per_mwh for gen in case.generators}
    rows = []
    for sol in solutions:
        window = sol.window_start + 1
        net = sol.net_demand_nt
        for tau in range(sol.horizon):
            interval = sol.window_start + tau + 1
            base = {"window": window, "interval": interval}
            for g, gen_id in enumerate(sol.generator_ids):
                rows.append({**base, "entity_kind": "gen", "entity_id": gen_id,
                             "p_mw": sol.p_gt[g, tau], "cost_usd": costs[gen_id] * sol.p_gt[g, tau]})
            for k, line_id in enumerate(sol.line_ids):
                flow = sol.flow_kt[k, tau]
                rows.append({**base, "entity_kind": "line", "entity_id": line_id,
                             "flow_mw": flow, "loading_rate": abs(flow) / ratings[line_id]})
            for n, bus_id in enumerate(sol.bus_ids):
                rows.append({**base, "entity_kind": "bus-dr", "entity_id": bus_id,
                             "theta_rad": sol.theta_nt[n, tau], "dr15_mw": sol.dr15[n, tau],
                             "dr30_mw": sol.dr30[n, tau], "dr45_mw": sol.dr45[n, tau],
                             "net_demand_mw": net[n, tau]})
            rows.append({**base, "entity_kind": "system", "entity_id": 0,
                         "p_mw": sol.p_gt[:, tau].sum(),
                         "dr15_mw": sol.dr15[:, tau].sum(), "dr30_mw": sol.dr30[:, tau].sum(),
                         "dr45_mw": sol.dr45[:, tau].sum(), "net_demand_mw": net[:, tau].sum(),
                         "cost_usd": sol.interval_cost_usd[tau]})
    return pd.DataFrame(rows, columns=CSV_COLUMNS)
