"""
Module mô phỏng tấn công FSMI (chèn tín hiệu DR giả và số đo phụ tải giả)
Chức năng: dựng LP tối đa hóa trào lưu vật lý của một đường dây mục tiêu
từ nghiệm chu kỳ đầu của SCED-DR, ở hai chế độ limited / unlimited
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

import lp_core
from dispatch import DispatchMode, DispatchSolution
from grid_model import GridCase, compute_dc_flows
from lp_core import LinearProgram, LpStatus, OracleLimitError, Relation, Sense, SolverError
from utils import DataError, InfeasibleError

logger = logging.getLogger(__name__)

# Sai số cho phép khi so mức dùng ngân sách với s0 / q0
BUDGET_TOL = 1e-6

ZERO_FLOW_TOL = 1e-6
# Số phần tử tự do tối đa cho mỗi ngân sách trong dạng trị tuyệt đối trực tiếp (2^m lát cắt)
DIRECT_MAX_ENTRIES = 10

ATTACK_CSV_COLUMNS = [
    "entity_kind", "entity_id", "pre_flow_mw", "attacked_flow_mw", "loading_rate_pre",
    "loading_rate_post", "scheduled_dr_mw", "false_dr_mw", "dr_deviation_mw",
    "angle_deviation_rad", "false_load_mw", "masked_load_mw", "objective_flow_mw",
    "overload_mw", "angle_budget_used", "dr_budget_used",
]


class AttackMode(str, Enum):
    LIMITED = "limited"
    UNLIMITED = "unlimited"

    @classmethod
    def parse(cls, text: str) -> "AttackMode":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise AttackSpecError(f"Chế độ tấn công '{text}' không hợp lệ (limited | unlimited)",
                                  "attack.bad_mode")


class AttackSpecError(DataError):
    default_code = "attack.bad_spec"


class ZeroFlowTargetError(AttackSpecError):
    """Đường dây mục tiêu không mang trào lưu, sgn(P_l) không xác định"""

    default_code = "attack.zero_flow_target"

    def __init__(self, line_id: int, flow_mw: float):
        super().__init__(f"Đường dây {line_id} có trào lưu trước tấn công {flow_mw:.3g} MW, "
                         f"không thể chọn làm mục tiêu")
        self.line_id = line_id


class AttackInfeasibleError(InfeasibleError):
    default_code = "attack.infeasible"


@dataclass(frozen=True)
class AttackSpec:
    """
    Tham số tấn công

    Args:
        target_line: Id đường dây mục tiêu l
        alpha: Hệ số lệch tín hiệu DR α ∈ [0, 1] (chỉ dùng ở chế độ limited)
        s0: Ngân sách l1 độ lệch góc pha (rad)
        q0: Ngân sách l1 độ lệch DR (MW)
        mode: limited | unlimited
    """

    target_line: int
    alpha: float = 0.3
    s0: float = 10.0
    q0: float = 100.0
    mode: AttackMode = AttackMode.LIMITED

    def __post_init__(self):
        if not isinstance(self.mode, AttackMode):
            object.__setattr__(self, "mode", AttackMode.parse(self.mode))
        if not 0.0 <= self.alpha <= 1.0:
            raise AttackSpecError(f"alpha={self.alpha} phải nằm trong [0, 1]", "attack.alpha_range")
        if self.s0 < 0.0:
            raise AttackSpecError(f"s0={self.s0} phải >= 0", "attack.negative_budget")
        if self.q0 < 0.0:
            raise AttackSpecError(f"q0={self.q0} phải >= 0", "attack.negative_budget")

    def validate(self, case: GridCase) -> None:
        """Kiểm tra đường dây mục tiêu có trong lưới (UnknownElementError nếu không)"""
        case.line(self.target_line)


@dataclass(frozen=True, eq=False)
class AttackInput:
    """
    Các đại lượng cố định lấy từ chu kỳ đầu của nghiệm SCED-DR

    Mảng theo thứ tự bus_ids / generator_ids / line_ids của case.
    """

    bus_ids: Tuple[int, ...]
    line_ids: Tuple[int, ...]
    generator_ids: Tuple[int, ...]
    fixed_generation: np.ndarray
    fixed_angles: np.ndarray
    scheduled_dr15: np.ndarray
    scheduled_dr30: np.ndarray
    scheduled_dr45: np.ndarray
    demand_first: np.ndarray
    arrivals_first: np.ndarray
    dr_max: np.ndarray
    pre_attack_flows: np.ndarray

    @property
    def scheduled_dr(self) -> np.ndarray:
        """DR_{n,1}: tổng tải dự kiến dịch đi tại chu kỳ đầu"""
        return self.scheduled_dr15 + self.scheduled_dr30 + self.scheduled_dr45

    @property
    def effective_demand(self) -> np.ndarray:
        """Phụ tải cố định của chu kỳ đầu, gồm cả tải dịch đến từ sổ cái"""
        return self.demand_first + self.arrivals_first

    def nodal_generation(self, case: GridCase) -> np.ndarray:
        gen_bus = {gen.id: gen.bus for gen in case.generators}
        out = np.zeros(len(self.bus_ids))
        for gen_id, p in zip(self.generator_ids, self.fixed_generation):
            out[case.bus_position(gen_bus[gen_id])] += p
        return out

    @classmethod
    def from_solution(cls, sol: DispatchSolution) -> "AttackInput":
        if sol.mode != DispatchMode.SCED_DR:
            raise AttackSpecError("Tấn công FSMI cần nghiệm SCED-DR", "attack.mode_mismatch")
        demand = np.array(sol.demand_nt[:, 0])
        return cls(
            bus_ids=sol.bus_ids,
            line_ids=sol.line_ids,
            generator_ids=sol.generator_ids,
            fixed_generation=np.array(sol.p_gt[:, 0]),
            fixed_angles=np.array(sol.theta_nt[:, 0]),
            scheduled_dr15=np.array(sol.dr15[:, 0]),
            scheduled_dr30=np.array(sol.dr30[:, 0]),
            scheduled_dr45=np.array(sol.dr45[:, 0]),
            demand_first=demand,
            arrivals_first=sol.carry_in.arrivals(1),
            dr_max=sol.dr_fraction * demand,
            pre_attack_flows=np.array(sol.flow_kt[:, 0]),
        )


def _name(kind: str, element_id: int) -> str:
    return f"{kind}[{element_id}]"


def _target_sign(inp: AttackInput, case: GridCase, spec: AttackSpec) -> float:
    spec.validate(case)
    flow = float(inp.pre_attack_flows[inp.line_ids.index(spec.target_line)])
    if abs(flow) <= ZERO_FLOW_TOL:
        raise ZeroFlowTargetError(spec.target_line, flow)
    return 1.0 if flow > 0 else -1.0


def false_dr_bounds(inp: AttackInput, spec: AttackSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cận của tín hiệu DR giả theo nút

    limited: [(1−α)DR, (1+α)DR], nút không có DR bị khóa ở 0;
    unlimited: [0, DR^Max]. Cả hai chế độ đều không vượt phụ tải của nút.
    """
    dr = inp.scheduled_dr
    guard = inp.effective_demand
    if spec.mode == AttackMode.LIMITED:
        lower = (1.0 - spec.alpha) * dr
        upper = np.minimum((1.0 + spec.alpha) * dr, guard)
    else:
        lower = np.zeros_like(dr)
        upper = np.minimum(inp.dr_max, guard)
    # Điểm theo lịch luôn khả thi
    upper = np.maximum(upper, dr)
    lower = np.minimum(lower, dr)
    return lower, upper


def build_fsmi(inp: AttackInput, spec: AttackSpec, case: GridCase) -> LinearProgram:
    """
    Dựng LP tấn công FSMI với ngân sách l1 tuyến tính hóa bằng biến phụ s_n, q_n

    Biến: dr_f (tín hiệu DR giả), theta_a, flow_a (góc / trào lưu sau tấn công),
    c (độ lệch góc), ddr (độ lệch DR), s, q.
    Phát điện và phụ tải chu kỳ đầu là hằng số.

    Args:
        inp: Đại lượng cố định từ nghiệm SCED-DR
        spec: Tham số tấn công
        case: Lưới điện

    Returns:
        LinearProgram hướng max

    Raises:
        ZeroFlowTargetError: Đường dây mục tiêu không có trào lưu
        UnknownElementError: Đường dây mục tiêu không tồn tại
    """
    sign = _target_sign(inp, case, spec)
    lower, upper = false_dr_bounds(inp, spec)
    generation = inp.nodal_generation(case)
    demand = inp.effective_demand
    slack = case.slack_bus

    lp = LinearProgram(f"fsmi_{spec.mode.value}_l{spec.target_line}")
    for i, bus_id in enumerate(inp.bus_ids):
        lp.add_variable(_name("dr_f", bus_id), lower[i], upper[i])
        if bus_id == slack:
            lp.add_variable(_name("theta_a", bus_id), 0.0, 0.0)
        else:
            lp.add_variable(_name("theta_a", bus_id), -math.inf, math.inf)
        lp.add_variable(_name("c", bus_id), -math.inf, math.inf)
        lp.add_variable(_name("ddr", bus_id), -math.inf, math.inf)
        lp.add_variable(_name("s", bus_id), 0.0, math.inf)
        lp.add_variable(_name("q", bus_id), 0.0, math.inf)
    for line in case.lines:
        lp.add_variable(_name("flow_a", line.id), -math.inf, math.inf)

    for line in case.lines:
        b = line.susceptance_mw_per_rad
        lp.add_constraint(_name("aflow", line.id),
                          [(_name("flow_a", line.id), 1.0),
                           (_name("theta_a", line.from_bus), -b),
                           (_name("theta_a", line.to_bus), b)],
                          Relation.EQ, 0.0)

    for i, bus_id in enumerate(inp.bus_ids):
        terms = [(_name("dr_f", bus_id), 1.0)]
        for line in case.lines:
            if line.to_bus == bus_id:
                terms.append((_name("flow_a", line.id), 1.0))
            elif line.from_bus == bus_id:
                terms.append((_name("flow_a", line.id), -1.0))
        lp.add_constraint(_name("abal", bus_id), terms, Relation.EQ, demand[i] - generation[i])
        lp.add_constraint(_name("angdev", bus_id),
                          [(_name("c", bus_id), 1.0), (_name("theta_a", bus_id), 1.0)],
                          Relation.EQ, inp.fixed_angles[i])
        lp.add_constraint(_name("drdev", bus_id),
                          [(_name("ddr", bus_id), 1.0), (_name("dr_f", bus_id), 1.0)],
                          Relation.EQ, inp.scheduled_dr[i])
        for dev, aux in (("c", "s"), ("ddr", "q")):
            lp.add_constraint(_name(f"{aux}pos", bus_id),
                              [(_name(dev, bus_id), 1.0), (_name(aux, bus_id), -1.0)], Relation.LE, 0.0)
            lp.add_constraint(_name(f"{aux}neg", bus_id),
                              [(_name(dev, bus_id), -1.0), (_name(aux, bus_id), -1.0)], Relation.LE, 0.0)

    lp.add_constraint("angle_budget", [(_name("s", bus_id), 1.0) for bus_id in inp.bus_ids],
                      Relation.LE, spec.s0)
    lp.add_constraint("dr_budget", [(_name("q", bus_id), 1.0) for bus_id in inp.bus_ids],
                      Relation.LE, spec.q0)
    lp.set_objective([(_name("flow_a", spec.target_line), sign)], Sense.MAX)
    return lp


def _sign_cuts(lp: LinearProgram, prefix: str, kind: str, entries: List[Tuple[int, float]],
               budget: float) -> None:
    """Σ |ref_n − x_n| ≤ budget viết thành 2^m bất đẳng thức tuyến tính"""
    for k, signs in enumerate(itertools.product((1.0, -1.0), repeat=len(entries))):
        terms = [(_name(kind, element_id), -sigma) for (element_id, _), sigma in zip(entries, signs)]
        rhs = budget - sum(sigma * ref for (_, ref), sigma in zip(entries, signs))
        lp.add_constraint(f"{prefix}[{k}]", terms, Relation.LE, rhs)


def build_fsmi_direct(inp: AttackInput, spec: AttackSpec, case: GridCase) -> LinearProgram:
    """
    Dạng tương đương không có biến phụ: trào lưu và độ lệch được thế vào,
    ngân sách trị tuyệt đối viết bằng mọi tổ hợp dấu trên các phần tử không bị khóa.
    Dùng làm đối chứng cho build_fsmi trên lưới nhỏ.

    Raises:
        OracleLimitError: Quá DIRECT_MAX_ENTRIES phần tử tự do trong một ngân sách
    """
    sign = _target_sign(inp, case, spec)
    lower, upper = false_dr_bounds(inp, spec)
    generation = inp.nodal_generation(case)
    demand = inp.effective_demand
    dr = inp.scheduled_dr
    slack = case.slack_bus

    lp = LinearProgram(f"fsmi_direct_{spec.mode.value}_l{spec.target_line}")
    fixed_dr: Dict[int, float] = {}
    free_dr: List[Tuple[int, float]] = []
    angle_entries: List[Tuple[int, float]] = []
    angle_used = 0.0
    for i, bus_id in enumerate(inp.bus_ids):
        if upper[i] - lower[i] <= 1e-12:
            fixed_dr[bus_id] = float(lower[i])
        else:
            lp.add_variable(_name("dr_f", bus_id), lower[i], upper[i])
            free_dr.append((bus_id, float(dr[i])))
        if bus_id == slack:
            angle_used += abs(float(inp.fixed_angles[i]))
        else:
            lp.add_variable(_name("theta_a", bus_id), -math.inf, math.inf)
            angle_entries.append((bus_id, float(inp.fixed_angles[i])))

    for entries, what in ((angle_entries, "góc pha"), (free_dr, "DR")):
        if len(entries) > DIRECT_MAX_ENTRIES:
            raise OracleLimitError(
                f"Ngân sách {what} có {len(entries)} phần tử tự do, tối đa {DIRECT_MAX_ENTRIES}"
            )

    def angle_terms(bus_id: int, coef: float) -> List[Tuple[str, float]]:
        return [] if bus_id == slack else [(_name("theta_a", bus_id), coef)]

    for i, bus_id in enumerate(inp.bus_ids):
        coefs: Dict[str, float] = {}
        for line in case.lines:
            if bus_id not in (line.from_bus, line.to_bus):
                continue
            direction = 1.0 if line.to_bus == bus_id else -1.0
            b = line.susceptance_mw_per_rad
            for name, coef in angle_terms(line.from_bus, direction * b) + angle_terms(line.to_bus, -direction * b):
                coefs[name] = coefs.get(name, 0.0) + coef
        rhs = demand[i] - generation[i]
        if bus_id in fixed_dr:
            rhs -= fixed_dr[bus_id]
        else:
            coefs[_name("dr_f", bus_id)] = 1.0
        terms = [(name, coef) for name, coef in coefs.items() if coef != 0.0]
        lp.add_constraint(_name("abal", bus_id), terms, Relation.EQ, rhs)

    dr_used = sum(abs(dr[inp.bus_ids.index(bus_id)] - value) for bus_id, value in fixed_dr.items())
    if angle_entries:
        _sign_cuts(lp, "angle_budget", "theta_a", angle_entries, spec.s0 - angle_used)
    if free_dr:
        _sign_cuts(lp, "dr_budget", "dr_f", free_dr, spec.q0 - dr_used)

    target = case.line(spec.target_line)
    b = target.susceptance_mw_per_rad
    lp.set_objective(angle_terms(target.from_bus, sign * b) + angle_terms(target.to_bus, -sign * b),
                     Sense.MAX)
    return lp


@dataclass(frozen=True, eq=False)
class AttackResult:
    """
    Kết quả một lần tấn công

    Mảng theo bus_ids / line_ids; độ lệch là hiệu giá trị theo lịch trừ giá trị sau tấn công.
    """

    spec: AttackSpec
    bus_ids: Tuple[int, ...]
    line_ids: Tuple[int, ...]
    scheduled_dr: np.ndarray
    false_dr: np.ndarray
    attacked_flows: np.ndarray
    attacked_angles: np.ndarray
    dr_deviation: np.ndarray
    angle_deviation: np.ndarray
    pre_attack_flows: np.ndarray
    ratings: np.ndarray
    objective_flow_mw: float
    false_load_mw: np.ndarray
    masked_load_mw: np.ndarray
    lp_iterations: int = 0

    @property
    def target_position(self) -> int:
        return self.line_ids.index(self.spec.target_line)

    @property
    def target_rating_mw(self) -> float:
        return float(self.ratings[self.target_position])

    @property
    def pre_attack_flow_mw(self) -> float:
        return float(self.pre_attack_flows[self.target_position])

    @property
    def overload_mw(self) -> float:
        return max(0.0, abs(float(self.attacked_flows[self.target_position])) - self.target_rating_mw)

    @property
    def loading_rate_post(self) -> float:
        return abs(float(self.attacked_flows[self.target_position])) / self.target_rating_mw

    @property
    def loading_rate_pre(self) -> float:
        return abs(self.pre_attack_flow_mw) / self.target_rating_mw

    @property
    def angle_budget_used(self) -> float:
        return float(np.abs(self.angle_deviation).sum())

    @property
    def dr_budget_used(self) -> float:
        return float(np.abs(self.dr_deviation).sum())

    @property
    def flow_increase_mw(self) -> float:
        return self.objective_flow_mw - abs(self.pre_attack_flow_mw)


def run_attack(dispatch_sol: DispatchSolution, spec: AttackSpec, case: GridCase) -> AttackResult:
    """
    Chạy tấn công trên chu kỳ đầu của một nghiệm SCED-DR

    Args:
        dispatch_sol: Nghiệm SCED-DR (cửa sổ hoặc chu kỳ đã thực thi)
        spec: Tham số tấn công
        case: Lưới điện

    Returns:
        AttackResult; trào lưu sau tấn công được tính lại từ góc pha

    Raises:
        AttackInfeasibleError: LP không có nghiệm tối ưu
        SolverError: Nghiệm trả về vượt ngân sách s0 hoặc q0
    """
    inp = AttackInput.from_solution(dispatch_sol)
    lp = build_fsmi(inp, spec, case)
    result = lp_core.solve(lp)
    if result.status != LpStatus.OPTIMAL:
        # Điểm theo lịch luôn khả thi và ngân sách chặn góc pha
        raise AttackInfeasibleError(
            f"LP tấn công đường dây {spec.target_line} ({spec.mode.value}) trả về {result.status.value}"
        )

    false_dr = np.array([result[_name("dr_f", b)] for b in inp.bus_ids])
    angles = np.array([result[_name("theta_a", b)] for b in inp.bus_ids])
    flows = compute_dc_flows(case, dict(zip(inp.bus_ids, angles)))
    attacked_flows = np.array([flows[line_id] for line_id in inp.line_ids])
    served = inp.effective_demand

    attack = AttackResult(
        spec=spec,
        bus_ids=inp.bus_ids,
        line_ids=inp.line_ids,
        scheduled_dr=inp.scheduled_dr,
        false_dr=false_dr,
        attacked_flows=attacked_flows,
        attacked_angles=angles,
        dr_deviation=inp.scheduled_dr - false_dr,
        angle_deviation=inp.fixed_angles - angles,
        pre_attack_flows=inp.pre_attack_flows,
        ratings=case.ratings(),
        objective_flow_mw=float(result.objective_value),
        false_load_mw=served - false_dr,
        masked_load_mw=served - inp.scheduled_dr,
        lp_iterations=result.iterations,
    )
    _check_budgets(attack)
    logger.info("Tấn công %s đường dây %d: %.2f -> %.2f MW, quá tải %.2f MW",
                spec.mode.value, spec.target_line, abs(attack.pre_attack_flow_mw),
                attack.objective_flow_mw, attack.overload_mw)
    return attack


def _check_budgets(attack: AttackResult) -> None:
    spec = attack.spec
    for label, used, budget in (("s0", attack.angle_budget_used, spec.s0),
                                ("q0", attack.dr_budget_used, spec.q0)):
        if used > budget + BUDGET_TOL * max(1.0, budget):
            raise SolverError(
                f"Tấn công đường dây {spec.target_line}: dùng {used:.4f} vượt ngân sách {label}={budget}",
                "attack.budget_exceeded",
            )


def attack_result_frame(result: AttackResult, case: GridCase) -> pd.DataFrame:
    """Bảng CSV kết quả tấn công: dòng line, bus và một dòng summary"""
    rows = []
    for k, line_id in enumerate(result.line_ids):
        rating = result.ratings[k]
        rows.append({
            "entity_kind": "line", "entity_id": line_id,
            "pre_flow_mw": result.pre_attack_flows[k],
            "attacked_flow_mw": result.attacked_flows[k],
            "loading_rate_pre": abs(result.pre_attack_flows[k]) / rating,
            "loading_rate_post": abs(result.attacked_flows[k]) / rating,
        })
    for n, bus_id in enumerate(result.bus_ids):
        rows.append({
            "entity_kind": "bus", "entity_id": bus_id,
            "scheduled_dr_mw": result.scheduled_dr[n],
            "false_dr_mw": result.false_dr[n],
            "dr_deviation_mw": result.dr_deviation[n],
            "angle_deviation_rad": result.angle_deviation[n],
            "false_load_mw": result.false_load_mw[n],
            "masked_load_mw": result.masked_load_mw[n],
        })
    rows.append({
        "entity_kind": "summary", "entity_id": result.spec.target_line,
        "pre_flow_mw": result.pre_attack_flow_mw,
        "attacked_flow_mw": result.attacked_flows[result.target_position],
        "loading_rate_pre": result.loading_rate_pre,
        "loading_rate_post": result.loading_rate_post,
        "objective_flow_mw": result.objective_flow_mw,
        "overload_mw": result.overload_mw,
        "angle_budget_used": result.angle_budget_used,
        "dr_budget_used": result.dr_budget_used,
    })
    return pd.DataFrame(rows, columns=ATTACK_CSV_COLUMNS)


def top_loaded_lines(sol: DispatchSolution, case: GridCase, count: int = 2) -> List[int]:
    """Id các đường dây có tỷ lệ mang tải cao nhất ở chu kỳ đầu (bỏ đường dây không có trào lưu)"""
    ratings = case.ratings()
    loading = np.abs(sol.flow_kt[:, 0]) / ratings
    order = sorted(
        (k for k in range(len(sol.line_ids)) if abs(sol.flow_kt[k, 0]) > ZERO_FLOW_TOL),
        key=lambda k: (-loading[k], sol.line_ids[k]),
    )
    return [sol.line_ids[k] for k in order[:count]]
