"""
Module quy hoạch tuyến tính (LP) dùng chung cho dispatch và attack
Chức năng: mô hình LinearProgram, bộ giải simplex hiệu chỉnh có cận biến (hai pha),
oracle liệt kê đỉnh để kiểm tra chéo, xuất mô hình ra định dạng MPS cột cố định
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils import DataError, GridRaidError

logger = logging.getLogger(__name__)

# Dung sai cố định của bộ giải
FEASIBILITY_TOL = 1e-8
OPTIMALITY_TOL = 1e-6
PIVOT_TOL = 1e-10
PIVOT_REL_TOL = 1e-7
HARRIS_TOL = 1e-9
REDUCED_COST_TOL = 1e-9

# Số bước suy biến liên tiếp trước khi chuyển sang quy tắc Bland
STALL_LIMIT = 50
REFACTOR_EVERY = 50

# Sai số chấp nhận của B⁻¹·B so với I, và ngưỡng hạng khi vá cơ sở
BASIS_ACCURACY_TOL = 1e-6
RANK_TOL = 1e-7

ORACLE_MAX_VARIABLES = 8
ORACLE_MAX_CONSTRAINTS = 12


class Relation(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class MalformedModelError(DataError):
    default_code = "lp_core.malformed_model"


class OracleLimitError(DataError):
    default_code = "lp_core.oracle_limit"


class SolverError(GridRaidError, RuntimeError):
    """Bộ giải vượt giới hạn số vòng lặp, gặp cơ sở suy biến hoặc trả nghiệm vi phạm ràng buộc (exit code 2)"""

    exit_code = 2
    default_code = "lp_core.solver"


Terms = Union[Mapping[str, float], Iterable[Tuple[str, float]]]


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: Tuple[Tuple[str, float], ...]
    relation: Relation
    rhs: float


def _as_terms(terms: Terms) -> Tuple[Tuple[str, float], ...]:
    items = terms.items() if isinstance(terms, Mapping) else terms
    return tuple((str(name), float(coef)) for name, coef in items)


class LinearProgram:
    """
    Mô hình LP tổng quát: biến có cận, ràng buộc tuyến tính (<=, =, >=), hàm mục tiêu min/max

    Args:
        name: Tên mô hình (dùng trong bản xuất MPS)
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.sense = Sense.MIN
        self._variables: List[Variable] = []
        self._index: Dict[str, int] = {}
        self._constraints: List[Constraint] = []
        self._constraint_names: Dict[str, int] = {}
        self._objective: Tuple[Tuple[str, float], ...] = ()

    @property
    def variables(self) -> List[Variable]:
        return list(self._variables)

    @property
    def constraints(self) -> List[Constraint]:
        return list(self._constraints)

    @property
    def objective(self) -> Tuple[Tuple[str, float], ...]:
        return self._objective

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def has_constraint(self, name: str) -> bool:
        return name in self._constraint_names

    def index_of(self, name: str) -> int:
        return self._index[name]

    def variable(self, name: str) -> Variable:
        return self._variables[self._index[name]]

    def constraint(self, name: str) -> Constraint:
        return self._constraints[self._constraint_names[name]]

    def add_variable(self, name: str, lower: float = 0.0, upper: float = math.inf) -> str:
        """
        Khai báo một biến quyết định

        Args:
            name: Tên biến (duy nhất)
            lower: Cận dưới (có thể là -inf)
            upper: Cận trên (có thể là +inf)

        Returns:
            Tên biến, để dùng lại khi viết ràng buộc
        """
        if name in self._index:
            raise MalformedModelError(f"Biến '{name}' bị khai báo hai lần")
        self._index[name] = len(self._variables)
        self._variables.append(Variable(name, float(lower), float(upper)))
        return name

    def add_constraint(self, name: str, terms: Terms, relation: Union[Relation, str],
                       rhs: float) -> str:
        """
        Thêm ràng buộc Σ coef·x (relation) rhs

        Args:
            name: Tên ràng buộc (duy nhất)
            terms: Các cặp (tên biến, hệ số) hoặc dict
            relation: "<=", "=" hoặc ">="
            rhs: Vế phải
        """
        if name in self._constraint_names:
            raise MalformedModelError(f"Ràng buộc '{name}' bị khai báo hai lần")
        self._constraint_names[name] = len(self._constraints)
        self._constraints.append(Constraint(name, _as_terms(terms), Relation(relation), float(rhs)))
        return name

    def set_objective(self, terms: Terms, sense: Union[Sense, str] = Sense.MIN) -> None:
        self._objective = _as_terms(terms)
        self.sense = Sense(sense)

    def validate(self) -> None:
        """
        Kiểm tra mô hình trước khi giải

        Raises:
            MalformedModelError: Biến chưa khai báo, cận sai, hệ số không hữu hạn
        """
        for var in self._variables:
            if math.isnan(var.lower) or math.isnan(var.upper):
                raise MalformedModelError(f"Cận của biến '{var.name}' là NaN")
            if var.lower > var.upper or var.lower == math.inf or var.upper == -math.inf:
                raise MalformedModelError(
                    f"Biến '{var.name}' có cận dưới {var.lower} lớn hơn cận trên {var.upper}"
                )

        for con in self._constraints:
            if not math.isfinite(con.rhs):
                raise MalformedModelError(f"Vế phải của ràng buộc '{con.name}' không hữu hạn")
            self._check_terms(con.terms, f"ràng buộc '{con.name}'")

        self._check_terms(self._objective, "hàm mục tiêu")

    def _check_terms(self, terms, owner: str) -> None:
        for name, coef in terms:
            if name not in self._index:
                raise MalformedModelError(f"{owner} tham chiếu biến chưa khai báo '{name}'")
            if not math.isfinite(coef):
                raise MalformedModelError(f"{owner} có hệ số không hữu hạn cho biến '{name}'")

    def to_arrays(self) -> Dict[str, object]:
        """
        Chuyển mô hình sang dạng ma trận dày

        Returns:
            Dict với c (n,), A (m, n), relations (list), b (m,), lower (n,), upper (n,)
        """
        n = len(self._variables)
        m = len(self._constraints)
        c = np.zeros(n)
        for name, coef in self._objective:
            c[self._index[name]] += coef
        A = np.zeros((m, n))
        b = np.zeros(m)
        for i, con in enumerate(self._constraints):
            for name, coef in con.terms:
                A[i, self._index[name]] += coef
            b[i] = con.rhs
        return {
            "c": c,
            "A": A,
            "relations": [con.relation for con in self._constraints],
            "b": b,
            "lower": np.array([v.lower for v in self._variables], dtype=float),
            "upper": np.array([v.upper for v in self._variables], dtype=float),
        }

    def to_mps(self) -> str:
        """
        Xuất mô hình theo định dạng MPS cột cố định

        Tên hàng / cột được mã hóa 8 ký tự (R0000001, C0000001); phần chú thích `*`
        đầu file ánh xạ mã sang tên gốc trong mô hình.
        """
        row_codes = {con.name: f"R{i + 1:07d}" for i, con in enumerate(self._constraints)}
        col_codes = {var.name: f"C{j + 1:07d}" for j, var in enumerate(self._variables)}
        row_type = {Relation.LE: "L", Relation.EQ: "E", Relation.GE: "G"}

        lines = [f"NAME          {self.name[:8]}"]
        for con in self._constraints:
            lines.append(f"* {row_codes[con.name]} = {con.name}")
        for var in self._variables:
            lines.append(f"* {col_codes[var.name]} = {var.name}")
        if self.sense == Sense.MAX:
            lines.append("OBJSENSE")
            lines.append("    MAX")

        lines.append("ROWS")
        lines.append(" N  OBJ")
        for con in self._constraints:
            lines.append(f" {row_type[con.relation]:<2} {row_codes[con.name]}")

        # Gom hệ số theo cột
        column_entries: Dict[str, Dict[str, float]] = {var.name: {} for var in self._variables}
        for name, coef in self._objective:
            column_entries[name]["OBJ"] = column_entries[name].get("OBJ", 0.0) + coef
        for con in self._constraints:
            code = row_codes[con.name]
            for name, coef in con.terms:
                column_entries[name][code] = column_entries[name].get(code, 0.0) + coef

        lines.append("COLUMNS")
        for var in self._variables:
            for row, value in column_entries[var.name].items():
                if value != 0.0:
                    lines.append(_mps_field_line("", col_codes[var.name], row, value))

        lines.append("RHS")
        for con in self._constraints:
            if con.rhs != 0.0:
                lines.append(_mps_field_line("", "RHS", row_codes[con.name], con.rhs))

        bound_lines = []
        for var in self._variables:
            code = col_codes[var.name]
            lo, up = var.lower, var.upper
            if lo == up:
                bound_lines.append(_mps_field_line("FX", "BND", code, lo))
            elif lo == -math.inf and up == math.inf:
                bound_lines.append(f" FR BND       {code}")
            else:
                if lo == -math.inf:
                    bound_lines.append(f" MI BND       {code}")
                elif lo != 0.0:
                    bound_lines.append(_mps_field_line("LO", "BND", code, lo))
                if up != math.inf:
                    bound_lines.append(_mps_field_line("UP", "BND", code, up))
        if bound_lines:
            lines.append("BOUNDS")
            lines.extend(bound_lines)

        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


def _mps_number(value: float) -> str:
    for digits in (12, 10, 8, 6):
        text = f"{value:.{digits}g}"
        if len(text) <= 12:
            return text
    return f"{value:.5e}"[:12]


def _mps_field_line(kind: str, name: str, row: str, value: float) -> str:
    # Cột 2-3 loại, 5-12 tên, 15-22 hàng, 25-36 giá trị
    return f" {kind:<2} {name:<8}  {row:<8}  {_mps_number(value):>12}"


@dataclass(frozen=True)
class LpSolution:
    """
    Kết quả giải LP

    Khi status khác optimal: values rỗng, objective_value = NaN.
    """

    status: LpStatus
    values: Dict[str, float] = field(default_factory=dict)
    objective_value: float = math.nan
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def value(self, name: str, default: float = 0.0) -> float:
        return self.values.get(name, default)

    def constraint_residuals(self, lp: "LinearProgram") -> Dict[str, float]:
        """Vế trái trừ vế phải của từng ràng buộc tại nghiệm"""
        residuals = {}
        for con in lp.constraints:
            lhs = sum(coef * self.values[name] for name, coef in con.terms)
            residuals[con.name] = lhs - con.rhs
        return residuals


def max_violation(lp: LinearProgram, values: Mapping[str, float]) -> float:
    """
    Độ vi phạm lớn nhất của ràng buộc và cận biến tại một điểm

    Args:
        lp: Mô hình
        values: Giá trị biến

    Returns:
        max(0, vi phạm) trên tất cả ràng buộc và cận
    """
    worst = 0.0
    for var in lp.variables:
        x = values[var.name]
        worst = max(worst, var.lower - x, x - var.upper)
    for con in lp.constraints:
        lhs = sum(coef * values[name] for name, coef in con.terms)
        if con.relation == Relation.LE:
            worst = max(worst, lhs - con.rhs)
        elif con.relation == Relation.GE:
            worst = max(worst, con.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - con.rhs))
    return worst


class _BoundedSimplex:
    """
    Simplex hiệu chỉnh cho bài toán min c·x, A x = b, lower <= x <= upper

    Biến phi cơ sở nằm tại một cận (hoặc bằng 0 nếu tự do); nghịch đảo cơ sở được
    cập nhật bằng phép quay và tính lại định kỳ. Phép thử tỷ số hai lượt kiểu Harris
    ưu tiên phần tử quay lớn; cơ sở suy biến được vá bằng các cột trong `fallback`.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                 x: np.ndarray, basis: np.ndarray, max_iterations: int, fallback: np.ndarray):
        self.A = A
        self.b = b
        self.lower = lower
        self.upper = upper
        self.x = x
        self.basis = basis
        self.max_iterations = max_iterations
        self.fallback = fallback
        self.iterations = 0
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.refactor()

    def refactor(self) -> None:
        m = self.A.shape[0]
        if m == 0:
            self.B_inv = np.zeros((0, 0))
            return
        B_inv = _accurate_inverse(self.A[:, self.basis])
        if B_inv is None:
            self._repair_basis()
            B_inv = _accurate_inverse(self.A[:, self.basis])
            if B_inv is None:
                raise SolverError("Ma trận cơ sở vẫn suy biến sau khi vá bằng cột đơn vị")
        self.B_inv = B_inv

        B = self.A[:, self.basis]
        x_nonbasic = self.x.copy()
        x_nonbasic[self.basis] = 0.0
        rhs = self.b - self.A @ x_nonbasic
        xb = np.linalg.solve(B, rhs)
        # Một bước tinh chỉnh lặp
        xb += np.linalg.solve(B, rhs - B @ xb)
        self.x[self.basis] = xb

    def _repair_basis(self) -> None:
        """Giữ các cột cơ sở độc lập tuyến tính, bù phần còn thiếu bằng cột trong fallback"""
        m = self.A.shape[0]
        candidates = [int(j) for j in self.basis]
        candidates += [int(j) for j in self.fallback if not self.is_basic[j]]
        chosen = _independent_columns(self.A, candidates, m)
        if len(chosen) < m:
            raise SolverError(f"Không dựng lại được cơ sở: chỉ có {len(chosen)}/{m} cột độc lập")
        dropped = sorted(set(int(j) for j in self.basis) - set(chosen))
        logger.warning("simplex: cơ sở suy biến, thay %d cột bằng cột đơn vị", len(dropped))
        self.is_basic[:] = False
        self.basis = np.array(chosen, dtype=int)
        self.is_basic[self.basis] = True

    def run(self, cost: np.ndarray) -> LpStatus:
        m = self.A.shape[0]
        tol = REDUCED_COST_TOL * max(1.0, float(np.abs(cost).max(initial=0.0)))
        stall = 0
        bland = False
        since_refactor = 0

        while True:
            if self.iterations >= self.max_iterations:
                raise SolverError(f"Vượt quá {self.max_iterations} vòng lặp simplex")
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0

            y = cost[self.basis] @ self.B_inv
            reduced = cost - y @ self.A
            x = self.x
            can_up = (x < self.upper - FEASIBILITY_TOL) & ~self.is_basic
            can_down = (x > self.lower + FEASIBILITY_TOL) & ~self.is_basic
            up = can_up & (reduced < -tol)
            down = can_down & (reduced > tol)
            eligible = up | down
            if not eligible.any():
                return LpStatus.OPTIMAL

            if bland:
                j = int(np.flatnonzero(eligible)[0])
            else:
                j = int(np.argmax(np.where(eligible, np.abs(reduced), -1.0)))
            direction = 1.0 if up[j] else -1.0

            w = self.B_inv @ self.A[:, j]
            rate = -direction * w
            xb = x[self.basis]
            lb = self.lower[self.basis]
            ub = self.upper[self.basis]

            # Phần tử quay quá nhỏ so với cột được coi là 0
            pivot_tol = max(PIVOT_TOL, PIVOT_REL_TOL * float(np.abs(w).max(initial=0.0)))
            dec = rate < -pivot_tol
            inc = rate > pivot_tol

            # Lượt 1: bước lớn nhất khi nới mỗi cận thêm HARRIS_TOL
            relaxed = np.full(m, np.inf)
            relaxed[dec] = (xb[dec] - lb[dec] + HARRIS_TOL) / -rate[dec]
            relaxed[inc] = (ub[inc] - xb[inc] + HARRIS_TOL) / rate[inc]
            t_max = float(relaxed.min()) if m else math.inf
            self_limit = float(self.upper[j] - x[j] if direction > 0 else x[j] - self.lower[j])
            if math.isinf(t_max) and math.isinf(self_limit):
                return LpStatus.UNBOUNDED

            if self_limit <= t_max:
                # Biến vào chạy hết tới cận của nó, cơ sở giữ nguyên
                step = self_limit
                x[self.basis] = xb + step * rate
                x[j] = self.upper[j] if direction > 0 else self.lower[j]
            else:
                # Lượt 2: trong các hàng chặn trước t_max, chọn phần tử quay lớn nhất
                limits = np.full(m, np.inf)
                limits[dec] = (xb[dec] - lb[dec]) / -rate[dec]
                limits[inc] = (ub[inc] - xb[inc]) / rate[inc]
                ties = np.flatnonzero(limits <= t_max)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(rate[ties]))])
                step = max(float(limits[r]), 0.0)
                leaving = int(self.basis[r])
                x[self.basis] = xb + step * rate
                x[j] += direction * step
                x[leaving] = lb[r] if rate[r] < 0 else ub[r]

                pivot_row = self.B_inv[r] / w[r]
                self.B_inv -= np.outer(w, pivot_row)
                self.B_inv[r] = pivot_row
                self.basis[r] = j
                self.is_basic[leaving] = False
                self.is_basic[j] = True
                since_refactor += 1

            stall = stall + 1 if step <= 1e-12 else 0
            if stall >= STALL_LIMIT and not bland:
                logger.debug("simplex: %d bước suy biến liên tiếp, chuyển sang quy tắc Bland", stall)
                bland = True
            self.iterations += 1


def _accurate_inverse(B: np.ndarray) -> Optional[np.ndarray]:
    """Nghịch đảo B, hoặc None nếu B suy biến hay nghịch đảo sai số lớn"""
    try:
        B_inv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return None
    if not np.isfinite(B_inv).all():
        return None
    if np.abs(B_inv @ B - np.eye(B.shape[0])).max() > BASIS_ACCURACY_TOL:
        return None
    return B_inv


def _independent_columns(A: np.ndarray, candidates: Sequence[int], limit: int) -> List[int]:
    """Chọn tham lam các cột độc lập tuyến tính theo thứ tự ứng viên (Gram-Schmidt trực giao lại hai lần)"""
    Q = np.zeros((A.shape[0], 0))
    chosen: List[int] = []
    for j in candidates:
        v = A[:, j].astype(float)
        norm0 = float(np.linalg.norm(v))
        if norm0 == 0.0:
            continue
        for _ in range(2):
            v = v - Q @ (Q.T @ v)
        norm = float(np.linalg.norm(v))
        if norm > RANK_TOL * norm0:
            Q = np.column_stack([Q, v / norm])
            chosen.append(j)
            if len(chosen) == limit:
                break
    return chosen


def _initial_point(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))


def _solve_equality_form(A: np.ndarray, b: np.ndarray, c: np.ndarray, lower: np.ndarray,
                         upper: np.ndarray, max_iterations: Optional[int]) -> Tuple[LpStatus, np.ndarray, int]:
    """
    Giải min c·x, A x = b, lower <= x <= upper bằng simplex hai pha

    Returns:
        (trạng thái, x, số vòng lặp)
    """
    m, n = A.shape
    if max_iterations is None:
        max_iterations = max(1000, 20 * (m + n))

    x0 = _initial_point(lower, upper)
    residual = b - A @ x0
    signs = np.where(residual >= 0.0, 1.0, -1.0)

    # Pha 1: biến nhân tạo làm cơ sở ban đầu
    A1 = np.hstack([A, np.diag(signs)])
    lower1 = np.concatenate([lower, np.zeros(m)])
    upper1 = np.concatenate([upper, np.full(m, np.inf)])
    x1 = np.concatenate([x0, np.abs(residual)])
    engine = _BoundedSimplex(A1, b, lower1, upper1, x1, np.arange(n, n + m), max_iterations,
                             fallback=np.arange(n, n + m))

    phase_one_cost = np.concatenate([np.zeros(n), np.ones(m)])
    engine.run(phase_one_cost)
    engine.refactor()
    infeasibility = float(engine.x[n:].sum())
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if infeasibility > FEASIBILITY_TOL * scale:
        logger.debug("simplex: pha 1 dừng với tổng biến nhân tạo %.3e", infeasibility)
        return LpStatus.INFEASIBLE, engine.x[:n], engine.iterations

    # Pha 2: khóa biến nhân tạo tại 0
    engine.upper[n:] = 0.0
    nonbasic_artificial = ~engine.is_basic[n:]
    engine.x[n:][nonbasic_artificial] = 0.0
    phase_two_cost = np.concatenate([c, np.zeros(m)])
    status = engine.run(phase_two_cost)
    if status == LpStatus.OPTIMAL:
        engine.refactor()
    return status, engine.x[:n], engine.iterations


def _feasibility_scale(b: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    bounds = np.concatenate([lower, upper])
    bounds = bounds[np.isfinite(bounds)]
    return max(1.0, float(np.abs(b).max(initial=0.0)), float(np.abs(bounds).max(initial=0.0)))


def solve(lp: LinearProgram, max_iterations: Optional[int] = None) -> LpSolution:
    """
    Giải LP bằng simplex hiệu chỉnh có cận biến, quay về quy tắc Bland khi bị kẹt

    Args:
        lp: Mô hình cần giải
        max_iterations: Giới hạn số phép quay (None = tự chọn theo kích thước)

    Returns:
        LpSolution với trạng thái optimal / infeasible / unbounded

    Raises:
        MalformedModelError: Mô hình không hợp lệ
        SolverError: Vượt giới hạn vòng lặp, cơ sở suy biến không vá được,
            hoặc nghiệm cuối vi phạm ràng buộc quá dung sai
    """
    lp.validate()
    data = lp.to_arrays()
    c = data["c"]
    A = data["A"]
    b = data["b"]
    relations = data["relations"]
    m, n = A.shape

    # Biến bù: <= có bù trong [0, inf), >= có bù trong (-inf, 0]
    inequality_rows = [i for i, rel in enumerate(relations) if rel != Relation.EQ]
    slack_columns = np.zeros((m, len(inequality_rows)))
    slack_lower = np.zeros(len(inequality_rows))
    slack_upper = np.zeros(len(inequality_rows))
    for k, i in enumerate(inequality_rows):
        slack_columns[i, k] = 1.0
        if relations[i] == Relation.LE:
            slack_upper[k] = np.inf
        else:
            slack_lower[k] = -np.inf

    A_full = np.hstack([A, slack_columns])
    lower = np.concatenate([data["lower"], slack_lower])
    upper = np.concatenate([data["upper"], slack_upper])
    cost = c if lp.sense == Sense.MIN else -c
    cost_full = np.concatenate([cost, np.zeros(len(inequality_rows))])

    try:
        status, x, iterations = _solve_equality_form(A_full, b, cost_full, lower, upper, max_iterations)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"LP {lp.name}: lỗi đại số tuyến tính trong simplex ({exc})") from exc
    logger.debug("lp %s: %s sau %d vòng lặp (%d ràng buộc, %d biến)", lp.name, status.value,
                 iterations, m, n)
    if status != LpStatus.OPTIMAL:
        return LpSolution(status=status, iterations=iterations)

    x_struct = x[:n]
    values = {var.name: float(x_struct[j]) for j, var in enumerate(lp.variables)}
    violation = max_violation(lp, values)
    if violation > FEASIBILITY_TOL * _feasibility_scale(b, data["lower"], data["upper"]):
        raise SolverError(
            f"LP {lp.name}: nghiệm cuối vi phạm ràng buộc {violation:.3e}, không báo là tối ưu",
            "lp_core.inaccurate",
        )
    return LpSolution(
        status=LpStatus.OPTIMAL,
        values=values,
        objective_value=float(c @ x_struct),
        iterations=iterations,
    )


def _enumerate_best_vertex(rows: List[Tuple[np.ndarray, Relation, float]], cost: np.ndarray,
                           n: int) -> Optional[np.ndarray]:
    """
    Duyệt mọi giao điểm của n siêu phẳng, giữ đỉnh khả thi có giá trị mục tiêu nhỏ nhất
    """
    if n == 0:
        return np.zeros(0)

    equalities = [i for i, (_, rel, _) in enumerate(rows) if rel == Relation.EQ]
    inequalities = [i for i, (_, rel, _) in enumerate(rows) if rel != Relation.EQ]
    if len(equalities) <= n:
        combos = (tuple(equalities) + extra
                  for extra in itertools.combinations(inequalities, n - len(equalities)))
    else:
        combos = itertools.combinations(range(len(rows)), n)

    best_x = None
    best_value = math.inf
    for active in combos:
        M = np.array([rows[i][0] for i in active])
        rhs = np.array([rows[i][2] for i in active])
        if np.linalg.matrix_rank(M) < n:
            continue
        x = np.linalg.solve(M, rhs)
        if not _satisfies(rows, x):
            continue
        value = float(cost @ x)
        if value < best_value - 1e-12:
            best_value = value
            best_x = x
    return best_x


def _satisfies(rows: List[Tuple[np.ndarray, Relation, float]], x: np.ndarray) -> bool:
    for coefs, rel, rhs in rows:
        lhs = float(coefs @ x)
        tol = 1e-9 * (1.0 + abs(rhs))
        if rel == Relation.LE and lhs > rhs + tol:
            return False
        if rel == Relation.GE and lhs < rhs - tol:
            return False
        if rel == Relation.EQ and abs(lhs - rhs) > tol:
            return False
    return True


def oracle_solve(lp: LinearProgram) -> LpSolution:
    """
    Oracle kiểm tra: liệt kê toàn bộ nghiệm cơ sở của LP nhỏ

    Giả định miền khả thi có đỉnh (không chứa đường thẳng). Tính không bị chặn
    được phát hiện bằng cách tìm tia cải thiện trong nón lùi xa, chuẩn hóa trong hộp [-1, 1].

    Raises:
        OracleLimitError: Quá 8 biến hoặc quá 12 ràng buộc
    """
    lp.validate()
    n = len(lp.variables)
    m = len(lp.constraints)
    if n > ORACLE_MAX_VARIABLES or m > ORACLE_MAX_CONSTRAINTS:
        raise OracleLimitError(
            f"Oracle chỉ nhận tối đa {ORACLE_MAX_VARIABLES} biến và {ORACLE_MAX_CONSTRAINTS} "
            f"ràng buộc, mô hình có {n} biến và {m} ràng buộc"
        )

    data = lp.to_arrays()
    c = data["c"]
    cost = c if lp.sense == Sense.MIN else -c
    identity = np.eye(n)

    rows = [(data["A"][i], rel, float(data["b"][i])) for i, rel in enumerate(data["relations"])]
    for j in range(n):
        if math.isfinite(data["lower"][j]):
            rows.append((identity[j], Relation.GE, float(data["lower"][j])))
        if math.isfinite(data["upper"][j]):
            rows.append((identity[j], Relation.LE, float(data["upper"][j])))

    best = _enumerate_best_vertex(rows, cost, n)
    if best is None:
        return LpSolution(status=LpStatus.INFEASIBLE)

    # Nón lùi xa: cùng ràng buộc với vế phải 0, thêm hộp [-1, 1]
    ray_rows = [(coefs, rel, 0.0) for coefs, rel, _ in rows]
    for j in range(n):
        ray_rows.append((identity[j], Relation.LE, 1.0))
        ray_rows.append((identity[j], Relation.GE, -1.0))
    ray = _enumerate_best_vertex(ray_rows, cost, n)
    if ray is not None and float(cost @ ray) < -1e-9:
        return LpSolution(status=LpStatus.UNBOUNDED)

    values = {var.name: float(best[j]) for j, var in enumerate(lp.variables)}
    return LpSolution(status=LpStatus.OPTIMAL, values=values, objective_value=float(c @ best))
