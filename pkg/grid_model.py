"""
Module mô hình lưới điện tĩnh
Chức năng: kiểu dữ liệu nút / đường dây / tổ máy / kịch bản phụ tải, đọc - ghi file case,
kiểm tra tính hợp lệ, tính trào lưu công suất DC từ góc pha
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils import DataError

logger = logging.getLogger(__name__)

SECTIONS = ("BUS", "LINE", "GEN", "LOAD", "PARAMS")
REQUIRED_SECTIONS = ("BUS", "LINE", "GEN")
PARAM_KEYS = ("dr_fraction", "interval_minutes", "scenario_label")
SCENARIO_LABELS = ("low", "medium", "high", "custom")

# Sai số cho phép của góc nút cân bằng
SLACK_ANGLE_TOL = 1e-9


class CaseParseError(DataError):
    """Lỗi cú pháp hoặc tham chiếu trong file case, kèm số dòng"""

    default_code = "grid_model.syntax"

    def __init__(self, message: str, code: str = None, line_no: int = None):
        if line_no is not None:
            message = f"dòng {line_no}: {message}"
        super().__init__(message, code)
        self.line_no = line_no


class UnknownElementError(DataError):
    default_code = "grid_model.unknown_element"


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    """Đường dây k: from_bus -> to_bus, chiều dương của trào lưu theo thứ tự này"""

    id: int
    from_bus: int
    to_bus: int
    susceptance_mw_per_rad: float
    rating_mw: float


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min_mw: float
    p_max_mw: float
    cost_per_mwh: float
    committed: bool = True


@dataclass(frozen=True)
class GridCase:
    """
    Lưới điện tĩnh: danh sách nút, đường dây, tổ máy

    Bất biến sau khi tạo; thứ tự nút trong `buses` là thứ tự hàng của mọi ma trận
    (góc pha, phụ tải, DR) trong dispatch và attack.
    """

    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    generators: Tuple[Generator, ...]
    name: str = "case"

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))

    @cached_property
    def bus_ids(self) -> Tuple[int, ...]:
        return tuple(bus.id for bus in self.buses)

    @cached_property
    def bus_index(self) -> Dict[int, int]:
        return {bus.id: i for i, bus in enumerate(self.buses)}

    @cached_property
    def line_index(self) -> Dict[int, int]:
        return {line.id: k for k, line in enumerate(self.lines)}

    @cached_property
    def committed_generators(self) -> Tuple[Generator, ...]:
        """Tập G: chỉ tổ máy đang vận hành tham gia điều độ"""
        return tuple(gen for gen in self.generators if gen.committed)

    @property
    def slack_bus(self) -> int:
        """
        Id của nút cân bằng

        Raises:
            DataError: Nếu case không có đúng một nút cân bằng
        """
        slack = [bus.id for bus in self.buses if bus.is_slack]
        if len(slack) != 1:
            raise DataError(
                f"Case '{self.name}' cần đúng một nút cân bằng, hiện có {len(slack)}",
                "grid_model.slack_count",
            )
        return slack[0]

    def bus_position(self, bus_id: int) -> int:
        if bus_id not in self.bus_index:
            raise UnknownElementError(f"Nút {bus_id} không tồn tại", "grid_model.unknown_bus")
        return self.bus_index[bus_id]

    def line(self, line_id: int) -> Line:
        """
        Lấy đường dây theo id

        Raises:
            UnknownElementError: Nếu id không tồn tại
        """
        if line_id not in self.line_index:
            raise UnknownElementError(
                f"Đường dây {line_id} không tồn tại trong case '{self.name}' (unknown line {line_id})",
                "grid_model.unknown_line",
            )
        return self.lines[self.line_index[line_id]]

    def incidence(self) -> np.ndarray:
        """Ma trận liên thuộc (đường dây × nút): +1 tại nút gửi, -1 tại nút nhận"""
        matrix = np.zeros((len(self.lines), len(self.buses)))
        for k, line in enumerate(self.lines):
            matrix[k, self.bus_index[line.from_bus]] = 1.0
            matrix[k, self.bus_index[line.to_bus]] = -1.0
        return matrix

    def susceptances(self) -> np.ndarray:
        return np.array([line.susceptance_mw_per_rad for line in self.lines], dtype=float)

    def ratings(self) -> np.ndarray:
        return np.array([line.rating_mw for line in self.lines], dtype=float)

    def committed_capacity_mw(self) -> float:
        return float(sum(gen.p_max_mw for gen in self.committed_generators))

    def installed_capacity_mw(self) -> float:
        return float(sum(gen.p_max_mw for gen in self.generators))


@dataclass(frozen=True, eq=False)
class DemandScenario:
    """
    Phụ tải dự báo theo nút và chu kỳ

    Args:
        bus_ids: Thứ tự nút của các hàng trong demand_mw
        demand_mw: Ma trận d[n, t] (MW)
        dr_fraction: Tỷ lệ tải được phép dịch, DR^Max = dr_fraction · d[n, t]
        interval_minutes: Độ dài chu kỳ ΔT
        label: low | medium | high | custom
    """

    bus_ids: Tuple[int, ...]
    demand_mw: np.ndarray
    dr_fraction: float = 0.3
    interval_minutes: float = 15.0
    label: str = "custom"

    def __post_init__(self):
        demand = np.array(self.demand_mw, dtype=float)
        if demand.ndim == 1:
            demand = demand.reshape(-1, 1)
        object.__setattr__(self, "bus_ids", tuple(int(b) for b in self.bus_ids))
        if demand.shape[0] != len(self.bus_ids):
            raise DataError(
                f"Ma trận phụ tải có {demand.shape[0]} hàng nhưng có {len(self.bus_ids)} nút",
                "grid_model.demand_shape",
            )
        if demand.size and (not np.all(np.isfinite(demand)) or demand.min() < 0.0):
            raise DataError("Phụ tải phải là số hữu hạn và không âm", "grid_model.negative_demand")
        if not 0.0 <= self.dr_fraction <= 1.0:
            raise DataError(f"dr_fraction={self.dr_fraction} phải nằm trong [0, 1]",
                            "grid_model.dr_fraction")
        if self.interval_minutes <= 0:
            raise DataError(f"interval_minutes={self.interval_minutes} phải dương",
                            "grid_model.interval_minutes")
        demand.setflags(write=False)
        object.__setattr__(self, "demand_mw", demand)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DemandScenario):
            return NotImplemented
        return (self.bus_ids == other.bus_ids
                and np.array_equal(self.demand_mw, other.demand_mw)
                and self.dr_fraction == other.dr_fraction
                and self.interval_minutes == other.interval_minutes
                and self.label == other.label)

    __hash__ = None

    @property
    def n_intervals(self) -> int:
        return int(self.demand_mw.shape[1])

    def system_demand(self) -> np.ndarray:
        """Tổng phụ tải hệ thống theo chu kỳ"""
        return self.demand_mw.sum(axis=0)

    def peak_mw(self) -> float:
        return float(self.system_demand().max(initial=0.0))

    def dr_max(self) -> np.ndarray:
        """Trần tham gia DR theo nút và chu kỳ"""
        return self.dr_fraction * self.demand_mw

    def window(self, start: int, length: int) -> np.ndarray:
        return self.demand_mw[:, start:start + length]

    def with_demand(self, demand_mw: np.ndarray, label: str = None) -> "DemandScenario":
        return replace(self, demand_mw=demand_mw, label=label or self.label)

    def aligned_with(self, case: GridCase) -> bool:
        return self.bus_ids == case.bus_ids

    @classmethod
    def from_bus_map(cls, case: GridCase, loads: Mapping[int, Sequence[float]],
                     n_intervals: int = None, **kwargs) -> "DemandScenario":
        """
        Tạo kịch bản từ dict {bus_id: [d_t1, d_t2, ...]}; nút không có trong dict có tải 0
        """
        if n_intervals is None:
            n_intervals = max((len(values) for values in loads.values()), default=1)
        demand = np.zeros((len(case.buses), n_intervals))
        for bus_id, values in loads.items():
            demand[case.bus_position(bus_id), :] = values
        return cls(bus_ids=case.bus_ids, demand_mw=demand, **kwargs)


# ---------------------------------------------------------------------------
# Đọc / ghi file case
# ---------------------------------------------------------------------------

def _tokenize(text: str) -> List[Tuple[int, List[str]]]:
    rows = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        content = raw.replace("\r", "").split("#", 1)[0].strip()
        if content:
            rows.append((line_no, content.split()))
    return rows


def _number(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise CaseParseError(f"{what} '{token}' không phải số", line_no=line_no)
    if not math.isfinite(value):
        raise CaseParseError(f"{what} '{token}' không hữu hạn", line_no=line_no)
    return value


def _integer(token: str, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise CaseParseError(f"{what} '{token}' không phải số nguyên", line_no=line_no)


def _flag(token: str, line_no: int, what: str) -> bool:
    if token not in ("0", "1"):
        raise CaseParseError(f"{what} phải là 0 hoặc 1, nhận '{token}'", line_no=line_no)
    return token == "1"


def _expect_width(tokens: List[str], width: int, line_no: int, section: str) -> None:
    if len(tokens) != width:
        raise CaseParseError(
            f"section {section} cần {width} cột, nhận {len(tokens)}", line_no=line_no
        )


def _split_sections(text: str, required: Sequence[str] = REQUIRED_SECTIONS) -> Dict[str, List[Tuple[int, List[str]]]]:
    sections: Dict[str, List[Tuple[int, List[str]]]] = {}
    current = None
    for line_no, tokens in _tokenize(text):
        if tokens[0].upper() == "SECTION":
            if len(tokens) != 2:
                raise CaseParseError("dòng SECTION cần đúng một tên", line_no=line_no)
            name = tokens[1].upper()
            if name not in SECTIONS:
                raise CaseParseError(f"section không xác định '{tokens[1]}'",
                                     "grid_model.unknown_section", line_no)
            if name in sections:
                raise CaseParseError(f"section {name} xuất hiện hai lần",
                                     "grid_model.duplicate_section", line_no)
            sections[name] = []
            current = name
        elif current is None:
            raise CaseParseError("dữ liệu nằm ngoài mọi section", line_no=line_no)
        else:
            sections[current].append((line_no, tokens))

    missing = [name for name in required if name not in sections]
    if missing:
        raise CaseParseError(f"thiếu section bắt buộc: {', '.join(missing)}",
                             "grid_model.missing_section")
    return sections


def _check_unique(seen: set, element_id: int, kind: str, line_no: int) -> None:
    if element_id in seen:
        raise CaseParseError(f"{kind} id {element_id} bị trùng", "grid_model.duplicate_id", line_no)
    seen.add(element_id)


def _check_bus_ref(bus_ids: set, bus_id: int, owner: str, line_no: int) -> None:
    if bus_id not in bus_ids:
        raise CaseParseError(f"{owner} tham chiếu nút {bus_id} không tồn tại",
                             "grid_model.dangling_reference", line_no)


def parse_case_bundle(text: str, name: str = "case") -> Tuple[GridCase, Optional[DemandScenario]]:
    """
    Đọc file case gồm lưới điện và (nếu có) phụ tải LOAD / tham số PARAMS

    Args:
        text: Nội dung file case
        name: Tên case

    Returns:
        Tuple (GridCase, DemandScenario hoặc None nếu không có section LOAD)

    Raises:
        CaseParseError: Lỗi cú pháp, id trùng, section lạ / thiếu, tham chiếu nút không tồn tại
    """
    sections = _split_sections(text)

    buses: List[Bus] = []
    seen: set = set()
    for line_no, tokens in sections["BUS"]:
        _expect_width(tokens, 2, line_no, "BUS")
        bus_id = _integer(tokens[0], line_no, "id nút")
        _check_unique(seen, bus_id, "nút", line_no)
        buses.append(Bus(bus_id, _flag(tokens[1], line_no, "slack")))
    bus_ids = set(seen)

    lines: List[Line] = []
    seen = set()
    for line_no, tokens in sections["LINE"]:
        _expect_width(tokens, 5, line_no, "LINE")
        line_id = _integer(tokens[0], line_no, "id đường dây")
        _check_unique(seen, line_id, "đường dây", line_no)
        from_bus = _integer(tokens[1], line_no, "nút gửi")
        to_bus = _integer(tokens[2], line_no, "nút nhận")
        for bus_id in (from_bus, to_bus):
            _check_bus_ref(bus_ids, bus_id, f"đường dây {line_id}", line_no)
        lines.append(Line(line_id, from_bus, to_bus,
                          _number(tokens[3], line_no, "điện nạp"),
                          _number(tokens[4], line_no, "giới hạn nhiệt")))

    generators: List[Generator] = []
    seen = set()
    for line_no, tokens in sections["GEN"]:
        _expect_width(tokens, 6, line_no, "GEN")
        gen_id = _integer(tokens[0], line_no, "id tổ máy")
        _check_unique(seen, gen_id, "tổ máy", line_no)
        bus_id = _integer(tokens[1], line_no, "nút")
        _check_bus_ref(bus_ids, bus_id, f"tổ máy {gen_id}", line_no)
        generators.append(Generator(gen_id, bus_id,
                                    _number(tokens[2], line_no, "p_min"),
                                    _number(tokens[3], line_no, "p_max"),
                                    _number(tokens[4], line_no, "chi phí"),
                                    _flag(tokens[5], line_no, "committed")))

    case = GridCase(tuple(buses), tuple(lines), tuple(generators), name)
    params = _parse_params(sections.get("PARAMS", []))
    scenario = None
    if "LOAD" in sections:
        scenario = _parse_load(case, sections["LOAD"], params)
    return case, scenario


def _parse_params(rows: List[Tuple[int, List[str]]]) -> Dict[str, object]:
    params: Dict[str, object] = {}
    for line_no, tokens in rows:
        _expect_width(tokens, 2, line_no, "PARAMS")
        key, value = tokens
        if key not in PARAM_KEYS:
            raise CaseParseError(f"tham số không xác định '{key}'", "grid_model.unknown_param", line_no)
        if key in params:
            raise CaseParseError(f"tham số '{key}' bị lặp", "grid_model.duplicate_param", line_no)
        if key == "scenario_label":
            if value not in SCENARIO_LABELS:
                raise CaseParseError(f"scenario_label '{value}' không hợp lệ", line_no=line_no)
            params[key] = value
        else:
            params[key] = _number(value, line_no, key)
    return params


def _parse_load(case: GridCase, rows: List[Tuple[int, List[str]]],
                params: Dict[str, object]) -> DemandScenario:
    n_intervals = None
    loads: Dict[int, List[float]] = {}
    for line_no, tokens in rows:
        if len(tokens) < 2:
            raise CaseParseError("dòng LOAD cần id nút và ít nhất một giá trị", line_no=line_no)
        bus_id = _integer(tokens[0], line_no, "nút")
        _check_bus_ref(set(case.bus_ids), bus_id, "LOAD", line_no)
        if bus_id in loads:
            raise CaseParseError(f"LOAD của nút {bus_id} bị lặp", "grid_model.duplicate_id", line_no)
        values = [_number(token, line_no, "phụ tải") for token in tokens[1:]]
        if n_intervals is None:
            n_intervals = len(values)
        elif len(values) != n_intervals:
            raise CaseParseError(f"LOAD của nút {bus_id} có {len(values)} chu kỳ, cần {n_intervals}",
                                 line_no=line_no)
        if min(values) < 0:
            raise CaseParseError(f"phụ tải nút {bus_id} âm", "grid_model.negative_demand", line_no)
        loads[bus_id] = values

    try:
        return DemandScenario.from_bus_map(
            case, loads, n_intervals=n_intervals or 1,
            dr_fraction=float(params.get("dr_fraction", 0.3)),
            interval_minutes=float(params.get("interval_minutes", 15.0)),
            label=str(params.get("scenario_label", "custom")),
        )
    except CaseParseError:
        raise
    except DataError as e:
        raise CaseParseError(str(e), e.code)


def parse_case(text: str, name: str = "case") -> GridCase:
    """
    Đọc file case và trả về lưới điện (section LOAD / PARAMS vẫn được kiểm tra cú pháp)

    Args:
        text: Nội dung file case
        name: Tên case

    Returns:
        GridCase đầy đủ
    """
    case, _ = parse_case_bundle(text, name)
    return case


def parse_scenario(text: str, case: GridCase) -> DemandScenario:
    """
    Đọc kịch bản phụ tải từ văn bản có section LOAD (PARAMS tùy chọn) cho một lưới đã biết

    Raises:
        CaseParseError: Thiếu LOAD, lỗi cú pháp hoặc nút không tồn tại
    """
    sections = _split_sections(text, required=("LOAD",))
    params = _parse_params(sections.get("PARAMS", []))
    return _parse_load(case, sections["LOAD"], params)


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_case(case: GridCase, scenario: Optional[DemandScenario] = None) -> str:
    """
    Ghi GridCase (và kịch bản nếu có) ra văn bản đúng ngữ pháp file case

    parse_case_bundle(serialize_case(c, s)) trả lại đúng (c, s).
    """
    out = [f"# case {case.name}", "", "SECTION BUS", "# id slack"]
    out += [f"{bus.id} {int(bus.is_slack)}" for bus in case.buses]
    out += ["", "SECTION LINE", "# id from to susceptance_mw_per_rad rating_mw"]
    out += [f"{line.id} {line.from_bus} {line.to_bus} {_fmt(line.susceptance_mw_per_rad)} "
            f"{_fmt(line.rating_mw)}" for line in case.lines]
    out += ["", "SECTION GEN", "# id bus p_min_mw p_max_mw cost_per_mwh committed"]
    out += [f"{gen.id} {gen.bus} {_fmt(gen.p_min_mw)} {_fmt(gen.p_max_mw)} "
            f"{_fmt(gen.cost_per_mwh)} {int(gen.committed)}" for gen in case.generators]
    text = "\n".join(out) + "\n"
    if scenario is not None:
        text += "\n" + serialize_scenario(scenario)
    return text


def serialize_scenario(scenario: DemandScenario) -> str:
    """Chỉ ghi hai section LOAD và PARAMS"""
    out = ["SECTION LOAD", "# bus d_t1 ... d_tT"]
    for i, bus_id in enumerate(scenario.bus_ids):
        out.append(" ".join([str(bus_id)] + [_fmt(v) for v in scenario.demand_mw[i]]))
    out += ["", "SECTION PARAMS",
            f"dr_fraction {_fmt(scenario.dr_fraction)}",
            f"interval_minutes {_fmt(scenario.interval_minutes)}",
            f"scenario_label {scenario.label}"]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Kiểm tra hợp lệ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    element: str = ""


@dataclass(frozen=True)
class ValidationReport:
    """Kết quả kiểm tra: danh sách vi phạm (rỗng = hợp lệ) và số liệu tổng hợp"""

    violations: Tuple[Violation, ...]
    committed_capacity_mw: float
    installed_capacity_mw: float
    n_buses: int
    n_lines: int
    n_generators: int
    n_committed: int
    system_demand_mw: Tuple[float, ...] = ()
    peak_demand_mw: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> List[str]:
        return [v.code for v in self.violations]

    def summary_lines(self) -> List[str]:
        lines = [
            f"buses                 {self.n_buses}",
            f"lines                 {self.n_lines}",
            f"generators            {self.n_generators}",
            f"committed             {self.n_committed}",
            f"committed_capacity_mw {self.committed_capacity_mw:.1f}",
            f"installed_capacity_mw {self.installed_capacity_mw:.1f}",
        ]
        if self.peak_demand_mw is not None:
            lines.append(f"peak_demand_mw        {self.peak_demand_mw:.1f}")
        lines.append(f"violations            {len(self.violations)}")
        lines += [f"  [{v.code}] {v.message}" for v in self.violations]
        return lines


def _duplicates(ids: Sequence[int]) -> List[int]:
    seen, dup = set(), []
    for element_id in ids:
        if element_id in seen and element_id not in dup:
            dup.append(element_id)
        seen.add(element_id)
    return dup


def validate(case: GridCase) -> ValidationReport:
    """
    Kiểm tra mọi bất biến của GridCase; vi phạm là dữ liệu, không phải ngoại lệ

    Args:
        case: Lưới điện cần kiểm tra

    Returns:
        ValidationReport với danh sách vi phạm và tổng công suất đang vận hành
    """
    violations: List[Violation] = []
    bus_ids = set(case.bus_ids)

    for kind, ids in (("nút", case.bus_ids),
                      ("đường dây", [line.id for line in case.lines]),
                      ("tổ máy", [gen.id for gen in case.generators])):
        for element_id in _duplicates(ids):
            violations.append(Violation("duplicate_id", f"{kind} id {element_id} bị trùng",
                                        f"{kind}:{element_id}"))

    n_slack = sum(1 for bus in case.buses if bus.is_slack)
    if n_slack == 0:
        violations.append(Violation("no_slack_bus", "Không có nút cân bằng"))
    elif n_slack > 1:
        slack_ids = ", ".join(str(bus.id) for bus in case.buses if bus.is_slack)
        violations.append(Violation("multiple_slack_buses",
                                    f"Có nhiều nút cân bằng (multiple slack buses): {slack_ids}"))

    for line in case.lines:
        element = f"line:{line.id}"
        if line.susceptance_mw_per_rad <= 0:
            violations.append(Violation("nonpositive_susceptance",
                                        f"Đường dây {line.id} có điện nạp {line.susceptance_mw_per_rad} <= 0",
                                        element))
        if line.rating_mw <= 0:
            violations.append(Violation("nonpositive_rating",
                                        f"Đường dây {line.id} có giới hạn nhiệt {line.rating_mw} <= 0",
                                        element))
        if line.from_bus == line.to_bus:
            violations.append(Violation("self_loop",
                                        f"Đường dây {line.id} nối nút {line.from_bus} với chính nó",
                                        element))
        for bus_id in (line.from_bus, line.to_bus):
            if bus_id not in bus_ids:
                violations.append(Violation("dangling_bus",
                                            f"Đường dây {line.id} tham chiếu nút {bus_id} không tồn tại",
                                            element))

    for gen in case.generators:
        element = f"gen:{gen.id}"
        if not 0 <= gen.p_min_mw <= gen.p_max_mw:
            violations.append(Violation("bad_generator_limits",
                                        f"Tổ máy {gen.id}: cần 0 <= p_min ({gen.p_min_mw}) <= p_max ({gen.p_max_mw})",
                                        element))
        if gen.cost_per_mwh < 0:
            violations.append(Violation("negative_cost",
                                        f"Tổ máy {gen.id} có chi phí âm {gen.cost_per_mwh}", element))
        if gen.bus not in bus_ids:
            violations.append(Violation("dangling_bus",
                                        f"Tổ máy {gen.id} tham chiếu nút {gen.bus} không tồn tại", element))

    return ValidationReport(
        violations=tuple(violations),
        committed_capacity_mw=case.committed_capacity_mw(),
        installed_capacity_mw=case.installed_capacity_mw(),
        n_buses=len(case.buses),
        n_lines=len(case.lines),
        n_generators=len(case.generators),
        n_committed=len(case.committed_generators),
    )


def validate_scenario(case: GridCase, scenario: DemandScenario) -> ValidationReport:
    """
    Kiểm tra case cùng kịch bản phụ tải: thứ tự nút, tải đỉnh, tải vượt công suất vận hành
    """
    report = validate(case)
    violations = list(report.violations)
    if not scenario.aligned_with(case):
        violations.append(Violation("scenario_bus_mismatch",
                                    "Thứ tự nút của kịch bản phụ tải không khớp với case"))
    totals = scenario.system_demand()
    capacity = case.committed_capacity_mw()
    for t, total in enumerate(totals, start=1):
        if total > capacity + 1e-9:
            violations.append(Violation("demand_exceeds_capacity",
                                        f"Chu kỳ {t}: phụ tải {total:.1f} MW vượt công suất vận hành {capacity:.1f} MW",
                                        f"interval:{t}"))
    return replace(report, violations=tuple(violations),
                   system_demand_mw=tuple(float(v) for v in totals),
                   peak_demand_mw=scenario.peak_mw())


# ---------------------------------------------------------------------------
# Trào lưu công suất DC
# ---------------------------------------------------------------------------

def flows_from_angles(case: GridCase, theta: np.ndarray) -> np.ndarray:
    """Dạng vector: flow = b ⊙ (A θ), θ theo thứ tự case.buses"""
    return case.susceptances() * (case.incidence() @ np.asarray(theta, dtype=float))


def compute_dc_flows(case: GridCase, angles: Union[Mapping[int, float], Sequence[float]]) -> Dict[int, float]:
    """
    Tính trào lưu trên từng đường dây: flow_k = b_k (θ_from − θ_to)

    Args:
        case: Lưới điện
        angles: Góc pha (rad) theo id nút, hoặc vector theo thứ tự case.buses

    Returns:
        Dict {line_id: MW}, dương theo chiều from -> to

    Raises:
        DataError: Thiếu góc của một nút, hoặc góc nút cân bằng khác 0
    """
    if isinstance(angles, Mapping):
        missing = [bus_id for bus_id in case.bus_ids if bus_id not in angles]
        if missing:
            raise DataError(f"Thiếu góc pha cho nút {missing[0]}", "grid_model.missing_angle")
        theta = np.array([float(angles[bus_id]) for bus_id in case.bus_ids])
    else:
        theta = np.asarray(angles, dtype=float)
        if theta.shape != (len(case.buses),):
            raise DataError(f"Cần {len(case.buses)} góc pha, nhận {theta.size}",
                            "grid_model.missing_angle")

    slack_angle = theta[case.bus_index[case.slack_bus]]
    if abs(slack_angle) > SLACK_ANGLE_TOL:
        raise DataError(f"Góc nút cân bằng phải bằng 0, nhận {slack_angle}", "grid_model.slack_angle")

    flows = flows_from_angles(case, theta)
    return {line.id: float(flows[k]) for k, line in enumerate(case.lines)}


def net_injections(case: GridCase, flows: Mapping[int, float]) -> Dict[int, float]:
    """
    Công suất bơm ròng tại mỗi nút suy ra từ trào lưu: Σ dòng đi ra − Σ dòng đi vào
    """
    vector = np.array([flows[line.id] for line in case.lines], dtype=float)
    injections = case.incidence().T @ vector
    return {bus_id: float(injections[i]) for i, bus_id in enumerate(case.bus_ids)}


def susceptance_matrix(case: GridCase) -> np.ndarray:
    """Ma trận B (nút × nút) = Aᵀ diag(b) A"""
    incidence = case.incidence()
    return incidence.T @ (case.susceptances()[:, None] * incidence)


def solve_dc_power_flow(case: GridCase, injections: Mapping[int, float]) -> Dict[int, float]:
    """
    Giải góc pha từ công suất bơm (MW); nút cân bằng nhận phần chênh lệch

    Args:
        case: Lưới điện liên thông
        injections: Công suất bơm ròng theo id nút (thiếu = 0)

    Returns:
        Dict {bus_id: góc rad}, góc nút cân bằng = 0
    """
    B = susceptance_matrix(case)
    p = np.array([float(injections.get(bus_id, 0.0)) for bus_id in case.bus_ids])
    keep = [i for i, bus_id in enumerate(case.bus_ids) if bus_id != case.slack_bus]
    theta = np.zeros(len(case.buses))
    if keep:
        theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], p[keep])
    return {bus_id: float(theta[i]) for i, bus_id in enumerate(case.bus_ids)}
