"""
gridraid - điều độ SCED / SCED-DR và mô phỏng tấn công FSMI trên lưới 24 nút
Giao diện dòng lệnh: validate, dispatch, attack, sweep, study
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from attack import AttackMode, AttackSpec, attack_result_frame, run_attack
from config import describe_defaults, get_setting
from data_service import DEFAULT_CASE, load_case, resolve_scenario
from dispatch import (DispatchMode, DispatchProblem, DrCostConfig, TerminalShifts, roll,
                      solutions_to_frame, solve_window)
from experiments import (SweepSpec, first_dr_interval, gnuplot_script, run_alpha_sweep,
                         run_benefit_study, run_demand_level_study, run_loading_profile,
                         run_q0_sweep, write_study_csv)
from grid_model import DemandScenario, GridCase, validate, validate_scenario
from logger import append_daily_log
from metrics import (dr_shift_summary, load_factor, overloads_to_frame, render_frame,
                     render_summary_table, report_to_frame)
from utils import (GridRaidError, UsageError, ensure_dir, format_mw, format_number, format_percent,
                   parse_float_list, parse_int_list, write_csv)

logger = logging.getLogger("gridraid")

DEFAULT_STUDY_TARGET = 23


class _ArgumentParser(argparse.ArgumentParser):
    """argparse báo lỗi bằng UsageError thay vì tự thoát"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class CommandOutcome:
    """Kết quả một lệnh con: bảng tóm tắt, file đã ghi, thông tin cho nhật ký chạy"""

    summary: str
    files: List[Path] = field(default_factory=list)
    exit_code: int = 0
    record: Dict[str, object] = field(default_factory=dict)


def _defaults_epilog() -> str:
    rows = [f"  {key:<16} {shown:<14} {desc}" for key, shown, desc in describe_defaults()]
    return "Giá trị mặc định (ghi đè bằng biến môi trường GRIDRAID_<KEY>):\n" + "\n".join(rows)


def _build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--case", default=str(DEFAULT_CASE),
                        help="File case (mặc định: %(default)s)")
    common.add_argument("--out", default=None,
                        help=f"Thư mục kết quả (mặc định: GRIDRAID_OUT hoặc '{get_setting('output_dir')}')")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v INFO, -vv DEBUG")
    common.add_argument("--plot", action="store_true", help="Vẽ biểu đồ PNG")
    common.add_argument("--gnuplot", action="store_true", help="Ghi script gnuplot cạnh mỗi file CSV")

    attack_params = _ArgumentParser(add_help=False)
    attack_params.add_argument("--alpha", type=float, default=get_setting("alpha"),
                               help="Hệ số lệch tín hiệu DR α (mặc định: %(default)s)")
    attack_params.add_argument("--q0", type=float, default=get_setting("q0"),
                               help="Ngân sách l1 độ lệch DR, MW (mặc định: %(default)s)")
    attack_params.add_argument("--s0", type=float, default=get_setting("s0"),
                               help="Ngân sách l1 độ lệch góc pha, rad (mặc định: %(default)s)")

    parser = _ArgumentParser(
        prog="gridraid",
        description="Điều độ SCED / SCED-DR và mô phỏng tấn công FSMI",
        epilog=_defaults_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("validate", parents=[common], help="Kiểm tra file case")
    p.add_argument("--scenario", default=None, help="Nhãn low|medium|high hoặc file LOAD")

    p = sub.add_parser("dispatch", parents=[common], help="Chạy cửa sổ trượt SCED / SCED-DR")
    p.add_argument("--scenario", default=None, help="Nhãn low|medium|high hoặc file LOAD")
    p.add_argument("--mode", required=True, choices=["sced", "sced-dr"])
    p.add_argument("--windows", type=int, default=None, help="Số cửa sổ (mặc định: số chu kỳ của kịch bản)")
    p.add_argument("--horizon", type=int, default=get_setting("horizon"),
                   help="Số chu kỳ nhìn trước (mặc định: %(default)s)")
    p.add_argument("--dr-costs", default=",".join(f"{c:g}" for c in get_setting("dr_costs")),
                   help="Chi phí dịch tải 15,30,45 phút $/MW (mặc định: %(default)s)")
    p.add_argument("--dr-fraction", type=float, default=None, help="Tỷ lệ tải tham gia DR")
    p.add_argument("--terminal-shifts", choices=[m.value for m in TerminalShifts],
                   default=get_setting("terminal_shifts"),
                   help="Dịch tải vượt cuối cửa sổ (mặc định: %(default)s)")
    p.add_argument("--dump-lp", default=None, help="Ghi LP của cửa sổ đầu ra file MPS")

    p = sub.add_parser("attack", parents=[common, attack_params], help="Tấn công FSMI một đường dây")
    p.add_argument("--scenario", default=None, help="Nhãn low|medium|high hoặc file LOAD")
    p.add_argument("--target", type=int, required=True, help="Id đường dây mục tiêu")
    p.add_argument("--mode", required=True, choices=[m.value for m in AttackMode])

    p = sub.add_parser("sweep", parents=[common, attack_params], help="Quét alpha hoặc Q0")
    p.add_argument("parameter", choices=["alpha", "q0"])
    p.add_argument("--scenario", default=None, help="Nhãn low|medium|high hoặc file LOAD")
    p.add_argument("--targets", required=True, help="Danh sách đường dây, ví dụ 10,28,23")
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--workers", type=int, default=None, help="Số luồng tính song song")

    p = sub.add_parser("study", parents=[common, attack_params], help="So sánh theo kịch bản")
    p.add_argument("study", choices=["benefit", "demand-level", "loading"])
    p.add_argument("--scenarios", default="low,medium,high")
    p.add_argument("--target", type=int, default=DEFAULT_STUDY_TARGET,
                   help="Đường dây mục tiêu cho demand-level (mặc định: %(default)s)")
    p.add_argument("--workers", type=int, default=None)
    return parser


def _output_dir(args) -> Path:
    return ensure_dir(args.out or get_setting("output_dir"))


def _scenario(case: GridCase, base: Optional[DemandScenario], label: Optional[str]) -> DemandScenario:
    if label is None:
        if base is None:
            raise UsageError("File case không có LOAD, cần --scenario")
        return base
    return resolve_scenario(case, base, label)


def _write_table(frame: pd.DataFrame, path: Path, args, x_column: str = None, y_column: str = None,
                 group_column: str = None) -> List[Path]:
    files = [write_csv(frame, path)]
    if args.gnuplot and x_column and y_column:
        groups = list(dict.fromkeys(frame[group_column])) if group_column else []
        script = path.with_suffix(".gp")
        script.write_text(gnuplot_script(path, x_column, y_column, group_column, groups), encoding="utf-8")
        files.append(script)
    return files


def _plot(fig, path: Path) -> Path:
    from visualizer import save_figure
    return Path(save_figure(fig, path))


def cmd_validate(args) -> CommandOutcome:
    case, base = load_case(args.case)
    if args.scenario is not None or base is not None:
        scenario = _scenario(case, base, args.scenario)
        report = validate_scenario(case, scenario)
    else:
        report = validate(case)
    frame = pd.DataFrame([{"code": v.code, "element": v.element, "message": v.message}
                          for v in report.violations], columns=["code", "element", "message"])
    files = [write_csv(frame, _output_dir(args) / "violations.csv")]
    status = "hợp lệ" if report.ok else f"{len(report.violations)} vi phạm"
    summary = "\n".join([f"case {case.name}: {status}"] + report.summary_lines())
    return CommandOutcome(summary, files, 0 if report.ok else 1,
                          {"case": case.name, "details": {"violations": report.codes()}})


def cmd_dispatch(args) -> CommandOutcome:
    case, base = load_case(args.case)
    scenario = _scenario(case, base, args.scenario)
    if args.dr_fraction is not None:
        scenario = replace(scenario, dr_fraction=args.dr_fraction)
    problem = DispatchProblem(
        case=case,
        scenario=scenario,
        horizon=args.horizon,
        mode=DispatchMode.parse(args.mode),
        dr_costs=DrCostConfig(*parse_float_list(args.dr_costs, expected=3)),
        terminal_shifts=TerminalShifts(args.terminal_shifts),
        shrink_horizon=get_setting("shrink_horizon"),
    )
    out_dir = _output_dir(args)
    files: List[Path] = []
    if args.dump_lp:
        solve_window(problem, 0, dump_lp=args.dump_lp)
        files.append(Path(args.dump_lp))

    result = roll(problem, args.windows or scenario.n_intervals)
    mode = problem.mode.value
    files += _write_table(solutions_to_frame(result.windows, case),
                          out_dir / f"dispatch_{scenario.label}_{mode}.csv", args)

    served = result.net_demand_series()
    intervals = pd.DataFrame({
        "interval": [sol.window_start + 1 for sol in result.implemented],
        "forecast_mw": result.forecast_series(),
        "served_mw": served,
        "dr15_mw": [sol.dr15[:, 0].sum() for sol in result.implemented],
        "dr30_mw": [sol.dr30[:, 0].sum() for sol in result.implemented],
        "dr45_mw": [sol.dr45[:, 0].sum() for sol in result.implemented],
        "cost_usd": [sol.objective_usd for sol in result.implemented],
    })
    dr15, dr30, dr45 = dr_shift_summary(result.implemented)
    lines = [
        f"case {case.name}, kịch bản {scenario.label}, chế độ {mode}, {len(result.implemented)} cửa sổ",
        render_frame(intervals),
        "",
        f"tổng chi phí        {format_number(result.total_cost_usd(), 4)} $",
        f"tải dịch 15/30/45   {format_mw(dr15)} / {format_mw(dr30)} / {format_mw(dr45)}",
        f"hệ số phụ tải       {format_percent(load_factor(served), 2)}",
        f"tải dịch còn treo   {format_mw(result.ledger.total_mw())}",
    ]
    if args.plot:
        from visualizer import make_net_demand_chart
        files.append(_plot(make_net_demand_chart([result]), out_dir / f"net_demand_{scenario.label}_{mode}.png"))
    return CommandOutcome("\n".join(lines), files, 0, {
        "case": case.name, "scenario": scenario.label, "mode": mode,
        "objective_usd": result.total_cost_usd(),
    })


def cmd_attack(args) -> CommandOutcome:
    case, base = load_case(args.case)
    spec = AttackSpec(target_line=args.target, alpha=args.alpha, s0=args.s0, q0=args.q0, mode=args.mode)
    spec.validate(case)
    scenario = _scenario(case, base, args.scenario)
    sol = first_dr_interval(case, scenario)
    result = run_attack(sol, spec, case)

    out_dir = _output_dir(args)
    files = _write_table(attack_result_frame(result, case),
                         out_dir / f"attack_{scenario.label}_{spec.target_line}.csv", args)
    lines = [
        f"case {case.name}, kịch bản {scenario.label}, tấn công {spec.mode.value} đường dây {spec.target_line}",
        f"alpha {spec.alpha:g}, Q0 {spec.q0:g} MW, S0 {spec.s0:g} rad",
        render_frame(overloads_to_frame([result])),
        "",
        f"ngân sách góc đã dùng {format_number(result.angle_budget_used, 6)} rad",
        f"ngân sách DR đã dùng  {format_mw(result.dr_budget_used)}",
        f"quá tải               {format_mw(result.overload_mw)}",
    ]
    return CommandOutcome("\n".join(lines), files, 0, {
        "case": case.name, "scenario": scenario.label, "mode": spec.mode.value,
        "objective_usd": None, "overload_mw": result.overload_mw,
        "details": {"target": spec.target_line, "alpha": spec.alpha, "q0": spec.q0, "s0": spec.s0},
    })


def cmd_sweep(args) -> CommandOutcome:
    case, base = load_case(args.case)
    targets = parse_int_list(args.targets)
    if not targets:
        raise UsageError("--targets cần ít nhất một đường dây")
    for target in targets:
        case.line(target)
    default = get_setting(f"{args.parameter}_grid")
    start = default[0] if args.start is None else args.start
    stop = default[1] if args.stop is None else args.stop
    step = default[2] if args.step is None else args.step
    sweep = SweepSpec(args.parameter, start, stop, step, alpha=args.alpha, q0=args.q0, s0=args.s0,
                      targets=tuple(targets))
    scenario = _scenario(case, base, args.scenario)
    sol = first_dr_interval(case, scenario)
    out_dir = _output_dir(args)
    files: List[Path] = []
    tables = []

    if args.parameter == "alpha":
        frame = run_alpha_sweep(case, scenario, targets, sweep, sol, args.workers)
        target_tag = targets[0] if len(targets) == 1 else "all"
        path = out_dir / f"alpha_{scenario.label}_{target_tag}.csv"
        files += _write_table(frame, path, args, "alpha", "loading_rate_post", "target_line")
        tables.append(frame)
        if args.plot:
            from visualizer import make_sweep_chart
            files.append(_plot(make_sweep_chart(frame, "alpha", "target_line"), path.with_suffix(".png")))
    else:
        for target in targets:
            frame = run_q0_sweep(case, scenario, target, sweep, sol, args.workers)
            path = out_dir / f"q0_{scenario.label}_{target}.csv"
            files += _write_table(frame, path, args, "q0_mw", "loading_rate_post", "mode")
            tables.append(frame)
            if args.plot and not frame.empty:
                from visualizer import make_sweep_chart
                files.append(_plot(make_sweep_chart(frame, "q0_mw", "mode"), path.with_suffix(".png")))

    combined = pd.concat(tables, ignore_index=True) if tables else pd.DataFrame()
    header = f"case {case.name}, kịch bản {scenario.label}, quét {args.parameter} {start:g}..{stop:g} bước {step:g}"
    worst = float(combined["overload_mw"].max()) if not combined.empty else 0.0
    return CommandOutcome("\n".join([header, render_frame(combined)]), files, 0, {
        "case": case.name, "scenario": scenario.label, "mode": args.parameter, "overload_mw": worst,
    })


def cmd_study(args) -> CommandOutcome:
    case, base = load_case(args.case)
    labels = [item.strip() for item in args.scenarios.split(',') if item.strip()]
    if not labels:
        raise UsageError("--scenarios cần ít nhất một kịch bản")
    scenarios = [_scenario(case, base, label) for label in labels]
    out_dir = _output_dir(args)
    files: List[Path] = []
    tag = "-".join(s.label for s in scenarios)

    if args.study == "benefit":
        reports = run_benefit_study(case, scenarios, workers=args.workers)
        frame = report_to_frame(reports)
        files += write_study_and_script(frame, out_dir, "benefit", tag, None, args)
        summary = render_summary_table(reports)
        if args.plot:
            from visualizer import make_benefit_chart
            files.append(_plot(make_benefit_chart(frame), out_dir / f"benefit_{tag}_all.png"))
        record = {"objective_usd": float(frame["savings_usd"].sum())}
    elif args.study == "demand-level":
        case.line(args.target)
        frame = run_demand_level_study(case, scenarios, args.target, q0=args.q0, alpha=args.alpha,
                                       s0=args.s0, workers=args.workers)
        files += write_study_and_script(frame, out_dir, "demand-level", tag, args.target, args)
        summary = render_frame(frame)
        if args.plot and not frame.empty:
            from visualizer import make_demand_level_chart
            files.append(_plot(make_demand_level_chart(frame), out_dir / f"demand-level_{tag}_{args.target}.png"))
        record = {"overload_mw": float(frame["overload_mw"].max()) if not frame.empty else 0.0}
    else:
        parts = []
        for scenario in scenarios:
            frame = run_loading_profile(case, scenario)
            files += write_study_and_script(frame, out_dir, "loading", scenario.label, None, args)
            parts.append(f"kịch bản {scenario.label}\n{render_frame(frame.head(10))}")
            if args.plot:
                from visualizer import make_loading_profile_chart
                files.append(_plot(make_loading_profile_chart(frame, scenario.label),
                                   out_dir / f"loading_{scenario.label}_all.png"))
        summary = "\n\n".join(parts)
        record = {}

    header = f"case {case.name}, nghiên cứu {args.study}"
    return CommandOutcome(f"{header}\n{summary}", files, 0,
                          {"case": case.name, "scenario": tag, "mode": args.study, **record})


def write_study_and_script(frame: pd.DataFrame, out_dir: Path, study: str, scenario: str, target, args) -> List[Path]:
    path = write_study_csv(frame, out_dir, study, scenario, target)
    files = [path]
    if args.gnuplot:
        x_column, y_column = {
            "benefit": ("scenario", "savings_usd"),
            "demand-level": ("scenario", "delta_loading_rate"),
            "loading": ("line_id", "loading_rate"),
        }[study]
        script = path.with_suffix(".gp")
        script.write_text(gnuplot_script(path, x_column, y_column), encoding="utf-8")
        files.append(script)
    return files


COMMANDS = {
    "validate": cmd_validate,
    "dispatch": cmd_dispatch,
    "attack": cmd_attack,
    "sweep": cmd_sweep,
    "study": cmd_study,
}


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _log_run(args, outcome: CommandOutcome) -> None:
    run_log_dir = get_setting("run_log_dir")
    if not run_log_dir:
        return
    record = {"command": args.command, "exit_code": outcome.exit_code,
              "output_files": outcome.files, **outcome.record}
    append_daily_log(record, run_log_dir)


def main(argv=None) -> int:
    """
    Điểm vào dòng lệnh

    Returns:
        0 thành công; 1 lỗi dữ liệu / kiểm tra; 2 bài toán không khả thi; 3 sai cú pháp
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    _configure_logging(args.verbose)
    try:
        outcome = COMMANDS[args.command](args)
        summary_path = _output_dir(args) / "summary.txt"
        summary_path.write_text(outcome.summary + "\n", encoding="utf-8")
        outcome.files.append(summary_path)
    except GridRaidError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        _log_run(args, CommandOutcome(str(e), [], e.exit_code, {"details": {"error": e.code}}))
        return e.exit_code

    print(outcome.summary)
    print(f"Đã ghi {len(outcome.files)} file vào {_output_dir(args)}")
    _log_run(args, outcome)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
