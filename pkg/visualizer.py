"""
Module vẽ biểu đồ kết quả
Sử dụng matplotlib (backend Agg) để vẽ tải ròng theo chu kỳ, chi phí / tải dịch theo kịch bản,
hồ sơ mang tải trước tấn công, đường quét alpha / Q0 và so sánh theo mức phụ tải
"""

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from dispatch import RollResult  # noqa: E402
from utils import DataError, ensure_dir  # noqa: E402

MODE_COLORS = {"sced": "#1f77b4", "sced_dr": "#2ca02c", "limited": "#ff7f0e", "unlimited": "#d62728"}


def make_net_demand_chart(rolls: Sequence[RollResult], title: str = "") -> plt.Figure:
    """
    Tải ròng phục vụ theo chu kỳ, mỗi chế độ một đường

    Args:
        rolls: Các lần chạy cửa sổ trượt trên cùng kịch bản
        title: Tiêu đề

    Returns:
        matplotlib Figure object
    """
    if not rolls:
        raise DataError("Không có kết quả điều độ để vẽ", "visualizer.empty")

    fig, ax = plt.subplots(figsize=(10, 6))
    for result in rolls:
        series = result.net_demand_series()
        intervals = np.arange(1, len(series) + 1)
        ax.plot(intervals, series, marker="o", linewidth=2,
                color=MODE_COLORS.get(result.mode.value), label=result.mode.value)

    forecast = rolls[0].forecast_series()
    ax.plot(np.arange(1, len(forecast) + 1), forecast, linestyle="--", color="gray",
            alpha=0.7, label="dự báo")
    _configure_axes(ax, title or "Tải ròng phục vụ theo chu kỳ", "Chu kỳ", "MW")
    ax.set_xticks(np.arange(1, len(forecast) + 1))
    plt.tight_layout()
    return fig


def make_benefit_chart(summary: pd.DataFrame) -> plt.Figure:
    """Cột chi phí hai chế độ và tổng tải dịch theo kịch bản"""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 6))
    x = np.arange(len(summary))
    width = 0.38

    ax1.bar(x - width / 2, summary["cost_sced_usd"], width, label="sced", color=MODE_COLORS["sced"])
    ax1.bar(x + width / 2, summary["cost_sced_dr_usd"], width, label="sced_dr", color=MODE_COLORS["sced_dr"])
    ax1.set_xticks(x)
    ax1.set_xticklabels(summary["scenario"])
    _configure_axes(ax1, "Tổng chi phí hệ thống", "Kịch bản", "$")

    bottom = np.zeros(len(summary))
    for column, color in (("dr15_mw", "#98df8a"), ("dr30_mw", "#2ca02c"), ("dr45_mw", "#1b5e20")):
        ax2.bar(x, summary[column], width, bottom=bottom, label=column, color=color)
        bottom += summary[column].to_numpy()
    ax2.set_xticks(x)
    ax2.set_xticklabels(summary["scenario"])
    _configure_axes(ax2, "Tải đã dịch", "Kịch bản", "MW")

    plt.tight_layout()
    return fig


def make_loading_profile_chart(profile: pd.DataFrame, scenario: str = "") -> plt.Figure:
    """Tỷ lệ mang tải trước tấn công của từng đường dây (đã sắp giảm dần)"""
    fig, ax = plt.subplots(figsize=(14, 6))
    labels = profile["line_id"].astype(str)
    colors = ["#d62728" if rate >= 1.0 - 1e-9 else "#1f77b4" for rate in profile["loading_rate"]]
    ax.bar(labels, profile["loading_rate"] * 100, color=colors, alpha=0.8)
    ax.axhline(y=100, color="red", linestyle="--", alpha=0.7, label="định mức")
    _configure_axes(ax, f"Mức mang tải trước tấn công {scenario}".strip(), "Đường dây", "%")
    plt.tight_layout()
    return fig


def make_sweep_chart(frame: pd.DataFrame, x_column: str, group_column: str, title: str = "") -> plt.Figure:
    """Đường tỷ lệ mang tải sau tấn công theo tham số quét, mỗi nhóm một đường"""
    fig, ax = plt.subplots(figsize=(10, 6))
    for group, rows in frame.groupby(group_column, sort=False):
        rows = rows.sort_values(x_column)
        ax.plot(rows[x_column], rows["loading_rate_post"] * 100, marker="o", linewidth=2,
                color=MODE_COLORS.get(str(group)), label=f"{group_column}={group}")
    ax.axhline(y=100, color="red", linestyle="--", alpha=0.5)
    _configure_axes(ax, title or f"Mức mang tải theo {x_column}", x_column, "%")
    plt.tight_layout()
    return fig


def make_demand_level_chart(frame: pd.DataFrame) -> plt.Figure:
    """Mức mang tải trước / sau tấn công theo mức phụ tải"""
    fig, ax = plt.subplots(figsize=(10, 6))
    x = np.arange(len(frame))
    width = 0.38
    ax.bar(x - width / 2, frame["loading_rate_pre"] * 100, width, label="trước", color="#1f77b4")
    ax.bar(x + width / 2, frame["loading_rate_post"] * 100, width, label="sau", color="#d62728")
    ax.set_xticks(x)
    ax.set_xticklabels(frame["scenario"])
    _configure_axes(ax, "Tấn công unlimited theo mức phụ tải", "Kịch bản", "%")
    plt.tight_layout()
    return fig


def _configure_axes(ax: plt.Axes, title: str, xlabel: str, ylabel: str) -> None:
    ax.set_title(title, fontsize=14, fontweight="bold")
    ax.set_xlabel(xlabel, fontsize=12)
    ax.set_ylabel(ylabel, fontsize=12)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")


def save_figure(fig: plt.Figure, path, dpi: int = 150) -> str:
    """
    Lưu biểu đồ ra file PNG và giải phóng figure

    Args:
        fig: matplotlib Figure object
        path: Đường dẫn file (.png)
        dpi: Độ phân giải

    Returns:
        Đường dẫn file đã lưu
    """
    path = Path(path)
    ensure_dir(path.parent)
    fig.savefig(path, dpi=dpi, bbox_inches="tight", facecolor="white", edgecolor="none")
    plt.close(fig)
    return str(path)
