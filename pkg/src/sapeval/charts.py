"""Dependency-free SVG bar charts for the report command."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

_PALETTE = ("#4878a8", "#e08840", "#58a058", "#b05050", "#8868b0")


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def grouped_bar_chart(
    labels: Sequence[str],
    series: Mapping[str, Sequence[float]],
    title: str = "",
    y_label: str = "",
    width: int = 960,
    height: int = 420,
    log_scale: bool = False,
) -> str:
    """Render grouped vertical bars, one group per label, as an SVG string."""
    names = list(series)
    for name in names:
        if len(series[name]) != len(labels):
            raise ValueError(f"series {name!r} length differs from labels")
    values = [v for name in names for v in series[name]]
    if not values:
        raise ValueError("nothing to plot")
    v_max = max(max(values), 1e-12)

    left, right, top, bottom = 56, 16, 34, 64
    plot_w, plot_h = width - left - right, height - top - bottom
    n_groups, n_series = len(labels), len(names)
    group_w = plot_w / n_groups
    bar_w = group_w * 0.8 / n_series

    def bar_height(v: float) -> float:
        if log_scale:
            if v <= 0:
                return 0.0
            return plot_h * math.log10(v + 1.0) / math.log10(v_max + 1.0)
        return plot_h * v / v_max

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-size="14">{_esc(title)}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="14" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {top + plot_h / 2:.1f})">{_esc(y_label)}</text>'
        )
    # y axis with four gridlines
    for i in range(5):
        frac = i / 4
        y = top + plot_h * (1 - frac)
        if log_scale:
            tick = (v_max + 1.0) ** frac - 1.0
        else:
            tick = v_max * frac
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" y2="{y:.1f}" '
            'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{tick:.3g}</text>'
        )
    for g, label in enumerate(labels):
        x0 = left + g * group_w + group_w * 0.1
        for s, name in enumerate(names):
            v = series[name][g]
            h = bar_height(v)
            x = x0 + s * bar_w
            y = top + plot_h - h
            color = _PALETTE[s % len(_PALETTE)]
            parts.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{h:.1f}" '
                f'fill="{color}"><title>{_esc(f"{name} {label}: {v:.4g}")}</title></rect>'
            )
        cx = left + g * group_w + group_w / 2
        parts.append(
            f'<text x="{cx:.1f}" y="{top + plot_h + 12:.1f}" text-anchor="end" '
            f'transform="rotate(-45 {cx:.1f} {top + plot_h + 12:.1f})">{_esc(label)}</text>'
        )
    # legend
    for s, name in enumerate(names):
        x = left + s * 140
        y = height - 14
        color = _PALETTE[s % len(_PALETTE)]
        parts.append(f'<rect x="{x}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{x + 14}" y="{y}">{_esc(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
