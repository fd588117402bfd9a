"""Static SVG grouped-bar charts of square vs asymmetric power per layer.

Output is plain text built from fixed-precision numbers, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import textwrap
from html import escape
from typing import Sequence

from .power import EnergyReport

SQUARE_COLOR = "#7f8c8d"
ASYM_COLOR = "#2e86c1"

_PANEL_W = 560
_PANEL_H = 260
_MARGIN_L = 70
_MARGIN_T = 40
_MARGIN_B = 50


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _panel(
    x0: float,
    y0: float,
    title: str,
    ylabel: str,
    groups: Sequence[tuple[str, float, float]],
) -> list[str]:
    plot_w = _PANEL_W - _MARGIN_L - 20
    plot_h = _PANEL_H - _MARGIN_T - _MARGIN_B
    top = max(max(sq, asym) for _, sq, asym in groups) or 1.0
    scale = plot_h / (top * 1.15)
    base_y = y0 + _MARGIN_T + plot_h
    left = x0 + _MARGIN_L
    slot = plot_w / len(groups)
    bar_w = min(28.0, slot * 0.35)

    out = [
        f'<text x="{x0 + _PANEL_W / 2:.1f}" y="{y0 + 22:.1f}" text-anchor="middle" font-size="14" font-weight="bold">{escape(title)}</text>',
        f'<line x1="{left:.1f}" y1="{base_y:.1f}" x2="{left + plot_w:.1f}" y2="{base_y:.1f}" stroke="black"/>',
        f'<line x1="{left:.1f}" y1="{y0 + _MARGIN_T:.1f}" x2="{left:.1f}" y2="{base_y:.1f}" stroke="black"/>',
        f'<text x="{x0 + 16:.1f}" y="{y0 + _MARGIN_T + plot_h / 2:.1f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 {x0 + 16:.1f} {y0 + _MARGIN_T + plot_h / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for i, (label, sq, asym) in enumerate(groups):
        cx = left + slot * (i + 0.5)
        for offset, value, color in ((-bar_w, sq, SQUARE_COLOR), (0.0, asym, ASYM_COLOR)):
            h = value * scale
            bx = cx + offset
            out.append(
                f'<rect x="{bx:.1f}" y="{base_y - h:.1f}" width="{bar_w:.1f}" height="{h:.1f}" fill="{color}"/>'
            )
            out.append(
                f'<text x="{bx + bar_w / 2:.1f}" y="{base_y - h - 3:.1f}" font-size="8" text-anchor="middle">{_fmt(value)}</text>'
            )
        saving = 0.0 if sq == 0 else 1.0 - asym / sq
        out.append(
            f'<text x="{cx:.1f}" y="{base_y + 14:.1f}" font-size="11" text-anchor="middle">{escape(label)}</text>'
        )
        out.append(
            f'<text x="{cx:.1f}" y="{base_y + 27:.1f}" font-size="9" text-anchor="middle" fill="{ASYM_COLOR}">{0.0 - saving * 100:+.2f}%</text>'
        )
    return out


def energy_report_svg(report: EnergyReport, title: str = "Square vs asymmetric PE floorplan") -> str:
    """Two panels: interconnect power and total power, per layer plus the average."""
    groups = [(l.name, l.power_square, l.power_asym) for l in report.layers]
    groups.append(("Avg", report.average_power_square, report.average_power_asym))
    f = report.interconnect_fraction
    totals = [(name, sq / f, sq / f - (sq - asym)) for name, sq, asym in groups]

    caveat_lines = textwrap.wrap(report.caveat, 150)
    width = _PANEL_W * 2
    height = _PANEL_H + 66 + 14 * len(caveat_lines)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="15">{escape(title)} '
        f'(W/H = {report.ratio:.4f})</text>',
    ]
    parts += _panel(0, 20, "Interconnect power", "toggle-length per step", groups)
    parts += _panel(_PANEL_W, 20, "Total power", f"normalized (interconnect share {f:.3g})", totals)
    legend_y = _PANEL_H + 38
    parts += [
        f'<rect x="{_MARGIN_L}" y="{legend_y}" width="12" height="12" fill="{SQUARE_COLOR}"/>',
        f'<text x="{_MARGIN_L + 16}" y="{legend_y + 10}" font-size="11">square PE</text>',
        f'<rect x="{_MARGIN_L + 100}" y="{legend_y}" width="12" height="12" fill="{ASYM_COLOR}"/>',
        f'<text x="{_MARGIN_L + 116}" y="{legend_y + 10}" font-size="11">asymmetric PE</text>',
    ]
    parts += [
        f'<text x="{_MARGIN_L}" y="{legend_y + 30 + 14 * i}" font-size="10" fill="#555">{escape(line)}</text>'
        for i, line in enumerate(caveat_lines)
    ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
