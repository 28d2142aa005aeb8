"""Minimal native SVG line charts; fixed canvas, fixed formatting, no deps.

Output is deterministic down to the byte for identical inputs: coordinates
are always rendered with two decimals and series keep their given order.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

WIDTH, HEIGHT = 800, 500
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 65, 170, 45, 55

PALETTE = (
    "#1b6ca8",
    "#d1495b",
    "#2e8b57",
    "#e09f3e",
    "#7b2d8b",
    "#00798c",
    "#6b4226",
    "#3d405b",
)

Series = Tuple[str, Sequence[Tuple[float, float]]]


def _fmt(v: float) -> str:
    return "%.2f" % v


def _tick_label(v: float) -> str:
    return "%g" % round(v, 6)


def line_chart(
    series: Sequence[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    y_range: Optional[Tuple[float, float]] = (0.0, 1.0),
) -> str:
    if not series or all(len(pts) == 0 for _, pts in series):
        raise ValueError("cannot chart empty series")
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    x_min, x_max = min(xs), max(xs)
    if x_min == x_max:
        x_min, x_max = x_min - 1.0, x_max + 1.0
    if y_range is None:
        y_min, y_max = min(ys), max(ys)
        if y_min == y_max:
            y_min, y_max = y_min - 1.0, y_max + 1.0
    else:
        y_min, y_max = y_range

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h

    x_ticks = sorted(set(xs))
    if len(x_ticks) > 15:
        step = (x_max - x_min) / 6.0
        x_ticks = [x_min + i * step for i in range(7)]
    y_ticks = [y_min + i * (y_max - y_min) / 5.0 for i in range(6)]

    parts: List[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
    parts.append(
        f'<text x="{WIDTH // 2}" y="25" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{_escape(title)}</text>'
    )

    for yt in y_ticks:
        yy = _fmt(py(yt))
        parts.append(
            f'<line x1="{MARGIN_LEFT}" y1="{yy}" x2="{WIDTH - MARGIN_RIGHT}" y2="{yy}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{yy}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="11">{_tick_label(yt)}</text>'
        )
    for xt in x_ticks:
        xx = _fmt(px(xt))
        y0 = MARGIN_TOP + plot_h
        parts.append(
            f'<line x1="{xx}" y1="{y0}" x2="{xx}" y2="{y0 + 5}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{xx}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_tick_label(xt)}</text>'
        )

    parts.append(
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_escape(xlabel)}</text>'
    )
    parts.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h / 2:.0f})">{_escape(ylabel)}</text>'
    )

    for i, (label, pts) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
        if len(pts) > 1:
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        for x, y in pts:
            parts.append(
                f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>'
            )
        ly = MARGIN_TOP + 12 + i * 18
        lx = WIDTH - MARGIN_RIGHT + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{_escape(label)}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
