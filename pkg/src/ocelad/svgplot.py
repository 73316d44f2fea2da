"""Minimal deterministic SVG line charts (no plotting dependencies).

Coordinates are formatted with fixed precision so the same data always
produces byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

from .metric import InvalidInputError

WIDTH, HEIGHT = 720, 440
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class Series:
    label: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or not self.xs:
            raise InvalidInputError(f"series {self.label!r} needs matching nonempty x/y")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def line_chart(
    series: list[Series],
    title: str = "",
    xlabel: str = "t",
    ylabel: str = "",
    markers: tuple[float, ...] = (),
    y_range: tuple[float, float] | None = None,
) -> str:
    """Render series as one polyline each, with optional vertical marker lines."""
    if not series:
        raise InvalidInputError("no series to plot")
    x_lo = min(min(s.xs) for s in series)
    x_hi = max(max(s.xs) for s in series)
    if y_range is not None:
        y_lo, y_hi = y_range
    else:
        y_lo = min(min(s.ys) for s in series)
        y_hi = max(max(s.ys) for s in series)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )
    for xv in _ticks(x_lo, x_hi):
        parts.append(
            f'<text x="{_fmt(sx(xv))}" y="{HEIGHT - MARGIN_BOTTOM + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{xv:g}</text>'
        )
    for yv in _ticks(y_lo, y_hi):
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(sy(yv) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{yv:.3g}</text>'
        )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    if ylabel:
        parts.append(
            f'<text x="16" y="{HEIGHT // 2}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12" transform="rotate(-90 16 {HEIGHT // 2})">{ylabel}</text>'
        )
    for mx in markers:
        if x_lo <= mx <= x_hi:
            parts.append(
                f'<line class="marker" x1="{_fmt(sx(mx))}" y1="{MARGIN_TOP}" '
                f'x2="{_fmt(sx(mx))}" y2="{HEIGHT - MARGIN_BOTTOM}" '
                'stroke="#888888" stroke-width="1" stroke-dasharray="5,4"/>'
            )
    for k, s in enumerate(series):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(s.xs, s.ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT + 10}" y="{MARGIN_TOP + 16 + 16 * k}" fill="{color}" '
            f'font-family="sans-serif" font-size="12">{s.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
