"""Minimal hand-rolled SVG line plots for the experiment summaries.

Rendering is a pure function of the parsed CSV content: fixed canvas, fixed
palette, series sorted by label, all coordinates formatted to two decimals.
The same CSV therefore always produces the same SVG bytes.
"""

from __future__ import annotations

from .simulate import read_csv

__all__ = ["render_lines", "emit_plot", "PLOT_KINDS"]

_WIDTH, _HEIGHT = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 170, 40, 60
_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2",
]

# kind -> (x column, y column, series label columns)
PLOT_KINDS = {
    "fig2a": ("p", "mean_rmse", ("sigma",)),
    "fig2b": ("alpha", "mean_sin_theta_rescaled", ("mode",)),
    "fig3": ("alpha", "mean_rmse", ("algorithm",)),
    "fig4": ("alpha", "mean_err", ("algorithm", "rank")),
}


def _f(x) -> str:
    return f"{x:.2f}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_lines(series: dict, x_label: str, y_label: str, title: str = "") -> bytes:
    """Render ``{label: [(x, y), ...]}`` as an SVG line chart."""
    if not series or all(len(pts) == 0 for pts in series.values()):
        raise ValueError("no data points to plot")
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + plot_w * (x - x_lo) / (x_hi - x_lo)

    def sy(y):
        return _MARGIN_T + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + plot_h}" x2="{_MARGIN_L + plot_w}" '
        f'y2="{_MARGIN_T + plot_h}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_MARGIN_T + plot_h}" stroke="black"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{title}</text>'
        )
    for tick in _ticks(x_lo, x_hi):
        x = sx(tick)
        parts.append(
            f'<line x1="{_f(x)}" y1="{_MARGIN_T + plot_h}" x2="{_f(x)}" '
            f'y2="{_MARGIN_T + plot_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_f(x)}" y="{_MARGIN_T + plot_h + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:.4g}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        y = sy(tick)
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{_f(y)}" x2="{_MARGIN_L}" '
            f'y2="{_f(y)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{_f(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:.4g}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w // 2}" y="{_HEIGHT - 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{_MARGIN_T + plot_h // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h // 2})">{y_label}</text>'
    )
    for idx, label in enumerate(sorted(series)):
        pts = sorted(series[label])
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in pts)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
        )
        for x, y in pts:
            parts.append(
                f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="2.5" fill="{color}"/>'
            )
        ly = _MARGIN_T + 16 * idx + 8
        lx = _MARGIN_L + plot_w + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 24}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def emit_plot(csv_path, kind: str, out_path) -> str:
    """Render one summary CSV to an SVG file; axis labels come from the header."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    x_col, y_col, label_cols = PLOT_KINDS[kind]
    _, fieldnames, rows = read_csv(csv_path)
    for col in (x_col, y_col) + label_cols:
        if col not in fieldnames:
            raise ValueError(f"{csv_path}: column {col!r} required for kind {kind!r}")
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    series = {}
    for row in rows:
        label = ", ".join(f"{c}={row[c]}" for c in label_cols)
        series.setdefault(label, []).append((float(row[x_col]), float(row[y_col])))
    payload = render_lines(series, x_label=x_col, y_label=y_col, title=kind)
    with open(out_path, "wb") as fh:
        fh.write(payload)
    return str(out_path)
