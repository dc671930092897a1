"""Self-contained SVG reward-curve plots, no plotting dependencies.

Consumes metrics CSVs in the documented schema and emits three figures:
the total-reward curve per run, red/green team curves for every run, and
per-red-agent small multiples.  Curves are centered moving averages over
the configured smoothing window.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .metrics import read_metrics_csv

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#17becf",
    "#bcbd22",
    "#7f7f7f",
]


def moving_average(values, window: int) -> np.ndarray:
    """Centered moving average; edge windows shrink to the available data."""
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    if window == 1 or len(v) == 0:
        return v.copy()
    n = len(v)
    idx = np.arange(n)
    lo = np.maximum(0, idx - (window - 1) // 2)
    hi = np.minimum(n, idx + window // 2 + 1)
    csum = np.concatenate([[0.0], np.cumsum(v)])
    return (csum[hi] - csum[lo]) / (hi - lo)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    return list(np.linspace(lo, hi, count))


class _Panel:
    """One cartesian line chart rendered into an SVG group."""

    def __init__(self, x, y, width, height, title, x_label, y_label):
        self.x, self.y = x, y
        self.width, self.height = width, height
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.series: list[tuple[str, np.ndarray, np.ndarray, str]] = []

    def add_series(self, label, xs, ys, color):
        self.series.append((label, np.asarray(xs, float), np.asarray(ys, float), color))

    def render(self, legend: bool = True) -> str:
        m_left, m_right, m_top, m_bottom = 58, 14, 30, 42
        pw = self.width - m_left - m_right
        ph = self.height - m_top - m_bottom
        x0, y0 = self.x + m_left, self.y + m_top

        xs_all = np.concatenate([s[1] for s in self.series if len(s[1])] or [np.zeros(1)])
        ys_all = np.concatenate([s[2] for s in self.series if len(s[2])] or [np.zeros(1)])
        xmin, xmax = float(xs_all.min()), float(xs_all.max())
        ymin, ymax = float(ys_all.min()), float(ys_all.max())
        if xmin == xmax:
            xmin, xmax = xmin - 1.0, xmax + 1.0
        if ymin == ymax:
            ymin, ymax = ymin - 1.0, ymax + 1.0
        pad = 0.04 * (ymax - ymin)
        ymin, ymax = ymin - pad, ymax + pad

        def px(v):
            return x0 + (v - xmin) / (xmax - xmin) * pw

        def py(v):
            return y0 + ph - (v - ymin) / (ymax - ymin) * ph

        parts = [f'<g font-family="sans-serif" font-size="11">']
        parts.append(
            f'<text x="{self.x + self.width / 2:.1f}" y="{self.y + 16:.1f}" '
            f'text-anchor="middle" font-size="13">{escape(self.title)}</text>'
        )
        # gridlines and tick labels
        for tv in _ticks(ymin, ymax):
            yy = py(tv)
            parts.append(
                f'<line x1="{x0:.1f}" y1="{yy:.1f}" x2="{x0 + pw:.1f}" y2="{yy:.1f}" '
                f'stroke="#dddddd" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{x0 - 6:.1f}" y="{yy + 3.5:.1f}" text-anchor="end">'
                f"{escape(_fmt(tv))}</text>"
            )
        for tv in _ticks(xmin, xmax):
            xx = px(tv)
            parts.append(
                f'<line x1="{xx:.1f}" y1="{y0 + ph:.1f}" x2="{xx:.1f}" '
                f'y2="{y0 + ph + 4:.1f}" stroke="#444444" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{xx:.1f}" y="{y0 + ph + 16:.1f}" text-anchor="middle">'
                f"{escape(_fmt(tv))}</text>"
            )
        # axes
        parts.append(
            f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x0:.1f}" y2="{y0 + ph:.1f}" '
            f'stroke="#444444" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{x0:.1f}" y1="{y0 + ph:.1f}" x2="{x0 + pw:.1f}" '
            f'y2="{y0 + ph:.1f}" stroke="#444444" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x0 + pw / 2:.1f}" y="{self.y + self.height - 8:.1f}" '
            f'text-anchor="middle">{escape(self.x_label)}</text>'
        )
        parts.append(
            f'<text x="{self.x + 14:.1f}" y="{y0 + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 {self.x + 14:.1f} {y0 + ph / 2:.1f})">'
            f"{escape(self.y_label)}</text>"
        )
        # curves
        for label, xs, ys, color in self.series:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                f'points="{pts}"/>'
            )
        if legend and self.series:
            lx = x0 + pw - 8
            ly = y0 + 8
            for i, (label, _, _, color) in enumerate(self.series):
                yy = ly + i * 15
                parts.append(
                    f'<line x1="{lx - 130:.1f}" y1="{yy:.1f}" x2="{lx - 110:.1f}" '
                    f'y2="{yy:.1f}" stroke="{color}" stroke-width="2"/>'
                )
                parts.append(
                    f'<text x="{lx - 105:.1f}" y="{yy + 3.5:.1f}">{escape(label)}</text>'
                )
        parts.append("</g>")
        return "\n".join(parts)


def _svg_document(width: int, height: int, body: str) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


def _infer_num_red(header: list[str], matrix: np.ndarray) -> int:
    """Recover the red-team column count from the exact prefix-sum identity
    between agent columns and the red_team column."""
    agent_count = len(header) - 5
    red_col = 1 + agent_count
    candidates = set(range(agent_count + 1))
    for row in matrix:
        prefix = 0.0
        row_ok = set()
        for r in range(agent_count + 1):
            if r > 0:
                prefix = prefix + row[r]
            if prefix == row[red_col]:
                row_ok.add(r)
        candidates &= row_ok
    if len(candidates) == 1:
        return candidates.pop()
    raise ValueError(
        "cannot infer the red-team size from the CSV; pass num_red explicitly"
    )


def emit_plots(
    csv_paths,
    smoothing_window: int,
    out_dir,
    labels: list[str] | None = None,
    num_red: int | None = None,
) -> list[Path]:
    """Emit total_reward.svg, team_rewards.svg, and red_agent_rewards.svg."""
    if smoothing_window < 1:
        raise ValueError("smoothing_window must be >= 1")
    csv_paths = [Path(p) for p in csv_paths]
    if not csv_paths:
        raise ValueError("at least one CSV is required")
    if labels is None:
        labels = [p.stem for p in csv_paths]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tables = []
    for path in csv_paths:
        header, matrix = read_metrics_csv(path)
        if matrix.shape[0] == 0:
            raise ValueError(f"{path} has no data rows to plot")
        tables.append((header, matrix))
    agent_count = len(tables[0][0]) - 5
    if num_red is None:
        num_red = _infer_num_red(*tables[0])

    width, height = 880, 480
    written = []

    # total reward, one curve per run
    panel = _Panel(0, 0, width, height, "Total reward per episode", "episode", "reward")
    for i, ((header, matrix), label) in enumerate(zip(tables, labels)):
        episodes = matrix[:, 0]
        total = moving_average(matrix[:, 1 + agent_count + 2], smoothing_window)
        panel.add_series(label, episodes, total, PALETTE[i % len(PALETTE)])
    path = out_dir / "total_reward.svg"
    path.write_text(_svg_document(width, height, panel.render()), encoding="utf-8")
    written.append(path)

    # red/green team curves for every run
    panel = _Panel(0, 0, width, height, "Team rewards per episode", "episode", "reward")
    color_i = 0
    for (header, matrix), label in zip(tables, labels):
        episodes = matrix[:, 0]
        red = moving_average(matrix[:, 1 + agent_count], smoothing_window)
        green = moving_average(matrix[:, 1 + agent_count + 1], smoothing_window)
        panel.add_series(f"{label} red", episodes, red, PALETTE[color_i % len(PALETTE)])
        panel.add_series(
            f"{label} green", episodes, green, PALETTE[(color_i + 1) % len(PALETTE)]
        )
        color_i += 2
    path = out_dir / "team_rewards.svg"
    path.write_text(_svg_document(width, height, panel.render()), encoding="utf-8")
    written.append(path)

    # per-red-agent small multiples
    cols = 2
    rows = max(1, math.ceil(num_red / cols))
    panel_w, panel_h = 440, 260
    fig_w, fig_h = cols * panel_w, rows * panel_h
    body = []
    for agent in range(num_red):
        px = (agent % cols) * panel_w
        py = (agent // cols) * panel_h
        sub = _Panel(
            px, py, panel_w, panel_h, f"Red agent {agent}", "episode", "reward"
        )
        for i, ((header, matrix), label) in enumerate(zip(tables, labels)):
            episodes = matrix[:, 0]
            values = moving_average(matrix[:, 1 + agent], smoothing_window)
            sub.add_series(label, episodes, values, PALETTE[i % len(PALETTE)])
        body.append(sub.render(legend=(agent == 0)))
    path = out_dir / "red_agent_rewards.svg"
    path.write_text(
        _svg_document(fig_w, fig_h, "\n".join(body)), encoding="utf-8"
    )
    written.append(path)
    return written
