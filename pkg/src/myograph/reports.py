"""Report emission: CSV tables, versioned JSON documents, and SVG plots.

SVG is emitted as plain text (no plotting dependency) so outputs are
byte-stable and diffable in tests.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .data import EXERCISES, Exercise
from .evaluation import RmseColumn, SimilarityMatrix, TemporalTable, TransferCurve

REPORT_SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def rmse_table_csv(path, columns: list[RmseColumn]) -> None:
    """Rows: 20 exercises + Mean; one column per (method, protocol)."""
    header = ["exercise"] + [f"{c.method}:{c.protocol}" for c in columns]
    rows = []
    for ex in EXERCISES:
        row = [ex.name]
        for c in columns:
            row.append(_fmt(c.values[ex]) if ex in c.values else "")
        rows.append(row)
    rows.append(["Mean"] + [_fmt(c.mean) for c in columns])
    write_csv(path, header, rows)


def temporal_table_csv(path, table: TemporalTable) -> None:
    header = ["method"] + [table.label(n) for n in table.lengths]
    rows = []
    for method, by_len in table.values.items():
        rows.append([method] + [_fmt(by_len[n]) for n in table.lengths])
    write_csv(path, header, rows)


def transfer_curve_csv(path, curve: TransferCurve) -> None:
    header = ["exercise_count", "fine_tuned", "from_scratch"]
    rows = [
        [k, _fmt(curve.fine_tuned[k]), _fmt(curve.from_scratch[k])] for k in curve.k_grid
    ]
    write_csv(path, header, rows)


def similarity_matrix_csv(path, sim: SimilarityMatrix, order: list[Exercise] | None = None) -> None:
    order = order or list(EXERCISES)
    idx = [int(e) for e in order]
    m = sim.matrix[np.ix_(idx, idx)]
    header = ["query\\retrieved"] + [e.name for e in order]
    rows = [[order[i].name] + [_fmt(v) for v in m[i]] for i in range(len(order))]
    write_csv(path, header, rows)


def loss_curve_csv(path, loss_curve: list[float], val_curve: list[tuple[int, float]]) -> None:
    write_csv(path, ["step", "train_mse"], [[i + 1, _fmt(v)] for i, v in enumerate(loss_curve)])
    val_path = str(path).replace(".csv", "_val.csv")
    write_csv(val_path, ["step", "val_rmse"], [[s, _fmt(v)] for s, v in val_curve])


def write_json_report(path, experiment: str, payload: dict) -> None:
    doc = {"schema": f"myograph/{experiment}/v{REPORT_SCHEMA_VERSION}", **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def rmse_columns_payload(columns: list[RmseColumn]) -> dict:
    return {
        "columns": [
            {
                "method": c.method,
                "protocol": c.protocol,
                "per_exercise": {ex.name: c.values[ex] for ex in c.values},
                "mean": c.mean,
                "flagged": [ex.name for ex in c.flagged],
            }
            for c in columns
        ]
    }


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

# compact viridis-like ramp; linear interpolation between stops
_RAMP = [
    (0.0, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.0, (253, 231, 37)),
]


def _color(v: float) -> str:
    v = min(max(v, 0.0), 1.0)
    for (p0, c0), (p1, c1) in zip(_RAMP[:-1], _RAMP[1:]):
        if v <= p1:
            u = (v - p0) / (p1 - p0) if p1 > p0 else 0.0
            rgb = tuple(round(a + (b - a) * u) for a, b in zip(c0, c1))
            return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"
    return "rgb(253,231,37)"


def _svg_text(x, y, text, size=10, anchor="start", rotate=None) -> str:
    transform = f' transform="rotate(-60 {x} {y})"' if rotate else ""
    return (
        f'<text x="{x}" y="{y}" font-size="{size}" font-family="sans-serif" '
        f'text-anchor="{anchor}"{transform}>{text}</text>'
    )


def heatmap_svg(
    path, matrix: np.ndarray, labels: list[str], title: str, cell: int = 22
) -> None:
    n = matrix.shape[0]
    left, top = 110, 90
    width = left + n * cell + 20
    height = top + n * cell + 20
    vmax = max(matrix.max(), 1e-9)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        _svg_text(left, 20, title, size=13),
    ]
    for i in range(n):
        for j in range(n):
            x, y = left + j * cell, top + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_color(matrix[i, j] / vmax)}"/>'
            )
    for i, label in enumerate(labels):
        parts.append(_svg_text(left - 4, top + i * cell + cell * 0.7, label, anchor="end"))
        parts.append(
            _svg_text(left + i * cell + cell * 0.6, top - 6, label, anchor="start", rotate=True)
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def line_plot_svg(
    path,
    series: dict[str, tuple[list[float], list[float]]],
    title: str,
    x_label: str,
    y_label: str,
    width: int = 480,
    height: int = 320,
) -> None:
    left, right, top, bottom = 60, 20, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys if np.isfinite(y)]
    if not xs_all or not ys_all:
        raise ValueError("line_plot_svg: nothing to plot")
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1
    pad = 0.08 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return left + plot_w * (x - x0) / (x1 - x0)

    def sy(y):
        return top + plot_h * (1.0 - (y - y0) / (y1 - y0))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        _svg_text(left, 22, title, size=13),
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        _svg_text(left + plot_w / 2, height - 12, x_label, anchor="middle"),
        _svg_text(14, top + plot_h / 2, y_label, anchor="middle", rotate=True),
    ]
    for tick in np.linspace(y0, y1, 5):
        y = sy(tick)
        parts.append(f'<line x1="{left - 3}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(_svg_text(left - 6, y + 3, f"{tick:.2f}", size=9, anchor="end"))
    for tick in sorted(set(xs_all)):
        x = sx(tick)
        parts.append(
            f'<line x1="{x:.1f}" y1="{top + plot_h}" x2="{x:.1f}" y2="{top + plot_h + 3}" stroke="black"/>'
        )
        parts.append(_svg_text(x, top + plot_h + 14, f"{tick:g}", size=9, anchor="middle"))
    for idx, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[idx % len(colors)]
        pts = " ".join(
            f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys) if np.isfinite(y)
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 + 14 * idx
        parts.append(f'<line x1="{left + plot_w - 90}" y1="{ly - 3}" x2="{left + plot_w - 70}" y2="{ly - 3}" stroke="{color}" stroke-width="2"/>')
        parts.append(_svg_text(left + plot_w - 66, ly, name, size=10))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
