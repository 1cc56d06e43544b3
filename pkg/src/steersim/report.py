"""Dependency-free SVG line charts for steering curves and ROC plots."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .metrics import RocCurve
from .steering import SteeringResult

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#7f7f7f", "#ff7f0e")
_W, _H = 640, 420
_L, _R, _T, _B = 70, 150, 40, 50


def _ticks_linear(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def _ticks_log(lo: float, hi: float) -> list[float]:
    return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1)]


def _fmt(v: float, log: bool) -> str:
    if log:
        e = round(math.log10(v))
        return f"1e{e}"
    return f"{v:g}"


def line_chart_svg(
    series: dict[str, tuple[list[float], list[float]]],
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    log_x: bool = False,
    log_y: bool = False,
) -> str:
    """Render named (x, y) series as an SVG document.

    Non-positive values on a log axis are dropped from that series.
    """
    tx = (lambda v: math.log10(v)) if log_x else float
    ty = (lambda v: math.log10(v)) if log_y else float
    pts: dict[str, list[tuple[float, float]]] = {}
    for name, (xs, ys) in series.items():
        keep = [
            (tx(x), ty(y))
            for x, y in zip(xs, ys)
            if (x > 0 or not log_x) and (y > 0 or not log_y) and math.isfinite(y)
        ]
        pts[name] = keep
    flat = [p for v in pts.values() for p in v]
    if not flat:
        flat = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in flat), max(p[0] for p in flat)
    y0, y1 = min(p[1] for p in flat), max(p[1] for p in flat)
    if log_y:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    pw, ph = _W - _L - _R, _H - _T - _B

    def sx(v):
        return _L + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return _T + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_L + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{_L}" y="{_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    xt = _ticks_log(x0, x1) if log_x else _ticks_linear(x0, x1)
    for v in xt:
        lv = math.log10(v) if log_x else v
        if lv < x0 - 1e-9 or lv > x1 + 1e-9:
            continue
        x = sx(lv)
        out.append(f'<line x1="{x:.1f}" y1="{_T + ph}" x2="{x:.1f}" y2="{_T + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{_T + ph + 16}" text-anchor="middle">{_fmt(v, log_x)}</text>')
    yt = _ticks_log(y0, y1) if log_y else _ticks_linear(y0, y1)
    for v in yt:
        lv = math.log10(v) if log_y else v
        if lv < y0 - 1e-9 or lv > y1 + 1e-9:
            continue
        y = sy(lv)
        out.append(f'<line x1="{_L - 4}" y1="{y:.1f}" x2="{_L + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{_L - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v, log_y)}</text>')
    out.append(f'<text x="{_L + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{_T + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_T + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (name, p) in enumerate(pts.items()):
        colour = _PALETTE[i % len(_PALETTE)]
        if p:
            path = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in p)
            out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="2"/>')
        ly = _T + 14 + 18 * i
        out.append(f'<line x1="{_L + pw + 12}" y1="{ly - 4}" x2="{_L + pw + 32}" y2="{ly - 4}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{_L + pw + 38}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def steering_svg(result: SteeringResult) -> str:
    series = {
        c.strategy: (list(c.fractions), list(c.offloaded_mean))
        for c in result.curves.values()
    }
    return line_chart_svg(
        series,
        title="Offloaded volume vs steered fraction",
        xlabel="fraction of devices steered",
        ylabel="offloaded bytes (mean)",
        log_x=True,
        log_y=True,
    )


def roc_svg(curves: dict[str, RocCurve]) -> str:
    series = {f"{k} (AUC {c.auc:.3f})": (list(c.fpr), list(c.tpr)) for k, c in curves.items()}
    series["chance"] = ([0.0, 1.0], [0.0, 1.0])
    return line_chart_svg(series, title="ROC", xlabel="false positive rate", ylabel="true positive rate")


def write_svg(svg: str, path: str | Path) -> None:
    Path(path).write_text(svg, encoding="utf-8")
