"""收敛曲线绘制 - 对数纵轴折线图，经 jinja2 模板输出 SVG"""

import logging
import math
from pathlib import Path
from typing import List, NamedTuple, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from .config import section

logger = logging.getLogger(__name__)

_CFG = section("plot")
WIDTH = int(_CFG.get("width", 720))
HEIGHT = int(_CFG.get("height", 480))
MARGIN = int(_CFG.get("margin", 56))
MAX_POINTS = int(_CFG.get("max_points", 2000))

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
TEMPLATES_DIR = Path(__file__).resolve().parent / "templates"

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    autoescape=select_autoescape(["svg", "xml", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
)


class Series(NamedTuple):
    label: str
    x: np.ndarray
    y: np.ndarray


def _positive(series: Series):
    x = np.asarray(series.x, dtype=float)
    y = np.asarray(series.y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (y > 0)
    x, y = x[keep], y[keep]
    if x.size > MAX_POINTS:
        idx = np.unique(np.linspace(0, x.size - 1, MAX_POINTS).astype(int))
        x, y = x[idx], y[idx]
    return x, y


def decade_ticks(lo: float, hi: float, max_ticks: int = 8) -> List[int]:
    """覆盖 [lo, hi] 的十进制指数刻度，过密时按整数步长抽稀。"""
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if b == a:
        b = a + 1
    step = max(1, math.ceil((b - a) / max_ticks))
    return list(range(a, b + 1, step))


def linear_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def render_convergence_svg(series: Sequence[Series], path: Path, x_label: str = "k",
                           y_label: str = "f − f*", title: str = "") -> Path:
    """把若干 (x, f−f*) 序列画在同一张对数纵轴图上。非正和非有限值不画。"""
    cleaned = [(s.label, *_positive(s)) for s in series]
    cleaned = [c for c in cleaned if c[1].size > 0]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
    if cleaned:
        x_lo = min(float(c[1].min()) for c in cleaned)
        x_hi = max(float(c[1].max()) for c in cleaned)
        y_lo = min(float(c[2].min()) for c in cleaned)
        y_hi = max(float(c[2].max()) for c in cleaned)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 1e-1, 1.0
    exps = decade_ticks(y_lo, y_hi)
    e_lo, e_hi = exps[0], max(exps[-1], math.ceil(math.log10(y_hi)))
    x_span = x_hi - x_lo if x_hi > x_lo else 1.0

    def px(x: float) -> float:
        return MARGIN + (x - x_lo) / x_span * plot_w

    def py(y: float) -> float:
        return MARGIN + (e_hi - math.log10(y)) / (e_hi - e_lo) * plot_h

    lines = []
    for i, (label, x, y) in enumerate(cleaned):
        points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x.tolist(), y.tolist()))
        lines.append({"label": label, "points": points, "color": PALETTE[i % len(PALETTE)]})

    context = {
        "width": WIDTH,
        "height": HEIGHT,
        "margin": MARGIN,
        "plot_w": plot_w,
        "plot_h": plot_h,
        "title": title,
        "x_label": x_label,
        "y_label": y_label,
        "lines": lines,
        "y_ticks": [{"pos": py(10.0 ** e), "label": f"1e{e}"} for e in exps if e_lo <= e <= e_hi],
        "x_ticks": [{"pos": px(v), "label": f"{v:g}"} for v in linear_ticks(x_lo, x_hi)],
    }
    svg = _env.get_template("convergence.svg.j2").render(**context)
    path.write_text(svg, encoding="utf-8")
    logger.info(f"收敛图已写出: {path}（{len(lines)} 条曲线）")
    return path
