"""Deterministic SVG charts.

Every chart records its linear scales on the root element as
``data-x-domain``/``data-x-range`` and ``data-y-domain``/``data-y-range`` so
that plotted values can be recovered from pixel coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .analytics import boxplot_stats
from .exceptions import PlotError

KINDS = ("scatter_with_fit", "boxplot_grid", "coefficient_dotplot", "bar_with_ci")
KIND_ALIASES = {"scatter": "scatter_with_fit", "boxplot": "boxplot_grid", "box": "boxplot_grid",
                "dotplot": "coefficient_dotplot", "coef": "coefficient_dotplot", "bar": "bar_with_ci"}
PARTY_COLORS = {"D": "blue", "R": "red", "I": "gray"}
PARTY_NAMES = {"D": "Democrat", "R": "Republican", "I": "Independent"}
_PALETTE = ("black", "green", "purple", "orange", "teal", "brown")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 130, 40, 60


@dataclass(frozen=True)
class PlotSpec:
    """What to draw and from which columns.

    ``y`` is a tuple of columns; box-plot grids draw one group per column and
    the other kinds use only the first.  ``x`` is the horizontal variable for
    scatter plots and the category column otherwise.  ``by`` splits rows
    into coloured series.
    """

    kind: str
    x: str | None = None
    y: tuple = ()
    by: str | None = None
    low: str = "ci_low"
    high: str = "ci_high"
    x_label: str = ""
    y_label: str = ""
    title: str = ""

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise PlotError(f"unknown plot kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        object.__setattr__(self, "kind", kind)
        y = (self.y,) if isinstance(self.y, str) else tuple(self.y)
        if not y:
            raise PlotError("at least one y column is required")
        object.__setattr__(self, "y", y)
        if kind != "boxplot_grid" and not self.x:
            raise PlotError(f"{kind} needs an x column")


class LinearScale:
    def __init__(self, domain, range_):
        self.domain = tuple(float(v) for v in domain)
        self.range = tuple(float(v) for v in range_)

    def __call__(self, v: float) -> float:
        (d0, d1), (r0, r1) = self.domain, self.range
        return r0 + (float(v) - d0) * (r1 - r0) / (d1 - d0)

    def invert(self, px: float) -> float:
        (d0, d1), (r0, r1) = self.domain, self.range
        return d0 + (float(px) - r0) * (d1 - d0) / (r1 - r0)


def _padded(values, include_zero=False):
    lo, hi = min(values), max(values)
    if include_zero:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _num(v: float) -> str:
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _attrs(**kw) -> str:
    parts = []
    for k, v in kw.items():
        if v is None:
            continue
        name = k.rstrip("_").replace("_", "-")
        parts.append(f"{name}={quoteattr(_num(v) if isinstance(v, float) else str(v))}")
    return " ".join(parts)


def _el(tag: str, **kw) -> str:
    return f"<{tag} {_attrs(**kw)}/>"


def _float(row: Mapping, column: str):
    if column not in row:
        raise PlotError(f"column {column!r} not in data")
    v = row[column]
    if v is None or (isinstance(v, str) and v.strip() == ""):
        return None
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise PlotError(f"column {column!r} holds non-numeric value {v!r}") from None
    return f if math.isfinite(f) else None


def series_color(name: str, index: int) -> str:
    return PARTY_COLORS.get(name) or _PALETTE[index % len(_PALETTE)]


def _split(rows, by):
    if by is None:
        return {"all": list(rows)}
    out: dict = {}
    for r in rows:
        if by not in r:
            raise PlotError(f"column {by!r} not in data")
        out.setdefault(str(r[by]), []).append(r)
    return dict(sorted(out.items()))


class _Canvas:
    def __init__(self, spec: PlotSpec, xs: LinearScale, ys: LinearScale, x_domain_kind="linear"):
        self.spec, self.xs, self.ys = spec, xs, ys
        self.body: list = []
        self.x_kind = x_domain_kind

    def axes(self, x_ticks=None):
        x0, x1 = LEFT, WIDTH - RIGHT
        y0, y1 = HEIGHT - BOTTOM, TOP
        out = [_el("line", class_="axis", x1=float(x0), y1=float(y0), x2=float(x1), y2=float(y0), stroke="black"),
               _el("line", class_="axis", x1=float(x0), y1=float(y0), x2=float(x0), y2=float(y1), stroke="black")]
        for v in _ticks(self.ys.domain):
            py = self.ys(v)
            out.append(_el("line", class_="tick", x1=float(x0 - 4), y1=py, x2=float(x0), y2=py, stroke="black"))
            out.append(f"<text {_attrs(x=float(x0 - 6), y=py + 4.0, text_anchor='end', font_size=10)}>"
                       f"{escape(_label(v))}</text>")
        if x_ticks is None:
            x_ticks = [(self.xs(v), _label(v)) for v in _ticks(self.xs.domain)]
        for px, text in x_ticks:
            out.append(_el("line", class_="tick", x1=px, y1=float(y0), x2=px, y2=float(y0 + 4), stroke="black"))
            out.append(f"<text {_attrs(x=px, y=float(y0 + 16), text_anchor='middle', font_size=10)}>"
                       f"{escape(text)}</text>")
        s = self.spec
        out.append(f"<text {_attrs(x=float((x0 + x1) / 2), y=float(HEIGHT - 15), text_anchor='middle', font_size=12)}>"
                   f"{escape(s.x_label or s.x or '')}</text>")
        ylab = s.y_label or ", ".join(s.y)
        out.append(f"<text {_attrs(x=15.0, y=float((y0 + y1) / 2), text_anchor='middle', font_size=12, transform=f'rotate(-90 15 {(y0 + y1) / 2:g})')}>"
                   f"{escape(ylab)}</text>")
        if s.title:
            out.append(f"<text {_attrs(x=float(WIDTH / 2), y=20.0, text_anchor='middle', font_size=14)}>"
                       f"{escape(s.title)}</text>")
        self.body = out + self.body

    def legend(self, names):
        x = WIDTH - RIGHT + 15
        for i, name in enumerate(names):
            y = TOP + 18 * i
            self.body.append(f'<g class="legend" data-series={quoteattr(name)}>'
                             + _el("rect", x=float(x), y=float(y), width=10.0, height=10.0, fill=series_color(name, i))
                             + f"<text {_attrs(x=float(x + 15), y=float(y + 9), font_size=10)}>"
                             f"{escape(PARTY_NAMES.get(name, name))}</text></g>")

    def render(self) -> str:
        s = self.spec
        root = _attrs(xmlns="http://www.w3.org/2000/svg", version="1.1", width=WIDTH, height=HEIGHT,
                      viewBox=f"0 0 {WIDTH} {HEIGHT}", data_kind=s.kind,
                      data_x_domain=" ".join(repr(v) for v in self.xs.domain) if self.x_kind == "linear" else None,
                      data_x_range=" ".join(repr(v) for v in self.xs.range) if self.x_kind == "linear" else None,
                      data_y_domain=" ".join(repr(v) for v in self.ys.domain),
                      data_y_range=" ".join(repr(v) for v in self.ys.range))
        lines = ['<?xml version="1.0" encoding="UTF-8" standalone="no"?>', f"<svg {root}>",
                 _el("rect", x=0.0, y=0.0, width=float(WIDTH), height=float(HEIGHT), fill="white")]
        lines += self.body
        lines.append("</svg>")
        return "\n".join(lines) + "\n"


def _ticks(domain, n=5):
    lo, hi = domain
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def _label(v: float) -> str:
    return f"{v:.6g}"


def _y_scale(values, include_zero=False):
    return LinearScale(_padded(values, include_zero), (HEIGHT - BOTTOM, TOP))


def _bands(categories, series):
    """Pixel centre for each (category, series) pair, plus the slot width."""
    span = (WIDTH - RIGHT) - LEFT
    band = span / max(1, len(categories))
    slot = band * 0.8 / max(1, len(series))
    centres = {}
    for i, c in enumerate(categories):
        start = LEFT + i * band + band * 0.1
        for j, s in enumerate(series):
            centres[(c, s)] = start + slot * (j + 0.5)
    ticks = [(LEFT + (i + 0.5) * band, c) for i, c in enumerate(categories)]
    return centres, slot, ticks


def least_squares_line(points):
    """``(slope, intercept)`` of the simple regression line, or ``None``
    when fewer than two distinct x values are present."""
    xs = np.asarray([p[0] for p in points], dtype=np.float64)
    ys = np.asarray([p[1] for p in points], dtype=np.float64)
    dx = xs - xs.mean()
    sxx = float(dx @ dx)
    if len(points) < 2 or sxx == 0.0:
        return None
    slope = float(dx @ (ys - ys.mean())) / sxx
    return slope, float(ys.mean() - slope * xs.mean())


def _scatter(spec: PlotSpec, rows):
    ycol = spec.y[0]
    series = {}
    for name, rs in _split(rows, spec.by).items():
        pts = []
        for r in rs:
            x, y = _float(r, spec.x), _float(r, ycol)
            if x is not None and y is not None:
                pts.append((x, y))
        if not pts:
            raise PlotError(f"series {name!r} has no plottable points")
        series[name] = pts
    allx = [p[0] for pts in series.values() for p in pts]
    ally = [p[1] for pts in series.values() for p in pts]
    xs = LinearScale(_padded(allx), (LEFT, WIDTH - RIGHT))
    canvas = _Canvas(spec, xs, _y_scale(ally))
    ys = canvas.ys
    for i, (name, pts) in enumerate(series.items()):
        color = series_color(name, i)
        group = [f'<g class="series" data-series={quoteattr(name)}>']
        for x, y in pts:
            group.append(_el("circle", class_="point", cx=xs(x), cy=ys(y), r=3.0, fill=color,
                             data_x=repr(x), data_y=repr(y)))
        fit = least_squares_line(pts)
        if fit is not None:
            slope, intercept = fit
            lo, hi = min(x for x, _ in pts), max(x for x, _ in pts)
            group.append(_el("line", class_="fit", x1=xs(lo), y1=ys(intercept + slope * lo), x2=xs(hi),
                             y2=ys(intercept + slope * hi), stroke=color, stroke_width=2.0,
                             data_slope=repr(slope), data_intercept=repr(intercept)))
        group.append("</g>")
        canvas.body.append("".join(group))
    canvas.axes()
    if spec.by is not None:
        canvas.legend(list(series))
    return canvas.render()


def _boxplot(spec: PlotSpec, rows):
    split = _split(rows, spec.by)
    groups = {}
    for col in spec.y:
        for name, rs in split.items():
            vals = [v for v in (_float(r, col) for r in rs) if v is not None]
            if not vals:
                raise PlotError(f"series {name!r} has no values for {col!r}")
            groups[(col, name)] = vals
    stats = boxplot_stats(groups)
    values = [v for vals in groups.values() for v in vals]
    centres, slot, ticks = _bands(list(spec.y), list(split))
    canvas = _Canvas(spec, LinearScale((0, 1), (LEFT, WIDTH - RIGHT)), _y_scale(values), "band")
    ys = canvas.ys
    half = slot * 0.35
    for j, name in enumerate(split):
        color = series_color(name, j)
        for col in spec.y:
            b = stats[(col, name)]
            cx = centres[(col, name)]
            parts = [f'<g class="box" data-group={quoteattr(col)} data-series={quoteattr(name)}>',
                     _el("line", class_="whisker-low", x1=cx, y1=ys(b.whisker_low), x2=cx, y2=ys(b.q1), stroke=color),
                     _el("rect", class_="iqr", x=cx - half, y=ys(b.q3), width=2 * half,
                         height=ys(b.q1) - ys(b.q3), fill="none", stroke=color),
                     _el("line", class_="median", x1=cx - half, y1=ys(b.median), x2=cx + half, y2=ys(b.median),
                         stroke=color, stroke_width=2.0),
                     _el("line", class_="whisker-high", x1=cx, y1=ys(b.q3), x2=cx, y2=ys(b.whisker_high),
                         stroke=color)]
            parts += [_el("circle", class_="outlier", cx=cx, cy=ys(v), r=2.0, fill="none", stroke=color)
                      for v in b.outliers]
            parts.append("</g>")
            canvas.body.append("".join(parts))
    canvas.axes(ticks)
    if spec.by is not None:
        canvas.legend(list(split))
    return canvas.render()


def _interval_chart(spec: PlotSpec, rows, bars: bool):
    ycol = spec.y[0]
    split = _split(rows, spec.by)
    categories: list = []
    data = {}
    for name, rs in split.items():
        if not rs:
            raise PlotError(f"series {name!r} is empty")
        for r in rs:
            cat = str(r.get(spec.x, ""))
            if spec.x not in r:
                raise PlotError(f"column {spec.x!r} not in data")
            est, lo, hi = _float(r, ycol), _float(r, spec.low), _float(r, spec.high)
            if est is None:
                continue
            if cat not in categories:
                categories.append(cat)
            data[(cat, name)] = (est, lo if lo is not None else est, hi if hi is not None else est)
    if not data:
        raise PlotError("no plottable values")
    values = [v for triple in data.values() for v in triple]
    centres, slot, ticks = _bands(categories, list(split))
    canvas = _Canvas(spec, LinearScale((0, 1), (LEFT, WIDTH - RIGHT)), _y_scale(values, include_zero=True), "band")
    ys = canvas.ys
    half = slot * 0.35
    zero = ys(0.0)
    canvas.body.append(_el("line", class_="zero", x1=float(LEFT), y1=zero, x2=float(WIDTH - RIGHT), y2=zero,
                           stroke="gray", stroke_dasharray="4 3"))
    for j, name in enumerate(split):
        color = series_color(name, j)
        for cat in categories:
            if (cat, name) not in data:
                continue
            est, lo, hi = data[(cat, name)]
            cx = centres[(cat, name)]
            attrs = dict(data_category=cat, data_series=name, data_value=repr(est), data_low=repr(lo),
                         data_high=repr(hi))
            if bars:
                top, bottom = min(ys(est), zero), max(ys(est), zero)
                mark = _el("rect", class_="bar", x=cx - half, y=top, width=2 * half, height=bottom - top,
                           fill=color, fill_opacity=0.6, **attrs)
            else:
                mark = _el("circle", class_="coef", cx=cx, cy=ys(est), r=4.0, fill=color, **attrs)
            canvas.body.append(mark + _el("line", class_="ci", x1=cx, y1=ys(lo), x2=cx, y2=ys(hi), stroke="black"))
    canvas.axes(ticks)
    if spec.by is not None:
        canvas.legend(list(split))
    return canvas.render()


def render_svg(spec: PlotSpec, rows: Sequence[Mapping]) -> str:
    """SVG 1.1 text for ``rows``; identical input gives identical bytes."""
    rows = list(rows)
    if not rows:
        raise PlotError("no data rows to plot")
    if spec.kind == "scatter_with_fit":
        return _scatter(spec, rows)
    if spec.kind == "boxplot_grid":
        return _boxplot(spec, rows)
    return _interval_chart(spec, rows, bars=spec.kind == "bar_with_ci")
