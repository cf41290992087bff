"""Haar-cascade face detection over integral images.

Windows are scanned by scaling feature coordinates rather than resampling
the image.  Feature values are mean-centred and divided by the window's
pixel standard deviation, so detections do not change under ``p -> a*p + b``
with ``a > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import BoundsError, CascadeFormatError, ChannelError
from .imagecore import PixelGrid, Rect, to_grayscale

VARIANCE_FLOOR = 1e-6

DEFAULT_SCALE_FACTOR = 1.1
DEFAULT_STEP_FRACTION = 0.05
DEFAULT_MIN_SIZE = 24
DEFAULT_OVERLAP = 0.3
DEFAULT_MIN_NEIGHBORS = 3


class IntegralImage:
    """Summed-area tables of pixel values and squared pixel values.

    ``sums[j, i]`` is the sum of all pixels strictly above row ``j`` and left
    of column ``i``; row 0 and column 0 are zero.
    """

    def __init__(self, sums: np.ndarray, sq_sums: np.ndarray):
        self.sums = sums
        self.sq_sums = sq_sums
        self.sums.setflags(write=False)
        self.sq_sums.setflags(write=False)

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1

    def _check(self, r: Rect):
        x, y, w, h = r
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > self.width or y + h > self.height:
            raise BoundsError(
                f"rect (x={x}, y={y}, w={w}, h={h}) outside {self.width}x{self.height} image"
            )

    def rect_sum(self, r: Rect) -> int:
        self._check(r)
        return int(_corner_sum(self.sums, *r))

    def rect_sq_sum(self, r: Rect) -> int:
        self._check(r)
        return int(_corner_sum(self.sq_sums, *r))


def _corner_sum(table, x, y, w, h):
    return table[y + h, x + w] - table[y, x + w] - table[y + h, x] + table[y, x]


def integral_image(img: PixelGrid) -> IntegralImage:
    if img.channels != 1:
        raise ChannelError(f"integral image needs a 1-channel image, got {img.channels}")
    px = img.data[:, :, 0].astype(np.int64)
    sums = np.zeros((img.height + 1, img.width + 1), dtype=np.int64)
    sq = np.zeros_like(sums)
    sums[1:, 1:] = px.cumsum(0).cumsum(1)
    sq[1:, 1:] = (px * px).cumsum(0).cumsum(1)
    return IntegralImage(sums, sq)


class HaarRect(NamedTuple):
    x: int
    y: int
    w: int
    h: int
    weight: float


@dataclass(frozen=True)
class WeakClassifier:
    rects: tuple
    threshold: float
    left_value: float
    right_value: float

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(HaarRect(*r) for r in self.rects))

    @property
    def kind(self) -> str:
        n = len(self.rects)
        if n == 2:
            a, b = self.rects
            return "two-rect-vertical" if a.x == b.x and a.w == b.w else "two-rect-horizontal"
        return {3: "three-rect", 4: "four-rect"}.get(n, "custom")


@dataclass(frozen=True)
class CascadeStage:
    classifiers: tuple
    stage_threshold: float

    def __post_init__(self):
        object.__setattr__(self, "classifiers", tuple(self.classifiers))


@dataclass(frozen=True)
class CascadeModel:
    base_window: tuple
    stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "base_window", tuple(int(v) for v in self.base_window))
        object.__setattr__(self, "stages", tuple(self.stages))
        validate_cascade(self)


def validate_cascade(model: CascadeModel, lines: dict | None = None):
    """Check structural invariants; ``lines`` maps objects to source line numbers."""
    lines = lines or {}
    bw, bh = model.base_window
    if bw < 8 or bh < 8:
        raise CascadeFormatError(f"base window {bw}x{bh} smaller than 8x8", lines.get("header"))
    if not model.stages:
        raise CascadeFormatError("cascade has no stages", lines.get("header"))
    for stage in model.stages:
        if not stage.classifiers:
            raise CascadeFormatError("stage has no weak classifiers", lines.get(id(stage)))
        for weak in stage.classifiers:
            if not weak.rects:
                raise CascadeFormatError("weak classifier has no rects", lines.get(id(weak)))
            for r in weak.rects:
                if r.w < 1 or r.h < 1 or r.x < 0 or r.y < 0 or r.x + r.w > bw or r.y + r.h > bh:
                    raise CascadeFormatError(
                        f"rect {tuple(r[:4])} outside base window {bw}x{bh}", lines.get(id(r))
                    )
            if abs(sum(r.weight for r in weak.rects)) > 1e-9:
                raise CascadeFormatError("rect weights must sum to zero", lines.get(id(weak)))


class FaceBox(NamedTuple):
    rect: Rect
    score: float
    scale: float

    def sort_key(self):
        return (self.rect.y, self.rect.x, self.scale, self.rect.w, self.rect.h)


# --- evaluation ---------------------------------------------------------------


def _scaled_rects(cascade: CascadeModel, ww: int, wh: int):
    bw, bh = cascade.base_window
    sx, sy = ww / bw, wh / bh
    out = []
    for stage in cascade.stages:
        weak_rects = []
        for weak in stage.classifiers:
            rs = []
            for r in weak.rects:
                rx = min(int(math.floor(r.x * sx + 0.5)), ww - 1)
                ry = min(int(math.floor(r.y * sy + 0.5)), wh - 1)
                rw = max(1, min(int(math.floor(r.w * sx + 0.5)), ww - rx))
                rh = max(1, min(int(math.floor(r.h * sy + 0.5)), wh - ry))
                rs.append((rx, ry, rw, rh, r.weight))
            weak_rects.append(rs)
        out.append(weak_rects)
    return out, sx * sy


def _evaluate(cascade: CascadeModel, ii: IntegralImage, xs, ys, ww: int, wh: int):
    """Evaluate every window with origin in ``ys x xs``; returns (passed, score) grids."""
    xs = np.asarray(xs, dtype=np.intp)
    ys = np.asarray(ys, dtype=np.intp)

    def box(table, rx, ry, rw, rh):
        y0, x0 = ys + ry, xs + rx
        y1, x1 = y0 + rh, x0 + rw
        return (
            table[np.ix_(y1, x1)] - table[np.ix_(y0, x1)] - table[np.ix_(y1, x0)] + table[np.ix_(y0, x0)]
        )

    n = ww * wh
    s = box(ii.sums, 0, 0, ww, wh)
    q = box(ii.sq_sums, 0, 0, ww, wh)
    if n * n * 65025 < 2**62:
        var_num = (n * q - s * s).astype(np.float64)
    else:
        var_num = n * q.astype(np.float64) - s.astype(np.float64) ** 2
    sigma = np.sqrt(np.maximum(var_num, 0.0)) / n
    mean = s / n
    alive = sigma >= VARIANCE_FLOOR
    scaled, area_scale = _scaled_rects(cascade, ww, wh)
    norm = np.where(alive, sigma, 1.0) * area_scale
    score = np.zeros(alive.shape)
    for stage, weak_rects in zip(cascade.stages, scaled):
        total = np.zeros(alive.shape)
        for weak, rs in zip(stage.classifiers, weak_rects):
            f = np.zeros(alive.shape)
            for rx, ry, rw, rh, wt in rs:
                f += wt * (box(ii.sums, rx, ry, rw, rh) - rw * rh * mean)
            f /= norm
            total += np.where(f < weak.threshold, weak.left_value, weak.right_value)
        thr = stage.stage_threshold
        margin = total - thr if math.isfinite(thr) else total
        score = np.where(alive, score + margin, score)
        alive &= total >= thr
    return alive, score


def eval_window(cascade: CascadeModel, ii: IntegralImage, window: Rect):
    """Run the cascade on one window.

    Returns ``(passed, score)`` where ``score`` sums ``stage total - stage
    threshold`` over the stages evaluated (an infinite threshold contributes
    the bare total).
    """
    ii._check(window)
    bw, bh = cascade.base_window
    if window.w * bh != window.h * bw:
        raise BoundsError(f"window {window.w}x{window.h} does not match base aspect {bw}x{bh}")
    alive, score = _evaluate(cascade, ii, [window.x], [window.y], window.w, window.h)
    return bool(alive[0, 0]), float(score[0, 0])


def _window_sizes(cascade, width, height, scale_factor, min_size):
    bw, bh = cascade.base_window
    seen = set()
    k = 0
    while True:
        f = scale_factor**k
        ww, wh = int(math.floor(bw * f + 0.5)), int(math.floor(bh * f + 0.5))
        if ww > width or wh > height:
            return
        if (ww, wh) not in seen and ww >= min_size and wh >= min_size:
            seen.add((ww, wh))
            yield ww, wh
        k += 1


def scan_windows(img: PixelGrid, cascade: CascadeModel, scale_factor=DEFAULT_SCALE_FACTOR,
                 step_fraction=DEFAULT_STEP_FRACTION, min_size=DEFAULT_MIN_SIZE) -> list:
    """All raw passing windows, before grouping, in canonical order."""
    if scale_factor <= 1:
        raise ValueError("scale_factor must exceed 1")
    gray = to_grayscale(img)
    ii = integral_image(gray)
    bw = cascade.base_window[0]
    boxes = []
    for ww, wh in _window_sizes(cascade, gray.width, gray.height, scale_factor, min_size):
        step = max(1, int(math.floor(step_fraction * ww + 0.5)))
        xs = np.arange(0, gray.width - ww + 1, step)
        ys = np.arange(0, gray.height - wh + 1, step)
        alive, score = _evaluate(cascade, ii, xs, ys, ww, wh)
        for j, i in zip(*np.nonzero(alive)):
            boxes.append(FaceBox(Rect(int(xs[i]), int(ys[j]), ww, wh), float(score[j, i]), ww / bw))
    boxes.sort(key=FaceBox.sort_key)
    return boxes


def detect_faces(img: PixelGrid, cascade: CascadeModel, scale_factor=DEFAULT_SCALE_FACTOR,
                 step_fraction=DEFAULT_STEP_FRACTION, min_size=DEFAULT_MIN_SIZE,
                 overlap_threshold=DEFAULT_OVERLAP, min_neighbors=DEFAULT_MIN_NEIGHBORS) -> list:
    raw = scan_windows(img, cascade, scale_factor, step_fraction, min_size)
    return merge_detections(raw, overlap_threshold, min_neighbors)


# --- grouping -------------------------------------------------------------------


def iou(a: Rect, b: Rect) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def _iou_matrix(rects) -> np.ndarray:
    r = np.asarray(rects, dtype=np.int64).reshape(-1, 4)
    x1, y1, x2, y2 = r[:, 0], r[:, 1], r[:, 0] + r[:, 2], r[:, 1] + r[:, 3]
    ix = np.clip(np.minimum(x2[:, None], x2) - np.maximum(x1[:, None], x1), 0, None)
    iy = np.clip(np.minimum(y2[:, None], y2) - np.maximum(y1[:, None], y1), 0, None)
    inter = ix * iy
    area = r[:, 2] * r[:, 3]
    union = area[:, None] + area - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)
    np.fill_diagonal(out, 1.0)
    return out


def _mean_box(members: Sequence[FaceBox]) -> FaceBox:
    n = len(members)

    def rnd(v):
        return int(math.floor(v + 0.5))

    x1 = rnd(sum(b.rect.x for b in members) / n)
    y1 = rnd(sum(b.rect.y for b in members) / n)
    x2 = rnd(sum(b.rect.x + b.rect.w for b in members) / n)
    y2 = rnd(sum(b.rect.y + b.rect.h for b in members) / n)
    return FaceBox(
        Rect(x1, y1, max(1, x2 - x1), max(1, y2 - y1)),
        max(b.score for b in members),
        sum(b.scale for b in members) / n,
    )


def merge_detections(boxes: Sequence[FaceBox], overlap_threshold=DEFAULT_OVERLAP,
                     min_neighbors=DEFAULT_MIN_NEIGHBORS) -> list:
    """Group overlapping windows into one mean box per cluster.

    Clusters are the connected components of the IoU >= threshold graph.
    Grouping repeats on the cluster means until no two means overlap, so
    the output is a fixed point: merging it again with ``min_neighbors=1``
    returns it unchanged.
    """
    if not 0 < overlap_threshold < 1:
        raise ValueError("overlap_threshold must lie in (0, 1)")
    clusters = [[b] for b in sorted(boxes, key=FaceBox.sort_key)]
    while True:
        reps = [_mean_box(c) if len(c) > 1 else c[0] for c in clusters]
        if len(reps) < 2:
            break
        n_comp, labels = connected_components(
            csr_matrix(_iou_matrix([r.rect for r in reps]) >= overlap_threshold), directed=False)
        if n_comp == len(reps):
            break
        # components are numbered in order of their lowest member index
        groups: list = [[] for _ in range(n_comp)]
        for label, c in zip(labels, clusters):
            groups[label].extend(c)
        clusters = groups
    out = [rep for rep, c in zip(reps, clusters) if len(c) >= min_neighbors]
    out.sort(key=FaceBox.sort_key)
    return out


# --- cascade files --------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_cascade(model: CascadeModel) -> str:
    bw, bh = model.base_window
    out = [f"cascade {bw} {bh} {len(model.stages)}"]
    for stage in model.stages:
        out.append(f"stage {len(stage.classifiers)} {_fmt(stage.stage_threshold)}")
        for weak in stage.classifiers:
            out.append(
                f"weak {_fmt(weak.threshold)} {_fmt(weak.left_value)} "
                f"{_fmt(weak.right_value)} {len(weak.rects)}"
            )
            for r in weak.rects:
                out.append(f"rect {r.x} {r.y} {r.w} {r.h} {_fmt(r.weight)}")
    return "\n".join(out) + "\n"


def save_cascade(model: CascadeModel, path):
    Path(path).write_text(dumps_cascade(model), encoding="utf-8")


def loads_cascade(text: str) -> CascadeModel:
    tokens = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.append((lineno, line.split()))
    pos = 0

    def take(keyword, nargs):
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1][0] if tokens else 0
            raise CascadeFormatError(f"unexpected end of file, expected '{keyword}'", last + 1)
        lineno, parts = tokens[pos]
        if parts[0] != keyword:
            raise CascadeFormatError(f"expected '{keyword}', found '{parts[0]}'", lineno)
        if len(parts) != nargs + 1:
            raise CascadeFormatError(f"'{keyword}' takes {nargs} fields, got {len(parts) - 1}", lineno)
        pos += 1
        return lineno, parts[1:]

    def num(kind, s, lineno):
        try:
            return kind(s)
        except ValueError:
            raise CascadeFormatError(f"bad number {s!r}", lineno) from None

    header_line, (bw, bh, n_stages) = take("cascade", 3)
    lines = {"header": header_line}
    stages = []
    for _ in range(num(int, n_stages, header_line)):
        sl, (n_weak, sthr) = take("stage", 2)
        weaks = []
        for _ in range(num(int, n_weak, sl)):
            wl, (thr, left, right, n_rects) = take("weak", 4)
            rects = []
            for _ in range(num(int, n_rects, wl)):
                rl, (x, y, w, h, wt) = take("rect", 5)
                r = HaarRect(num(int, x, rl), num(int, y, rl), num(int, w, rl), num(int, h, rl),
                             num(float, wt, rl))
                rects.append(r)
            weak = WeakClassifier(tuple(rects), num(float, thr, wl), num(float, left, wl),
                                  num(float, right, wl))
            for r_obj, (r_line, _) in zip(weak.rects, tokens[pos - len(rects):pos]):
                lines[id(r_obj)] = r_line
            lines[id(weak)] = wl
            weaks.append(weak)
        stage = CascadeStage(tuple(weaks), num(float, sthr, sl))
        lines[id(stage)] = sl
        stages.append(stage)
    if pos != len(tokens):
        raise CascadeFormatError("trailing content after last stage", tokens[pos][0])
    model = CascadeModel.__new__(CascadeModel)
    object.__setattr__(model, "base_window", (num(int, bw, header_line), num(int, bh, header_line)))
    object.__setattr__(model, "stages", tuple(stages))
    validate_cascade(model, lines)
    return model


def load_cascade(path) -> CascadeModel:
    return loads_cascade(Path(path).read_text(encoding="utf-8"))


def demo_cascade() -> CascadeModel:
    """The small hand-built cascade shipped with the package.

    It fires on a window whose top half is dark and bottom half light, with
    balanced left and right halves.
    """
    text = resources.files("photostyle").joinpath("data/demo_cascade.txt").read_text("utf-8")
    return loads_cascade(text)
