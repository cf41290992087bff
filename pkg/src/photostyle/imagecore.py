"""Byte images, real-valued tensors and the preprocessing primitives.

A :class:`PixelGrid` wraps a read-only ``uint8`` array of shape
``(height, width, channels)``; in C order that is exactly the row-major,
channel-interleaved byte layout.  Tensors are plain ``float64`` numpy arrays
laid out channel-major ``(C, H, W)``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import BoundsError, ChannelError, DecodeError, ShapeError, UnsupportedFormatError

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
JPEG_MAGIC = b"\xff\xd8\xff"


class Rect(NamedTuple):
    x: int
    y: int
    w: int
    h: int

    def translate(self, other: "Rect") -> "Rect":
        """Express this rect (relative to ``other``) in ``other``'s parent frame."""
        return Rect(self.x + other.x, self.y + other.y, self.w, self.h)

    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True, eq=False)
class PixelGrid:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ChannelError(f"expected (H, W, 1|3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"image dimensions must be positive, got {arr.shape[:2]}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() > 255:
                raise ValueError("pixel values must be integers in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, order="C", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def pixel(self, i: int, j: int) -> tuple:
        """Pixel at column ``i``, row ``j``."""
        return tuple(int(v) for v in self.data[j, i])

    def __eq__(self, other):
        if not isinstance(other, PixelGrid):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self):
        return f"PixelGrid({self.width}x{self.height}x{self.channels})"


def decode_image(content: bytes) -> PixelGrid:
    if content.startswith(PNG_MAGIC):
        fmt = "PNG"
    elif content.startswith(JPEG_MAGIC):
        fmt = "JPEG"
    else:
        raise UnsupportedFormatError(f"unrecognised image signature {content[:8]!r}")
    try:
        with Image.open(io.BytesIO(content), formats=[fmt]) as im:
            im.load()
            if im.mode in ("L", "1", "I;16", "I", "F"):
                arr = np.asarray(im.convert("L"))
            else:
                arr = np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode {fmt} stream ({len(content)} bytes): {exc}") from exc
    return PixelGrid(arr)


def read_image(path) -> PixelGrid:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def encode_png(img: PixelGrid) -> bytes:
    mode = "L" if img.channels == 1 else "RGB"
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    buf = io.BytesIO()
    Image.fromarray(np.asarray(arr), mode=mode).save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # inputs are non-negative, so half-up is half-away-from-zero
    return np.floor(x + 0.5)


def to_grayscale(img: PixelGrid) -> PixelGrid:
    """BT.601 luma, computed in integer arithmetic so ties round away from zero."""
    if img.channels == 1:
        return img
    rgb = img.data.astype(np.int64)
    acc = 299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2]
    return PixelGrid(((acc + 500) // 1000).astype(np.uint8))


def crop(img: PixelGrid, r: Rect) -> PixelGrid:
    x, y, w, h = r
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise BoundsError(
            f"rect (x={x}, y={y}, w={w}, h={h}) outside {img.width}x{img.height} image"
        )
    return PixelGrid(img.data[y : y + h, x : x + w])


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centres, clamped at the borders
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize(img: PixelGrid, w: int, h: int) -> PixelGrid:
    if w < 1 or h < 1:
        raise ShapeError(f"target size must be positive, got {w}x{h}")
    if (w, h) == (img.width, img.height):
        return img
    src = img.data.astype(np.float64)
    x0, x1, fx = _bilinear_axis(img.width, w)
    y0, y1, fy = _bilinear_axis(img.height, h)
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    fy = fy[:, None, None]
    out = top * (1 - fy) + bottom * fy
    return PixelGrid(np.clip(_round_half_up(out), 0, 255).astype(np.uint8))


def to_tensor(img: PixelGrid) -> np.ndarray:
    return np.transpose(img.data, (2, 0, 1)).astype(np.float64) / 255.0


def from_tensor(t: np.ndarray) -> PixelGrid:
    """Re-quantise a ``(C, H, W)`` tensor in [0, 1] back to bytes."""
    t = check_tensor(t)
    if t.ndim != 3:
        raise ShapeError(f"expected a (C, H, W) tensor, got shape {t.shape}")
    q = np.clip(_round_half_up(t * 255.0), 0, 255).astype(np.uint8)
    return PixelGrid(np.transpose(q, (1, 2, 0)))


def check_tensor(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if arr.size == 0 or any(d < 1 for d in arr.shape):
        raise ShapeError(f"tensor dimensions must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf")
    return arr
