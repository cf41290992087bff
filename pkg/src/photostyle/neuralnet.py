"""A small convolutional network in numpy: forward composition, softmax
cross-entropy loss, reverse-mode gradients, SGD with momentum, and a binary
model file format.

Weights live in float64 for exact gradient work, but freshly initialised and
trained models are rounded to float32-representable values so a save/load
round trip through the float32 file format is bitwise lossless.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image_batch, check_labels
from .exceptions import LabelError, ModelFormatError, ShapeError, TrainingDivergedError

PROB_FLOOR = 1e-12
MAGIC = b"PHSN"
FORMAT_VERSION = 1


class RaceLabel(str, Enum):
    WHITE = "White"
    AFRICAN_AMERICAN = "AfricanAmerican"
    ASIAN = "Asian"
    HISPANIC = "Hispanic"


RACE_LABELS = tuple(label.value for label in RaceLabel)

_KINDS = ("conv", "relu", "maxpool", "flatten", "dense", "softmax")
_KIND_TAG = {k: i + 1 for i, k in enumerate(_KINDS)}
_PARAM_FIELDS = {
    "conv": ("in_channels", "out_channels", "kernel", "stride", "padding"),
    "maxpool": ("window", "stride"),
    "dense": ("in_units", "out_units"),
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    window: int = 0
    in_units: int = 0
    out_units: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    @property
    def has_weights(self) -> bool:
        return self.kind in ("conv", "dense")

    def params(self) -> tuple:
        return tuple(getattr(self, f) for f in _PARAM_FIELDS.get(self.kind, ()))

    def weight_shapes(self) -> tuple:
        if self.kind == "conv":
            return ((self.out_channels, self.in_channels, self.kernel, self.kernel), (self.out_channels,))
        if self.kind == "dense":
            return ((self.out_units, self.in_units), (self.out_units,))
        return ()


def conv(in_channels, out_channels, kernel=3, stride=1, padding=0) -> LayerSpec:
    return LayerSpec("conv", in_channels=in_channels, out_channels=out_channels, kernel=kernel,
                     stride=stride, padding=padding)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def maxpool(window=2, stride=None) -> LayerSpec:
    return LayerSpec("maxpool", window=window, stride=stride or window)


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(in_units, out_units) -> LayerSpec:
    return LayerSpec("dense", in_units=in_units, out_units=out_units)


def softmax() -> LayerSpec:
    return LayerSpec("softmax")


def layer_output_shape(spec: LayerSpec, shape: tuple, index: int = 0) -> tuple:
    def fail(msg):
        raise ShapeError(f"layer {index} ({spec.kind}): {msg}")

    if spec.kind == "conv":
        if len(shape) != 3 or shape[0] != spec.in_channels:
            fail(f"expected ({spec.in_channels}, H, W) input, got {shape}")
        if spec.kernel < 1 or spec.stride < 1 or spec.padding < 0:
            fail("invalid kernel/stride/padding")
        h = (shape[1] + 2 * spec.padding - spec.kernel) // spec.stride + 1
        w = (shape[2] + 2 * spec.padding - spec.kernel) // spec.stride + 1
        if h < 1 or w < 1:
            fail(f"kernel {spec.kernel} larger than padded input {shape[1:]}")
        return (spec.out_channels, h, w)
    if spec.kind == "maxpool":
        if len(shape) != 3:
            fail(f"expected (C, H, W) input, got {shape}")
        h = (shape[1] - spec.window) // spec.stride + 1
        w = (shape[2] - spec.window) // spec.stride + 1
        if h < 1 or w < 1:
            fail(f"window {spec.window} larger than input {shape[1:]}")
        return (shape[0], h, w)
    if spec.kind == "flatten":
        return (int(np.prod(shape)),)
    if spec.kind == "dense":
        if shape != (spec.in_units,):
            fail(f"expected ({spec.in_units},) input, got {shape}")
        return (spec.out_units,)
    return shape


def check_architecture(layers: Sequence[LayerSpec], input_shape: tuple) -> list:
    """Validate that the layers compose; returns the shape after each layer."""
    if not layers or layers[-1].kind != "softmax":
        raise ShapeError("network must end in a softmax layer")
    if sum(1 for l in layers if l.kind == "softmax") != 1:
        raise ShapeError("network must contain exactly one softmax layer")
    shapes = []
    shape = tuple(input_shape)
    for i, spec in enumerate(layers):
        shape = layer_output_shape(spec, shape, i)
        shapes.append(shape)
    if len(shape) != 1:
        raise ShapeError(f"softmax input must be a vector, got shape {shape}")
    return shapes


@dataclass(frozen=True, eq=False)
class NetworkModel:
    input_shape: tuple
    layers: tuple
    weights: tuple
    class_labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        shapes = check_architecture(self.layers, self.input_shape)
        if shapes[-1][0] != len(self.class_labels):
            raise ShapeError(
                f"network emits {shapes[-1][0]} classes but {len(self.class_labels)} labels given"
            )
        if len(self.weights) != len(self.layers):
            raise ShapeError("one weight tuple per layer required")
        frozen_weights = []
        for i, (spec, ws) in enumerate(zip(self.layers, self.weights)):
            expected = spec.weight_shapes()
            ws = tuple(np.array(w, dtype=np.float64) for w in ws)
            if tuple(w.shape for w in ws) != expected:
                raise ShapeError(
                    f"layer {i} ({spec.kind}): weight shapes {[w.shape for w in ws]} != {list(expected)}"
                )
            for w in ws:
                if not np.all(np.isfinite(w)):
                    raise ValueError(f"layer {i} ({spec.kind}) has non-finite weights")
                w.setflags(write=False)
            frozen_weights.append(ws)
        object.__setattr__(self, "weights", tuple(frozen_weights))

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def n_weights(self) -> int:
        return sum(w.size for ws in self.weights for w in ws)

    def with_weights(self, weights) -> "NetworkModel":
        return replace(self, weights=tuple(tuple(ws) for ws in weights))


def _quantize(weights):
    return tuple(tuple(w.astype(np.float32).astype(np.float64) for w in ws) for ws in weights)


def init_weights(layers, seed: int) -> tuple:
    """Kaiming-style uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    out = []
    for spec in layers:
        if spec.kind == "conv":
            fan_in = spec.in_channels * spec.kernel * spec.kernel
        elif spec.kind == "dense":
            fan_in = spec.in_units
        else:
            out.append(())
            continue
        w_shape, b_shape = spec.weight_shapes()
        bound = np.sqrt(6.0 / fan_in)
        out.append((rng.uniform(-bound, bound, size=w_shape), np.zeros(b_shape)))
    return _quantize(out)


def init_model(layers, input_shape, class_labels, seed: int = 0) -> NetworkModel:
    check_architecture(layers, input_shape)
    return NetworkModel(tuple(input_shape), tuple(layers), init_weights(layers, seed), tuple(class_labels))


def compact_architecture(input_shape, n_classes: int, channels=(4, 8), kernel=3) -> list:
    """conv-relu-pool blocks followed by a dense head and softmax."""
    layers = []
    c, h, w = input_shape
    for out_c in channels:
        layers += [conv(c, out_c, kernel, padding=kernel // 2), relu(), maxpool(2)]
        c = out_c
        h, w = h // 2, w // 2
    layers += [flatten(), dense(c * h * w, n_classes), softmax()]
    return layers


# --- layer kernels ----------------------------------------------------------------


def _conv_forward(spec, ws, x):
    w, b = ws
    p, s, k = spec.padding, spec.stride, spec.kernel
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, O)
    out = out.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return np.ascontiguousarray(out), (xp.shape, win)


def _conv_backward(spec, ws, cache, dout):
    w, _ = ws
    xp_shape, win = cache
    p, s, k = spec.padding, spec.stride, spec.kernel
    ho, wo = dout.shape[2], dout.shape[3]
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, k, k)
    db = dout.sum(axis=(0, 2, 3))
    dxp = np.zeros(xp_shape)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += np.tensordot(
                dout, w[:, :, i, j], axes=([1], [0])
            ).transpose(0, 3, 1, 2)
    dx = dxp[:, :, p : xp_shape[2] - p, p : xp_shape[3] - p] if p else dxp
    return dx, (dw, db)


def _pool_forward(spec, x):
    n, c, h, w = x.shape
    pw, s = spec.window, spec.stride
    win = sliding_window_view(x, (pw, pw), axis=(2, 3))[:, :, ::s, ::s]
    ho, wo = win.shape[2], win.shape[3]
    flat = win.reshape(n, c, ho, wo, pw * pw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg)


def _pool_backward(spec, cache, dout):
    x_shape, arg = cache
    pw, s = spec.window, spec.stride
    ho, wo = dout.shape[2], dout.shape[3]
    dx = np.zeros(x_shape)
    for i in range(pw):
        for j in range(pw):
            mask = arg == i * pw + j
            dx[:, :, i : i + s * ho : s, j : j + s * wo : s] += dout * mask
    return dx


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _run_layers(layers, weights, x: np.ndarray, keep_cache=False):
    caches = []
    a = x
    for spec, ws in zip(layers, weights):
        cache = None
        if spec.kind == "conv":
            a, cache = _conv_forward(spec, ws, a)
        elif spec.kind == "relu":
            cache = a > 0
            a = a * cache
        elif spec.kind == "maxpool":
            a, cache = _pool_forward(spec, a)
        elif spec.kind == "flatten":
            cache = a.shape
            a = a.reshape(a.shape[0], -1)
        elif spec.kind == "dense":
            cache = a
            a = a @ ws[0].T + ws[1]
        else:
            a = _softmax(a)
        if keep_cache:
            caches.append(cache)
    return a, caches


def _forward(model: NetworkModel, x: np.ndarray, keep_cache=False):
    return _run_layers(model.layers, model.weights, x, keep_cache)


def _as_batch(model: NetworkModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape == model.input_shape:
        x = x[None]
    if x.shape[1:] != model.input_shape:
        raise ShapeError(f"layer 0 ({model.layers[0].kind}): expected input {model.input_shape}, got {x.shape[1:]}")
    return x


def forward(model: NetworkModel, x) -> np.ndarray:
    """Class probabilities for one input (1-D result) or a batch (2-D)."""
    single = np.shape(x) == model.input_shape
    probs, _ = _forward(model, _as_batch(model, x))
    return probs[0] if single else probs


def feature_maps(model: NetworkModel, x, upto: int) -> np.ndarray:
    """Activations after layer ``upto`` (inclusive) for a batch."""
    a, _ = _run_layers(model.layers[: upto + 1], model.weights, _as_batch(model, x))
    return a


def loss(probabilities, labels) -> float:
    """Mean cross-entropy ``-log p(true class)`` with probabilities floored at 1e-12."""
    p = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    y = np.asarray(labels).reshape(-1)
    if p.shape[0] == 0:
        raise ValueError("empty batch")
    if y.shape[0] != p.shape[0]:
        raise ShapeError(f"{p.shape[0]} predictions but {y.shape[0]} labels")
    if np.any(y < 0) or np.any(y >= p.shape[1]):
        raise LabelError(f"label out of range [0, {p.shape[1]})")
    picked = p[np.arange(len(y)), y.astype(np.intp)]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def backward(model: NetworkModel, x, y):
    """Loss and gradients of the mean batch loss with respect to every weight.

    Returns ``(loss, grads)`` where ``grads`` mirrors ``model.weights``.
    """
    x = _as_batch(model, x)
    y = np.asarray(y).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    probs, caches = _forward(model, x, keep_cache=True)
    value = loss(probs, y)
    n = x.shape[0]
    delta = probs.copy()
    delta[np.arange(n), y.astype(np.intp)] -= 1.0
    delta /= n
    grads = [()] * len(model.layers)
    # the softmax layer's gradient is folded into the cross-entropy delta above
    for i in range(len(model.layers) - 2, -1, -1):
        spec, ws, cache = model.layers[i], model.weights[i], caches[i]
        if spec.kind == "dense":
            grads[i] = (delta.T @ cache, delta.sum(axis=0))
            delta = delta @ ws[0]
        elif spec.kind == "flatten":
            delta = delta.reshape(cache)
        elif spec.kind == "relu":
            delta = delta * cache
        elif spec.kind == "maxpool":
            delta = _pool_backward(spec, cache, delta)
        elif spec.kind == "conv":
            delta, grads[i] = _conv_backward(spec, ws, cache, delta)
    return value, tuple(grads)


# --- optimisation -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 16
    iterations: int = 500
    seed: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


def zero_velocity(model: NetworkModel):
    return tuple(tuple(np.zeros_like(w) for w in ws) for ws in model.weights)


def sgd_step(model: NetworkModel, grads, config: TrainConfig, velocity=None, frozen=()):
    """One momentum step.  Returns ``(updated_model, velocity)``.

    ``velocity <- momentum * velocity - lr * (grad + weight_decay * w)``;
    ``w <- w + velocity``.  Layers listed in ``frozen`` are left untouched.
    """
    if velocity is None:
        velocity = zero_velocity(model)
    frozen = set(frozen)
    new_w, new_v = [], []
    for i, (ws, gs, vs) in enumerate(zip(model.weights, grads, velocity)):
        if i in frozen or not ws:
            new_w.append(ws)
            new_v.append(vs)
            continue
        if tuple(g.shape for g in gs) != tuple(w.shape for w in ws):
            raise ShapeError(f"layer {i}: gradient shapes do not match weights")
        vs = tuple(config.momentum * v - config.learning_rate * (g + config.weight_decay * w)
                   for w, g, v in zip(ws, gs, vs))
        new_w.append(tuple(w + v for w, v in zip(ws, vs)))
        new_v.append(vs)
    return model.with_weights(new_w), tuple(new_v)


class _BatchStream:
    """Seeded shuffled mini-batches, reshuffling at every epoch boundary."""

    def __init__(self, n, batch_size, seed):
        self.n = n
        self.size = min(batch_size, n)
        self.rng = np.random.default_rng(seed)
        self.order = self.rng.permutation(n)
        self.pos = 0

    def next(self):
        if self.pos + self.size > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        idx = self.order[self.pos : self.pos + self.size]
        self.pos += self.size
        return idx


def train(model: NetworkModel, x, y, config: TrainConfig, frozen=()):
    """Run ``config.iterations`` mini-batch SGD steps.

    Returns ``(model, loss_history)``.  Layers in ``frozen`` keep their
    weights bit for bit.
    """
    x = _as_batch(model, x)
    y = np.asarray(y).reshape(-1).astype(np.intp)
    if x.shape[0] == 0:
        raise ValueError("training set is empty")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} inputs but {y.shape[0]} labels")
    if np.any(y < 0) or np.any(y >= model.n_classes):
        raise LabelError(f"label out of range [0, {model.n_classes})")
    history = []
    if config.iterations == 0:
        return model, history
    stream = _BatchStream(x.shape[0], config.batch_size, config.seed)
    velocity = zero_velocity(model)
    for it in range(config.iterations):
        idx = stream.next()
        value, grads = backward(model, x[idx], y[idx])
        if not np.isfinite(value):
            raise TrainingDivergedError(it, value)
        history.append(value)
        try:
            model, velocity = sgd_step(model, grads, config, velocity, frozen)
        except ValueError as exc:  # the model rejects non-finite weights
            raise TrainingDivergedError(it, value) from exc
    frozen = set(frozen)
    kept = [ws if i in frozen else _quantize([ws])[0] for i, ws in enumerate(model.weights)]
    return model.with_weights(kept), history


def predict(model: NetworkModel, x):
    """``(class_index, confidence)``; ties go to the lowest index."""
    probs = forward(model, x)
    if probs.ndim != 1:
        raise ShapeError("predict expects a single input; use predict_batch")
    k = int(np.argmax(probs))
    return k, float(probs[k])


def predict_batch(model: NetworkModel, x):
    probs = forward(model, _as_batch(model, x))
    k = probs.argmax(axis=1)
    return k, probs[np.arange(len(k)), k]


def accuracy(model: NetworkModel, x, y) -> float:
    pred, _ = predict_batch(model, x)
    return float(np.mean(pred == np.asarray(y)))


def gradient_check(model: NetworkModel, example, epsilon=1e-4, analytic=None, max_checks=10_000, seed=0):
    """Largest relative error between analytic and central-difference gradients.

    ``example`` is ``(input, label)`` or a batch ``(inputs, labels)``.  When
    the model has more than ``max_checks`` weights a seeded random subset is
    checked.  ``analytic`` overrides the gradients under test.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x, y = example
    x = _as_batch(model, x)
    y = np.atleast_1d(np.asarray(y))
    if analytic is None:
        _, analytic = backward(model, x, y)
    coords = [(li, pi, flat) for li, ws in enumerate(model.weights)
              for pi, w in enumerate(ws) for flat in range(w.size)]
    if len(coords) > max_checks:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(coords), size=max_checks, replace=False))
        coords = [coords[i] for i in pick]
    work = [[w.copy() for w in ws] for ws in model.weights]

    def loss_at():
        probs, _ = _run_layers(model.layers, work, x)
        return loss(probs, y)

    worst = 0.0
    for li, pi, flat in coords:
        arr = work[li][pi].reshape(-1)
        orig = arr[flat]
        arr[flat] = orig + epsilon
        plus = loss_at()
        arr[flat] = orig - epsilon
        minus = loss_at()
        arr[flat] = orig
        numeric = (plus - minus) / (2 * epsilon)
        a = float(analytic[li][pi].reshape(-1)[flat])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


# --- persistence ----------------------------------------------------------------------


def _pack_u32(*vals):
    return struct.pack(f"<{len(vals)}I", *vals)


def dumps_model(model: NetworkModel) -> bytes:
    out = [MAGIC, _pack_u32(FORMAT_VERSION)]
    out.append(_pack_u32(len(model.input_shape), *model.input_shape))
    out.append(_pack_u32(len(model.layers)))
    for spec in model.layers:
        params = spec.params()
        out.append(struct.pack("<B", _KIND_TAG[spec.kind]))
        out.append(_pack_u32(len(params), *params))
    out.append(_pack_u32(len(model.class_labels)))
    for label in model.class_labels:
        raw = str(label).encode("utf-8")
        out.append(_pack_u32(len(raw)) + raw)
    flat = [w.reshape(-1) for ws in model.weights for w in ws]
    total = sum(a.size for a in flat)
    out.append(_pack_u32(total))
    if flat:
        out.append(np.concatenate(flat).astype("<f4").tobytes())
    return b"".join(out)


def loads_model(raw: bytes) -> NetworkModel:
    if raw[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    pos = 4

    def u32(count=1):
        nonlocal pos
        end = pos + 4 * count
        if end > len(raw):
            raise ModelFormatError("model file truncated")
        vals = struct.unpack_from(f"<{count}I", raw, pos)
        pos = end
        return vals

    (version,) = u32()
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    (ndim,) = u32()
    input_shape = u32(ndim)
    (n_layers,) = u32()
    layers = []
    for i in range(n_layers):
        if pos >= len(raw):
            raise ModelFormatError("model file truncated")
        tag = raw[pos]
        pos += 1
        if tag < 1 or tag > len(_KINDS):
            raise ModelFormatError(f"layer {i}: unknown kind tag {tag}")
        kind = _KINDS[tag - 1]
        (n_params,) = u32()
        params = u32(n_params) if n_params else ()
        names = _PARAM_FIELDS.get(kind, ())
        if len(params) != len(names):
            raise ModelFormatError(f"layer {i} ({kind}): expected {len(names)} parameters")
        layers.append(LayerSpec(kind, **dict(zip(names, params))))
    (n_labels,) = u32()
    labels = []
    for _ in range(n_labels):
        (length,) = u32()
        labels.append(raw[pos : pos + length].decode("utf-8"))
        pos += length
    (total,) = u32()
    try:
        shapes = [s for spec in layers for s in spec.weight_shapes()]
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc
    expected = sum(int(np.prod(s)) for s in shapes)
    if total != expected:
        raise ModelFormatError(f"weight count {total} does not match layer specs ({expected})")
    if len(raw) - pos != 4 * total:
        raise ModelFormatError(f"expected {4 * total} bytes of weights, found {len(raw) - pos}")
    flat = np.frombuffer(raw, dtype="<f4", count=total, offset=pos).astype(np.float64)
    weights, off = [], 0
    for spec in layers:
        ws = []
        for s in spec.weight_shapes():
            size = int(np.prod(s))
            ws.append(flat[off : off + size].reshape(s).copy())
            off += size
        weights.append(tuple(ws))
    try:
        return NetworkModel(tuple(input_shape), tuple(layers), tuple(weights), tuple(labels))
    except (ShapeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model: {exc}") from exc


def save_model(model: NetworkModel, path):
    Path(path).write_bytes(dumps_model(model))


def load_model(path) -> NetworkModel:
    return loads_model(Path(path).read_bytes())


def save_loss_history(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, v in enumerate(history):
            writer.writerow([i, repr(float(v))])


# --- estimator ------------------------------------------------------------------------


class CNNClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn style wrapper around :func:`train` and :func:`forward`.

    ``X`` is an image batch shaped ``(n, C, H, W)`` or ``(n, H, W)``.  With
    ``layers=None`` the compact conv-pool architecture is built for the
    input shape seen in ``fit``.
    """

    def __init__(self, layers=None, channels=(4, 8), learning_rate=0.05, momentum=0.9,
                 batch_size=16, max_iter=500, weight_decay=0.0, random_state=0):
        self.layers = layers
        self.channels = channels
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.max_iter = max_iter
        self.weight_decay = weight_decay
        self.random_state = random_state

    def _config(self):
        return TrainConfig(self.learning_rate, self.momentum, self.batch_size, self.max_iter,
                           self.random_state, self.weight_decay)

    def fit(self, X, y):
        X = check_image_batch(X)
        self.classes_, y_idx = check_labels(y, n_samples=X.shape[0])
        input_shape = X.shape[1:]
        layers = self.layers or compact_architecture(input_shape, len(self.classes_), self.channels)
        model = init_model(layers, input_shape, [str(c) for c in self.classes_], seed=self.random_state)
        self.model_, self.loss_history_ = train(model, X, y_idx, self._config())
        self.n_features_in_ = int(np.prod(input_shape))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, _as_batch(self.model_, check_image_batch(X)))

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]
