"""Portrait preprocessing, fine-tuning with human-reviewed bootstrapping,
per-class evaluation, per-member sampling and corpus classification."""
from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import facedetect, imagecore, neuralnet
from .analytics import ClassifiedFace
from .corpus import CorpusManifest
from .exceptions import (
    DecodeError,
    EvaluationError,
    LabelError,
    ReviewError,
    ShapeError,
    SplitError,
    UnsupportedFormatError,
)
from .facedetect import CascadeModel, FaceBox
from .imagecore import PixelGrid, Rect
from .neuralnet import RACE_LABELS, NetworkModel, TrainConfig

log = logging.getLogger(__name__)

DEFAULT_INPUT_SIZE = 24
DEFAULT_CONFIDENCE = 0.9
DEFAULT_FOLDS = 5
REVIEW_COLUMNS = ["photo_id", "box_x", "box_y", "box_w", "box_h", "predicted", "confidence", "verdict"]
CLASSIFICATION_COLUMNS = ["member_id", "photo_id", "box_x", "box_y", "box_w", "box_h", "label", "confidence"]


@dataclass(frozen=True)
class DetectParams:
    scale_factor: float = facedetect.DEFAULT_SCALE_FACTOR
    step_fraction: float = facedetect.DEFAULT_STEP_FRACTION
    min_size: int = facedetect.DEFAULT_MIN_SIZE
    overlap_threshold: float = facedetect.DEFAULT_OVERLAP
    min_neighbors: int = facedetect.DEFAULT_MIN_NEIGHBORS

    def detect(self, img: PixelGrid, cascade: CascadeModel) -> list:
        return facedetect.detect_faces(img, cascade, self.scale_factor, self.step_fraction, self.min_size,
                                       self.overlap_threshold, self.min_neighbors)


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    class_labels: tuple = RACE_LABELS

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.intp).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"{x.shape[0]} inputs but {y.shape[0]} labels")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_labels)):
            raise LabelError(f"label index outside [0, {len(self.class_labels)})")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_labels", tuple(self.class_labels))

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.inputs[idx], self.labels[idx], self.class_labels)

    def concat(self, other: "Dataset") -> "Dataset":
        if other.class_labels != self.class_labels:
            raise LabelError("datasets use different class labels")
        if len(other) == 0:
            return self
        return Dataset(np.concatenate([self.inputs, other.inputs]),
                       np.concatenate([self.labels, other.labels]), self.class_labels)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _seed_for(seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{seed}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# --- preprocessing -----------------------------------------------------------------


def best_face(boxes: Sequence[FaceBox]) -> FaceBox | None:
    """Highest score; ties resolve to the first box in canonical order."""
    best = None
    for b in sorted(boxes, key=FaceBox.sort_key):
        if best is None or b.score > best.score:
            best = b
    return best


def face_tensor(img: PixelGrid, box: Rect, input_size: int) -> np.ndarray:
    face = imagecore.to_grayscale(imagecore.crop(img, box))
    return imagecore.to_tensor(imagecore.resize(face, input_size, input_size))


def preprocess_portrait(img: PixelGrid, cascade: CascadeModel, input_size: int = DEFAULT_INPUT_SIZE,
                        params: DetectParams = DetectParams()):
    """Crop the strongest face to a grayscale ``(1, s, s)`` tensor, or ``None``."""
    box = best_face(params.detect(img, cascade))
    if box is None:
        return None
    return face_tensor(img, box.rect, input_size)


class PortraitTransformer(TransformerMixin, BaseEstimator):
    """Maps a list of :class:`PixelGrid` portraits to a tensor batch.

    Images without a detectable face are dropped; ``found_`` records which
    inputs survived the last ``transform``.
    """

    def __init__(self, cascade=None, input_size=DEFAULT_INPUT_SIZE, min_size=facedetect.DEFAULT_MIN_SIZE,
                 min_neighbors=facedetect.DEFAULT_MIN_NEIGHBORS):
        self.cascade = cascade
        self.input_size = input_size
        self.min_size = min_size
        self.min_neighbors = min_neighbors

    def fit(self, X, y=None):
        self.cascade_ = self.cascade if self.cascade is not None else facedetect.demo_cascade()
        return self

    def transform(self, X):
        cascade = getattr(self, "cascade_", None) or self.cascade or facedetect.demo_cascade()
        params = DetectParams(min_size=self.min_size, min_neighbors=self.min_neighbors)
        out, found = [], []
        for img in X:
            t = preprocess_portrait(img, cascade, self.input_size, params)
            found.append(t is not None)
            if t is not None:
                out.append(t)
        self.found_ = np.asarray(found, dtype=bool)
        if not out:
            return np.empty((0, 1, self.input_size, self.input_size))
        return np.stack(out)


# --- splitting and fine-tuning ------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise SplitError("train_fraction must lie in (0, 1)")


def split_dataset(d: Dataset, spec: SplitSpec):
    n = len(d)
    if n == 0:
        raise SplitError("cannot split an empty dataset")
    n_train = _round_half_up(n * spec.train_fraction)
    if n_train == 0 or n_train == n:
        raise SplitError(f"fraction {spec.train_fraction} leaves an empty side for n={n}")
    order = np.random.default_rng(spec.seed).permutation(n)
    return d.subset(order[:n_train]), d.subset(order[n_train:])


@dataclass(frozen=True)
class FineTuneConfig:
    freeze_prefix: int = 0
    head_classes: int = 4
    initial_iterations: int = 100_000
    bootstrap_iterations: int = 20_000
    confidence_threshold: float = DEFAULT_CONFIDENCE
    train_config: TrainConfig = field(default_factory=TrainConfig)
    base_model_path: str | None = None

    def __post_init__(self):
        if not 0 < self.confidence_threshold < 1:
            raise ValueError("confidence_threshold must lie in (0, 1)")
        if self.initial_iterations < 0 or self.bootstrap_iterations < 0 or self.freeze_prefix < 0:
            raise ValueError("iteration counts and freeze_prefix must be non-negative")


def replace_head(base: NetworkModel, n_classes: int, class_labels, seed: int) -> NetworkModel:
    """Swap the dense layer feeding the softmax for a freshly initialised one."""
    head = len(base.layers) - 2
    if head < 0 or base.layers[head].kind != "dense":
        raise ShapeError("base model has no dense layer before its softmax")
    new_head = neuralnet.dense(base.layers[head].in_units, n_classes)
    layers = base.layers[:head] + (new_head, base.layers[-1])
    head_w = neuralnet.init_weights([new_head], seed)[0]
    weights = base.weights[:head] + (head_w, ())
    return NetworkModel(base.input_shape, layers, weights, tuple(class_labels))


def finetune(base: NetworkModel, train: Dataset, cfg: FineTuneConfig):
    """New 4-class head, then ``initial_iterations`` steps with the first
    ``freeze_prefix`` layers held fixed.  Returns ``(model, loss_history)``."""
    if cfg.head_classes != len(train.class_labels):
        raise LabelError(f"head_classes={cfg.head_classes} but dataset has {len(train.class_labels)} labels")
    model = replace_head(base, cfg.head_classes, train.class_labels, cfg.train_config.seed)
    if cfg.freeze_prefix >= len(model.layers) - 1:
        raise ValueError("freeze_prefix would freeze the new head")
    tc = replace(cfg.train_config, iterations=cfg.initial_iterations)
    return neuralnet.train(model, train.inputs, train.labels, tc, frozen=range(cfg.freeze_prefix))


# --- bootstrapping ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReviewEntry:
    photo_id: str
    box: Rect
    predicted: str
    confidence: float
    input: np.ndarray = field(repr=False, default=None)
    reviewer_label: str | None = None

    @property
    def key(self):
        return (self.photo_id, tuple(self.box))


@dataclass(frozen=True)
class ReviewQueue:
    entries: tuple
    threshold: float

    def __len__(self):
        return len(self.entries)


def select_high_confidence(model: NetworkModel, unlabeled, threshold: float = DEFAULT_CONFIDENCE) -> ReviewQueue:
    """Queue every prediction with confidence >= ``threshold``, most confident first.

    ``unlabeled`` yields ``(photo_id, tensor, box)`` triples.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    items = list(unlabeled)
    entries = []
    if items:
        preds, confs = neuralnet.predict_batch(model, np.stack([t for _, t, _ in items]))
        for (photo_id, tensor, box), k, c in zip(items, preds, confs):
            if c >= threshold:
                entries.append(ReviewEntry(photo_id, Rect(*box), model.class_labels[int(k)], float(c), tensor))
    entries.sort(key=lambda e: (-e.confidence, e.photo_id, tuple(e.box)))
    return ReviewQueue(tuple(entries), threshold)


def write_review_file(queue: ReviewQueue, path):
    """Review sheet with an empty ``verdict`` column for the reviewer to fill in."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REVIEW_COLUMNS)
        for e in queue.entries:
            w.writerow([e.photo_id, *e.box, e.predicted, repr(e.confidence), e.reviewer_label or ""])


def _parse_verdict(text: str, lineno: int):
    v = text.strip()
    if v == "confirm":
        return "confirm", None
    if v == "reject":
        return "reject", None
    if v.startswith("relabel:"):
        label = v.split(":", 1)[1].strip()
        if label in RACE_LABELS:
            return "relabel", label
    raise ReviewError(f"line {lineno}: malformed verdict {text!r} (expected confirm, reject or relabel:<Label>)")


def apply_review(queue: ReviewQueue, review_file) -> Dataset:
    """Turn reviewer verdicts into labelled examples.

    ``confirm`` keeps the prediction, ``relabel:<Label>`` substitutes the
    reviewer's label, ``reject`` drops the entry.
    """
    by_key = {e.key: e for e in queue.entries}
    labels = RACE_LABELS
    inputs, ys = [], []
    with open(review_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REVIEW_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ReviewError(f"review file lacks column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                key = (row["photo_id"], tuple(int(row[c]) for c in ("box_x", "box_y", "box_w", "box_h")))
            except ValueError:
                raise ReviewError(f"line {lineno}: box coordinates must be integers") from None
            entry = by_key.get(key)
            if entry is None:
                raise ReviewError(f"line {lineno}: no queue entry for photo {key[0]} box {key[1]}")
            verdict, label = _parse_verdict(row["verdict"], lineno)
            if verdict == "reject":
                continue
            label = entry.predicted if verdict == "confirm" else label
            if entry.input is None:
                raise ReviewError(f"line {lineno}: queue entry carries no input tensor")
            inputs.append(entry.input)
            ys.append(labels.index(label))
    if not inputs:
        return Dataset(np.empty((0,) + (queue.entries[0].input.shape if queue.entries else (1, 1, 1))),
                       np.empty(0, dtype=np.intp), labels)
    return Dataset(np.stack(inputs), np.asarray(ys), labels)


@dataclass(frozen=True, eq=False)
class BootstrapRun:
    model: NetworkModel
    dataset: Dataset
    loss_history: list


def bootstrap_round(model: NetworkModel, train: Dataset, reviewed: Dataset, cfg: FineTuneConfig) -> BootstrapRun:
    """Train ``bootstrap_iterations`` more steps on ``train`` plus reviewed examples."""
    if len(reviewed) == 0:
        raise ValueError("bootstrap_round needs at least one reviewed example")
    augmented = train.concat(reviewed)
    tc = replace(cfg.train_config, iterations=cfg.bootstrap_iterations, seed=cfg.train_config.seed + 1)
    new_model, history = neuralnet.train(model, augmented.inputs, augmented.labels, tc,
                                         frozen=range(cfg.freeze_prefix))
    return BootstrapRun(new_model, augmented, history)


# --- evaluation ------------------------------------------------------------------------


def evaluate_per_class(model: NetworkModel, validation: Dataset, folds: int = 1, seed: int = 0) -> dict:
    """Per-class accuracy ``correct_c / total_c``; ``None`` where a class is absent.

    With ``folds >= 2`` the validation set is split into seeded folds and the
    per-class accuracies are averaged over the folds containing that class.
    """
    if len(validation) == 0:
        raise EvaluationError("validation set is empty")
    if folds < 1:
        raise EvaluationError("folds must be >= 1")
    preds, _ = neuralnet.predict_batch(model, validation.inputs)
    correct = preds == validation.labels
    if folds == 1:
        parts = [np.arange(len(validation))]
    else:
        order = np.random.default_rng(seed).permutation(len(validation))
        parts = [p for p in np.array_split(order, folds) if p.size]
    out = {}
    for c, label in enumerate(validation.class_labels):
        accs = []
        for part in parts:
            mask = validation.labels[part] == c
            if mask.any():
                accs.append(float(correct[part][mask].mean()))
        out[label] = float(np.mean(accs)) if accs else None
    return out


# --- sampling and classification ------------------------------------------------------


def sample_per_member(corpus: CorpusManifest, fraction: float, seed: int = 0) -> CorpusManifest:
    """Seeded ``ceil(fraction * n)`` sample without replacement for each member."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    by_member: dict = {}
    for p in corpus.photos:
        by_member.setdefault(p.member_id, []).append(p)
    keep = set()
    for member_id, photos in by_member.items():
        k = math.ceil(round(fraction * len(photos), 9))
        rng = np.random.default_rng(_seed_for(seed, member_id))
        chosen = rng.choice(len(photos), size=k, replace=False)
        keep.update(photos[i].photo_id for i in chosen)
    return corpus.with_photos(p for p in corpus.photos if p.photo_id in keep)


@dataclass
class ClassifyReport:
    photos_seen: int = 0
    photos_with_faces: int = 0
    faces: int = 0
    skipped: list = field(default_factory=list)

    @property
    def warnings(self) -> int:
        return len(self.skipped)


def _classify_photo(photo, model, cascade, params, input_size):
    try:
        img = imagecore.read_image(photo.file_path)
    except (OSError, DecodeError, UnsupportedFormatError) as exc:
        return None, f"{photo.file_path}: {exc}"
    boxes = params.detect(img, cascade)
    if not boxes:
        return [], None
    batch = np.stack([face_tensor(img, b.rect, input_size) for b in boxes])
    preds, confs = neuralnet.predict_batch(model, batch)
    faces = [ClassifiedFace(photo.photo_id, photo.member_id, b.rect, model.class_labels[int(k)], float(c))
             for b, k, c in zip(boxes, preds, confs)]
    return faces, None


def classify_corpus(model: NetworkModel, cascade: CascadeModel, corpus: CorpusManifest,
                    params: DetectParams = DetectParams(), jobs: int = 1):
    """Classify every detected face; unreadable files are skipped and reported.

    Returns ``(faces, report)`` with faces sorted by member, photo and box order.
    """
    input_size = model.input_shape[-1]
    photos = sorted(corpus.photos, key=lambda p: (p.member_id, p.photo_id))

    def work(p):
        return _classify_photo(p, model, cascade, params, input_size)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, photos))
    else:
        results = [work(p) for p in photos]
    report = ClassifyReport(photos_seen=len(photos))
    faces = []
    for faces_i, err in results:
        if err is not None:
            report.skipped.append(err)
            log.warning("skipping unreadable image %s", err)
            continue
        if faces_i:
            report.photos_with_faces += 1
            faces.extend(faces_i)
    report.faces = len(faces)
    return faces, report


def detect_corpus_faces(corpus: CorpusManifest, cascade: CascadeModel, params: DetectParams = DetectParams(),
                        jobs: int = 1):
    """Face boxes per photo; returns ``(detections, skipped)`` where detections
    maps photo_id to its box list (empty when no face was found)."""
    photos = sorted(corpus.photos, key=lambda p: (p.member_id, p.photo_id))

    def work(p):
        try:
            return params.detect(imagecore.read_image(p.file_path), cascade), None
        except (OSError, DecodeError, UnsupportedFormatError) as exc:
            return None, f"{p.file_path}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, photos))
    else:
        results = [work(p) for p in photos]
    detections, skipped = {}, []
    for p, (boxes, err) in zip(photos, results):
        if err is not None:
            skipped.append(err)
        else:
            detections[p.photo_id] = boxes
    return detections, skipped


def classification_rows(faces: Sequence[ClassifiedFace]) -> list:
    return [{"member_id": f.member_id, "photo_id": f.photo_id, "box_x": f.box.x, "box_y": f.box.y,
             "box_w": f.box.w, "box_h": f.box.h, "label": f.label, "confidence": f.confidence}
            for f in faces]


def faces_from_rows(rows) -> list:
    return [ClassifiedFace(r["photo_id"], r["member_id"],
                           Rect(int(r["box_x"]), int(r["box_y"]), int(r["box_w"]), int(r["box_h"])),
                           r["label"], float(r["confidence"])) for r in rows]


def load_labeled_directory(root, cascade: CascadeModel, input_size: int = DEFAULT_INPUT_SIZE,
                           params: DetectParams = DetectParams()):
    """Labelled portraits laid out as ``<root>/<Label>/*.png|jpg``.

    Returns ``(dataset, n_without_face)``.
    """
    root = Path(root)
    inputs, labels, missed = [], [], 0
    for c, label in enumerate(RACE_LABELS):
        d = root / label
        if not d.is_dir():
            continue
        for f in sorted(d.iterdir()):
            if f.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            t = preprocess_portrait(imagecore.read_image(f), cascade, input_size, params)
            if t is None:
                missed += 1
                continue
            inputs.append(t)
            labels.append(c)
    if not inputs:
        return Dataset(np.empty((0, 1, input_size, input_size)), np.empty(0, dtype=np.intp)), missed
    return Dataset(np.stack(inputs), np.asarray(labels)), missed
