import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import planted_image, small_net, toy_task
from photostyle import neuralnet as nn
from photostyle import pipeline as pl
from photostyle.corpus import CorpusManifest, LegislatorRecord, PhotoRecord
from photostyle.exceptions import EvaluationError, LabelError, ReviewError, SplitError
from photostyle.facedetect import FaceBox
from photostyle.fixtures import portrait
from photostyle.imagecore import PixelGrid, Rect, encode_png


def indexed_dataset(n):
    """Inputs carry their own index so a split can be checked for overlap."""
    return pl.Dataset(np.arange(n, dtype=np.float64).reshape(n, 1, 1, 1), np.arange(n) % 4)


def ids(d):
    return set(d.inputs.reshape(-1).astype(int).tolist())


def selector_net():
    """dense(4, 4) identity: the predicted class is the argmax of the input vector."""
    return nn.NetworkModel((4,), (nn.dense(4, 4), nn.softmax()), ((np.eye(4), np.zeros(4)), ()), nn.RACE_LABELS)


def confidence_net():
    """Input t gives logits (t, 0, 0, 0), so class 0 has probability e^t / (e^t + 3)."""
    w = np.zeros((4, 1))
    w[0, 0] = 1.0
    return nn.NetworkModel((1,), (nn.dense(1, 4), nn.softmax()), ((w, np.zeros(4)), ()), nn.RACE_LABELS)


def confident_input(p):
    return np.array([math.log(3 * p / (1 - p))])


# --- preprocessing --------------------------------------------------------------------


def test_preprocess_blank_image(cascade):
    assert pl.preprocess_portrait(PixelGrid(np.full((64, 64), 128, dtype=np.uint8)), cascade) is None


def test_preprocess_planted_pattern(cascade):
    t = pl.preprocess_portrait(planted_image(), cascade, input_size=20)
    assert t.shape == (1, 20, 20)
    assert t.min() >= 0 and t.max() <= 1
    # dark upper half, light lower half survive the crop
    assert t[0, :8].mean() < t[0, 12:].mean()


def test_preprocess_rgb_portrait(cascade):
    img = planted_image()
    rgb = PixelGrid(np.repeat(img.data, 3, axis=2))
    assert np.array_equal(pl.preprocess_portrait(rgb, cascade), pl.preprocess_portrait(img, cascade))


def test_best_face_rules():
    a = FaceBox(Rect(10, 0, 24, 24), 2.0, 1.0)
    b = FaceBox(Rect(0, 0, 24, 24), 2.0, 1.0)
    c = FaceBox(Rect(5, 5, 24, 24), 1.0, 1.0)
    assert pl.best_face([a, b, c]) == b
    assert pl.best_face([c, FaceBox(Rect(40, 40, 24, 24), 3.0, 1.0)]).score == 3.0
    assert pl.best_face([]) is None


def test_portrait_transformer(cascade):
    blank = PixelGrid(np.full((64, 64), 128, dtype=np.uint8))
    tf = pl.PortraitTransformer(cascade=cascade, input_size=16)
    out = tf.fit_transform([planted_image(), blank, planted_image(seed=1)])
    assert out.shape == (2, 1, 16, 16)
    assert tf.found_.tolist() == [True, False, True]
    assert tf.fit_transform([blank]).shape == (0, 1, 16, 16)


# --- splitting ------------------------------------------------------------------------


def test_split_paper_sizes():
    d = indexed_dataset(78_000)
    train, val = pl.split_dataset(d, pl.SplitSpec(61 / 78, seed=0))
    assert (len(train), len(val)) == (61_000, 17_000)
    assert ids(train).isdisjoint(ids(val))
    assert ids(train) | ids(val) == set(range(78_000))


def test_split_half_and_determinism():
    d = indexed_dataset(10)
    a = pl.split_dataset(d, pl.SplitSpec(0.5, seed=3))
    b = pl.split_dataset(d, pl.SplitSpec(0.5, seed=3))
    assert (len(a[0]), len(a[1])) == (5, 5)
    assert ids(a[0]) == ids(b[0]) and ids(a[0]).isdisjoint(ids(a[1]))
    assert a[0].class_labels == d.class_labels


def test_split_errors():
    with pytest.raises(SplitError):
        pl.split_dataset(indexed_dataset(3), pl.SplitSpec(0.1))
    with pytest.raises(SplitError):
        pl.split_dataset(indexed_dataset(0), pl.SplitSpec(0.5))
    with pytest.raises(SplitError):
        pl.SplitSpec(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.floats(0.01, 0.99), st.integers(0, 1000))
def test_split_is_partition(n, fraction, seed):
    try:
        train, val = pl.split_dataset(indexed_dataset(n), pl.SplitSpec(fraction, seed))
    except SplitError:
        assert math.floor(n * fraction + 0.5) in (0, n)
        return
    assert len(train) + len(val) == n
    assert ids(train).isdisjoint(ids(val)) and ids(train) | ids(val) == set(range(n))


def test_dataset_validation():
    with pytest.raises(LabelError):
        pl.Dataset(np.zeros((2, 1, 2, 2)), [0, 4])
    with pytest.raises(ValueError):
        pl.Dataset(np.zeros((2, 1, 2, 2)), [0])


# --- fine-tuning ----------------------------------------------------------------------


def toy_dataset(n=200, seed=0):
    x, y = toy_task(n, seed)
    return pl.Dataset(x, y)


def cfg(iterations, freeze=0, bootstrap=0, seed=0):
    return pl.FineTuneConfig(freeze_prefix=freeze, initial_iterations=iterations, bootstrap_iterations=bootstrap,
                             train_config=nn.TrainConfig(iterations=1, seed=seed))


def test_finetune_freeze_contract():
    base = small_net(seed=1)
    model, history = pl.finetune(base, toy_dataset(60), cfg(40, freeze=4))
    assert len(history) == 40
    for i in range(4):
        for w, b in zip(model.weights[i], base.weights[i]):
            assert np.array_equal(w, b)
    assert not np.array_equal(model.weights[4][0], base.weights[4][0])


def test_finetune_zero_iterations_reinitialises_head():
    base = small_net(seed=1)
    model, history = pl.finetune(base, toy_dataset(20), cfg(0))
    fresh = pl.replace_head(base, 4, nn.RACE_LABELS, 0)
    assert history == []
    assert np.array_equal(model.weights[4][0], fresh.weights[4][0])
    assert not np.array_equal(model.weights[4][0], base.weights[4][0])
    assert np.array_equal(model.weights[0][0], base.weights[0][0])


def test_finetune_learns_toy_task():
    d = toy_dataset(200)
    model, _ = pl.finetune(small_net(seed=0), d, cfg(500))
    assert nn.accuracy(model, d.inputs, d.labels) >= 0.95


def test_finetune_errors():
    with pytest.raises(ValueError):
        pl.finetune(small_net(), toy_dataset(10), cfg(1, freeze=5))
    with pytest.raises(LabelError):
        pl.finetune(small_net(), toy_dataset(10), pl.FineTuneConfig(head_classes=2, initial_iterations=1))
    with pytest.raises(ValueError):
        pl.FineTuneConfig(confidence_threshold=0.0)


# --- review queue ---------------------------------------------------------------------


def items(confidences):
    return [(f"p{i}", confident_input(c), (i, 0, 24, 24)) for i, c in enumerate(confidences)]


def test_select_threshold_one_is_empty():
    queue = pl.select_high_confidence(confidence_net(), items([0.3, 0.9, 0.99]), 1.0)
    assert len(queue) == 0


def test_select_quarter_takes_everything():
    queue = pl.select_high_confidence(small_net(), [(f"p{i}", np.zeros((1, 8, 8)) + i / 10, (0, 0, 1, 1))
                                                    for i in range(7)], 0.25)
    assert len(queue) == 7


def test_select_filters_and_sorts():
    queue = pl.select_high_confidence(confidence_net(), items([0.5, 0.9]), 0.8)
    assert [e.photo_id for e in queue.entries] == ["p1"]
    assert queue.entries[0].confidence == pytest.approx(0.9)
    queue = pl.select_high_confidence(confidence_net(), items([0.85, 0.97, 0.2, 0.91]), 0.8)
    confs = [e.confidence for e in queue.entries]
    assert confs == sorted(confs, reverse=True) and min(confs) >= 0.8
    assert [e.photo_id for e in queue.entries] == ["p1", "p3", "p0"]


def review(tmp_path, queue, verdicts):
    path = tmp_path / "review.csv"
    pl.write_review_file(queue, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["photo_id"] for r in rows] == [e.photo_id for e in queue.entries]
    for row, verdict in zip(rows, verdicts):
        row["verdict"] = verdict
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, pl.REVIEW_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return path


@pytest.fixture
def queue():
    return pl.select_high_confidence(confidence_net(), items([0.95, 0.93, 0.91]), 0.9)


def test_review_all_confirm(tmp_path, queue):
    out = pl.apply_review(queue, review(tmp_path, queue, ["confirm"] * 3))
    assert len(out) == 3 and out.labels.tolist() == [0, 0, 0]


def test_review_all_reject(tmp_path, queue):
    assert len(pl.apply_review(queue, review(tmp_path, queue, ["reject"] * 3))) == 0


def test_review_relabel(tmp_path, queue):
    out = pl.apply_review(queue, review(tmp_path, queue, ["confirm", "relabel:Hispanic", "reject"]))
    assert [nn.RACE_LABELS[k] for k in out.labels] == ["White", "Hispanic"]
    assert np.array_equal(out.inputs[1], queue.entries[1].input)


def test_review_errors(tmp_path, queue):
    with pytest.raises(ReviewError, match="line 3"):
        pl.apply_review(queue, review(tmp_path, queue, ["confirm", "maybe", "reject"]))
    with pytest.raises(ReviewError, match="line 2"):
        pl.apply_review(queue, review(tmp_path, queue, ["relabel:Martian", "confirm", "reject"]))
    path = review(tmp_path, queue, ["confirm"] * 3)
    text = path.read_text().replace("p0,", "zz,")
    path.write_text(text)
    with pytest.raises(ReviewError, match="no queue entry"):
        pl.apply_review(queue, path)


@pytest.mark.parametrize("verdicts, added", [(["confirm"] * 3, 3), (["reject"] * 3, 0),
                                             (["confirm", "relabel:Asian", "reject"], 2)])
def test_review_augmented_sizes(tmp_path, queue, verdicts, added):
    base = pl.Dataset(np.zeros((10, 1)), np.zeros(10))
    reviewed = pl.apply_review(queue, review(tmp_path, queue, verdicts))
    assert len(reviewed) == added
    if added:
        run = pl.bootstrap_round(confidence_net(), base, reviewed, cfg(0, bootstrap=0))
        assert len(run.dataset) == 10 + added


# --- bootstrapping --------------------------------------------------------------------


def test_bootstrap_requires_reviewed():
    with pytest.raises(ValueError):
        pl.bootstrap_round(small_net(), toy_dataset(10), pl.Dataset(np.empty((0, 1, 8, 8)), []), cfg(0))


def test_bootstrap_zero_iterations():
    model = small_net()
    train, extra = toy_dataset(20), toy_dataset(5, seed=9)
    run = pl.bootstrap_round(model, train, extra, cfg(0, bootstrap=0))
    assert run.model is model and run.loss_history == []
    assert len(run.dataset) == 25
    assert np.array_equal(run.dataset.inputs[:20], train.inputs)


def test_bootstrap_with_reviewed_labels_keeps_accuracy():
    train, pool, val = toy_dataset(100, seed=0), toy_dataset(200, seed=1), toy_dataset(200, seed=2)
    c = cfg(150, bootstrap=100)
    model, _ = pl.finetune(small_net(seed=0), train, c)
    before = nn.accuracy(model, val.inputs, val.labels)
    queue = pl.select_high_confidence(model, [(f"p{i:03d}", pool.inputs[i], (i, 0, 8, 8)) for i in range(len(pool))],
                                      0.5)
    # the simulated reviewer confirms correct predictions until 50 are kept
    chosen = [e for e in queue.entries
              if e.predicted == nn.RACE_LABELS[pool.labels[int(e.photo_id[1:])]]][:50]
    assert len(chosen) == 50
    reviewed = pl.Dataset(np.stack([e.input for e in chosen]),
                          [nn.RACE_LABELS.index(e.predicted) for e in chosen])
    run = pl.bootstrap_round(model, train, reviewed, c)
    assert len(run.dataset) == 150
    assert nn.accuracy(run.model, val.inputs, val.labels) >= before - 0.02


# --- evaluation -----------------------------------------------------------------------


def onehot(k):
    v = np.zeros(4)
    v[k] = 1.0
    return v


def test_evaluate_perfect_model():
    d = pl.Dataset(np.stack([onehot(k) for k in range(4) for _ in range(5)]), np.repeat(np.arange(4), 5))
    assert pl.evaluate_per_class(selector_net(), d) == {label: 1.0 for label in nn.RACE_LABELS}


def test_evaluate_constant_model():
    d = pl.Dataset(np.stack([onehot(k) for k in range(4) for _ in range(5)]), np.repeat(np.arange(4), 5))
    always_white = nn.NetworkModel((4,), (nn.dense(4, 4), nn.softmax()),
                                   ((np.zeros((4, 4)), np.array([5.0, 0, 0, 0])), ()), nn.RACE_LABELS)
    assert pl.evaluate_per_class(always_white, d) == {"White": 1.0, "AfricanAmerican": 0.0, "Asian": 0.0,
                                                      "Hispanic": 0.0}


def test_evaluate_hand_counts():
    white = [onehot(0)] * 9 + [onehot(2)]
    black = [onehot(1)] * 17 + [onehot(3)] * 3
    d = pl.Dataset(np.stack(white + black), [0] * 10 + [1] * 20)
    out = pl.evaluate_per_class(selector_net(), d)
    assert out["White"] == pytest.approx(0.9) and out["AfricanAmerican"] == pytest.approx(0.85)
    assert out["Asian"] is None and out["Hispanic"] is None


def test_evaluate_folds_average():
    white = [onehot(0)] * 9 + [onehot(2)]
    d = pl.Dataset(np.stack(white), [0] * 10)
    out = pl.evaluate_per_class(selector_net(), d, folds=2, seed=0)
    order = np.random.default_rng(0).permutation(10)
    correct = np.array([1] * 9 + [0])
    expected = np.mean([correct[p].mean() for p in np.array_split(order, 2)])
    assert out["White"] == pytest.approx(expected)


def test_evaluate_errors():
    with pytest.raises(EvaluationError):
        pl.evaluate_per_class(selector_net(), pl.Dataset(np.empty((0, 4)), []))
    with pytest.raises(EvaluationError):
        pl.evaluate_per_class(selector_net(), pl.Dataset(np.stack([onehot(0)]), [0]), folds=0)


# --- sampling -------------------------------------------------------------------------


def manifest(counts):
    legislators = [LegislatorRecord(f"M{i}") for i in range(len(counts))]
    photos = [PhotoRecord(f"{i:02d}{j:014x}", f"M{i}", f"M{i}/{j}.png") for i, n in enumerate(counts)
              for j in range(n)]
    return CorpusManifest(legislators, photos)


def test_sample_ten_percent_of_ten():
    out = pl.sample_per_member(manifest([10]), 0.1, seed=0)
    assert len(out.photos) == 1


def test_sample_full_fraction():
    m = manifest([3, 7])
    assert pl.sample_per_member(m, 1.0).photos == m.photos


def test_sample_seed_stable():
    m = manifest([25, 40, 3])
    a, b = pl.sample_per_member(m, 0.1, seed=5), pl.sample_per_member(m, 0.1, seed=5)
    assert a.photos == b.photos
    assert a.counts == {"M0": 3, "M1": 4, "M2": 1}


def test_sample_rejects_bad_fraction():
    with pytest.raises(ValueError):
        pl.sample_per_member(manifest([3]), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 60), min_size=1, max_size=6), st.sampled_from([0.1, 0.25, 0.3, 0.5, 1.0]),
       st.integers(0, 100))
def test_sample_ceiling_rule(counts, fraction, seed):
    out = pl.sample_per_member(manifest(counts), fraction, seed)
    for i, n in enumerate(counts):
        assert out.counts[f"M{i}"] == math.ceil(round(fraction * n, 9))
    assert set(p.photo_id for p in out.photos) <= set(p.photo_id for p in manifest(counts).photos)


# --- classification -------------------------------------------------------------------


def face_model(size=24):
    layers = nn.compact_architecture((1, size, size), 4, channels=(2,))
    return nn.init_model(layers, (1, size, size), nn.RACE_LABELS, seed=0)


def image_corpus(tmp_path, n, corrupt=False):
    legislators = [LegislatorRecord("M1"), LegislatorRecord("M0")]
    photos = []
    for i in range(n):
        path = tmp_path / f"{i}.png"
        path.write_bytes(encode_png(planted_image(seed=i)))
        photos.append(PhotoRecord(f"{i:016x}", f"M{i % 2}", str(path)))
    if corrupt:
        bad = tmp_path / "bad.png"
        bad.write_bytes(encode_png(planted_image())[:40])
        photos.append(PhotoRecord("f" * 16, "M0", str(bad)))
    return CorpusManifest(legislators, photos)


def test_classify_empty_corpus(cascade):
    faces, report = pl.classify_corpus(face_model(), cascade, CorpusManifest())
    assert faces == [] and report.photos_seen == 0


def test_classify_three_images(tmp_path, cascade):
    faces, report = pl.classify_corpus(face_model(), cascade, image_corpus(tmp_path, 3))
    assert len(faces) == 3 and report.faces == 3 and report.warnings == 0
    assert [(f.member_id, f.photo_id) for f in faces] == sorted((f.member_id, f.photo_id) for f in faces)
    assert all(0.25 <= f.confidence <= 1 and f.label in nn.RACE_LABELS for f in faces)


def test_classify_skips_corrupted_file(tmp_path, cascade):
    faces, report = pl.classify_corpus(face_model(), cascade, image_corpus(tmp_path, 3, corrupt=True))
    assert len(faces) == 3
    assert report.warnings == 1 and "bad.png" in report.skipped[0]
    assert report.photos_seen == 4 and report.photos_with_faces == 3


def test_classify_parallel_matches_serial(tmp_path, cascade):
    corpus = image_corpus(tmp_path, 4)
    serial, _ = pl.classify_corpus(face_model(), cascade, corpus)
    parallel, _ = pl.classify_corpus(face_model(), cascade, corpus, jobs=3)
    assert serial == parallel


def test_classification_rows_round_trip(tmp_path, cascade):
    faces, _ = pl.classify_corpus(face_model(), cascade, image_corpus(tmp_path, 2))
    rows = pl.classification_rows(faces)
    assert list(rows[0]) == pl.CLASSIFICATION_COLUMNS
    assert pl.faces_from_rows(rows) == faces


def test_detect_corpus_faces(tmp_path, cascade):
    detections, skipped = pl.detect_corpus_faces(image_corpus(tmp_path, 2, corrupt=True), cascade)
    assert sorted(detections) == [f"{i:016x}" for i in range(2)]
    assert all(len(boxes) == 1 for boxes in detections.values())
    assert len(skipped) == 1


def test_load_labeled_directory(tmp_path, cascade):
    rng = np.random.default_rng(0)
    for label in ("White", "Asian"):
        (tmp_path / label).mkdir()
        for i in range(3):
            (tmp_path / label / f"{i}.png").write_bytes(encode_png(portrait(label, rng, 64, 64)))
    (tmp_path / "White" / "3.png").write_bytes(encode_png(PixelGrid(np.full((64, 64), 128, dtype=np.uint8))))
    d, missed = pl.load_labeled_directory(tmp_path, cascade, input_size=16)
    assert missed == 1
    assert d.inputs.shape == (6, 1, 16, 16)
    assert d.labels.tolist() == [0, 0, 0, 2, 2, 2]
