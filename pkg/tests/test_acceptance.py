"""End-to-end acceptance checks, one test per criterion.

Each test carries a ``criterion`` mark; conftest prints a PASS/FAIL line per
criterion in the terminal summary.
"""
import math
import time
import xml.etree.ElementTree as ET
from itertools import combinations

import numpy as np
import pytest

from conftest import planted_image, small_net, toy_task
from photostyle import analytics as an
from photostyle import corpus, facedetect, neuralnet, pipeline
from photostyle.corpus import CorpusManifest, LegislatorRecord, PhotoRecord
from photostyle.imagecore import PixelGrid, Rect, from_tensor, to_tensor

SVG = "{http://www.w3.org/2000/svg}"


@pytest.mark.criterion(1, "gradient fidelity against central differences")
def test_gradient_fidelity():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    model = small_net(seed=2)
    n_weights = sum(w.size for ws in model.weights for w in ws)
    x = rng.random((1, 8, 8))
    err = neuralnet.gradient_check(model, (x, 1), epsilon=1e-4, max_checks=n_weights)
    assert err < 1e-4
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(2, "cross-entropy loss arithmetic")
def test_loss_arithmetic(rng):
    uniform = np.full((5, 4), 0.25)
    assert abs(neuralnet.loss(uniform, [0, 1, 2, 3, 0]) - math.log(4)) <= 1e-9
    perfect = np.eye(4)
    assert abs(neuralnet.loss(perfect, [0, 1, 2, 3])) <= 1e-9
    for _ in range(20):
        p = rng.dirichlet(np.ones(4), size=16)
        y = rng.integers(0, 4, size=16)
        per_example = [neuralnet.loss(p[i:i + 1], [y[i]]) for i in range(16)]
        assert abs(neuralnet.loss(p, y) - np.mean(per_example)) <= 1e-12


@pytest.mark.criterion(3, "learning sanity on a separable two-class task")
def test_learning_sanity():
    start = time.perf_counter()
    x, y = toy_task(200, seed=0)
    model = small_net(seed=0, n_classes=2)
    cfg = neuralnet.TrainConfig(iterations=500, seed=0)
    first, _ = neuralnet.train(model, x, y, cfg)
    second, _ = neuralnet.train(model, x, y, cfg)
    assert neuralnet.accuracy(first, x, y) >= 0.95
    assert neuralnet.dumps_model(first) == neuralnet.dumps_model(second)
    assert time.perf_counter() - start < 120


@pytest.mark.criterion(4, "integral image and planted-pattern detection")
def test_detection_oracle(rng, cascade):
    for _ in range(100):
        px = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
        ii = facedetect.integral_image(PixelGrid(px))
        for _ in range(50):
            x, y = rng.integers(0, 32, size=2)
            w, h = rng.integers(1, 33 - x), rng.integers(1, 33 - y)
            brute = sum(int(px[r, c]) for r in range(y, y + h) for c in range(x, x + w))
            assert ii.rect_sum(Rect(int(x), int(y), int(w), int(h))) == brute
    boxes = facedetect.detect_faces(planted_image(), cascade)
    assert len(boxes) == 1
    assert facedetect.iou(boxes[0].rect, Rect(18, 20, 24, 24)) > 0.6
    for value in (0, 128, 255):
        assert facedetect.detect_faces(PixelGrid(np.full((72, 64), value, dtype=np.uint8)), cascade) == []


def _review_file(tmp_path, queue, verdicts):
    path = tmp_path / f"review_{len(list(tmp_path.iterdir()))}.csv"
    pipeline.write_review_file(queue, path)
    rows = corpus.load_table(path, pipeline.REVIEW_COLUMNS)
    for row, verdict in zip(rows, verdicts):
        row["verdict"] = verdict
    corpus.persist_table(rows, path, pipeline.REVIEW_COLUMNS)
    return path


@pytest.mark.criterion(5, "pipeline contracts: split, freezing, review, reproducibility")
def test_pipeline_contracts(tmp_path, fixture_runs):
    n = 78_000
    data = pipeline.Dataset(np.arange(n, dtype=np.float64).reshape(n, 1, 1, 1), np.arange(n) % 4)
    train, val = pipeline.split_dataset(data, pipeline.SplitSpec(61 / 78, seed=0))
    assert (len(train), len(val)) == (61_000, 17_000)
    assert set(train.inputs.ravel().tolist()).isdisjoint(val.inputs.ravel().tolist())

    base = small_net(seed=1)
    x, y = toy_task(60, seed=1)
    cfg = pipeline.FineTuneConfig(freeze_prefix=4, initial_iterations=40,
                                  train_config=neuralnet.TrainConfig(iterations=1, seed=0))
    tuned, _ = pipeline.finetune(base, pipeline.Dataset(x, y * 3), cfg)
    for i in range(4):
        assert all(np.array_equal(a, b) for a, b in zip(tuned.weights[i], base.weights[i]))

    w = np.zeros((4, 1))
    w[0, 0] = 1.0
    net = neuralnet.NetworkModel((1,), (neuralnet.dense(1, 4), neuralnet.softmax()), ((w, np.zeros(4)), ()),
                                 neuralnet.RACE_LABELS)
    items = [(f"p{i}", np.array([t]), (0, 0, 24, 24)) for i, t in enumerate((5.0, 6.0, 7.0))]
    queue = pipeline.select_high_confidence(net, items, 0.9)
    assert len(queue) == 3
    known = pipeline.Dataset(np.zeros((10, 1)), np.zeros(10, dtype=int))
    no_train = pipeline.FineTuneConfig(initial_iterations=0, bootstrap_iterations=0)
    for verdicts, added in ((["confirm"] * 3, 3), (["confirm", "relabel:Asian", "reject"], 2),
                            (["reject"] * 3, 0)):
        reviewed = pipeline.apply_review(queue, _review_file(tmp_path, queue, verdicts))
        assert len(reviewed) == added
        if added:
            assert len(pipeline.bootstrap_round(net, known, reviewed, no_train).dataset) == 10 + added

    (a, codes_a, _), (b, codes_b, _) = fixture_runs
    assert codes_a == codes_b == [0] * len(codes_a)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert all((a / name).read_bytes() == (b / name).read_bytes() for name in names)


def _enumeration_p(a, b):
    values = list(a) + list(b)
    order = sorted(values)
    doubled = [2 * order.index(v) + order.count(v) + 1 for v in values]  # 2 * midrank
    n, na, total = len(values), len(a), sum(doubled)
    observed = abs(n * sum(doubled[:na]) - na * total)
    splits = list(combinations(range(n), na))
    hits = sum(abs(n * sum(doubled[i] for i in s) - na * total) >= observed for s in splits)
    return hits / len(splits)


@pytest.mark.criterion(6, "statistics oracles: OLS, fixed effects, Wilcoxon, orthogonality")
def test_statistics_oracles(rng):
    for _ in range(20):
        X = rng.normal(size=(40, 3))
        y = X @ rng.normal(size=3) + rng.normal(size=40)
        res = an.ols(y, X)
        design = np.column_stack([np.ones(40), X])
        oracle = np.linalg.solve(design.T @ design, design.T @ y)
        assert np.max(np.abs(res.coefficients - oracle)) < 1e-8
        assert np.max(np.abs(design.T @ res.residuals)) < 1e-8

    for _ in range(20):
        groups = list(rng.choice(["PA", "OH", "NY"], size=30))
        x = rng.normal(size=30)
        y = 0.8 * x + np.array([{"PA": 1, "OH": -2, "NY": 4}[g] for g in groups]) + rng.normal(size=30)
        levels = sorted(set(groups))
        dummies = np.column_stack([[g == lv for g in groups] for lv in levels]).astype(float)
        slope = np.linalg.lstsq(np.column_stack([x, dummies]), y, rcond=None)[0][0]
        assert abs(an.ols_fixed_effects(y, {"x": x}, groups).coef("x") - slope) < 1e-8

    for n in range(2, 11):
        for na in range(1, n):
            data = rng.integers(0, 5, size=n).astype(float)
            a, b = data[:na], data[na:]
            assert abs(an.wilcoxon_rank_sum(a, b, method="exact").pvalue - _enumeration_p(a, b)) < 1e-12
            distinct = rng.permutation(n).astype(float)
            a, b = distinct[:na], distinct[na:]
            assert abs(an.wilcoxon_rank_sum(a, b, method="exact").pvalue - _enumeration_p(a, b)) < 1e-12
    assert an.wilcoxon_rank_sum([1, 2, 3], [4, 5, 6]).pvalue == pytest.approx(0.1, abs=1e-12)


@pytest.mark.criterion(7, "reported survey intervals: mean age and share male")
def test_reported_intervals(rng):
    # reported age 36.54 (35.86, 37.22) on 1072 respondents
    assert abs((35.86 + 37.22) / 2 - 36.54) <= 0.005
    z = rng.normal(size=1072)
    z = (z - z.mean()) / z.std(ddof=1)
    sd = (37.22 - 35.86) / 2 * math.sqrt(1072) / 1.962226  # t quantile with 1071 df
    m, lo, hi = an.mean_ci(36.54 + sd * z)
    assert abs((lo + hi) / 2 - 36.54) <= 0.005
    assert abs(hi - m - (m - lo)) <= 1e-12
    # reported 56.6% male (53.51%, 59.48%)
    for k in (0.566 * 1072, 607):
        p, lo, hi = an.proportion_ci(k, 1072)
        assert abs(lo - 0.5351) <= 0.002 and abs(hi - 0.5948) <= 0.002


@pytest.mark.criterion(8, "aggregation sums and per-member sampling")
def test_aggregation(rng):
    roster = [LegislatorRecord("H1", "Rep One", "house", "D", "PA", 7)]
    labels = np.array(neuralnet.RACE_LABELS)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        faces = [an.ClassifiedFace(f"p{i}", "H1", Rect(0, 0, 24, 24), str(lab), 0.9)
                 for i, lab in enumerate(rng.choice(labels, n))]
        d = an.aggregate_demographics(faces, roster)[0]
        assert abs(sum(d.proportions.values()) - 1.0) <= 1e-9

    faces = [an.ClassifiedFace(f"p{i}", "H1", Rect(0, 0, 24, 24), lab, 0.9)
             for i, lab in enumerate(["White", "White", "White", "AfricanAmerican"])]
    d = an.aggregate_demographics(faces, roster)[0]
    assert tuple(d.proportions[k] for k in ("White", "AfricanAmerican", "Asian", "Hispanic")) == (0.75, 0.25, 0, 0)

    counts = [1, 7, 10, 11, 25, 0, 99]
    members = [LegislatorRecord(f"M{i}") for i in range(len(counts))]
    photos = [PhotoRecord(f"{i:02d}{j:014x}", f"M{i}", f"M{i}/{j}.png") for i, n in enumerate(counts)
              for j in range(n)]
    m = CorpusManifest(members, photos)
    first = pipeline.sample_per_member(m, 0.1, seed=3)
    assert first.photos == pipeline.sample_per_member(m, 0.1, seed=3).photos
    for i, n in enumerate(counts):
        assert sum(p.member_id == f"M{i}" for p in first.photos) == math.ceil(0.1 * n)


@pytest.mark.criterion(9, "tensor contract: element count and byte round trip")
def test_tensor_contract(rng):
    img = PixelGrid(rng.integers(0, 256, size=(412, 640, 3), dtype=np.uint8))
    t = to_tensor(img)
    assert t.size == 791_040
    assert from_tensor(t) == img
    every = PixelGrid(np.arange(256, dtype=np.uint8).reshape(16, 16))
    assert from_tensor(to_tensor(every)) == every


def _series_slopes(path):
    root = ET.parse(path).getroot()
    slopes = {}
    for g in root.iter(f"{SVG}g"):
        if g.get("class") == "series":
            fit = [e for e in g if e.get("class") == "fit"]
            slopes[g.get("data-series")] = float(fit[0].get("data-slope"))
    return slopes


@pytest.mark.criterion(10, "fixture runs end to end through the command line")
def test_cli_fixture_end_to_end(fixture_runs):
    from test_cli import SCHEMAS

    (out, codes, seconds), (other, _, _) = fixture_runs
    assert codes == [0] * len(codes)
    assert seconds < 300
    roster = corpus.load_roster(out / "roster.csv")
    assert len(roster) == 6
    assert len(corpus.load_manifest(out / "photos.csv", roster).photos) == 60
    corpus.load_manifest(out / "sample.csv", roster)
    for name, columns in SCHEMAS.items():
        corpus.load_table(out / name, columns)
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert {"scatter_black.svg", "scatter_white.svg", "boxplot_minority.svg", "fixed_effects.svg"} <= set(svgs)
    for name in svgs:
        assert (out / name).read_bytes() == (other / name).read_bytes()
    slopes = _series_slopes(out / "scatter_black.svg")
    assert slopes["D"] > slopes["R"]
