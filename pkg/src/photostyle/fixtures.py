"""Synthetic end-to-end fixture: six fake legislators, generated portraits,
a census table and survey responses.

Faces are two-tone squares (dark upper half, light lower half) that the
demonstration cascade detects.  The class is encoded by a left/right
symmetric mark in the lower half, so it survives detection unchanged.  For
Democrats the share of ``AfricanAmerican`` faces follows the district's
``pct_black``; for Republicans it is flat, which gives the two parties
different fitted slopes.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .corpus import LegislatorRecord, make_photo_id, save_roster
from .imagecore import PixelGrid, encode_png
from .neuralnet import RACE_LABELS

PHOTO_SIZE = (112, 96)  # width, height
FACE_SIZES = (26, 30, 34, 38)

LEGISLATORS = (
    # member_id, name, party, state, district, pct_black
    ("F000001", "Avery Fenwick", "D", "PA", 1, 0.10),
    ("F000002", "Blair Okafor", "D", "OH", 1, 0.30),
    ("F000003", "Casey Lindqvist", "D", "PA", 2, 0.50),
    ("F000004", "Devon Marsh", "R", "OH", 2, 0.10),
    ("F000005", "Emery Castellano", "R", "PA", 3, 0.30),
    ("F000006", "Finley Haugen", "R", "OH", 3, 0.50),
)
PHOTOS_PER_MEMBER = 10
TRAIN_PER_CLASS = 40


def face_patch(label: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size x size`` uint8 face for ``label``."""
    u = (np.arange(size) + 0.5) / size
    yy, xx = np.meshgrid(u, u, indexing="ij")
    top = float(rng.integers(25, 45))
    bottom = float(rng.integers(205, 230))
    face = np.where(yy < 0.5, top, bottom)
    mark = float(rng.integers(95, 125))
    if label == "AfricanAmerican":  # horizontal bar
        face[(yy > 0.70) & (yy < 0.82) & (np.abs(xx - 0.5) < 0.30)] = mark
    elif label == "Asian":  # two dots
        face[(np.abs(yy - 0.74) < 0.08) & (np.abs(np.abs(xx - 0.5) - 0.22) < 0.08)] = mark
    elif label == "Hispanic":  # vertical bar
        face[(yy > 0.58) & (yy < 0.94) & (np.abs(xx - 0.5) < 0.07)] = mark
    face += rng.normal(0.0, 4.0, face.shape)
    return np.clip(np.rint(face), 0, 255).astype(np.uint8)


def background(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    base = rng.normal(128.0, 12.0, (height, width))
    return np.clip(np.rint(base), 0, 255).astype(np.uint8)


def portrait(label: str, rng: np.random.Generator, width: int = PHOTO_SIZE[0],
             height: int = PHOTO_SIZE[1]) -> PixelGrid:
    """RGB image with one face of ``label`` at a random position and size."""
    img = background(width, height, rng)
    size = int(rng.choice(FACE_SIZES))
    x = int(rng.integers(4, width - size - 4))
    y = int(rng.integers(4, height - size - 4))
    img[y:y + size, x:x + size] = face_patch(label, size, rng)
    return PixelGrid(np.repeat(img[:, :, None], 3, axis=2))


def _member_labels(party: str, pct_black: float, rng: np.random.Generator) -> list:
    n_black = int(round(PHOTOS_PER_MEMBER * pct_black)) if party == "D" else 1
    rest = PHOTOS_PER_MEMBER - n_black
    labels = ["AfricanAmerican"] * n_black + ["Hispanic"] + ["Asian"] + ["White"] * (rest - 2)
    rng.shuffle(labels)
    return labels


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


CONFIG_TEXT = """\
seed = 7

[detect]
sample_fraction = 1.0

[train]
input_size = 24
base_iterations = 200
initial_iterations = 300
bootstrap_iterations = 100
learning_rate = 0.05
batch_size = 16
train_fraction = 0.75
folds = 2
"""


def write_fixture(root, seed: int = 0) -> dict:
    """Write the fixture under ``root`` and return the paths it created."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    records = [LegislatorRecord(mid, name, "house", party, state, district, is_white=True)
               for mid, name, party, state, district, _ in LEGISLATORS]
    save_roster(records, root / "roster.csv")

    manifest = ["# synthetic legislators"]
    for mid, name, *_ in LEGISLATORS:
        handle = name.replace(" ", "").lower()
        manifest += [f"- id: {{bioguide: {mid}}}", f"  social: {{facebook: {handle}}}"]
    (root / "legislators.yaml").write_text("\n".join(manifest) + "\n", encoding="utf-8")

    for mid, _, party, _, _, pct_black in LEGISLATORS:
        member_dir = root / "photos" / mid
        member_dir.mkdir(parents=True, exist_ok=True)
        for i, label in enumerate(_member_labels(party, pct_black, rng)):
            pid = make_photo_id(mid, f"fixture://{mid}/{i}")
            (member_dir / f"{pid}.png").write_bytes(encode_png(portrait(label, rng)))

    acs_rows = []
    for _, _, _, state, district, pct_black in LEGISLATORS:
        pct_hispanic, pct_asian = 0.08, 0.04
        acs_rows.append([f"{state}-{district}", repr(round(1.0 - pct_black - pct_hispanic - pct_asian, 6)),
                         repr(pct_black), repr(pct_hispanic), repr(pct_asian)])
    _write_csv(root / "acs.csv", ["geo_id", "pct_white", "pct_black", "pct_hispanic", "pct_asian"], acs_rows)

    for label in RACE_LABELS:
        d = root / "train" / label
        d.mkdir(parents=True, exist_ok=True)
        for i in range(TRAIN_PER_CLASS):
            (d / f"{i:03d}.png").write_bytes(encode_png(portrait(label, rng, 64, 64)))

    arms = ("control", "white_man", "white_woman", "black_man", "black_woman", "hispanic_man", "hispanic_woman")
    responses = []
    for k in range(140):
        arm = arms[k % len(arms)]
        p_dem = 0.62 if arm.startswith("black") else 0.40
        responses.append([f"r{k:04d}", arm, "D" if rng.random() < p_dem else "R",
                          *(int(v) for v in rng.integers(1, 6, size=4)), "white" if k % 3 else "black"])
    _write_csv(root / "responses.csv", ["respondent_id", "arm", "party_guess", "shares_values", "trustworthy",
                                        "strong_leader", "knowledgeable", "respondent_race"], responses)

    (root / "photostyle.toml").write_text(CONFIG_TEXT, encoding="utf-8")
    return {"root": root, "roster": root / "roster.csv", "manifest": root / "legislators.yaml",
            "photos": root / "photos", "acs": root / "acs.csv", "train": root / "train",
            "responses": root / "responses.csv", "config": root / "photostyle.toml"}
