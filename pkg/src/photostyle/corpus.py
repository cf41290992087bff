"""Legislator rosters, the on-disk photo corpus, and CSV table persistence.

Corpus layout is ``<root>/<member_id>/<photo_id>.<ext>``.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import urljoin

import numpy as np
import requests
import yaml

from .exceptions import ManifestError, ReferenceIntegrityError, SchemaError

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")
ROSTER_COLUMNS = ["member_id", "name", "chamber", "party", "state", "district", "is_white"]
PHOTO_COLUMNS = ["photo_id", "member_id", "file_path", "source_url", "fetched_at", "status"]
_PARTY_NAMES = {"democrat": "D", "republican": "R", "independent": "I", "d": "D", "r": "R", "i": "I"}
_CHAMBER_NAMES = {"rep": "house", "house": "house", "sen": "senate", "senate": "senate"}
_HEX_ID = re.compile(r"^[0-9a-f]{16}$")


@dataclass(frozen=True)
class LegislatorRecord:
    member_id: str
    name: str = ""
    chamber: str | None = None
    party: str | None = None
    state: str | None = None
    district: int | None = None
    facebook_username: str | None = None
    is_white: bool = False

    def __post_init__(self):
        if not self.member_id:
            raise ManifestError("member_id is required")
        if self.chamber is not None and self.chamber not in ("house", "senate"):
            raise ManifestError(f"{self.member_id}: chamber must be house or senate, got {self.chamber!r}")
        if self.party is not None and self.party not in ("D", "R", "I"):
            raise ManifestError(f"{self.member_id}: party must be D, R or I, got {self.party!r}")
        if self.state is not None and not re.fullmatch(r"[A-Z]{2}", self.state):
            raise ManifestError(f"{self.member_id}: state must be a 2-letter code, got {self.state!r}")
        if self.chamber == "house" and self.district is None:
            raise ManifestError(f"{self.member_id}: house members need a district")
        if self.chamber == "senate" and self.district is not None:
            raise ManifestError(f"{self.member_id}: senators have no district")


@dataclass(frozen=True)
class PhotoRecord:
    photo_id: str
    member_id: str
    file_path: str
    source_url: str | None = None
    fetched_at: str | None = None
    status: str = "present"


@dataclass(frozen=True)
class CorpusManifest:
    legislators: tuple = ()
    photos: tuple = ()
    orphans: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "legislators", tuple(self.legislators))
        object.__setattr__(self, "photos", tuple(self.photos))
        object.__setattr__(self, "orphans", tuple(self.orphans))
        known = {r.member_id for r in self.legislators}
        missing = sorted({p.member_id for p in self.photos} - known)
        if missing:
            raise ReferenceIntegrityError(f"photos reference unknown members: {', '.join(missing)}")
        ids = [p.photo_id for p in self.photos]
        if len(ids) != len(set(ids)):
            raise ReferenceIntegrityError("duplicate photo_id in manifest")

    @property
    def counts(self) -> dict:
        out = {r.member_id: 0 for r in self.legislators}
        for p in self.photos:
            out[p.member_id] += 1
        return out

    def with_photos(self, photos) -> "CorpusManifest":
        return CorpusManifest(self.legislators, tuple(photos), self.orphans)


def make_photo_id(member_id: str, source: str) -> str:
    return hashlib.sha256(f"{member_id}\n{source}".encode("utf-8")).hexdigest()[:16]


# --- legislator manifest -------------------------------------------------------


def _normalise_party(value, line):
    if value is None:
        return None
    party = _PARTY_NAMES.get(str(value).strip().lower())
    if party is None:
        raise ManifestError(f"unknown party {value!r}", line)
    return party


def parse_legislator_manifest(text: str) -> list:
    """Parse the social-media YAML document into legislator records.

    Each entry needs an ``id: {bioguide: ...}`` block; ``social: {facebook:
    ...}``, ``name: {official_full: ...}``, a ``term`` mapping (or a
    ``terms`` list, last entry wins) with ``type/state/district/party``, and
    ``is_white`` are optional.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ManifestError(str(exc.problem or exc), mark.line + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ManifestError(str(exc)) from None
    if data is None:
        return []
    if not isinstance(data, list):
        raise ManifestError("top level must be a list of legislators", 1)
    records, seen = [], {}
    for node, entry in zip(root.value, data):
        line = node.start_mark.line + 1
        if not isinstance(entry, dict):
            raise ManifestError("legislator entry must be a mapping", line)
        ids = entry.get("id")
        if not isinstance(ids, dict) or not ids.get("bioguide"):
            raise ManifestError("entry lacks id.bioguide", line)
        member_id = str(ids["bioguide"])
        if member_id in seen:
            raise ManifestError(f"duplicate member_id {member_id} (first seen line {seen[member_id]})", line)
        seen[member_id] = line
        social = entry.get("social") or {}
        name = entry.get("name") or {}
        term = entry.get("term")
        if term is None and isinstance(entry.get("terms"), list) and entry["terms"]:
            term = entry["terms"][-1]
        term = term or {}
        if not isinstance(social, dict) or not isinstance(term, dict):
            raise ManifestError("social and term must be mappings", line)
        chamber = term.get("type")
        if chamber is not None:
            chamber = _CHAMBER_NAMES.get(str(chamber).lower())
            if chamber is None:
                raise ManifestError(f"unknown term type {term.get('type')!r}", line)
        district = term.get("district")
        facebook = social.get("facebook")
        try:
            records.append(LegislatorRecord(
                member_id=member_id,
                name=str(name.get("official_full", "")) if isinstance(name, dict) else str(name),
                chamber=chamber,
                party=_normalise_party(term.get("party"), line),
                state=term.get("state"),
                district=int(district) if district is not None and chamber == "house" else None,
                facebook_username=str(facebook) if facebook else None,
                is_white=bool(entry.get("is_white", False)),
            ))
        except ManifestError as exc:
            if exc.line is not None:
                raise
            raise ManifestError(str(exc), line) from None
    return records


def attach_usernames(roster: Sequence[LegislatorRecord], manifest: Sequence[LegislatorRecord]) -> list:
    """Copy Facebook usernames from parsed manifest records onto roster rows."""
    names = {r.member_id: r.facebook_username for r in manifest}
    out = []
    for r in roster:
        username = names.get(r.member_id) or r.facebook_username
        out.append(LegislatorRecord(**{**asdict(r), "facebook_username": username}))
    return out


# --- CSV tables ----------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value) + 0.0)  # + 0.0 turns -0.0 into 0.0
    return str(value)


def persist_table(rows: Iterable, path, columns: Sequence[str] | None = None):
    """Write dict rows as RFC 4180 CSV (UTF-8, ``\\r\\n`` line ends)."""
    rows = [asdict(r) if hasattr(r, "__dataclass_fields__") else dict(r) for r in rows]
    if columns is None:
        if not rows:
            raise SchemaError("cannot infer columns from an empty table; pass columns=")
        columns = list(rows[0])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(columns)
        for row in rows:
            extra = set(row) - set(columns)
            if extra:
                raise SchemaError(f"row has columns not in schema: {', '.join(sorted(extra))}")
            cells = [_cell(row.get(c)) for c in columns]
            if any("\x00" in v for v in cells):
                raise SchemaError("NUL characters cannot be stored in a CSV cell")
            writer.writerow(cells)


def load_table(path, columns: Sequence[str] | None = None) -> list:
    """Read a CSV written by :func:`persist_table`; values come back as strings.

    With ``columns`` the header must contain exactly those names.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header") from None
        if columns is not None:
            missing = [c for c in columns if c not in header]
            extra = [c for c in header if c not in columns]
            if missing or extra:
                parts = []
                if missing:
                    parts.append(f"missing column(s) {', '.join(missing)}")
                if extra:
                    parts.append(f"unexpected column(s) {', '.join(extra)}")
                raise SchemaError(f"{path}: " + "; ".join(parts))
        rows = []
        for lineno, values in enumerate(reader, 2):
            if len(values) != len(header):
                raise SchemaError(f"{path}: line {lineno} has {len(values)} fields, expected {len(header)}")
            rows.append(dict(zip(header, values)))
    return rows


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes", "y", "t"):
        return True
    if v in ("false", "0", "no", "n", "f", ""):
        return False
    raise SchemaError(f"not a boolean: {s!r}")


def load_roster(path) -> list:
    rows = load_table(path)
    header = set(rows[0]) if rows else set(ROSTER_COLUMNS)
    missing = [c for c in ROSTER_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    out = []
    for row in rows:
        out.append(LegislatorRecord(
            member_id=row["member_id"],
            name=row["name"],
            chamber=row["chamber"] or None,
            party=row["party"] or None,
            state=row["state"] or None,
            district=int(row["district"]) if row["district"] else None,
            facebook_username=row.get("facebook_username") or None,
            is_white=_parse_bool(row["is_white"]),
        ))
    return out


def save_roster(records: Sequence[LegislatorRecord], path):
    cols = list(ROSTER_COLUMNS)
    if any(r.facebook_username for r in records):
        cols.append("facebook_username")
    persist_table([{c: getattr(r, c) for c in cols} for r in records], path, cols)


# --- local corpus --------------------------------------------------------------


def _photo_id_for(member_id: str, path: Path) -> str:
    return path.stem if _HEX_ID.match(path.stem) else make_photo_id(member_id, path.name)


def scan_local_corpus(root, legislators: Sequence[LegislatorRecord]) -> CorpusManifest:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} does not exist")
    known = {r.member_id for r in legislators}
    photos, orphans = [], []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if sub.name not in known:
            orphans.append(sub.name)
            continue
        for f in sorted(sub.iterdir()):
            if f.is_file() and f.suffix.lower() in IMAGE_EXTENSIONS:
                photos.append(PhotoRecord(_photo_id_for(sub.name, f), sub.name, str(f)))
    return CorpusManifest(tuple(legislators), tuple(photos), tuple(orphans))


def save_manifest(manifest: CorpusManifest, path):
    rows = [asdict(p) for p in manifest.photos]
    rows += [{"photo_id": "", "member_id": o, "file_path": "", "source_url": None,
              "fetched_at": None, "status": "orphan"} for o in manifest.orphans]
    persist_table(rows, path, PHOTO_COLUMNS)


def load_manifest(path, legislators: Sequence[LegislatorRecord]) -> CorpusManifest:
    photos, orphans = [], []
    for row in load_table(path, PHOTO_COLUMNS):
        if row["status"] == "orphan":
            orphans.append(row["member_id"])
            continue
        photos.append(PhotoRecord(row["photo_id"], row["member_id"], row["file_path"],
                                  row["source_url"] or None, row["fetched_at"] or None,
                                  row["status"] or "present"))
    return CorpusManifest(tuple(legislators), tuple(photos), tuple(orphans))


# --- fetching --------------------------------------------------------------------


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart; thread-safe."""

    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate if rate and rate > 0 else 0.0
        self._clock = clock
        self._sleep = sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self):
        with self._lock:
            now = self._clock()
            if now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


@dataclass
class FetchResult:
    photos: list = field(default_factory=list)
    downloaded: int = 0
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


_CONTENT_EXT = {"image/jpeg": ".jpg", "image/jpg": ".jpg", "image/png": ".png"}


def _get(session, url, limiter, retries, backoff, timeout, sleep):
    last = None
    for attempt in range(retries + 1):
        limiter.wait()
        try:
            resp = session.get(url, timeout=timeout)
            if resp.status_code < 400:
                return resp
            last = f"HTTP {resp.status_code}"
        except requests.RequestException as exc:
            last = f"{type(exc).__name__}: {exc}"
        if attempt < retries:
            sleep(backoff * 2**attempt)
    raise IOError(last)


def fetch_photos(record: LegislatorRecord, source: str, root, max_photos: int = 100, rate: float = 5.0,
                 session=None, retries: int = 3, backoff: float = 0.5, timeout: float = 10.0,
                 sleep=time.sleep, limiter: RateLimiter | None = None) -> FetchResult:
    """Download a member's photos from a paginated JSON listing.

    ``source`` is a URL template formatted with ``member_id`` and
    ``username``.  Each page is ``{"data": [{"id": ..., "url": ...}, ...],
    "next": <url or null>}``.  Photos already on disk are not fetched again.
    Failed requests are retried with exponential backoff and then recorded in
    ``failures``; they never abort the run.
    """
    session = session or requests.Session()
    limiter = limiter or RateLimiter(rate)
    result = FetchResult()
    member_dir = Path(root) / record.member_id
    member_dir.mkdir(parents=True, exist_ok=True)
    url = source.format(member_id=record.member_id, username=record.facebook_username or "")
    seen_pages = set()
    while url and len(result.photos) < max_photos and url not in seen_pages:
        seen_pages.add(url)
        try:
            page = _get(session, url, limiter, retries, backoff, timeout, sleep)
            listing = page.json()
        except (IOError, ValueError) as exc:
            result.failures.append({"url": url, "reason": str(exc)})
            break
        for item in listing.get("data", []):
            if len(result.photos) >= max_photos:
                break
            image_url = urljoin(url, str(item.get("url", "")))
            pid = make_photo_id(record.member_id, str(item.get("id", image_url)))
            existing = sorted(member_dir.glob(pid + ".*"))
            if existing:
                result.photos.append(PhotoRecord(pid, record.member_id, str(existing[0]), image_url))
                continue
            try:
                resp = _get(session, image_url, limiter, retries, backoff, timeout, sleep)
            except IOError as exc:
                result.failures.append({"url": image_url, "reason": str(exc)})
                continue
            ctype = resp.headers.get("Content-Type", "").split(";")[0].strip().lower()
            ext = _CONTENT_EXT.get(ctype)
            if ext is None:
                result.warnings.append(f"{image_url}: skipped non-image content type {ctype!r}")
                log.warning("skipping %s: content type %r", image_url, ctype)
                continue
            target = member_dir / (pid + ext)
            tmp = target.with_suffix(ext + ".part")
            tmp.write_bytes(resp.content)
            os.replace(tmp, target)
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            result.photos.append(PhotoRecord(pid, record.member_id, str(target), image_url, stamp))
            result.downloaded += 1
        nxt = listing.get("next")
        url = urljoin(url, nxt) if nxt else None
    return result

