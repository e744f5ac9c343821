"""Build per-video metadata records from playpages.

The real link and playnum are not present in the playpage itself; they are
resolved by requesting the site's player and view-count endpoints with the
video ID found in the page source.
"""

from __future__ import annotations

import json
import os
import re
import threading
import urllib.request
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Protocol

from .corpus import Playpage, SiteProfile
from .diagnostics import Diagnostics, warn
from .errors import (
    FetchFailed,
    IdNotFound,
    LinkNotFound,
    PlaynumNotFound,
    PlaynumNotInteger,
    UnreadableFile,
)
from .fileio import atomic_write_text

_TAG = re.compile(r"<[^>]*>|<[a-zA-Z/!][^>]*$")
_TAG_LIKE = re.compile(r"<[a-zA-Z/!][^>]*>?")
_ENTITY = re.compile(r"&(amp|lt|gt|quot|#[0-9]+|#[xX][0-9a-fA-F]+);")
_NAMED = {"amp": "&", "lt": "<", "gt": ">", "quot": '"'}
_WS = re.compile(r"\s+")
_TAG_SEP = re.compile(r"[,，;；|\s]+")

LIST_REGIONS = ("tags", "comments", "related_titles")


def _entity(m: re.Match) -> str:
    name = m.group(1)
    if name in _NAMED:
        return _NAMED[name]
    code = int(name[2:], 16) if name[1] in "xX" else int(name[1:])
    try:
        return chr(code)
    except (ValueError, OverflowError):
        return ""


def clean_markup(fragment: str) -> str:
    """Strip tags, decode the supported entities, collapse whitespace."""
    text = _TAG.sub(" ", fragment)
    text = _ENTITY.sub(_entity, text)
    # decoded &lt; may have produced new tag-like fragments
    text = _TAG_LIKE.sub(" ", text)
    return _WS.sub(" ", text).strip()


@dataclass(frozen=True)
class TextInformation:
    title: str = ""
    tags: tuple[str, ...] = ()
    description: str = ""
    comments: tuple[str, ...] = ()
    related_titles: tuple[str, ...] = ()

    @property
    def flattened(self) -> str:
        parts = [self.title, *self.tags, self.description, *self.related_titles, *self.comments]
        return " ".join(p for p in parts if p)

    @property
    def title_and_tags(self) -> str:
        return " ".join(p for p in (self.title, *self.tags) if p)


@dataclass(frozen=True)
class PavideogeRecord:
    doc_id: str
    playpage_url: str
    real_link: str | None
    playnum: int
    videorank: float
    text: TextInformation = field(default_factory=TextInformation)

    def to_json(self) -> str:
        obj = {
            "doc_id": self.doc_id,
            "playpage_url": self.playpage_url,
            "real_link": self.real_link,
            "playnum": self.playnum,
            "videorank": self.videorank,
            "title": self.text.title,
            "tags": list(self.text.tags),
            "description": self.text.description,
            "comments": list(self.text.comments),
            "related_titles": list(self.text.related_titles),
        }
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "PavideogeRecord":
        o = json.loads(line)
        text = TextInformation(
            title=o["title"],
            tags=tuple(o["tags"]),
            description=o["description"],
            comments=tuple(o["comments"]),
            related_titles=tuple(o["related_titles"]),
        )
        return cls(o["doc_id"], o["playpage_url"], o["real_link"], int(o["playnum"]), float(o["videorank"]), text)


def write_store(path: str | os.PathLike, records: Iterable[PavideogeRecord]) -> None:
    atomic_write_text(path, "".join(r.to_json() + "\n" for r in records))


def read_store(path: str | os.PathLike) -> list[PavideogeRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(PavideogeRecord.from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise UnreadableFile(f"{path}:{lineno}: {exc}") from None
    return records


class Transport(Protocol):
    def fetch(self, url: str) -> str: ...


class FixtureTransport:
    """Serves endpoint responses from a corpus fixture store."""

    def __init__(self, store: Mapping[str, str]):
        self._store = store

    def fetch(self, url: str) -> str:
        try:
            return self._store[url]
        except KeyError:
            raise FetchFailed(f"no fixture for {url}") from None


class HttpTransport:
    """Live transport; at most ``max_in_flight`` concurrent requests."""

    def __init__(self, max_in_flight: int = 4, timeout: float = 10.0, encoding: str = "utf-8"):
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self.timeout = timeout
        self.encoding = encoding

    def fetch(self, url: str) -> str:
        with self._slots:
            try:
                with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                    charset = resp.headers.get_content_charset() or self.encoding
                    return resp.read().decode(charset, errors="replace")
            except OSError as exc:
                raise FetchFailed(f"{url}: {exc}") from None


def extract_video_id(page: Playpage, profile: SiteProfile) -> str:
    m = profile.video_id_rx.search(page.raw_html)
    if m is None or not m.group(1):
        raise IdNotFound(f"{page.doc_id}: video_id_pattern did not match")
    return m.group(1)


def resolve_real_link(video_id: str, profile: SiteProfile, transport: Transport) -> str:
    url = profile.player_url(video_id)
    body = transport.fetch(url)
    m = profile.real_link_rx.search(body)
    if m is None or not m.group(1):
        raise LinkNotFound(f"{url}: real_link_pattern did not match")
    return m.group(1)


def resolve_playnum(video_id: str, profile: SiteProfile, transport: Transport) -> int:
    url = profile.playnum_url(video_id)
    body = transport.fetch(url)
    m = profile.playnum_rx.search(body)
    if m is None:
        raise PlaynumNotFound(f"{url}: playnum_pattern did not match")
    raw = m.group(1).strip().replace(",", "")
    if not raw.isdigit():
        raise PlaynumNotInteger(f"{url}: {m.group(1)!r}")
    return int(raw)


def extract_text_information(
    page: Playpage,
    profile: SiteProfile,
    diag: Diagnostics | None = None,
    misses: Counter | None = None,
) -> TextInformation:
    """Missing regions come back empty.

    Each miss is tallied in ``misses`` when given, otherwise warned about.
    """

    def missed(region: str) -> None:
        if misses is not None:
            misses[region] += 1
        else:
            warn(diag, "RegionMissing", f"{page.doc_id}: {region}")

    values: dict[str, object] = {}
    for region, rx in profile.region_rx.items():
        if region in LIST_REGIONS:
            items = [clean_markup(m.group(1)) for m in rx.finditer(page.raw_html)]
            if region == "tags":
                items = [t for item in items for t in _TAG_SEP.split(item)]
            items = [i for i in items if i]
            if not items:
                missed(region)
            values[region] = tuple(items)
        else:
            m = rx.search(page.raw_html)
            if m is None:
                missed(region)
            values[region] = clean_markup(m.group(1)) if m else ""
    return TextInformation(**values)


def build_pavideoge(
    page: Playpage,
    profile: SiteProfile,
    transport: Transport,
    diag: Diagnostics | None = None,
    misses: Counter | None = None,
) -> PavideogeRecord:
    """Compose a record; per-attribute failures degrade only that attribute."""
    text = extract_text_information(page, profile, diag, misses)
    record = PavideogeRecord(page.doc_id, page.url, None, 0, 0.0, text)
    try:
        video_id = extract_video_id(page, profile)
    except IdNotFound as exc:
        warn(diag, exc.code, str(exc))
        return record
    try:
        record = replace(record, real_link=resolve_real_link(video_id, profile, transport))
    except (FetchFailed, LinkNotFound) as exc:
        warn(diag, exc.code, f"{page.doc_id}: {exc}")
    try:
        record = replace(record, playnum=resolve_playnum(video_id, profile, transport))
    except (FetchFailed, PlaynumNotFound, PlaynumNotInteger) as exc:
        warn(diag, exc.code, f"{page.doc_id}: {exc}")
    return record


def build_records(
    pages: Iterable[Playpage],
    profile: SiteProfile,
    transport: Transport,
    diag: Diagnostics | None = None,
) -> list[PavideogeRecord]:
    misses: Counter = Counter()
    records = sorted((build_pavideoge(p, profile, transport, diag, misses) for p in pages), key=lambda r: r.doc_id)
    for region, count in sorted(misses.items()):
        warn(diag, "RegionMissing", f"{region} missing on {count} of {len(records)} pages")
    return records
