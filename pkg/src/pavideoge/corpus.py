"""Site profiles and offline playpage corpora.

A corpus directory looks like::

    pages/*.html           playpage sources
    pages/urls.tsv         optional: <file name> TAB <playpage url>
    fixtures/manifest.tsv  <endpoint url> TAB <relative fixture path>
    fixtures/**            endpoint response bodies

A page's URL comes from ``pages/urls.tsv`` when listed there, otherwise from
its ``<link rel="canonical">`` element.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from types import MappingProxyType
from typing import Mapping
from urllib.parse import urljoin, urlparse

from .diagnostics import Diagnostics, warn
from .errors import (
    BadPattern,
    BadRegion,
    BadTemplate,
    DuplicateDocId,
    EmptyCorpus,
    MissingField,
    ProfileError,
    UnknownField,
    UnreadableFile,
)
from .fileio import decode_html

REGION_NAMES = ("title", "tags", "description", "comments", "related_titles")

_SCALAR_FIELDS = (
    "site_name",
    "playpage_url_pattern",
    "video_id_pattern",
    "player_endpoint_template",
    "playnum_endpoint_template",
    "real_link_pattern",
    "playnum_pattern",
)
_SINGLE_GROUP_FIELDS = ("video_id_pattern", "real_link_pattern", "playnum_pattern")
_TEMPLATE_FIELDS = ("player_endpoint_template", "playnum_endpoint_template")


def _compile(name: str, pattern: str, groups: int | None) -> re.Pattern:
    try:
        rx = re.compile(pattern, re.S)
    except re.error as exc:
        raise BadPattern(f"{name}: {exc}") from None
    if groups is not None and rx.groups != groups:
        raise BadPattern(f"{name}: expected {groups} capture group, found {rx.groups}")
    return rx


@dataclass(frozen=True)
class SiteProfile:
    """How one video site's playpages and endpoints are laid out."""

    site_name: str
    playpage_url_pattern: str
    video_id_pattern: str
    player_endpoint_template: str
    playnum_endpoint_template: str
    real_link_pattern: str
    playnum_pattern: str
    text_region_rules: tuple[tuple[str, str], ...]
    _compiled: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        c = self._compiled
        c["playpage_url_pattern"] = _compile("playpage_url_pattern", self.playpage_url_pattern, None)
        for name in _SINGLE_GROUP_FIELDS:
            c[name] = _compile(name, getattr(self, name), 1)
        for name in _TEMPLATE_FIELDS:
            n = getattr(self, name).count("{id}")
            if n != 1:
                raise BadTemplate(f"{name}: expected exactly one {{id}} placeholder, found {n}")
        seen = set()
        regions = {}
        for region, rule in self.text_region_rules:
            if region not in REGION_NAMES:
                raise BadRegion(f"unknown region {region!r}; expected one of {', '.join(REGION_NAMES)}")
            if region in seen:
                raise BadRegion(f"duplicate region {region!r}")
            seen.add(region)
            regions[region] = _compile(f"region.{region}", rule, 1)
        c["regions"] = regions

    @property
    def playpage_rx(self) -> re.Pattern:
        return self._compiled["playpage_url_pattern"]

    @property
    def video_id_rx(self) -> re.Pattern:
        return self._compiled["video_id_pattern"]

    @property
    def real_link_rx(self) -> re.Pattern:
        return self._compiled["real_link_pattern"]

    @property
    def playnum_rx(self) -> re.Pattern:
        return self._compiled["playnum_pattern"]

    @property
    def region_rx(self) -> Mapping[str, re.Pattern]:
        return self._compiled["regions"]

    def is_playpage(self, url: str) -> bool:
        return self.playpage_rx.search(url) is not None

    def player_url(self, video_id: str) -> str:
        return self.player_endpoint_template.replace("{id}", video_id)

    def playnum_url(self, video_id: str) -> str:
        return self.playnum_endpoint_template.replace("{id}", video_id)

    def dumps(self) -> str:
        lines = [f"{name}={getattr(self, name)}" for name in _SCALAR_FIELDS]
        lines += [f"region.{name}={rule}" for name, rule in self.text_region_rules]
        return "\n".join(lines) + "\n"


def parse_site_profile(text: str) -> SiteProfile:
    values: dict[str, str] = {}
    regions: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ProfileError(f"line {lineno}: expected key=value")
        if key.startswith("region."):
            regions.append((key[len("region."):], value))
        elif key in _SCALAR_FIELDS:
            if key in values:
                raise ProfileError(f"line {lineno}: duplicate field {key}")
            values[key] = value
        else:
            raise UnknownField(f"line {lineno}: unknown field {key!r}")
    for name in _SCALAR_FIELDS:
        if name not in values:
            raise MissingField(name)
    if not regions:
        raise MissingField("text_region_rules")
    return SiteProfile(text_region_rules=tuple(regions), **values)


def load_site_profile(path: str | os.PathLike) -> SiteProfile:
    return parse_site_profile(Path(path).read_text(encoding="utf-8"))


def doc_id_from_url(url: str) -> str:
    """Final non-empty path segment of a playpage URL."""
    path = urlparse(url).path.rstrip("/")
    return path.rsplit("/", 1)[-1]


class _AnchorScanner(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []
        self.canonical: str | None = None

    def handle_starttag(self, tag, attrs):
        a = dict(attrs)
        if tag == "a" and a.get("href"):
            self.hrefs.append(a["href"].strip())
        elif tag == "link" and self.canonical is None and (a.get("rel") or "").lower() == "canonical":
            self.canonical = a.get("href")


def scan_links(html: str, base_url: str | None = None) -> tuple[list[str], str | None]:
    """Return (anchor hrefs absolutized against ``base_url``, canonical url)."""
    scanner = _AnchorScanner()
    scanner.feed(html)
    scanner.close()
    base = base_url or scanner.canonical or ""
    return [urljoin(base, h) for h in scanner.hrefs], scanner.canonical


@dataclass(frozen=True)
class Playpage:
    url: str
    doc_id: str
    raw_html: str
    fetched_links: tuple[str, ...]


@dataclass(frozen=True)
class CorpusBundle:
    profile: SiteProfile
    playpages: tuple[Playpage, ...]
    fixture_store: Mapping[str, str]
    skipped: tuple[str, ...] = ()

    def by_doc_id(self) -> dict[str, Playpage]:
        return {p.doc_id: p for p in self.playpages}

    def doc_ids(self) -> list[str]:
        return [p.doc_id for p in self.playpages]


def make_playpage(url: str, raw_html: str) -> Playpage:
    links, _ = scan_links(raw_html, url)
    return Playpage(url=url, doc_id=doc_id_from_url(url), raw_html=raw_html, fetched_links=tuple(links))


def _read_tsv(path: Path) -> list[list[str]]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            rows.append(line.rstrip("\n").split("\t"))
    return rows


def _well_formed_url(url: str) -> bool:
    u = urlparse(url)
    return bool(u.scheme in ("http", "https") and u.netloc)


def load_fixture_store(fixtures_dir: Path) -> dict[str, str]:
    manifest = fixtures_dir / "manifest.tsv"
    store: dict[str, str] = {}
    if not manifest.exists():
        return store
    for row in _read_tsv(manifest):
        if len(row) != 2:
            raise UnreadableFile(f"{manifest}: expected 2 tab-separated columns, got {len(row)}")
        url, rel = row
        if not _well_formed_url(url):
            raise UnreadableFile(f"{manifest}: malformed endpoint URL {url!r}")
        store[url] = decode_html((fixtures_dir / rel).read_bytes())
    return store


def ingest_corpus(
    corpus_dir: str | os.PathLike,
    profile: SiteProfile,
    diag: Diagnostics | None = None,
) -> CorpusBundle:
    """Read every playpage under ``pages/`` plus the endpoint fixtures.

    Unreadable pages and pages whose URL does not match the profile are
    skipped with a warning. Playpages come back sorted by doc_id.
    """
    root = Path(corpus_dir)
    pages_dir = root / "pages"
    if not pages_dir.is_dir():
        raise EmptyCorpus(f"{pages_dir} is not a directory")
    url_map = {}
    if (pages_dir / "urls.tsv").exists():
        url_map = {row[0]: row[1] for row in _read_tsv(pages_dir / "urls.tsv")}

    pages: dict[str, Playpage] = {}
    skipped: list[str] = []
    for path in sorted(pages_dir.glob("*.html")):
        try:
            html = decode_html(path.read_bytes())
        except (OSError, UnicodeDecodeError) as exc:
            warn(diag, "UnreadableFile", f"{path.name}: {exc}")
            skipped.append(path.name)
            continue
        url = url_map.get(path.name) or scan_links(html)[1]
        if not url:
            warn(diag, "NoPageUrl", f"{path.name}: no url in urls.tsv and no canonical link")
            skipped.append(path.name)
            continue
        if not profile.is_playpage(url):
            warn(diag, "NotPlaypage", f"{path.name}: {url} does not match playpage_url_pattern")
            skipped.append(path.name)
            continue
        page = make_playpage(url, html)
        if page.doc_id in pages:
            raise DuplicateDocId(f"{page.doc_id} ({pages[page.doc_id].url} and {url})")
        pages[page.doc_id] = page
    if not pages:
        raise EmptyCorpus(f"no playpages ingested from {pages_dir}")

    fixtures = load_fixture_store(root / "fixtures")
    ordered = tuple(pages[k] for k in sorted(pages))
    return CorpusBundle(profile, ordered, MappingProxyType(fixtures), tuple(skipped))
