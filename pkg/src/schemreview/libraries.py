"""Component library chain: resolve a part reference to datasheet URLs.

Four source kinds are supported:

* ``http-part-api``  — GET {base_url}/parts/{part}/datasheet, bearer token
  from the env var named by ``api_key_env``; answers
  ``{"datasheet_url": ...}`` or ``{"datasheet_urls": [...]}``.
* ``json-template-api`` — GET the ``url_template`` with ``{part}``
  substituted; answers ``{"datasheet_url": ...}``.
* ``csv-table``       — file with header ``part_number,datasheet_url``.
* ``local-directory`` — files whose stem is the part number, as file:// URLs.

A source that errors (down API, missing file) contributes nothing; the
chain moves on. Candidates keep priority order with the schematic's own
datasheet URL, when present, always first.
"""

from __future__ import annotations

import csv
import enum
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

from .errors import ConfigError, NoCandidates

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartRef:
    mpn: str | None = None
    ipn: str | None = None

    def __post_init__(self):
        if not (self.mpn or self.ipn):
            raise ValueError("part reference needs an mpn or an ipn")

    @property
    def key(self) -> str:
        """Cache and dedup identity: mpn when present, else ipn."""
        return self.mpn or self.ipn


class LibraryKind(enum.Enum):
    HTTP_PART_API = "http-part-api"
    JSON_TEMPLATE_API = "json-template-api"
    CSV_TABLE = "csv-table"
    LOCAL_DIRECTORY = "local-directory"


@dataclass(frozen=True)
class LibrarySource:
    kind: LibraryKind
    priority: int
    base_url: str | None = None
    url_template: str | None = None
    path: str | None = None
    directory: str | None = None
    api_key_env: str | None = None

    def lookup(self, part: PartRef) -> list[str]:
        try:
            if self.kind is LibraryKind.CSV_TABLE:
                return self._lookup_csv(part)
            if self.kind is LibraryKind.LOCAL_DIRECTORY:
                return self._lookup_directory(part)
            if self.kind is LibraryKind.HTTP_PART_API:
                return self._lookup_http(part)
            return self._lookup_template(part)
        except Exception as exc:
            log.warning("library %s lookup failed for %s: %s",
                        self.kind.value, part.key, exc)
            return []

    def _lookup_csv(self, part: PartRef) -> list[str]:
        urls = []
        with open(self.path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row.get("part_number") == part.key and row.get("datasheet_url"):
                    urls.append(row["datasheet_url"])
        return urls

    def _lookup_directory(self, part: PartRef) -> list[str]:
        root = Path(self.directory)
        if not root.is_dir():
            return []
        return [p.resolve().as_uri()
                for p in sorted(root.iterdir())
                if p.is_file() and p.stem == part.key]

    def _headers(self) -> dict[str, str]:
        token = os.environ.get(self.api_key_env, "") if self.api_key_env else ""
        return {"Authorization": f"Bearer {token}"} if token else {}

    def _lookup_http(self, part: PartRef) -> list[str]:
        import requests

        url = f"{self.base_url.rstrip('/')}/parts/{quote(part.key, safe='')}/datasheet"
        resp = requests.get(url, headers=self._headers(), timeout=10)
        if resp.status_code == 404:
            return []
        resp.raise_for_status()
        doc = resp.json()
        if doc.get("datasheet_urls"):
            return list(doc["datasheet_urls"])
        return [doc["datasheet_url"]] if doc.get("datasheet_url") else []

    def _lookup_template(self, part: PartRef) -> list[str]:
        import requests

        url = self.url_template.replace("{part}", quote(part.key, safe=""))
        resp = requests.get(url, headers=self._headers(), timeout=10)
        if resp.status_code == 404:
            return []
        resp.raise_for_status()
        doc = resp.json()
        return [doc["datasheet_url"]] if doc.get("datasheet_url") else []


def library_from_config(doc: dict) -> LibrarySource:
    try:
        kind = LibraryKind(doc["kind"])
        return LibrarySource(
            kind=kind,
            priority=int(doc["priority"]),
            base_url=doc.get("base_url"),
            url_template=doc.get("url_template"),
            path=doc.get("path"),
            directory=doc.get("directory"),
            api_key_env=doc.get("api_key_env"),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad library config {doc!r}: {exc}") from exc


def locate(part: PartRef, libraries: list[LibrarySource],
           schematic_url: str | None = None) -> list[str]:
    """Candidate datasheet URLs: schematic-embedded URL first, then library
    results in priority order, duplicates dropped (first occurrence kept)."""
    if not libraries and schematic_url is None:
        raise NoCandidates(f"no libraries configured and no schematic URL for {part.key}")
    if any(a.priority == b.priority
           for i, a in enumerate(libraries) for b in libraries[i + 1:]):
        raise ConfigError("library priorities must be unique")
    candidates: list[str] = []
    if schematic_url:
        candidates.append(schematic_url)
    for lib in sorted(libraries, key=lambda s: s.priority):
        candidates.extend(lib.lookup(part))
    deduped = list(dict.fromkeys(candidates))
    if not deduped:
        raise NoCandidates(f"no datasheet candidates for {part.key}")
    return deduped
