"""Streaming readers for entity and page dumps, link tables and the build manifest."""
from __future__ import annotations

import bz2
import gzip
import hashlib
import io
import json
import logging
import os
import xml.parsers.expat
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import IO, Any, Iterator

from .canon import canon_serialize

log = logging.getLogger(__name__)

CHUNK = 1 << 16


class StreamCorrupt(IOError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


class XmlMalformed(ValueError):
    def __init__(self, msg: str, path: str, offset: int):
        super().__init__(f"{msg} at /{path} (byte offset {offset})")
        self.path = path
        self.offset = offset


class MissingInput(FileNotFoundError):
    pass


def open_stream(src: str | os.PathLike | bytes | IO[bytes]) -> IO[bytes]:
    """Open a path or wrap a byte stream, transparently decompressing gzip/bzip2."""
    if isinstance(src, (bytes, bytearray)):
        raw: IO[bytes] = io.BytesIO(src)
    elif isinstance(src, (str, os.PathLike)):
        if not os.path.exists(src):
            raise MissingInput(str(src))
        raw = open(src, "rb")
    else:
        raw = src
    buffered = raw if hasattr(raw, "peek") else io.BufferedReader(raw)  # type: ignore[arg-type]
    head = buffered.peek(3)[:3]
    if head[:2] == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=buffered)  # type: ignore[return-value]
    if head == b"BZh":
        return bz2.BZ2File(buffered)  # type: ignore[return-value]
    return buffered  # type: ignore[return-value]


# ------------------------------------------------------------ entity dump


@dataclass
class RawEntityRecord:
    entity_id: str
    claims: dict[str, list[dict]]
    sitelinks: dict[str, str] = field(default_factory=dict)
    labels: dict[str, str] = field(default_factory=dict)
    aliases: dict[str, list[str]] = field(default_factory=dict)
    modified: str = ""

    def to_record(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "claims": self.claims,
            "sitelinks": self.sitelinks,
            "labels": self.labels,
            "aliases": self.aliases,
            "modified": self.modified,
        }


@dataclass
class SkipReport:
    line_no: int
    offset: int
    reason: str


def _site_language(site: str) -> str | None:
    if site.endswith("wiki") and site not in ("commonswiki", "specieswiki", "metawiki", "wikidatawiki"):
        return site[: -len("wiki")].replace("_", "-")
    return None


def entity_from_json(obj: dict) -> RawEntityRecord:
    eid = obj["id"]
    if not isinstance(eid, str) or not eid:
        raise ValueError("missing id")
    sitelinks = {}
    for site, sl in (obj.get("sitelinks") or {}).items():
        lang = _site_language(site)
        if lang is not None:
            sitelinks[lang] = sl["title"] if isinstance(sl, dict) else str(sl)
    labels = {}
    for lang, lab in (obj.get("labels") or {}).items():
        labels[lang] = lab["value"] if isinstance(lab, dict) else str(lab)
    aliases = {}
    for lang, al in (obj.get("aliases") or {}).items():
        aliases[lang] = [a["value"] if isinstance(a, dict) else str(a) for a in al]
    claims = obj.get("claims") or {}
    if not isinstance(claims, dict):
        raise ValueError("claims must be a map")
    return RawEntityRecord(eid, claims, sitelinks, labels, aliases, obj.get("modified", ""))


class EntityDumpReader:
    """Iterates entities from a line- or array-delimited JSON dump.

    Malformed lines are skipped and recorded in ``skipped``; decompression
    failures raise :class:`StreamCorrupt`.
    """

    def __init__(self, stream):
        self._src = stream
        self.skipped: list[SkipReport] = []
        self.count = 0

    def __iter__(self) -> Iterator[RawEntityRecord]:
        fh = open_stream(self._src)
        offset = 0
        line_no = 0
        try:
            while True:
                try:
                    line = fh.readline()
                except (OSError, EOFError) as exc:
                    raise StreamCorrupt(f"compressed stream error: {exc}", offset) from exc
                if not line:
                    break
                line_no += 1
                start = offset
                offset += len(line)
                text = line.strip()
                if text in (b"", b"[", b"]"):
                    continue
                if text.endswith(b","):
                    text = text[:-1]
                try:
                    obj = json.loads(text.decode("utf-8"), parse_float=Decimal)
                    rec = entity_from_json(obj)
                except (ValueError, KeyError, TypeError, AttributeError) as exc:
                    self.skipped.append(SkipReport(line_no, start, f"{type(exc).__name__}: {exc}"))
                    log.warning("skipping malformed entity line %d at byte %d: %s", line_no, start, exc)
                    continue
                self.count += 1
                yield rec
        finally:
            if fh is not self._src:
                fh.close()


def read_entity_dump(stream) -> EntityDumpReader:
    return EntityDumpReader(stream)


# ------------------------------------------------------------ page dump


@dataclass
class RawPage:
    page_id: int
    revision_id: int
    title: str
    namespace: int
    wikitext: str
    is_redirect: bool = False
    redirect_target: str | None = None
    revision_timestamp: str = ""

    def to_record(self) -> dict:
        return {
            "page_id": self.page_id,
            "revision_id": self.revision_id,
            "title": self.title,
            "namespace": self.namespace,
            "wikitext": self.wikitext,
            "is_redirect": self.is_redirect,
            "redirect_target": self.redirect_target,
            "revision_timestamp": self.revision_timestamp,
        }


def _local(name: str) -> str:
    return name.rsplit(" ", 1)[-1].rsplit("}", 1)[-1]


class _PageBuilder:
    def __init__(self):
        self.stack: list[str] = []
        self.text: list[str] = []
        self.page: dict[str, Any] | None = None
        self.rev: dict[str, Any] | None = None
        self.done: list[RawPage] = []

    def start(self, name, attrs):
        tag = _local(name)
        self.stack.append(tag)
        self.text = []
        if tag == "page":
            self.page = {"revisions": [], "redirect": None}
        elif tag == "revision" and self.page is not None:
            self.rev = {}
        elif tag == "redirect" and self.page is not None:
            self.page["redirect"] = attrs.get("title", "")

    def end(self, name):
        tag = self.stack.pop()
        value = "".join(self.text)
        self.text = []
        parent = self.stack[-1] if self.stack else ""
        if self.page is None:
            return
        if tag == "page":
            self._finish_page()
        elif tag == "revision":
            self.page["revisions"].append(self.rev or {})
            self.rev = None
        elif parent == "page" and tag in ("title", "ns", "id"):
            self.page[tag] = value
        elif parent == "revision" and self.rev is not None and tag in ("id", "text", "timestamp"):
            self.rev[tag] = value

    def chars(self, data):
        self.text.append(data)

    def _finish_page(self):
        p = self.page
        self.page = None
        revs = p["revisions"]
        if not revs:
            return
        # latest revision: highest id
        rev = max(revs, key=lambda r: int(r.get("id", 0) or 0))
        redirect = p.get("redirect")
        self.done.append(
            RawPage(
                page_id=int(p.get("id", 0)),
                revision_id=int(rev.get("id", 0) or 0),
                title=p.get("title", ""),
                namespace=int(p.get("ns", 0) or 0),
                wikitext=rev.get("text", ""),
                is_redirect=redirect is not None,
                redirect_target=redirect or None,
                revision_timestamp=rev.get("timestamp", ""),
            )
        )


def read_page_dump(stream) -> Iterator[RawPage]:
    """Yield the latest revision of every page in a MediaWiki XML export."""
    fh = open_stream(stream)
    b = _PageBuilder()
    parser = xml.parsers.expat.ParserCreate()
    parser.buffer_text = True
    parser.StartElementHandler = b.start
    parser.EndElementHandler = b.end
    parser.CharacterDataHandler = b.chars
    fed = 0
    try:
        while True:
            try:
                chunk = fh.read(CHUNK)
            except (OSError, EOFError) as exc:
                raise StreamCorrupt(f"compressed stream error: {exc}", fed) from exc
            final = not chunk
            try:
                parser.Parse(chunk, final)
            except xml.parsers.expat.ExpatError as exc:
                raise XmlMalformed(
                    xml.parsers.expat.ErrorString(exc.code), "/".join(b.stack), parser.ErrorByteIndex
                ) from exc
            fed += len(chunk)
            if b.done:
                yield from b.done
                b.done = []
            if final:
                break
    finally:
        if fh is not stream:
            fh.close()


# ------------------------------------------------------------ link tables


@dataclass
class LinkTables:
    redirects: dict[str, str] = field(default_factory=dict)
    disambiguation_pages: set[int] = field(default_factory=set)
    cycles: list[str] = field(default_factory=list)

    def resolve(self, title: str, max_hops: int = 16) -> tuple[str | None, int]:
        """Follow redirects from ``title``; returns (final title, hops) or (None, hops) on a cycle."""
        seen = {title}
        cur = title
        hops = 0
        while cur in self.redirects:
            nxt = self.redirects[cur]
            hops += 1
            if nxt in seen or hops > max_hops:
                if title not in self.cycles:
                    self.cycles.append(title)
                return None, hops
            seen.add(nxt)
            cur = nxt
        return cur, hops


def read_redirects_tsv(path) -> dict[str, str]:
    out = {}
    with open_stream(path) as fh:
        for raw in io.TextIOWrapper(fh, encoding="utf-8"):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            src, _, dst = line.partition("\t")
            if dst:
                out[src] = dst
    return out


def read_disambiguation(path) -> set[int]:
    out = set()
    with open_stream(path) as fh:
        for raw in io.TextIOWrapper(fh, encoding="utf-8"):
            line = raw.strip()
            if line and not line.startswith("#"):
                out.add(int(line))
    return out


# ------------------------------------------------------------ manifest


def file_sha256(path: str | os.PathLike) -> str:
    if not os.path.exists(path):
        raise MissingInput(str(path))
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class BuildManifest:
    inputs: list[dict]
    policy_version: str
    pack_ids: dict[str, str]
    tool_version: str
    config_hash: str
    resources: dict[str, str] = field(default_factory=dict)
    build_id: str = ""

    def body(self) -> dict:
        return {
            "inputs": self.inputs,
            "policy_version": self.policy_version,
            "pack_ids": self.pack_ids,
            "resources": self.resources,
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
        }

    def to_record(self) -> dict:
        return {**self.body(), "build_id": self.build_id}


def compute_build_id(body: dict) -> str:
    h = hashlib.sha1()
    h.update(b"build\x1f")
    h.update(canon_serialize(body))
    return h.hexdigest()


def build_manifest(
    inputs: list[tuple[str, str | os.PathLike, str]],
    policy,
    packs: dict,
    config: dict,
    tool_version: str,
    resources: dict[str, str] | None = None,
) -> BuildManifest:
    """Pin inputs (recorded name, path on disk, snapshot timestamp) and configuration.

    The recorded name is what enters the manifest, so builds from relocated
    copies of the same inputs agree.
    """
    rows = []
    for name, path, ts in inputs:
        rows.append({"path": str(name), "sha256": file_sha256(path), "timestamp": ts})
    rows.sort(key=lambda r: r["path"])
    m = BuildManifest(
        inputs=rows,
        policy_version=policy.version,
        pack_ids={lang: p.pack_id for lang, p in sorted(packs.items())},
        tool_version=tool_version,
        config_hash=hashlib.sha256(canon_serialize(config)).hexdigest(),
        resources=dict(sorted((resources or {}).items())),
    )
    m.build_id = compute_build_id(m.body())
    return m


def write_manifest(manifest_record: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(canon_serialize(manifest_record) + b"\n")
