"""Canonical JSON serialization and domain-separated content identifiers.

Every derived identifier in a build is a SHA-1 over a tag, the build id and
the canonical bytes of a record, so the byte form produced here is the root
of all determinism.
"""
from __future__ import annotations

import hashlib
import json
import math
import unicodedata
from decimal import Decimal
from enum import Enum
from typing import Any

SEP = b"\x1f"


class NonCanonicalizable(TypeError):
    pass


class DomainTag(str, Enum):
    FACTSENSE = "factsense"
    SYNSET = "synset"
    RELATION = "relation"


class Verbatim(str):
    """A string that bypasses NFC normalization (inherited identifiers)."""

    __slots__ = ()


def format_decimal(d: Decimal) -> str:
    """Shortest exact text for a finite decimal; plain notation below 1e21."""
    if not d.is_finite():
        raise NonCanonicalizable(f"non-finite number {d!r}")
    if d.is_zero():
        return "0"
    # strip trailing zeros by hand: normalize() would round to context precision
    sign, digits, exp = d.as_tuple()
    ds = "".join(map(str, digits)).lstrip("0")
    stripped = ds.rstrip("0")
    exp += len(ds) - len(stripped)
    ds = stripped
    adjusted = len(ds) - 1 + exp
    neg = "-" if sign else ""
    if abs(adjusted) >= 21:
        mant = ds[0] + ("." + ds[1:] if len(ds) > 1 else "")
        return f"{neg}{mant}e{'+' if adjusted > 0 else '-'}{abs(adjusted)}"
    if exp >= 0:
        return neg + ds + "0" * exp
    point = len(ds) + exp
    if point > 0:
        return neg + ds[:point] + "." + ds[point:]
    return neg + "0." + "0" * (-point) + ds


def _encode_str(s: str) -> str:
    if not isinstance(s, Verbatim):
        s = unicodedata.normalize("NFC", s)
    return json.dumps(s, ensure_ascii=False)


def _emit(value: Any, out: list[str]) -> None:
    # bool before int: bool is an int subclass
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(_encode_str(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, Decimal):
        out.append(format_decimal(value))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise NonCanonicalizable(f"non-finite float {value!r}")
        out.append(format_decimal(Decimal(repr(value))))
    elif isinstance(value, dict):
        items = []
        seen = set()
        for k, v in value.items():
            if not isinstance(k, str):
                raise NonCanonicalizable(f"map key must be a string, got {type(k).__name__}")
            nk = k if isinstance(k, Verbatim) else unicodedata.normalize("NFC", k)
            if nk in seen:
                raise NonCanonicalizable(f"duplicate key after NFC: {nk!r}")
            seen.add(nk)
            items.append((nk, v))
        items.sort(key=lambda kv: kv[0])
        out.append("{")
        for i, (k, v) in enumerate(items):
            if i:
                out.append(",")
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, v in enumerate(value):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif isinstance(value, Enum):
        _emit(value.value, out)
    else:
        raise NonCanonicalizable(f"cannot canonicalize {type(value).__name__}")


def canon_str(record: Any) -> str:
    out: list[str] = []
    _emit(record, out)
    return "".join(out)


def canon_serialize(record: Any) -> bytes:
    """Canonical UTF-8 JSON bytes for ``record``.

    Keys are sorted by code point, there is no insignificant whitespace,
    numbers use their shortest exact form and strings are NFC (except
    :class:`Verbatim` ones).
    """
    try:
        return canon_str(record).encode("utf-8")
    except UnicodeEncodeError as exc:
        raise NonCanonicalizable(f"unencodable text: {exc}") from exc


def canon_parse(data: bytes | str) -> Any:
    """Parse canonical JSON back, keeping numbers as exact ``Decimal``/``int``."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data, parse_float=Decimal)


def derive_id(tag: DomainTag | str, build_id: str, record: Any) -> str:
    tag_s = tag.value if isinstance(tag, DomainTag) else str(tag)
    h = hashlib.sha1()
    h.update(tag_s.encode("utf-8"))
    h.update(SEP)
    h.update(build_id.encode("utf-8"))
    h.update(SEP)
    h.update(canon_serialize(record))
    return h.hexdigest()


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def jsonl_line(record: Any) -> bytes:
    return canon_serialize(record) + b"\n"
