"""Strict, type-aware literal parsers used by the matchers.

Every parser returns spans in the coordinates of the string it was given.
No fuzzy matching: a literal either parses to an exact typed value or is
ignored.  Literals preceded or followed by one of the pack's approximation
markers are flagged and never matched.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from functools import lru_cache

from .model import TypedValue

_TOKEN_RE = re.compile(r"(MONTH|Y|M|D)")


@dataclass(frozen=True)
class Literal:
    value: TypedValue
    start: int
    end: int
    approx: bool = False


def _iso(y: int, m: int = 1, d: int = 1) -> str:
    sign = "-" if y < 0 else "+"
    return f"{sign}{abs(y):04d}-{m:02d}-{d:02d}T00:00:00Z"


def _valid_date(y: int, m: int, d: int) -> bool:
    if not 1 <= m <= 12 or not 1 <= d <= 31:
        return False
    if m in (4, 6, 9, 11) and d > 30:
        return False
    if m == 2:
        leap = y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)
        return d <= (29 if leap else 28)
    return True


def _compile_pattern(pattern: str, month_alt: str) -> tuple[re.Pattern, int]:
    parts = []
    precision = 9
    for tok in _TOKEN_RE.split(pattern):
        if tok == "Y":
            parts.append(r"(?P<y>\d{3,4})")
        elif tok == "M":
            parts.append(r"(?P<m>\d{1,2})")
            precision = max(precision, 10)
        elif tok == "D":
            parts.append(r"(?P<d>\d{1,2})")
            precision = 11
        elif tok == "MONTH":
            if not month_alt:
                return None, 0  # type: ignore[return-value]
            parts.append(f"(?P<mon>{month_alt})")
            precision = max(precision, 10)
        elif tok:
            lit = re.escape(tok).replace(r"\ ", " ")
            parts.append(lit.replace(" ", r"\s+"))
    body = "".join(parts)
    # digits must not continue a longer number; words must end on a boundary
    return re.compile(r"(?<![0-9A-Za-z.,])" + body + r"(?![0-9A-Za-z])", re.IGNORECASE), precision


@lru_cache(maxsize=32)
def _date_grammar(patterns: tuple, months: tuple) -> list:
    month_alt = "|".join(re.escape(m) for m, _ in sorted(months, key=lambda kv: -len(kv[0])))
    out = []
    for p in patterns:
        rx, prec = _compile_pattern(p, month_alt)
        if rx is not None:
            out.append((rx, prec))
    iso = re.compile(r"(?<![\w.,-])(?P<y>\d{4})-(?P<m>\d{2})-(?P<d>\d{2})(?![\w])")
    out.insert(0, (iso, 11))
    # more specific patterns claim their spans first
    out.sort(key=lambda rp: -rp[1])
    return out


def _approx(text: str, start: int, end: int, markers) -> bool:
    before = text[:start].rstrip()
    after = text[end:].lstrip()
    low_before = before.casefold()
    for mk in markers:
        m = mk.casefold()
        if low_before.endswith(m):
            k = len(low_before) - len(m)
            if k == 0 or not low_before[k - 1].isalnum() or not m[0].isalnum():
                return True
        if after.casefold().startswith(m) and not m[0].isascii():
            return True
    return False


def _overlaps(taken: list[tuple[int, int]], s: int, e: int) -> bool:
    return any(s < te and ts < e for ts, te in taken)


def parse_dates(text: str, pack) -> list[Literal]:
    months = {k.casefold(): v for k, v in pack.months.items()}
    grammar = _date_grammar(tuple(pack.date_patterns), tuple(sorted(months.items())))
    taken: list[tuple[int, int]] = []
    out = []
    for rx, prec in grammar:
        for m in rx.finditer(text):
            s, e = m.span()
            if _overlaps(taken, s, e):
                continue
            gd = m.groupdict()
            y = int(gd["y"])
            mo = 1
            if gd.get("mon"):
                mo = months[gd["mon"].casefold()]
            elif gd.get("m"):
                mo = int(gd["m"])
            d = int(gd["d"]) if gd.get("d") else 1
            if not _valid_date(y, mo, d) or y == 0:
                continue
            if prec == 9 and not 1000 <= y <= 2100:
                continue
            taken.append((s, e))
            out.append(Literal(TypedValue.time_(_iso(y, mo, d), prec), s, e, _approx(text, s, e, pack.approximation_markers)))
    out.sort(key=lambda l: (l.start, l.end))
    return out


@lru_cache(maxsize=32)
def _number_re(dec: str, group: str, units: tuple) -> re.Pattern:
    d, g = re.escape(dec), re.escape(group)
    num = rf"[-+−]?(?:\d{{1,3}}(?:{g}\d{{3}})+|\d+)(?:{d}\d+)?"
    unit_alt = "|".join(re.escape(u) for u in sorted(units, key=len, reverse=True))
    unit = rf"(?:\s?(?P<unit>{unit_alt})(?![A-Za-z]))?" if unit_alt else ""
    return re.compile(rf"(?<![0-9A-Za-z.,])(?P<num>{num})(?![\d]){unit}")


def _to_decimal(num: str, dec: str, group: str) -> Decimal | None:
    s = num.replace("−", "-").replace(group, "").replace(dec, ".")
    try:
        return Decimal(s)
    except InvalidOperation:
        return None


def parse_quantities(text: str, pack) -> list[Literal]:
    rx = _number_re(pack.decimal_separator, pack.group_separator, tuple(pack.unit_symbols))
    out = []
    for m in rx.finditer(text):
        amount = _to_decimal(m.group("num"), pack.decimal_separator, pack.group_separator)
        if amount is None:
            continue
        sym = m.groupdict().get("unit")
        unit = pack.unit_symbols[sym] if sym else "1"
        s, e = m.span()
        out.append(Literal(TypedValue.quantity_(amount, unit), s, e, _approx(text, s, e, pack.approximation_markers)))
    return out


_COORD_RE = re.compile(
    r"(?<![0-9A-Za-z.])(?P<lat>\d{1,2}(?:\.\d+)?)°?\s*(?P<ns>[NS])[,;]?\s*(?P<lon>\d{1,3}(?:\.\d+)?)°?\s*(?P<ew>[EW])(?![\w])"
    r"|(?<![0-9A-Za-z.])(?P<lat2>-?\d{1,2}\.\d+)\s*,\s*(?P<lon2>-?\d{1,3}\.\d+)(?!\w|\.\d)"
)


def parse_coordinates(text: str) -> list[Literal]:
    out = []
    for m in _COORD_RE.finditer(text):
        if m.group("lat") is not None:
            lat = Decimal(m.group("lat"))
            lon = Decimal(m.group("lon"))
            if m.group("ns") == "S":
                lat = -lat
            if m.group("ew") == "W":
                lon = -lon
        else:
            lat = Decimal(m.group("lat2"))
            lon = Decimal(m.group("lon2"))
        if abs(lat) > 90 or abs(lon) > 180:
            continue
        out.append(Literal(TypedValue.coordinate_(lat, lon), m.start(), m.end()))
    return out


# ------------------------------------------------------------ raw wikitext values

_DATE_TPL_RE = re.compile(
    r"\{\{\s*(?:birth[ _]date(?:[ _]and[ _]age)?|death[ _]date(?:[ _]and[ _]age)?|start[ _]date|end[ _]date|dts"
    r"|geburtsdatum|todesdatum)\s*\|(?:\s*(?:df|mf)\s*=\s*\w+\s*\|)?"
    r"\s*(?P<y>\d{3,4})\s*(?:\|\s*(?P<m>\d{1,2})\s*(?:\|\s*(?P<d>\d{1,2})\s*)?)?(?:\|[^{}]*)?\}\}",
    re.IGNORECASE,
)
_COORD_TPL_RE = re.compile(
    r"\{\{\s*coord(?:inate)?\s*\|\s*(?P<lat>-?\d+(?:\.\d+)?)\s*\|\s*(?P<lon>-?\d+(?:\.\d+)?)\s*(?:\|[^{}]*)?\}\}",
    re.IGNORECASE,
)
_CONVERT_TPL_RE = re.compile(
    r"\{\{\s*(?:convert|cvt)\s*\|\s*(?P<num>[-\d.,]+)\s*\|\s*(?P<unit>[^|{}]+?)\s*(?:\|[^{}]*)?\}\}",
    re.IGNORECASE,
)


def parse_value_templates(text: str, pack) -> list[Literal]:
    """Typed literals encoded as common value templates inside a raw parameter."""
    out = []
    for m in _DATE_TPL_RE.finditer(text):
        y = int(m.group("y"))
        mo = int(m.group("m")) if m.group("m") else 1
        d = int(m.group("d")) if m.group("d") else 1
        prec = 11 if m.group("d") else (10 if m.group("m") else 9)
        if _valid_date(y, mo, d):
            out.append(Literal(TypedValue.time_(_iso(y, mo, d), prec), m.start(), m.end()))
    for m in _COORD_TPL_RE.finditer(text):
        lat, lon = Decimal(m.group("lat")), Decimal(m.group("lon"))
        if abs(lat) <= 90 and abs(lon) <= 180:
            out.append(Literal(TypedValue.coordinate_(lat, lon), m.start(), m.end()))
    for m in _CONVERT_TPL_RE.finditer(text):
        amount = _to_decimal(m.group("num"), ".", ",")
        sym = m.group("unit").strip()
        if amount is not None and sym in pack.unit_symbols:
            out.append(Literal(TypedValue.quantity_(amount, pack.unit_symbols[sym]), m.start(), m.end()))
    return out


_WIKILINK_RE = re.compile(r"\[\[(?P<target>[^\[\]|]+)(?:\|(?P<label>[^\[\]]*))?\]\]")


def raw_wikilinks(text: str) -> list[tuple[int, int, str]]:
    """(start, end, target) of each ``[[target|label]]`` in raw wikitext."""
    return [(m.start(), m.end(), m.group("target").split("#", 1)[0].strip()) for m in _WIKILINK_RE.finditer(text)]


def find_all(text: str, needle: str) -> list[tuple[int, int]]:
    """Word-bounded exact occurrences of ``needle`` in ``text``."""
    if not needle:
        return []
    out = []
    i = text.find(needle)
    while i >= 0:
        j = i + len(needle)
        left_ok = i == 0 or not (text[i - 1].isalnum() and needle[0].isalnum() and text[i - 1].isascii())
        right_ok = j == len(text) or not (text[j].isalnum() and needle[-1].isalnum() and text[j].isascii())
        if left_ok and right_ok:
            out.append((i, j))
        i = text.find(needle, i + 1)
    return out
