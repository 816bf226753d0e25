"""Surface rendering of typed values and claims for the fixture languages."""
from __future__ import annotations

import json
from functools import lru_cache

from ..canon import format_decimal
from ..model import ValueKind
from ..policy import parse_wikidata_time


@lru_cache(maxsize=None)
def load_realizers() -> dict:
    from ..pipeline import data_path

    with open(data_path("realizers.json"), encoding="utf-8") as fh:
        return json.load(fh)


def property_label(pid: str, lang: str, realizers: dict | None = None) -> str | None:
    r = realizers or load_realizers()
    labels = r["property_labels"]
    return labels.get(lang, {}).get(pid) or labels.get("en", {}).get(pid)


def render_time(iso: str, precision: int, lang: str, realizers: dict | None = None) -> str:
    r = realizers or load_realizers()
    y, m, d, *_ = parse_wikidata_time(iso)
    months = r.get("month_names", {}).get(lang)
    if lang == "zh":
        out = f"{y}年"
        if precision >= 10:
            out += f"{m}月"
        if precision >= 11:
            out += f"{d}日"
        return out
    if precision == 9 or not months:
        return str(y) if precision == 9 else f"{y:04d}-{m:02d}" + (f"-{d:02d}" if precision >= 11 else "")
    if precision == 10:
        return f"{months[m - 1]} {y}"
    if lang == "de":
        return f"{d}. {months[m - 1]} {y}"
    return f"{d} {months[m - 1]} {y}"


def render_quantity(amount, unit: str, pack=None) -> str:
    text = format_decimal(amount)
    if pack is not None and pack.decimal_separator != ".":
        text = text.replace(".", pack.decimal_separator)
    if unit in ("", "1"):
        return text
    sym = None
    if pack is not None:
        for s, q in sorted(pack.unit_symbols.items()):
            if q == unit:
                sym = s
                break
    return f"{text} {sym or unit}"


def render_value(v, lang: str, labels: dict[str, dict[str, str]], pack=None, realizers: dict | None = None) -> str | None:
    """Surface form, or None when the value cannot be verbalized in ``lang``."""
    k = v.kind
    if k is ValueKind.ENTITY:
        names = labels.get(v.entity, {})
        return names.get(lang) or names.get("en")
    if k is ValueKind.TIME:
        return render_time(v.time, v.precision, lang, realizers)
    if k is ValueKind.QUANTITY:
        return render_quantity(v.amount, v.unit or "1", pack)
    if k is ValueKind.COORDINATE:
        return f"{format_decimal(v.latitude)}, {format_decimal(v.longitude)}"
    if k in (ValueKind.STRING, ValueKind.EXTERNAL_ID, ValueKind.MONOTEXT):
        return v.text
    return None


def realize_claim(subject: str, pid: str, v, lang: str, labels, pack=None, realizers: dict | None = None) -> str | None:
    r = realizers or load_realizers()
    prop = property_label(pid, lang, r)
    val = render_value(v, lang, labels, pack, r)
    pat = r["patterns"].get(lang, {}).get(v.kind.name)
    if prop is None or val is None or pat is None:
        return None
    return pat.format(property=prop, subject=subject, value=val)
