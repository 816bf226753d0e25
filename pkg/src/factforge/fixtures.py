"""Deterministic synthetic dumps for tests, benchmarks and the demo build.

The generated world is small but exercises every grounding path: infobox
fields, tables, lead links, redirects, a redirect cycle, a disambiguation
page, stub pages, excluded sections, approximate values, unit and
precision mismatches, duplicate and conflicting claims, and a few
malformed records.
"""
from __future__ import annotations

import json
import random
import re
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

LANGS = ("en", "de", "zh")
SNAPSHOT = "2024-06-01T00:00:00Z"
ENTITY_URI = "http://www.wikidata.org/entity/"
GREGORIAN_URI = ENTITY_URI + "Q1985727"
PERTURB_WORD = "notable"
CTRL = "\u0090"

MONTHS = {
    "en": ["January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
           "November", "December"],
    "de": ["Januar", "Februar", "März", "April", "Mai", "Juni", "Juli", "August", "September", "Oktober",
           "November", "Dezember"],
}

# fixed vocabulary entities: qid -> labels
CLASSES = {"Q5": ("human", "Mensch", "人类"), "Q515": ("city", "Stadt", "城市"),
           "Q6256": ("country", "Staat", "国家"), "Q28640": ("profession", "Beruf", "职业")}
GENDERS = {"Q6581097": ("male", "männlich", "男"), "Q6581072": ("female", "weiblich", "女")}
OCCUPATIONS = {
    "Q36180": ("writer", "Schriftsteller", "作家"), "Q82955": ("politician", "Politiker", "政治人物"),
    "Q901": ("scientist", "Wissenschaftler", "科学家"), "Q33999": ("actor", "Schauspieler", "演员"),
    "Q639669": ("musician", "Musiker", "音乐家"), "Q937857": ("footballer", "Fußballspieler", "足球运动员"),
    "Q1028181": ("painter", "Maler", "画家"), "Q42973": ("architect", "Architekt", "建筑师"),
    "Q39631": ("physician", "Arzt", "医生"), "Q1622272": ("professor", "Hochschullehrer", "教授"),
}
UNITS = {"m": "Q11573", "cm": "Q174728", "km2": "Q712226"}

_SYL = ["al", "bar", "cor", "dan", "el", "fen", "gar", "hol", "is", "jor", "kel", "lan", "mor", "nor", "or",
        "pel", "quin", "ros", "sal", "tor", "ul", "ven", "wil", "yar", "zen", "ber", "cas", "dor", "mir", "tal"]
_FIRST = ["Anna", "Ben", "Clara", "David", "Elena", "Felix", "Greta", "Hugo", "Ida", "Jonas", "Karla", "Leo",
          "Mara", "Nils", "Olga", "Paul", "Rosa", "Simon", "Tilda", "Ulf", "Vera", "Walter", "Xenia", "Yann",
          "Zora", "Arne", "Britta", "Carl", "Dora", "Emil"]
_ZH_SUR = "王李张刘陈杨黄赵吴周徐孙马朱胡郭何高林罗郑梁谢宋唐"
_ZH_GIVEN = "伟芳娜敏静丽强磊军洋勇艳杰娟涛明超秀霞平刚桂英华玉兰文"
_ZH_PLACE = "安平宁远泰和东西南北山河湖海林川云峰春秋明德华兴"


def _cap(s: str) -> str:
    return s[:1].upper() + s[1:]


@dataclass
class Entity:
    qid: str
    labels: dict[str, str]
    kind: str
    sitelinks: dict[str, str] = field(default_factory=dict)
    claims: dict[str, list[dict]] = field(default_factory=dict)
    data: dict = field(default_factory=dict)


class _World:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.seed = seed
        self.entities: dict[str, Entity] = {}
        self.order: list[str] = []
        self._names: set[str] = set()
        self._zh: set[str] = set()

    # ---------------------------------------------------------------- names

    def latin(self, parts: int) -> str:
        while True:
            n = _cap("".join(self.rng.choice(_SYL) for _ in range(parts)))
            if n not in self._names:
                self._names.add(n)
                return n

    def zh(self, pool: str, first: str = "", k: int = 2) -> str:
        while True:
            n = first + "".join(self.rng.choice(pool) for _ in range(k))
            if n not in self._zh:
                self._zh.add(n)
                return n

    def add(self, e: Entity) -> Entity:
        self.entities[e.qid] = e
        self.order.append(e.qid)
        return e

    # ---------------------------------------------------------------- claims

    def sid(self, qid: str) -> str:
        return f"{qid}${uuid.UUID(int=self.rng.getrandbits(128), version=4)}".upper().replace("Q", "Q", 1)

    def refs(self, n: int | None = None) -> list[dict]:
        n = self.rng.randint(0, 2) if n is None else n
        return [{"hash": f"{self.rng.getrandbits(64):016x}",
                 "snaks": {"P248": [_snak("P248", _item("Q36578"))]}, "snaks-order": ["P248"]} for _ in range(n)]

    def claim(self, e: Entity, pid: str, snak: dict, rank: str = "normal", quals: dict | None = None,
              refs: list | None = None, with_id: bool = True) -> dict:
        c = {"mainsnak": snak, "type": "statement", "rank": rank,
             "references": self.refs() if refs is None else refs}
        if with_id:
            c["id"] = self.sid(e.qid)
        if quals:
            c["qualifiers"] = quals
            c["qualifiers-order"] = list(quals)
        e.claims.setdefault(pid, []).append(c)
        return c


def _snak(pid: str, dv: dict, datatype: str | None = None) -> dict:
    s = {"snaktype": "value", "property": pid, "datavalue": dv}
    if datatype:
        s["datatype"] = datatype
    return s


def _item(qid: str) -> dict:
    return {"type": "wikibase-entityid", "value": {"entity-type": "item", "numeric-id": int(qid[1:]), "id": qid}}


def _time(y: int, m: int = 1, d: int = 1, prec: int = 11) -> dict:
    if prec < 11:
        d = 0 if prec < 11 else d
    if prec < 10:
        m = 0
    return {"type": "time", "value": {"time": f"+{y:04d}-{m:02d}-{d:02d}T00:00:00Z", "timezone": 0, "before": 0,
                                      "after": 0, "precision": prec, "calendarmodel": GREGORIAN_URI}}


def _qty(amount: str, unit: str = "1") -> dict:
    u = unit if unit == "1" else ENTITY_URI + unit
    return {"type": "quantity", "value": {"amount": "+" + amount, "unit": u}}


def _coord(lat: str, lon: str) -> dict:
    return {"type": "globecoordinate", "value": {"latitude": float(lat), "longitude": float(lon), "altitude": None,
                                                 "precision": 0.01, "globe": ENTITY_URI + "Q2"}}


def _mono(text: str, lang: str) -> dict:
    return {"type": "monolingualtext", "value": {"text": text, "language": lang}}


def _str(text: str) -> dict:
    return {"type": "string", "value": text}


# ------------------------------------------------------------ text formatting


def fmt_date(lang: str, y: int, m: int = 0, d: int = 0) -> str:
    if lang == "zh":
        return f"{y}年" + (f"{m}月" if m else "") + (f"{d}日" if d else "")
    if not m:
        return str(y)
    mon = MONTHS[lang][m - 1]
    if not d:
        return f"{mon} {y}"
    return f"{d}. {mon} {y}" if lang == "de" else f"{d} {mon} {y}"


def fmt_int(lang: str, n: int) -> str:
    s = f"{n:,}"
    return s.replace(",", ".") if lang == "de" else s


def fmt_dec(lang: str, s: str) -> str:
    return s.replace(".", ",") if lang == "de" else s


def link(title: str, text: str | None = None) -> str:
    return f"[[{title}|{text}]]" if text and text != title else f"[[{title}]]"


# ------------------------------------------------------------ world generation


def build_world(seed: int = 20240601, n_persons: int = 180) -> _World:
    w = _World(seed)
    rng = w.rng
    for q, labs in {**CLASSES, **GENDERS}.items():
        w.add(Entity(q, dict(zip(LANGS, labs)), "vocab"))
    for q, labs in OCCUPATIONS.items():
        e = w.add(Entity(q, dict(zip(LANGS, labs)), "occupation"))
        e.sitelinks["en"] = _cap(labs[0])
        w.claim(e, "P31", _snak("P31", _item("Q28640")))

    countries = []
    for i in range(8):
        base = w.latin(2)
        zh = w.zh(_ZH_PLACE, k=3)
        e = w.add(Entity(f"Q{1001 + i}", {"en": base + "ia", "de": base + "ien", "zh": zh}, "country"))
        e.sitelinks = dict(e.labels)
        e.data = {"adj_en": base + "ian", "adj_de": base.lower() + "isch", "pop": rng.randint(800_000, 9_000_000),
                  "area": rng.randint(20_000, 400_000), "lat": f"{rng.randint(-60, 60)}.{rng.randint(10, 99)}",
                  "lon": f"{rng.randint(-170, 170)}.{rng.randint(10, 99)}"}
        countries.append(e)

    cities = []
    for i in range(30):
        base = w.latin(2)
        e = w.add(Entity(f"Q{2001 + i}", {"en": base, "de": base, "zh": w.zh(_ZH_PLACE) + "市"}, "city"))
        e.sitelinks = dict(e.labels)
        e.data = {"country": countries[i % 8], "pop": rng.randint(5_000, 900_000), "area": rng.randint(12, 900),
                  "lat": f"{rng.randint(-60, 60)}.{rng.randint(10, 99)}",
                  "lon": f"{rng.randint(-170, 170)}.{rng.randint(10, 99)}", "founded": rng.randint(1100, 1950),
                  "pop_old": rng.randint(4_000, 800_000)}
        cities.append(e)
    for i, c in enumerate(countries):
        c.data["capital"] = cities[i]

    persons = []
    for i in range(n_persons):
        name = f"{rng.choice(_FIRST)} {w.latin(2)}"
        zh = w.zh(_ZH_GIVEN, first=rng.choice(_ZH_SUR), k=rng.choice([1, 2]))
        e = w.add(Entity(f"Q{3001 + i}", {"en": name, "de": name, "zh": zh}, "person"))
        by = rng.randint(1900, 1990)
        e.data = {
            "gender": rng.choice(sorted(GENDERS)),
            "birth": (by, rng.randint(1, 12), rng.randint(1, 28)),
            "death": (by + rng.randint(40, 30 + 60), rng.randint(1, 12), rng.randint(1, 28))
            if rng.random() < 0.55 and by < 1960 else None,
            "bplace": rng.choice(cities), "dplace": rng.choice(cities),
            "citizen": rng.choice(countries),
            "occ": rng.sample(sorted(OCCUPATIONS), rng.choice([1, 1, 2])),
            "height": (f"1.{rng.randint(55, 99)}" if rng.random() < 0.5 else None),
            "viaf": str(rng.randint(10**8, 10**9 - 1)),
            "nick": "The " + _cap(rng.choice(_SYL) + rng.choice(_SYL)),
        }
        persons.append(e)
    # language coverage: en 150, de 110, zh 90 (overlapping)
    idx = list(range(n_persons))
    langs_of = {"en": set(idx[:150]), "de": set(idx[n_persons - 110:]), "zh": set(idx[:45] + idx[n_persons - 45:])}
    for i, p in enumerate(persons):
        for lang in LANGS:
            if i in langs_of[lang]:
                p.sitelinks[lang] = p.labels[lang]
    # families: spouses and fathers
    for i in range(0, 60, 4):
        a, b = persons[i], persons[i + 1]
        a.data["spouse"], b.data["spouse"] = b, a
    for i in range(60, 120, 3):
        persons[i + 1].data["father"] = persons[i]
        persons[i + 2].data["father"] = persons[i]
    # mayors for cities
    politicians = persons[120:]
    for j, c in enumerate(cities):
        m1, m2 = politicians[(2 * j) % len(politicians)], politicians[(2 * j + 1) % len(politicians)]
        s1 = rng.randint(1960, 1990)
        e1 = s1 + rng.randint(4, 10)
        # every fifth city gets overlapping terms
        s2 = e1 - 2 if j % 5 == 0 else e1
        c.data["mayors"] = [(m1, s1, e1), (m2, s2, s2 + rng.randint(4, 10))]
    _claims(w, persons, cities, countries)
    w.persons, w.cities, w.countries = persons, cities, countries
    return w


def _claims(w: _World, persons, cities, countries) -> None:
    rng = w.rng
    for c in countries:
        d = c.data
        w.claim(c, "P31", _snak("P31", _item("Q6256")))
        w.claim(c, "P36", _snak("P36", _item(d["capital"].qid)))
        w.claim(c, "P1082", _snak("P1082", _qty(str(d["pop"]))))
        w.claim(c, "P2046", _snak("P2046", _qty(str(d["area"]), UNITS["km2"])))
        w.claim(c, "P625", _snak("P625", _coord(d["lat"], d["lon"])))
    for c in cities:
        d = c.data
        w.claim(c, "P31", _snak("P31", _item("Q515")))
        w.claim(c, "P17", _snak("P17", _item(d["country"].qid)))
        w.claim(c, "P1082", _snak("P1082", _qty(str(d["pop"]))), rank="preferred")
        w.claim(c, "P2046", _snak("P2046", _qty(str(d["area"]), UNITS["km2"])))
        w.claim(c, "P625", _snak("P625", _coord(d["lat"], d["lon"])))
        w.claim(c, "P571", _snak("P571", _time(d["founded"], prec=9)))
        for m, s, e in d["mayors"]:
            w.claim(c, "P6", _snak("P6", _item(m.qid)),
                    quals={"P580": [_snak("P580", _time(s, prec=9))], "P582": [_snak("P582", _time(e, prec=9))]})
    for i, p in enumerate(persons):
        d = p.data
        w.claim(p, "P31", _snak("P31", _item("Q5")))
        w.claim(p, "P21", _snak("P21", _item(d["gender"])))
        y, m, dd = d["birth"]
        w.claim(p, "P569", _snak("P569", _time(y, m, dd)), rank="preferred" if i % 7 == 0 else "normal")
        w.claim(p, "P19", _snak("P19", _item(d["bplace"].qid)))
        w.claim(p, "P27", _snak("P27", _item(d["citizen"].qid)))
        for o in d["occ"]:
            w.claim(p, "P106", _snak("P106", _item(o)))
        w.claim(p, "P214", _snak("P214", _str(d["viaf"]), "external-id"))
        w.claim(p, "P1449", _snak("P1449", _mono(d["nick"], "en")), with_id=i % 11 != 3)
        if d["death"]:
            y2, m2, d2 = d["death"]
            w.claim(p, "P570", _snak("P570", _time(y2, m2, d2)))
            w.claim(p, "P20", _snak("P20", _item(d["dplace"].qid)))
        if d["height"]:
            if i % 6 == 0:  # same height recorded in centimetres
                cm = str(int(round(float(d["height"]) * 100)))
                w.claim(p, "P2048", _snak("P2048", _qty(cm, UNITS["cm"])))
            w.claim(p, "P2048", _snak("P2048", _qty(d["height"], UNITS["m"])))
        if "spouse" in d:
            w.claim(p, "P26", _snak("P26", _item(d["spouse"].qid)))
        if "father" in d:
            w.claim(p, "P22", _snak("P22", _item(d["father"].qid)))
        # planted duplicates, conflicts and granularity variants
        if i % 9 == 0:
            w.claim(p, "P569", _snak("P569", _time(y, m, dd)), refs=[])
        if i % 13 == 5:
            w.claim(p, "P569", _snak("P569", _time(y + 1, m, dd)), rank="normal", refs=[])
        if i % 17 == 2:
            w.claim(p, "P569", _snak("P569", _time(y, prec=9)), refs=[])
        if i % 29 == 7:
            w.claim(p, "P570", _snak("P570", _time(y - y % 10, prec=8)), refs=[])  # decade: skipped
        if i % 31 == 4:
            w.claim(p, "P569", {"snaktype": "somevalue", "property": "P569"}, rank="deprecated")
        if i % 23 == 11:
            w.claim(p, "P1449", _snak("P1449", _mono(d["nick"].lower(), "en")), refs=[])


# ------------------------------------------------------------ page text


def _pick(rng, p) -> bool:
    return rng.random() < p


def person_page(w: _World, p: Entity, lang: str, i: int) -> str:
    d = p.data
    rng = random.Random(f"{w.seed}:{p.qid}:{lang}")
    t = lambda e: e.sitelinks.get(lang) or e.labels[lang]  # noqa: E731
    y, m, dd = d["birth"]
    bp, ctry = d["bplace"], d["citizen"]
    has_death = d["death"] is not None
    infobox = []
    if lang == "en":
        infobox.append("{{Infobox person")
        infobox.append(f"| name = {p.labels['en']}")
        if i % 4 == 0:
            infobox.append(f"| birth_date = {{{{birth date|{y}|{m}|{dd}}}}}")
        elif i % 4 != 3:
            infobox.append(f"| birth_date = {fmt_date('en', y, m, dd)}")
        infobox.append(f"| birth_place = {link(t(bp))}")
        if has_death:
            y2, m2, d2 = d["death"]
            infobox.append(f"| death_date = {{{{death date|{y2}|{m2}|{d2}}}}}")
            infobox.append(f"| death_place = {link(t(d['dplace']))}")
        infobox.append(f"| citizenship = {link(t(ctry))}")
        infobox.append("| occupation = " + ", ".join(link(_cap(OCCUPATIONS[o][0])) for o in d["occ"]))
        if d["height"] and i % 3 != 1:
            infobox.append(f"| height = {d['height']} m")
        if "spouse" in d:
            infobox.append(f"| spouse = {link(t(d['spouse']))}")
        if "father" in d:
            infobox.append(f"| father = {link(t(d['father']))}")
        infobox.append(f"| nickname = {d['nick']}")
        infobox.append("}}")
        occ = OCCUPATIONS[d["occ"][0]][0]
        life = f"born {fmt_date('en', y, m, dd)}" if i % 5 != 2 else f"born {y}"
        if has_death and i % 5 != 2:
            life += f" – died {fmt_date('en', *d['death'])}"
        bp_link = link(t(bp) + " (town)", t(bp)) if i % 8 == 1 else link(t(bp))
        lead = (f"'''{p.labels['en']}''' ({life}) was a {PERTURB_WORD} {link(t(ctry), ctry.data['adj_en'])} "
                f"{link(_cap(occ), occ)} from {bp_link}.")
        body = ["", "== Early life ==",
                f"{p.labels['en']} grew up in {link(t(bp))}, {link(t(ctry))}."]
        if d["height"] and i % 3 == 1:
            body.append(f"{p.labels['en']} was about {d['height']} m tall.")
        if has_death:
            body.append(f"{p.labels['en']} died in {link(t(d['dplace']))}.")
        body += ["", "== Career =="]
        if "spouse" in d:
            body.append(f"In {y + 25}, {p.labels['en']} married {link(t(d['spouse']))}.")
        if "father" in d:
            body.append(f"The father of {p.labels['en']} was {link(t(d['father']))}.")
        body.append(f"Friends called {p.labels['en']} {d['nick']} (e.g. in letters) for many years.")
        body += ["", "== See also ==", f"* {link(t(ctry))}", "", "== External links ==",
                 f"* VIAF {d['viaf']}", "", "[[Category:People]]"]
    elif lang == "de":
        infobox.append("{{Infobox Person")
        infobox.append(f"| geburtsdatum = {fmt_date('de', y, m, dd)}")
        infobox.append(f"| geburtsort = {link(t(bp))}")
        if has_death:
            infobox.append(f"| sterbedatum = {fmt_date('de', *d['death'])}")
            infobox.append(f"| sterbeort = {link(t(d['dplace']))}")
        infobox.append(f"| staatsangehörigkeit = {link(t(ctry))}")
        infobox.append("| beruf = " + ", ".join(OCCUPATIONS[o][1] for o in d["occ"]))
        if d["height"]:
            infobox.append(f"| größe = {fmt_dec('de', d['height'])} m")
        if "spouse" in d:
            infobox.append(f"| ehepartner = {link(t(d['spouse']))}")
        if "father" in d:
            infobox.append(f"| vater = {link(t(d['father']))}")
        infobox.append("}}")
        death = f"; † {fmt_date('de', *d['death'])} in {link(t(d['dplace']))}" if has_death else ""
        lead = (f"'''{p.labels['de']}''' (* {fmt_date('de', y, m, dd)} in {link(t(bp))}{death}) war ein "
                f"{link(t(ctry), ctry.data['adj_de'] + 'er')} {OCCUPATIONS[d['occ'][0]][1]}.")
        body = ["", "== Leben ==", f"{p.labels['de']} wuchs in {link(t(bp))} auf."]
        if "spouse" in d:
            body.append(f"Im Jahr {y + 25} heiratete {p.labels['de']} {link(t(d['spouse']))}.")
        body += ["", "== Weblinks ==", f"* VIAF {d['viaf']}"]
    else:
        infobox.append("{{Infobox person")
        if i % 3 != 2:
            infobox.append(f"| 出生日期 = {fmt_date('zh', y, m, dd)}")
        infobox.append(f"| 出生地点 = {link(t(bp))}")
        if has_death:
            infobox.append(f"| 逝世日期 = {fmt_date('zh', *d['death'])}")
            infobox.append(f"| 逝世地点 = {link(t(d['dplace']))}")
        infobox.append(f"| 国籍 = {link(t(ctry))}")
        infobox.append("| 职业 = " + "、".join(OCCUPATIONS[o][2] for o in d["occ"]))
        if "spouse" in d:
            infobox.append(f"| 配偶 = {link(t(d['spouse']))}")
        infobox.append("}}")
        born = fmt_date("zh", y) if i % 3 == 2 else fmt_date("zh", y, m, dd)
        lead = f"'''{p.labels['zh']}'''（{born}\u2014），{link(t(ctry))}{OCCUPATIONS[d['occ'][0]][2]}，出生于{link(t(bp))}。"
        body = ["", "== 生平 ==", f"{p.labels['zh']}在{link(t(bp))}长大。"]
        if has_death:
            body.append(f"{p.labels['zh']}于{fmt_date('zh', *d['death'])}在{link(t(d['dplace']))}逝世。")
        body += ["", "== 外部链接 ==", f"* VIAF {d['viaf']}"]
    if i % 37 == 9:
        infobox = []  # no infobox on a few pages
    return "\n".join(infobox + [lead] + body) + "\n"


def city_page(w: _World, c: Entity, lang: str, j: int) -> str:
    d = c.data
    t = lambda e: e.sitelinks.get(lang) or e.labels[lang]  # noqa: E731
    ctry = d["country"]
    mayors = d["mayors"]
    if lang == "en":
        area = f"{d['area']}" if j % 6 == 3 else f"{d['area']} km2"
        ib = ["{{Infobox settlement", f"| name = {c.labels['en']}", f"| country = {link(t(ctry))}",
              f"| population_total = {d['pop']}", f"| coordinates = {{{{coord|{d['lat']}|{d['lon']}}}}}",
              f"| established_date = {d['founded']}", f"| leader_name = {link(t(mayors[-1][0]))}",
              f"| area_total_km2 = {area}", "}}"]
        lead = f"'''{c.labels['en']}''' is a city in {link(t(ctry))}. It was founded in {d['founded']}."
        body = ["", "== Demographics ==", '{| class="wikitable"', "! Year !! Population", "|-",
                f"| 2000 || {fmt_int('en', d['pop_old'])}", "|-", f"| 2020 || {fmt_int('en', d['pop'])}", "|}",
                "", "== Government ==", '{| class="wikitable"', "! Mayor !! Term"]
        for m, s, e in mayors:
            body += ["|-", f"| {link(t(m))} || {s}–{e}"]
        body.append("|}")
        if j % 10 == 4:
            body += ["", '{| class="wikitable"', '! rowspan="x" | Broken', "|-", "| cell", "|}"]
    elif lang == "de":
        ib = ["{{Infobox Ort", f"| staat = {link(t(ctry))}", f"| einwohner = {fmt_int('de', d['pop'])}",
              f"| koordinaten = {{{{Coordinate|NS={d['lat']}|EW={d['lon']}}}}}", f"| gründung = {d['founded']}",
              f"| bürgermeister = {link(t(mayors[-1][0]))}", f"| fläche = {d['area']} km²", "}}"]
        lead = f"'''{c.labels['de']}''' ist eine Stadt in {link(t(ctry))}. Sie wurde {d['founded']} gegründet."
        body = ["", "== Bevölkerung ==", '{| class="wikitable"', "! Jahr !! Einwohner", "|-",
                f"| 2020 || {fmt_int('de', d['pop'])}", "|}"]
    else:
        ib = ["{{Infobox settlement", f"| 国家 = {link(t(ctry))}", f"| 人口 = {d['pop']}",
              f"| 坐标 = {{{{coord|{d['lat']}|{d['lon']}}}}}", f"| 建立 = {d['founded']}年",
              f"| 市长 = {link(t(mayors[-1][0]))}", f"| 面积 = {d['area']}平方公里", "}}"]
        lead = f"'''{c.labels['zh']}'''是{link(t(ctry))}的一座城市，建于{d['founded']}年。"
        body = ["", "== 人口 ==", '{| class="wikitable"', "! 年份 !! 人口", "|-", f"| 2020 || {d['pop']}", "|}"]
    return "\n".join(ib + [lead] + body) + "\n"


def country_page(w: _World, c: Entity, lang: str) -> str:
    d = c.data
    t = lambda e: e.sitelinks.get(lang) or e.labels[lang]  # noqa: E731
    cap = d["capital"]
    if lang == "en":
        ib = ["{{Infobox country", f"| capital = {link(t(cap))}", f"| population_estimate = {fmt_int('en', d['pop'])}",
              f"| area_km2 = {fmt_int('en', d['area'])} km2", f"| coordinates = {{{{coord|{d['lat']}|{d['lon']}}}}}",
              "}}"]
        lead = f"'''{c.labels['en']}''' is a country. Its capital is {link(t(cap))}."
        body = ["", "== Demographics ==", '{| class="wikitable"', '! colspan="2" | Census', "|-",
                "! Year !! Residents", "|-", f"| 2020 || {fmt_int('en', d['pop'])}", "|}"]
    elif lang == "de":
        ib = ["{{Infobox Staat", f"| hauptstadt = {link(t(cap))}", f"| einwohner = {fmt_int('de', d['pop'])}",
              f"| fläche = {fmt_int('de', d['area'])} km²", "}}"]
        lead = f"'''{c.labels['de']}''' ist ein Staat. Die Hauptstadt ist {link(t(cap))}."
        body = []
    else:
        ib = ["{{Infobox country", f"| 首都 = {link(t(cap))}", f"| 人口 = {d['pop']}",
              f"| 面积 = {d['area']}平方公里", "}}"]
        lead = f"'''{c.labels['zh']}'''是一个国家，首都是{link(t(cap))}。"
        body = []
    return "\n".join(ib + [lead] + body) + "\n"


def occupation_page(e: Entity) -> str:
    return f"A '''{e.labels['en']}''' is a person whose work is described as {e.labels['en']}.\n"


# ------------------------------------------------------------ dumps


@dataclass
class Page:
    page_id: int
    title: str
    text: str
    ns: int = 0
    redirect: str | None = None
    old_text: str | None = None


def _page_xml(p: Page, lang: str) -> str:
    out = ["  <page>", f"    <title>{escape(p.title)}</title>", f"    <ns>{p.ns}</ns>", f"    <id>{p.page_id}</id>"]
    if p.redirect:
        out.append(f"    <redirect title={quoteattr(p.redirect)} />")
    revs = []
    if p.old_text is not None:
        revs.append((p.page_id * 10 + 1, "2020-01-01T00:00:00Z", p.old_text))
    revs.append((p.page_id * 10 + 5, "2024-05-01T00:00:00Z", p.text))
    for rid, ts, text in revs:
        out += ["    <revision>", f"      <id>{rid}</id>", f"      <timestamp>{ts}</timestamp>",
                f'      <text xml:space="preserve">{escape(text)}</text>', "    </revision>"]
    out.append("  </page>")
    return "\n".join(out)


def dump_xml(pages: list[Page], lang: str) -> str:
    head = (f'<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/" xml:lang="{lang}">\n'
            f"  <siteinfo>\n    <sitename>Fixturepedia</sitename>\n    <dbname>{lang}wiki</dbname>\n"
            "  </siteinfo>\n")
    return head + "\n".join(_page_xml(p, lang) for p in pages) + "\n</mediawiki>\n"


def build_pages(w: _World) -> tuple[dict[str, list[Page]], dict[str, list[tuple[str, str]]], dict[str, list[int]]]:
    pages: dict[str, list[Page]] = {l: [] for l in LANGS}
    redirects: dict[str, list[tuple[str, str]]] = {l: [] for l in LANGS}
    disamb: dict[str, list[int]] = {l: [] for l in LANGS}
    next_id = {"en": 10001, "de": 20001, "zh": 30001}

    def add(lang, title, text, **kw) -> Page:
        p = Page(next_id[lang], title, text, **kw)
        next_id[lang] += 1
        pages[lang].append(p)
        return p

    for c in w.countries:
        for lang in LANGS:
            add(lang, c.sitelinks[lang], country_page(w, c, lang))
    for j, c in enumerate(w.cities):
        for lang in LANGS:
            add(lang, c.sitelinks[lang], city_page(w, c, lang, j),
                old_text="Outdated stub.\n" if j % 7 == 0 else None)
        add("en", c.sitelinks["en"] + " (town)", f"#REDIRECT [[{c.sitelinks['en']}]]\n", redirect=c.sitelinks["en"])
    for q in OCCUPATIONS:
        e = w.entities[q]
        add("en", e.sitelinks["en"], occupation_page(e))
    special = {}
    for i, p in enumerate(w.persons):
        for lang in LANGS:
            if lang not in p.sitelinks:
                continue
            if lang == "en" and i in (3, 40, 77, 101, 140):
                special[i] = p
                continue
            text = person_page(w, p, lang, i)
            if lang == "zh" and i % 30 == 14:
                text = "{{Stub}}\n"
            add(lang, p.sitelinks[lang], text)
    # en special cases: redirect sitelink, cycle, disambiguation, missing page, template-only stub
    for i, p in special.items():
        title = p.sitelinks["en"]
        if i == 3:
            target = title + " (person)"
            add("en", title, f"#REDIRECT [[{target}]]\n", redirect=target)
            add("en", target, person_page(w, p, "en", i))
        elif i == 40:
            add("en", title, "#REDIRECT [[Loop B]]\n", redirect="Loop B")
            add("en", "Loop B", f"#REDIRECT [[{title}]]\n", redirect=title)
        elif i == 77:
            dp = add("en", title, f"'''{title}''' may refer to:\n* {title} (painter)\n* {title} (singer)\n")
            disamb["en"].append(dp.page_id)
        elif i == 101:
            p.sitelinks["en"] = title + " (missing)"
        elif i == 140:
            add("en", title, "{{Stub}}\n{{Authority control}}\n")
    # non-article namespace and a file link to be skipped
    add("en", "Template:Stub", "<small>This article is a stub.</small>\n", ns=10)
    for l in LANGS:
        redirects[l] = sorted((p.title, p.redirect) for p in pages[l] if p.redirect)
        pages[l].sort(key=lambda p: p.page_id)
    return pages, redirects, disamb


def entity_json(e: Entity) -> dict:
    return {
        "type": "item",
        "id": e.qid,
        "labels": {l: {"language": l, "value": v} for l, v in sorted(e.labels.items())},
        "aliases": {},
        "sitelinks": {f"{l}wiki": {"site": f"{l}wiki", "title": t} for l, t in sorted(e.sitelinks.items())},
        "claims": e.claims,
        "modified": "2024-05-20T12:00:00Z",
    }


def dump_entities(w: _World) -> str:
    lines = [json.dumps(entity_json(w.entities[q]), ensure_ascii=False, sort_keys=True) for q in w.order]
    lines.insert(len(lines) // 2, '{"type": "item", "id": "Q99999", "claims": {BROKEN')
    return "[\n" + ",\n".join(lines) + "\n]\n"


def default_config(languages=LANGS) -> dict:
    return {
        "languages": list(languages),
        "inputs": {
            "entities": "entities.json",
            "pages": {l: f"pages/{l}.xml" for l in languages},
            "redirects": {l: f"redirects/{l}.tsv" for l in languages},
            "disambiguation": {l: f"disambiguation/{l}.txt" for l in languages},
        },
        "snapshot": SNAPSHOT,
        "output": "out",
        "hop_cap": 2,
        "bench": {"vocab_size": 320},
    }


def write_fixture(out: str | Path, seed: int = 20240601) -> dict[str, Path]:
    """Write dumps, link tables and configs under ``out``; returns key paths."""
    out = Path(out)
    w = build_world(seed)
    pages, redirects, disamb = build_pages(w)
    for sub in ("pages", "redirects", "disambiguation"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    (out / "entities.json").write_text(dump_entities(w), encoding="utf-8")
    for l in LANGS:
        (out / "pages" / f"{l}.xml").write_text(dump_xml(pages[l], l), encoding="utf-8")
        (out / "redirects" / f"{l}.tsv").write_text("".join(f"{a}\t{b}\n" for a, b in redirects[l]),
                                                    encoding="utf-8")
        (out / "disambiguation" / f"{l}.txt").write_text("".join(f"{i}\n" for i in disamb[l]), encoding="utf-8")
    cfg = default_config()
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    relaxed = {**cfg, "policy": "relaxed", "output": "out-relaxed"}
    (out / "config_relaxed.json").write_text(json.dumps(relaxed, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return {"root": out, "config": out / "config.json", "config_relaxed": out / "config_relaxed.json",
            "entities": out / "entities.json", **{f"pages.{l}": out / "pages" / f"{l}.xml" for l in LANGS}}


# ------------------------------------------------------------ damaged dumps


def perturb_page_dump(src: str | Path, dst: str | Path, word: str = PERTURB_WORD, ctrl: str = CTRL) -> int:
    """Insert a C1 control character inside every occurrence of ``word``; returns the count."""
    text = Path(src).read_text(encoding="utf-8")
    half = len(word) // 2
    new, n = re.subn(re.escape(word), word[:half] + ctrl + word[half:], text)
    Path(dst).parent.mkdir(parents=True, exist_ok=True)
    Path(dst).write_text(new, encoding="utf-8")
    return n


def truncate_dump(src: str | Path, dst: str | Path, fraction: float = 0.5) -> int:
    """Cut the dump at ``fraction`` of its bytes (mid-page); returns the cut offset."""
    data = Path(src).read_bytes()
    cut = int(len(data) * fraction)
    Path(dst).parent.mkdir(parents=True, exist_ok=True)
    Path(dst).write_bytes(data[:cut])
    return cut
