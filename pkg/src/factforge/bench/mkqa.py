"""Logical-form grammar, executor and scorer for multi-hop KGQA."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from ..model import Rank, ValueKind, is_qid, qid_sort_key
from ..policy import parse_wikidata_time

MAX_ANSWERS = 200
TYPE_PROPERTY = "P31"

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_QID = re.compile(r"Q[0-9]+\Z")
_PID = re.compile(r"P[0-9]+\Z")
_INT = re.compile(r"-?[0-9]+\Z")


@dataclass(frozen=True)
class Constraint:
    kind: str  # type | year | limit
    arg: Union[str, int]

    def surface(self) -> str:
        return f"({self.kind} {self.arg})"


@dataclass(frozen=True)
class LogicalForm:
    op: str  # hop1 | hop2 | hop2c
    subject: str
    path: tuple[str, ...]
    constraint: Constraint | None = None

    def surface(self) -> str:
        parts = [self.op, self.subject, *self.path]
        if self.constraint is not None:
            parts.append(self.constraint.surface())
        return "(" + " ".join(parts) + ")"


class _Invalid:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INVALID"

    def __bool__(self):
        return False


class _Overflow(_Invalid):
    _inst = None

    def __repr__(self):
        return "OVERFLOW"


INVALID = _Invalid()
OVERFLOW = _Overflow()


def _tokens(text: str) -> list[str] | None:
    pos = 0
    out = []
    for m in _TOKEN_RE.finditer(text):
        if text[pos:m.start()].strip():
            return None
        out.append(m.group())
        pos = m.end()
    if text[pos:].strip():
        return None
    return out


def _constraint(toks: list[str]) -> Constraint | None:
    if len(toks) != 4 or toks[0] != "(" or toks[3] != ")":
        return None
    kind, arg = toks[1], toks[2]
    if kind == "type" and _QID.match(arg):
        return Constraint("type", arg)
    if kind == "year" and _INT.match(arg):
        return Constraint("year", int(arg))
    if kind == "limit" and _INT.match(arg) and int(arg) >= 1:
        return Constraint("limit", int(arg))
    return None


def parse_lf(text) -> LogicalForm | _Invalid:
    """Strict parse; anything outside the grammar is INVALID."""
    if not isinstance(text, str):
        return INVALID
    toks = _tokens(text)
    if not toks or len(toks) < 5 or toks[0] != "(" or toks[-1] != ")":
        return INVALID
    op, body = toks[1], toks[2:-1]
    if op == "hop1" and len(body) == 2:
        s, p = body
        if _QID.match(s) and _PID.match(p):
            return LogicalForm("hop1", s, (p,))
    elif op == "hop2" and len(body) == 3:
        s, p1, p2 = body
        if _QID.match(s) and _PID.match(p1) and _PID.match(p2):
            return LogicalForm("hop2", s, (p1, p2))
    elif op == "hop2c" and len(body) == 7:
        s, p1, p2 = body[:3]
        c = _constraint(body[3:])
        if c is not None and _QID.match(s) and _PID.match(p1) and _PID.match(p2):
            return LogicalForm("hop2c", s, (p1, p2), c)
    return INVALID


def answer_sort_key(a: str):
    return (0, qid_sort_key(a), "") if is_qid(a) else (1, (0,), a)


class KGraph:
    """Snapshot view for execution: (subject, property) -> answer set.

    Entity answers are QIDs; literal answers are normalized values.
    """

    def __init__(self):
        self.out: dict[tuple[str, str], set[str]] = {}
        self.years: dict[str, int] = {}
        self.props: dict[str, set[str]] = {}

    def add(self, s: str, p: str, answer: str, year: int | None = None) -> None:
        self.out.setdefault((s, p), set()).add(answer)
        self.props.setdefault(s, set()).add(p)
        if year is not None:
            self.years[answer] = year

    def values(self, s: str, p: str) -> set[str]:
        return self.out.get((s, p), set())

    def types(self, e: str) -> set[str]:
        return self.values(e, TYPE_PROPERTY)

    @property
    def subjects(self) -> list[str]:
        return sorted({s for s, _ in self.out}, key=qid_sort_key)

    @classmethod
    def from_synsets(cls, synsets: Iterable) -> "KGraph":
        g = cls()
        for y in synsets:
            if y.canonical_rank is Rank.DEPRECATED:
                continue
            v = y.value
            if v.kind is ValueKind.ENTITY and is_qid(v.entity):
                g.add(y.subject, y.property, v.entity)
            elif v.kind in (ValueKind.NOVALUE, ValueKind.SOMEVALUE):
                continue
            elif v.kind is ValueKind.TIME:
                g.add(y.subject, y.property, y.norm_value, parse_wikidata_time(v.time)[0])
            else:
                g.add(y.subject, y.property, y.norm_value)
        return g


def execute_lf(lf: LogicalForm, g: KGraph) -> frozenset[str] | _Overflow:
    cur = g.values(lf.subject, lf.path[0])
    if lf.op != "hop1":
        mids = sorted(a for a in cur if is_qid(a))  # set semantics: each binding once
        nxt: set[str] = set()
        for e in mids:
            nxt |= g.values(e, lf.path[1])
        cur = nxt
    c = lf.constraint
    if c is not None:
        if c.kind == "type":
            cur = {a for a in cur if is_qid(a) and c.arg in g.types(a)}
        elif c.kind == "year":
            cur = {a for a in cur if g.years.get(a) == c.arg}
        elif c.kind == "limit":
            cur = set(sorted(cur, key=answer_sort_key)[: c.arg])
    if len(cur) > MAX_ANSWERS:
        return OVERFLOW
    return frozenset(cur)


def set_f1(pred: Iterable[str], gold: Iterable[str]) -> float:
    p, g = set(pred), set(gold)
    if not g:
        return 1.0 if not p else 0.0
    if not p:
        return 0.0
    tp = len(p & g)
    if tp == 0:
        return 0.0
    prec, rec = tp / len(p), tp / len(g)
    return 2 * prec * rec / (prec + rec)


def score_mkqa(predicted: str, gold: Iterable[str], g: KGraph) -> tuple[float, bool]:
    """Instance F1 and validity of a predicted logical-form string."""
    lf = parse_lf(predicted)
    if lf is INVALID:
        return 0.0, False
    try:
        ans = execute_lf(lf, g)
    except Exception:  # runtime errors score zero like parse failures
        return 0.0, False
    if ans is OVERFLOW:
        return 0.0, False
    return set_f1(ans, gold), True


@dataclass
class MkqaReport:
    macro_f1: float
    valid_pct: float
    n: int


def evaluate_mkqa(predictions: dict[str, str], instances: list[dict], g: KGraph) -> MkqaReport:
    """``predictions`` maps instance id -> LF string; missing predictions count as invalid."""
    if not instances:
        return MkqaReport(0.0, 0.0, 0)
    f1s, valid = [], 0
    for inst in instances:
        f1, ok = score_mkqa(predictions.get(inst["id"], ""), inst["answers"], g)
        f1s.append(f1)
        valid += ok
    n = len(instances)
    return MkqaReport(sum(f1s) / n, 100.0 * valid / n, n)


def enumerate_forms(g: KGraph, subjects: Iterable[str] | None = None, years: Iterable[int] = (),
                    limits: Iterable[int] = (1,), types: Iterable[str] | None = None) -> list[LogicalForm]:
    """Every grammar form whose subject and properties occur in ``g``."""
    props = sorted({p for _, p in g.out})
    subs = list(subjects) if subjects is not None else g.subjects
    if types is None:
        types = sorted({t for e in g.subjects for t in g.types(e)}, key=qid_sort_key)
    cons = ([Constraint("type", t) for t in types] + [Constraint("year", y) for y in years]
            + [Constraint("limit", k) for k in limits])
    out = []
    for s in subs:
        for p1 in props:
            out.append(LogicalForm("hop1", s, (p1,)))
            for p2 in props:
                out.append(LogicalForm("hop2", s, (p1, p2)))
                for c in cons:
                    out.append(LogicalForm("hop2c", s, (p1, p2), c))
    return out


def generate_mkqa(g: KGraph, labels: dict[str, dict[str, str]], property_labels: dict[str, str],
                  patterns: dict[str, str], language: str, subject_split: dict[str, str]) -> list[dict]:
    """Question/LF instances for hop1 and hop2 paths with bounded nonempty answers.

    ``labels`` maps QID -> {language: label}; ``subject_split`` gives the
    split the instance inherits (the split of its first-hop synset).
    """
    out = []
    for (s, p1), first in sorted(g.out.items(), key=lambda kv: (qid_sort_key(kv[0][0]), kv[0][1])):
        name = labels.get(s, {}).get(language)
        if not name or p1 not in property_labels:
            continue
        split = subject_split.get(f"{s}|{p1}")
        if split is None:
            continue
        forms = [LogicalForm("hop1", s, (p1,))]
        mids = sorted((a for a in first if is_qid(a)), key=qid_sort_key)
        p2s = sorted({p for m in mids for p in g.props.get(m, ())})
        forms += [LogicalForm("hop2", s, (p1, p2)) for p2 in p2s if p2 in property_labels]
        for lf in forms:
            ans = execute_lf(lf, g)
            if ans is OVERFLOW or not ans:
                continue
            key = "hop1" if lf.op == "hop1" else "hop2"
            q = patterns[key].format(subject=name, property=property_labels[lf.path[0]],
                                     property2=property_labels.get(lf.path[-1], ""))
            out.append({"id": f"{language}:{lf.surface()}", "language": language, "question": q,
                        "lf": lf.surface(), "answers": sorted(ans, key=answer_sort_key), "split": split})
    return out
