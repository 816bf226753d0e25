"""Leakage-controlled KGC projection and the filtered ranking evaluator."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .. import _kernels
from ..model import Rank, ValueKind, is_qid, qid_sort_key
from .splits import Split

Triple = tuple[str, str, str]


@dataclass
class KgcProjection:
    train: list[Triple]
    dev: list[Triple]
    test: list[Triple]
    vocab: list[str]
    # keys whose contributors straddled splits: (key, resolution) with resolution Train or None
    collisions: list[tuple[Triple, str | None]] = field(default_factory=list)

    @property
    def all_true(self) -> list[Triple]:
        return sorted(set(self.train) | set(self.dev) | set(self.test), key=triple_sort_key)

    def by_split(self) -> dict[str, list[Triple]]:
        return {"train": self.train, "dev": self.dev, "test": self.test}


def triple_sort_key(t: Triple):
    return (qid_sort_key(t[0]), t[1], qid_sort_key(t[2]))


def _eligible(y) -> bool:
    return (y.value.kind is ValueKind.ENTITY and is_qid(y.value.entity)
            and y.canonical_rank is not Rank.DEPRECATED)


def project_kgc(synsets: Iterable, splits: dict[str, Split], vocab_size: int = 320) -> KgcProjection:
    rows = [y for y in synsets if _eligible(y)]
    freq = Counter(y.property for y in rows if splits[y.synset_id] is Split.TRAIN)
    vocab = sorted(freq, key=lambda p: (-freq[p], p))[:vocab_size]
    keep = set(vocab)
    contributors: dict[Triple, set[Split]] = {}
    for y in rows:
        if y.property not in keep:
            continue
        key = (y.subject, y.property, y.value.entity)
        contributors.setdefault(key, set()).add(splits[y.synset_id])
    out: dict[Split, list[Triple]] = {Split.TRAIN: [], Split.DEV: [], Split.TEST: []}
    collisions = []
    for key in sorted(contributors, key=triple_sort_key):
        ss = contributors[key]
        if len(ss) == 1:
            out[next(iter(ss))].append(key)
        elif Split.TRAIN in ss:
            out[Split.TRAIN].append(key)
            collisions.append((key, Split.TRAIN.value))
        else:
            collisions.append((key, None))
    return KgcProjection(out[Split.TRAIN], out[Split.DEV], out[Split.TEST], sorted(vocab), collisions)


def write_tsv(path: str | Path, triples: Iterable[Triple]) -> bytes:
    data = "".join(f"{s}\t{p}\t{o}\n" for s, p, o in sorted(triples, key=triple_sort_key)).encode("utf-8")
    Path(path).write_bytes(data)
    return data


def read_tsv(path: str | Path) -> list[Triple]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            s, p, o = line.split("\t")
            out.append((s, p, o))
    return out


@dataclass
class RankMetrics:
    mrr: float
    hits10: float
    n: int
    ranks: list[int]
    mrr_exact: Fraction = Fraction(0)
    hits10_exact: Fraction = Fraction(0)


Scorer = Callable[[str, str, str], float]


def _metrics(ranks: list[int]) -> RankMetrics:
    if not ranks:
        return RankMetrics(0.0, 0.0, 0, [])
    n = len(ranks)
    mrr = sum((Fraction(1, r) for r in ranks), Fraction(0)) / n
    hits = Fraction(sum(1 for r in ranks if r <= 10), n)
    return RankMetrics(float(mrr), float(hits), n, ranks, mrr, hits)


def filtered_rank(scorer: Scorer, test: Iterable[Triple], all_true: Iterable[Triple],
                  entities: Iterable[str] | None = None, use_numba: bool | None = None) -> RankMetrics:
    """Filtered link-prediction ranks in both directions.

    Candidates are ordered by score, ties broken by entity id.  Any
    candidate forming a known-true triple (other than the target) is
    removed before ranking.
    """
    test = list(test)
    true = set(all_true)
    if entities is None:
        entities = {e for s, _, o in true | set(test) for e in (s, o)}
    ents = sorted(set(entities), key=qid_sort_key)
    pos = {e: i for i, e in enumerate(ents)}
    n = len(ents)
    q = 2 * len(test)
    if q == 0:
        return _metrics([])
    scores = np.empty((q, n), dtype=np.float64)
    filt = np.zeros((q, n), dtype=np.bool_)
    targets = np.empty(q, dtype=np.int64)
    for i, (s, p, o) in enumerate(test):
        tail, head = 2 * i, 2 * i + 1
        for j, e in enumerate(ents):
            scores[tail, j] = scorer(s, p, e)
            scores[head, j] = scorer(e, p, o)
            filt[tail, j] = (s, p, e) in true
            filt[head, j] = (e, p, o) in true
        targets[tail] = pos[o]
        targets[head] = pos[s]
    ranks = _kernels.filtered_ranks(scores, targets, filt, use_numba)
    return _metrics([int(r) for r in ranks])
