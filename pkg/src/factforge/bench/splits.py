"""Global hash splits over synset ids."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum


class Split(str, Enum):
    TRAIN = "Train"
    DEV = "Dev"
    TEST = "Test"


@dataclass(frozen=True)
class SplitAssignment:
    synset_id: str
    split: Split
    h: int


def split_hash(synset_id: str, build_id: str) -> int:
    d = hashlib.sha1((build_id + synset_id).encode("utf-8")).digest()
    return int.from_bytes(d[:4], "big")


def split_for_bucket(b: int) -> Split:
    if b < 80:
        return Split.TRAIN
    if b < 90:
        return Split.DEV
    return Split.TEST


def assign_split(synset_id: str, build_id: str) -> SplitAssignment:
    h = split_hash(synset_id, build_id)
    return SplitAssignment(synset_id, split_for_bucket(h % 100), h)


def assign_all(synset_ids, build_id: str) -> dict[str, Split]:
    return {sid: assign_split(sid, build_id).split for sid in synset_ids}
