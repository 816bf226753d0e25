"""Batch kernels with a numba path and a pure-numpy fallback.

Set FACTFORGE_NUMBA=0 to force the numpy implementations.  Both paths must
return identical results; the test suite checks this.
"""
from __future__ import annotations

import os

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def _want_numba() -> bool:
    if os.environ.get("FACTFORGE_NUMBA", "1").strip().lower() in ("0", "false", "no", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_NUMBA = _want_numba()


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    """Reference scalar FNV-1a 64."""
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def pack_strings(items: list[str]) -> tuple[np.ndarray, np.ndarray]:
    enc = [s.encode("utf-8") for s in items]
    offsets = np.zeros(len(enc) + 1, dtype=np.int64)
    if enc:
        offsets[1:] = np.cumsum([len(e) for e in enc])
    buf = np.frombuffer(b"".join(enc), dtype=np.uint8) if enc else np.zeros(0, dtype=np.uint8)
    return buf, offsets


def _fnv_batch_numpy(buf: np.ndarray, offsets: np.ndarray, h0: int) -> np.ndarray:
    n = len(offsets) - 1
    h = np.full(n, h0, dtype=np.uint64)
    if n == 0:
        return h
    starts = offsets[:-1]
    lengths = offsets[1:] - starts
    prime = np.uint64(FNV_PRIME)
    for j in range(int(lengths.max()) if n else 0):
        active = np.nonzero(lengths > j)[0]
        byte = buf[starts[active] + j].astype(np.uint64)
        h[active] = (h[active] ^ byte) * prime
    return h


def _filtered_ranks_numpy(scores: np.ndarray, targets: np.ndarray, filtered: np.ndarray) -> np.ndarray:
    """1 + number of unfiltered candidates ranked strictly ahead of the target.

    Ties go to the lower candidate index, which callers order by numeric id.
    """
    rows = np.arange(len(targets))
    st = scores[rows, targets][:, None]
    idx = np.arange(scores.shape[1])[None, :]
    ahead = (scores > st) | ((scores == st) & (idx < targets[:, None]))
    ahead &= ~filtered
    ahead[rows, targets] = False
    return 1 + ahead.sum(axis=1).astype(np.int64)


if HAVE_NUMBA:
    from numba import njit

    @njit(cache=False)
    def _fnv_batch_numba(buf, offsets, h0):
        n = offsets.shape[0] - 1
        out = np.empty(n, dtype=np.uint64)
        prime = np.uint64(FNV_PRIME)
        for i in range(n):
            h = np.uint64(h0)
            for j in range(offsets[i], offsets[i + 1]):
                h = (h ^ np.uint64(buf[j])) * prime
            out[i] = h
        return out

    @njit(cache=False)
    def _filtered_ranks_numba(scores, targets, filtered):
        q, n = scores.shape
        out = np.empty(q, dtype=np.int64)
        for i in range(q):
            t = targets[i]
            st = scores[i, t]
            r = 1
            for e in range(n):
                if e == t or filtered[i, e]:
                    continue
                s = scores[i, e]
                if s > st or (s == st and e < t):
                    r += 1
            out[i] = r
        return out


def fnv_batch(buf: np.ndarray, offsets: np.ndarray, h0: int = FNV_OFFSET, use_numba: bool | None = None) -> np.ndarray:
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _fnv_batch_numba(buf, offsets, np.uint64(h0))
    return _fnv_batch_numpy(buf, offsets, h0)


def filtered_ranks(scores: np.ndarray, targets: np.ndarray, filtered: np.ndarray,
                   use_numba: bool | None = None) -> np.ndarray:
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    filtered = np.ascontiguousarray(filtered, dtype=np.bool_)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _filtered_ranks_numba(scores, targets, filtered)
    return _filtered_ranks_numpy(scores, targets, filtered)
