"""Coincidence and dead-time kernels with a numba path and a numpy path.

Set ``TBQT_NO_NUMBA=1`` to force the numpy implementations, which give
identical integer results. The flag is read at import time.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("TBQT_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by TBQT_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ------------------------------------------------------------------ numpy


def dead_time_mask_numpy(ts: np.ndarray, dead: int) -> np.ndarray:
    """Keep events at least ``dead`` after the previous kept event.

    Events far from their predecessor are always kept, so only clustered
    events need the sequential scan.
    """
    n = ts.size
    keep = np.ones(n, dtype=bool)
    if n < 2 or dead <= 0:
        return keep
    close = np.flatnonzero(np.diff(ts) < dead) + 1
    last = ts[0]
    prev = -2
    for i in close:
        if i - 1 != prev:
            # predecessor was not close to its own predecessor, hence kept
            last = ts[i - 1]
        elif keep[i - 1]:
            last = ts[i - 1]
        if ts[i] - last < dead:
            keep[i] = False
        else:
            last = ts[i]
        prev = i
    return keep


def pair_count_numpy(a: np.ndarray, b: np.ndarray, offset: int, half: int) -> int:
    lo = np.searchsorted(b, a + (offset - half), side="left")
    hi = np.searchsorted(b, a + (offset + half), side="right")
    return int(np.sum(hi - lo))


def triple_count_numpy(a, b, c, off_b, off_c, half) -> int:
    nb = np.searchsorted(b, a + (off_b + half), side="right") - np.searchsorted(b, a + (off_b - half), side="left")
    nc = np.searchsorted(c, a + (off_c + half), side="right") - np.searchsorted(c, a + (off_c - half), side="left")
    return int(np.sum(nb.astype(np.int64) * nc))


# ------------------------------------------------------------------ numba

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _dead_time_mask_nb(ts, dead):
        n = ts.size
        keep = np.ones(n, dtype=np.bool_)
        if n == 0:
            return keep
        last = ts[0]
        for i in range(1, n):
            if ts[i] - last < dead:
                keep[i] = False
            else:
                last = ts[i]
        return keep

    @njit(cache=True, nogil=True)
    def _pair_count_nb(a, b, offset, half):
        nb = b.size
        lo = 0
        hi = 0
        total = 0
        for k in range(a.size):
            low = a[k] + offset - half
            high = a[k] + offset + half
            while lo < nb and b[lo] < low:
                lo += 1
            if hi < lo:
                hi = lo
            while hi < nb and b[hi] <= high:
                hi += 1
            total += hi - lo
        return total

    @njit(cache=True, nogil=True)
    def _triple_count_nb(a, b, c, off_b, off_c, half):
        blo = 0
        bhi = 0
        clo = 0
        chi = 0
        total = 0
        for k in range(a.size):
            t = a[k]
            while blo < b.size and b[blo] < t + off_b - half:
                blo += 1
            if bhi < blo:
                bhi = blo
            while bhi < b.size and b[bhi] <= t + off_b + half:
                bhi += 1
            while clo < c.size and c[clo] < t + off_c - half:
                clo += 1
            if chi < clo:
                chi = clo
            while chi < c.size and c[chi] <= t + off_c + half:
                chi += 1
            total += (bhi - blo) * (chi - clo)
        return total


def _i64(x):
    return np.ascontiguousarray(x, dtype=np.int64)


def dead_time_mask(ts, dead: int, use_numba=None) -> np.ndarray:
    ts = _i64(ts)
    if _pick(use_numba):
        return _dead_time_mask_nb(ts, np.int64(dead))
    return dead_time_mask_numpy(ts, int(dead))


def pair_count(a, b, offset: int, half: int, use_numba=None) -> int:
    """Pairs ``(i, j)`` with ``|b[j] - a[i] - offset| <= half``; both inputs sorted."""
    a, b = _i64(a), _i64(b)
    if _pick(use_numba):
        return int(_pair_count_nb(a, b, np.int64(offset), np.int64(half)))
    return pair_count_numpy(a, b, int(offset), int(half))


def triple_count(a, b, c, off_b: int, off_c: int, half: int, use_numba=None) -> int:
    """Triples anchored at each ``a`` event: ``sum_i n_b(i) n_c(i)``."""
    a, b, c = _i64(a), _i64(b), _i64(c)
    if _pick(use_numba):
        return int(_triple_count_nb(a, b, c, np.int64(off_b), np.int64(off_c), np.int64(half)))
    return triple_count_numpy(a, b, c, int(off_b), int(off_c), int(half))


def _pick(use_numba):
    if use_numba is None:
        return HAVE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba path requested but numba is unavailable or disabled")
    return bool(use_numba)


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
