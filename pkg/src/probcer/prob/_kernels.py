"""Dense numeric kernels for history enumeration.

Each kernel has an ``@njit`` body and a vectorized numpy twin. Setting
``PROBCER_NO_NUMBA=1`` (or lacking numba) selects the numpy path. Both
paths perform the same floating point operations in the same order, so
their results agree bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - import guard
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PROBCER_NO_NUMBA", "0") not in ("1", "true", "yes")


# -- numpy reference implementations ------------------------------------------------

def _weights_np(radix, probs, rel_stride):
    """Independent-model history weights and projection index per history.

    ``radix[i]`` is the number of choices of event i (alternatives + 1),
    ``probs[i, c]`` the probability of choice c (last slot: non-occurrence),
    ``rel_stride[i]`` the event's stride in the projected index (0 if the
    event is irrelevant). Event 0 is the least significant digit.
    """
    n = int(np.prod(radix)) if len(radix) else 1
    h = np.arange(n, dtype=np.int64)
    w = np.ones(n, dtype=np.float64)
    proj = np.zeros(n, dtype=np.int64)
    for i in range(len(radix)):
        digit = h % radix[i]
        h = h // radix[i]
        w = w * probs[i, digit]
        proj += digit * rel_stride[i]
    return w, proj


def _markov_weights_np(radix, probs, rel_stride, type_idx, cpt):
    """Chain-factored weights.

    For event i, the latest occurring earlier event whose type has a CPT
    entry towards ``type_idx[i]`` fixes the occurrence mass of i to that
    entry (spread over alternatives in proportion to their marginals).
    Without such a predecessor the marginals apply.
    """
    n = int(np.prod(radix)) if len(radix) else 1
    n_types = cpt.shape[0]
    h = np.arange(n, dtype=np.int64)
    w = np.ones(n, dtype=np.float64)
    proj = np.zeros(n, dtype=np.int64)
    last = np.full((n, n_types), -1, dtype=np.int64)
    for i in range(len(radix)):
        k = radix[i] - 1
        t = type_idx[i]
        digit = h % radix[i]
        h = h // radix[i]
        occ = digit < k
        marg = probs[i, digit]
        total = 1.0 - probs[i, k]
        col = cpt[:, t]
        declared = ~np.isnan(col)
        best = np.full(n, -1, dtype=np.int64)
        entry = np.full(n, np.nan)
        for q in range(n_types):
            if declared[q]:
                newer = last[:, q] > best
                best = np.where(newer, last[:, q], best)
                entry = np.where(newer, col[q], entry)
        has = best >= 0
        if total > 0:
            cond = np.where(occ, entry * (marg / total), 1.0 - entry)
        else:
            cond = np.where(occ, 0.0, 1.0 - entry)
        w = w * np.where(has, cond, marg)
        last[:, t] = np.where(occ, i, last[:, t])
        proj += digit * rel_stride[i]
    return w, proj


def _pairwise_np(x):
    buf = np.array(x, dtype=np.float64, copy=True)
    n = buf.shape[0]
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        paired = buf[0:2 * half:2] + buf[1:2 * half:2]
        if n % 2:
            tail = buf[n - 1]
            buf[:half] = paired
            buf[half] = tail
            n = half + 1
        else:
            buf[:half] = paired
            n = half
    return float(buf[0])


# -- numba twins ----------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _weights_nb(radix, probs, rel_stride):
        n = 1
        for r in radix:
            n *= r
        w = np.ones(n, dtype=np.float64)
        proj = np.zeros(n, dtype=np.int64)
        for hh in range(n):
            h = hh
            acc = 1.0
            p = 0
            for i in range(radix.shape[0]):
                d = h % radix[i]
                h //= radix[i]
                acc = acc * probs[i, d]
                p += d * rel_stride[i]
            w[hh] = acc
            proj[hh] = p
        return w, proj

    @njit(cache=True)
    def _markov_weights_nb(radix, probs, rel_stride, type_idx, cpt):
        n = 1
        for r in radix:
            n *= r
        n_types = cpt.shape[0]
        w = np.ones(n, dtype=np.float64)
        proj = np.zeros(n, dtype=np.int64)
        last = np.empty(n_types, dtype=np.int64)
        for hh in range(n):
            h = hh
            acc = 1.0
            p = 0
            last[:] = -1
            for i in range(radix.shape[0]):
                k = radix[i] - 1
                t = type_idx[i]
                d = h % radix[i]
                h //= radix[i]
                marg = probs[i, d]
                total = 1.0 - probs[i, k]
                best = -1
                entry = np.nan
                for q in range(n_types):
                    if not np.isnan(cpt[q, t]) and last[q] > best:
                        best = last[q]
                        entry = cpt[q, t]
                if best < 0:
                    f = marg
                elif d < k:
                    f = entry * (marg / total) if total > 0 else 0.0
                else:
                    f = 1.0 - entry
                acc = acc * f
                if d < k:
                    last[t] = i
                p += d * rel_stride[i]
            w[hh] = acc
            proj[hh] = p
        return w, proj

    @njit(cache=True)
    def _pairwise_nb(x):
        n = x.shape[0]
        if n == 0:
            return 0.0
        buf = x.copy()
        while n > 1:
            half = n // 2
            for i in range(half):
                buf[i] = buf[2 * i] + buf[2 * i + 1]
            if n % 2:
                buf[half] = buf[n - 1]
                n = half + 1
            else:
                n = half
        return buf[0]


def history_weights(radix, probs, rel_stride, *, numba: bool | None = None):
    use = USE_NUMBA if numba is None else (numba and HAVE_NUMBA)
    args = (np.asarray(radix, np.int64), np.asarray(probs, np.float64), np.asarray(rel_stride, np.int64))
    return _weights_nb(*args) if use else _weights_np(*args)


def markov_history_weights(radix, probs, rel_stride, type_idx, cpt, *, numba: bool | None = None):
    use = USE_NUMBA if numba is None else (numba and HAVE_NUMBA)
    args = (np.asarray(radix, np.int64), np.asarray(probs, np.float64), np.asarray(rel_stride, np.int64),
            np.asarray(type_idx, np.int64), np.asarray(cpt, np.float64))
    return _markov_weights_nb(*args) if use else _markov_weights_np(*args)


def pairwise_sum(x, *, numba: bool | None = None) -> float:
    """Sum with a fixed pairwise tree, independent of hardware or path."""
    use = USE_NUMBA if numba is None else (numba and HAVE_NUMBA)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return float(_pairwise_nb(x)) if use else _pairwise_np(x)
