"""Compiled per-stream feature extraction.

Same algorithm as :class:`linkanom.history.HistoryGraph`, but on
integer-coded nodes and pairs with array-backed sorted counters. The
window is always a contiguous range of the stream, so the queue is a
head index into the input arrays.

Counter state layout (one per DSC): ``names``, ``vals`` (dense sorted
array), ``pos`` (name -> index, -1 when absent), ``bstart``/``blen``
(value -> block), ``meta`` = [size, total].
"""

import numpy as np
from numba import njit

N_FEATURES = 30

# graph state: meta slots
HEAD, NEXT = 0, 1


@njit(cache=True, nogil=True)
def _inc(names, vals, pos, bstart, blen, meta, x):
    i = pos[x]
    meta[1] += 1
    if i < 0:
        n = meta[0]
        names[n] = x
        vals[n] = 1
        pos[x] = n
        if blen[1] == 0:
            bstart[1] = n
        blen[1] += 1
        meta[0] = n + 1
        return 1
    v = vals[i]
    head = bstart[v]
    y = names[head]
    names[head] = x
    names[i] = y
    pos[x] = head
    pos[y] = i
    vals[head] = v + 1
    bstart[v] = head + 1
    blen[v] -= 1
    if blen[v + 1] == 0:
        bstart[v + 1] = head
    blen[v + 1] += 1
    return v + 1


@njit(cache=True, nogil=True)
def _dec(names, vals, pos, bstart, blen, meta, x):
    i = pos[x]
    meta[1] -= 1
    v = vals[i]
    tail = bstart[v] + blen[v] - 1
    y = names[tail]
    names[tail] = x
    names[i] = y
    pos[y] = i
    blen[v] -= 1
    if v == 1:
        pos[x] = -1
        meta[0] -= 1
        return 0
    pos[x] = tail
    vals[tail] = v - 1
    bstart[v - 1] = tail
    blen[v - 1] += 1
    return v - 1


@njit(cache=True, nogil=True)
def _family(vals, bstart, blen, meta, out, row, col):
    size = meta[0]
    out[row, col] = blen[1]
    out[row, col + 1] = blen[2]
    if size > 0:
        out[row, col + 2] = vals[0]
        out[row, col + 3] = vals[size // 2]
    else:
        out[row, col + 2] = 0
        out[row, col + 3] = 0


@njit(cache=True, nogil=True)
def _gt(bstart, meta, v):
    if v == 0:
        return meta[0]
    return bstart[v]


@njit(cache=True, nogil=True)
def advance(
    ts, us, vs, ps, by_size, param, lo, hi, out, row0, graph_meta,
    dn, dv, dp, dbs, dbl, dm,
    wn, wv, wp, wbs, wbl, wm,
    ln, lv, lp, lbs, lbl, lm,
):
    """Process links ``lo..hi-1``; row ``k`` of ``out`` gets link ``lo + k - row0``."""
    for i in range(lo, hi):
        t = ts[i]
        u = us[i]
        v = vs[i]
        p = ps[i]
        if not by_size:
            head = graph_meta[HEAD]
            while head < i and t - ts[head] > param:
                q = ps[head]
                if _dec(ln, lv, lp, lbs, lbl, lm, q) == 0:
                    _dec(dn, dv, dp, dbs, dbl, dm, us[head])
                    _dec(dn, dv, dp, dbs, dbl, dm, vs[head])
                _dec(wn, wv, wp, wbs, wbl, wm, us[head])
                _dec(wn, wv, wp, wbs, wbl, wm, vs[head])
                head += 1
            graph_meta[HEAD] = head

        r = row0 + i - lo
        # graph family
        out[r, 0] = dm[0]
        out[r, 1] = lm[0]
        out[r, 2] = lm[1]
        _family(dv, dbs, dbl, dm, out, r, 3)
        _family(wv, wbs, wbl, wm, out, r, 7)
        _family(lv, lbs, lbl, lm, out, r, 11)

        # link family, endpoints ordered by (degree, weighted degree, code)
        a = u
        b = v
        da = dv[dp[a]] if dp[a] >= 0 else 0
        db = dv[dp[b]] if dp[b] >= 0 else 0
        wa = wv[wp[a]] if wp[a] >= 0 else 0
        wb = wv[wp[b]] if wp[b] >= 0 else 0
        if da > db or (da == db and (wa > wb or (wa == wb and a > b))):
            a, b = b, a
            da, db = db, da
            wa, wb = wb, wa
        out[r, 15] = da
        out[r, 16] = db
        out[r, 17] = dbl[da] if da > 0 else 0
        out[r, 18] = dbl[db] if db > 0 else 0
        out[r, 19] = _gt(dbs, dm, da)
        out[r, 20] = _gt(dbs, dm, db)
        out[r, 21] = wa
        out[r, 22] = wb
        out[r, 23] = wbl[wa] if wa > 0 else 0
        out[r, 24] = wbl[wb] if wb > 0 else 0
        out[r, 25] = _gt(wbs, wm, wa)
        out[r, 26] = _gt(wbs, wm, wb)
        w = lv[lp[p]] if lp[p] >= 0 else 0
        out[r, 27] = w
        out[r, 28] = lbl[w] if w > 0 else 0
        out[r, 29] = _gt(lbs, lm, w)

        # insert the current occurrence
        if _inc(ln, lv, lp, lbs, lbl, lm, p) == 1:
            _inc(dn, dv, dp, dbs, dbl, dm, u)
            _inc(dn, dv, dp, dbs, dbl, dm, v)
        _inc(wn, wv, wp, wbs, wbl, wm, u)
        _inc(wn, wv, wp, wbs, wbl, wm, v)

        if by_size and i + 1 - graph_meta[HEAD] > param:
            head = graph_meta[HEAD]
            q = ps[head]
            if _dec(ln, lv, lp, lbs, lbl, lm, q) == 0:
                _dec(dn, dv, dp, dbs, dbl, dm, us[head])
                _dec(dn, dv, dp, dbs, dbl, dm, vs[head])
            _dec(wn, wv, wp, wbs, wbl, wm, us[head])
            _dec(wn, wv, wp, wbs, wbl, wm, vs[head])
            graph_meta[HEAD] = head + 1
        graph_meta[NEXT] = i + 1


def new_counters(n_names, max_value):
    """Fresh array-backed DSC state for ``n_names`` names and values up to ``max_value``."""
    return (
        np.zeros(n_names, dtype=np.int64),
        np.zeros(n_names, dtype=np.int64),
        np.full(n_names, -1, dtype=np.int64),
        np.zeros(max_value + 2, dtype=np.int64),
        np.zeros(max_value + 2, dtype=np.int64),
        np.zeros(2, dtype=np.int64),
    )
