"""Brute-force reference implementations used as test oracles."""

from bisect import bisect_left, bisect_right
from collections import Counter

import numpy as np

from linkanom.history import Kind


def window_links(links, i, config):
    """Links preceding link ``i`` that belong to its history graph, by definition."""
    t_i = links[i].t
    if config.kind is Kind.BY_SIZE:
        return links[max(0, i - config.parameter):i]
    return [links[j] for j in range(i) if t_i - links[j].t <= config.parameter]


def features_from_links(window, u, v):
    return features_from_weights(Counter(tuple(sorted((x.u, x.v))) for x in window), u, v)


def features_from_weights(weight, u, v):
    """All 30 features from a pair -> occurrence-count map, by direct recounting."""
    neighbours = {}
    wdeg = Counter()
    for (a, b), w in weight.items():
        neighbours.setdefault(a, set()).add(b)
        neighbours.setdefault(b, set()).add(a)
        wdeg[a] += w
        wdeg[b] += w
    deg = {x: len(ns) for x, ns in neighbours.items()}

    def family(values):
        vals = sorted(values, reverse=True)
        freq = Counter(vals)
        return [freq[1], freq[2], vals[0] if vals else 0, vals[len(vals) // 2] if vals else 0]

    def counts(values, x):
        ordered = sorted(values)
        equal = 0 if x == 0 else bisect_right(ordered, x) - bisect_left(ordered, x)
        return equal, len(ordered) - bisect_right(ordered, x)

    row = [len(deg), len(weight), sum(weight.values())]
    row += family(deg.values()) + family(wdeg.values()) + family(weight.values())
    ends = sorted([u, v], key=lambda x: (deg.get(x, 0), wdeg.get(x, 0), x))
    d = [deg.get(x, 0) for x in ends]
    wd = [wdeg.get(x, 0) for x in ends]
    w = weight.get(tuple(sorted((u, v))), 0)
    (d0c, d0g), (d1c, d1g) = counts(deg.values(), d[0]), counts(deg.values(), d[1])
    (w0c, w0g), (w1c, w1g) = counts(wdeg.values(), wd[0]), counts(wdeg.values(), wd[1])
    lc, lg = counts(weight.values(), w)
    row += [d[0], d[1], d0c, d1c, d0g, d1g]
    row += [wd[0], wd[1], w0c, w1c, w0g, w1g]
    row += [w, lc, lg]
    return tuple(row)


def naive_features(links, config):
    """Rebuild every graph from scratch; G windows located by bisection on sorted times."""
    times = [link.t for link in links]
    keys = [(x.u, x.v) if x.u < x.v else (x.v, x.u) for x in links]
    rows = []
    for i, link in enumerate(links):
        if config.kind is Kind.BY_SIZE:
            lo = max(0, i - config.parameter)
        else:
            lo = bisect_left(times, link.t - config.parameter, 0, i)
        rows.append(features_from_weights(Counter(keys[lo:i]), link.u, link.v))
    return rows


def brute_force_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def naive_features_np(links, config):
    """Same rebuild-per-link oracle, vectorised with numpy over the raw window."""

    index = {}
    for x in links:
        index.setdefault(x.u, len(index))
        index.setdefault(x.v, len(index))
    n = len(index)
    a = np.array([index[x.u] for x in links])
    b = np.array([index[x.v] for x in links])
    codes = np.minimum(a, b) * n + np.maximum(a, b)
    times = [x.t for x in links]

    def family(vals):
        if len(vals) == 0:
            return [0, 0, 0, 0]
        desc = np.sort(vals)[::-1]
        return [int(np.sum(vals == 1)), int(np.sum(vals == 2)), int(desc[0]), int(desc[len(desc) // 2])]

    def eq_gt(vals, x):
        return (0 if x == 0 else int(np.sum(vals == x))), int(np.sum(vals > x))

    rows = []
    for i, link in enumerate(links):
        if config.kind is Kind.BY_SIZE:
            lo = max(0, i - config.parameter)
        else:
            lo = bisect_left(times, link.t - config.parameter, 0, i)
        pairs, weight = np.unique(codes[lo:i], return_counts=True)
        pa, pb = pairs // n, pairs % n
        deg = np.bincount(pa, minlength=n) + np.bincount(pb, minlength=n)
        wdeg = np.bincount(pa, weights=weight, minlength=n) + np.bincount(pb, weights=weight, minlength=n)
        wdeg = wdeg.astype(np.int64)
        live = deg > 0
        dvals, wvals = deg[live], wdeg[live]
        row = [int(live.sum()), len(pairs), int(weight.sum())]
        row += family(dvals) + family(wvals) + family(weight)
        iu, iv = index[link.u], index[link.v]
        ends = sorted([(int(deg[iu]), int(wdeg[iu]), link.u), (int(deg[iv]), int(wdeg[iv]), link.v)])
        (d0, w0, _), (d1, w1, _) = ends
        hit = np.flatnonzero(pairs == min(iu, iv) * n + max(iu, iv))
        w = int(weight[hit[0]]) if len(hit) else 0
        (d0c, d0g), (d1c, d1g) = eq_gt(dvals, d0), eq_gt(dvals, d1)
        (w0c, w0g), (w1c, w1g) = eq_gt(wvals, w0), eq_gt(wvals, w1)
        row += [d0, d1, d0c, d1c, d0g, d1g, w0, w1, w0c, w1c, w0g, w1g, w, *eq_gt(weight, w)]
        rows.append(tuple(row))
    return rows
