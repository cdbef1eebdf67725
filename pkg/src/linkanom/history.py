"""History graphs over a link stream and their per-link features.

Each incoming link ``(t, u, v)`` is described by 30 integer features of a
weighted undirected graph built from the links that precede it: either
those within a duration ``d`` (``G`` graphs) or the last ``s`` links
(``H`` graphs). The incoming link itself is never part of the graph it
is measured against.

Two implementations share the same semantics. :class:`HistoryGraph`
handles one link at a time with named counters; :func:`extract_features`
runs a compiled kernel over a whole encoded stream and is what the
pipeline uses.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .dsc import DSC

GRAPH_FEATURES = (
    "n", "m", "mu",
    "deg1_count", "deg2_count", "deg_max", "deg_median",
    "wdeg1_count", "wdeg2_count", "wdeg_max", "wdeg_median",
    "w1_count", "w2_count", "w_max", "w_median",
)
LINK_FEATURES = (
    "u_deg", "v_deg", "u_deg_count", "v_deg_count", "u_deg_gt", "v_deg_gt",
    "u_wdeg", "v_wdeg", "u_wdeg_count", "v_wdeg_count", "u_wdeg_gt", "v_wdeg_gt",
    "uv_w", "uv_w_count", "uv_w_gt",
)
FEATURE_NAMES = GRAPH_FEATURES + LINK_FEATURES
assert len(FEATURE_NAMES) == _kernels.N_FEATURES


class TimestampedLink(NamedTuple):
    t: int | float
    u: str
    v: str


class OrderError(ValueError):
    """A link arrived with a timestamp smaller than its predecessor."""

    def __init__(self, index: int, t, previous):
        super().__init__(f"link {index}: timestamp {t} is before previous timestamp {previous}")
        self.index = index


class Kind(enum.Enum):
    BY_DURATION = "G"
    BY_SIZE = "H"


@dataclass(frozen=True)
class HistoryConfig:
    kind: Kind
    parameter: int | float
    id: str = ""

    def __post_init__(self):
        if not self.parameter > 0:
            raise ValueError(f"history parameter must be positive, got {self.parameter}")
        if self.kind is Kind.BY_SIZE and int(self.parameter) != self.parameter:
            raise ValueError(f"history size must be an integer, got {self.parameter}")
        if not self.id:
            p = self.parameter
            label = str(int(p)) if float(p).is_integer() else str(p)
            object.__setattr__(self, "id", f"{self.kind.value}{label}")

    @classmethod
    def size(cls, s: int, id: str = "") -> "HistoryConfig":
        return cls(Kind.BY_SIZE, int(s), id)

    @classmethod
    def duration(cls, d: int | float, id: str = "") -> "HistoryConfig":
        return cls(Kind.BY_DURATION, d, id)


def column_names(configs: Sequence[HistoryConfig]) -> list[str]:
    """``<graph id>.<feature>`` labels in configuration order."""
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"history ids must be distinct: {ids}")
    return [f"{gid}.{name}" for gid in ids for name in FEATURE_NAMES]


def _pair(u, v):
    return (u, v) if u < v else (v, u)


class HistoryGraph:
    """Weighted history graph updated link by link.

    Three counter structures back every feature: node degrees, node
    weighted degrees and pair weights. ``occurrences`` holds the queued
    window itself.
    """

    def __init__(self, config: HistoryConfig):
        self.config = config
        self.window: deque = deque()
        self.occurrence_count: dict[tuple, int] = {}
        self.degrees = DSC()
        self.weighted_degrees = DSC()
        self.link_weights = DSC()
        self._last_t = None
        self._seen = 0

    @property
    def ops(self) -> int:
        """Total counter operations performed so far."""
        return self.degrees.ops + self.weighted_degrees.ops + self.link_weights.ops

    def observe(self, link: TimestampedLink) -> tuple[int, ...]:
        """Features of ``link`` in the current graph, then add it to the window."""
        t, u, v = link
        if self._last_t is not None and t < self._last_t:
            raise OrderError(self._seen, t, self._last_t)
        self._last_t = t
        self._seen += 1
        by_size = self.config.kind is Kind.BY_SIZE
        if not by_size:
            d = self.config.parameter
            window = self.window
            while window and t - window[0][0] > d:
                self._evict()
        row = self.compute_features(u, v)
        self._insert(link)
        if by_size and len(self.window) > self.config.parameter:
            self._evict()
        return row

    def _insert(self, link: TimestampedLink) -> None:
        _, u, v = link
        key = _pair(u, v)
        self.window.append(link)
        self.occurrence_count[key] = self.occurrence_count.get(key, 0) + 1
        if self.link_weights.increase(key) == 1:
            self.degrees.increase(u)
            self.degrees.increase(v)
        self.weighted_degrees.increase(u)
        self.weighted_degrees.increase(v)

    def _evict(self) -> None:
        _, u, v = self.window.popleft()
        key = _pair(u, v)
        left = self.occurrence_count[key] - 1
        if left:
            self.occurrence_count[key] = left
        else:
            del self.occurrence_count[key]
        if self.link_weights.decrease(key) == 0:
            self.degrees.decrease(u)
            self.degrees.decrease(v)
        self.weighted_degrees.decrease(u)
        self.weighted_degrees.decrease(v)

    def compute_features(self, u: Hashable, v: Hashable) -> tuple[int, ...]:
        """The 30 features of pair ``(u, v)`` against the current state.

        Endpoints are reordered so the first has the smaller degree (then
        smaller weighted degree, then smaller id). Absent nodes and pairs
        count as 0, and "how many exceed 0" is the full population.
        """
        deg, wdeg, lw = self.degrees, self.weighted_degrees, self.link_weights
        row = [deg.size(), lw.size(), lw.sum()]
        for c in (deg, wdeg, lw):
            row += (c.count_with_value(1), c.count_with_value(2), c.max_value(), c.median_value())

        du, dv = deg.value(u), deg.value(v)
        wu, wv = wdeg.value(u), wdeg.value(v)
        if (du, wu, u) > (dv, wv, v):
            du, dv, wu, wv = dv, du, wv, wu
        w = lw.value(_pair(u, v))
        row += (
            du, dv,
            deg.count_with_value(du), deg.count_with_value(dv),
            deg.count_greater_than(du), deg.count_greater_than(dv),
            wu, wv,
            wdeg.count_with_value(wu), wdeg.count_with_value(wv),
            wdeg.count_greater_than(wu), wdeg.count_greater_than(wv),
            w, lw.count_with_value(w), lw.count_greater_than(w),
        )
        return tuple(row)


def pipeline_observe(graphs: Sequence[HistoryGraph], link: TimestampedLink) -> tuple[int, ...]:
    """Concatenated feature rows of ``link`` over several graphs, in order."""
    row: tuple[int, ...] = ()
    for g in graphs:
        row += g.observe(link)
    return row


@dataclass
class EncodedStream:
    """A link stream with integer node codes and pair codes.

    Node codes follow the sorted order of node ids, so comparing codes
    compares ids.
    """

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    pair: np.ndarray
    nodes: np.ndarray
    n_pairs: int

    def __len__(self) -> int:
        return len(self.t)


def encode(links: Iterable[TimestampedLink]) -> EncodedStream:
    links = list(links)
    ts = [link.t for link in links]
    if all(isinstance(t, (int, np.integer)) for t in ts):
        t = np.asarray(ts, dtype=np.int64)
    else:
        t = np.asarray(ts, dtype=np.float64)
    if len(t) > 1:
        bad = np.flatnonzero(np.diff(t) < 0)
        if len(bad):
            k = int(bad[0]) + 1
            raise OrderError(k, ts[k], ts[k - 1])
    ends = np.array([link.u for link in links] + [link.v for link in links], dtype=object)
    if len(links):
        nodes, codes = np.unique(ends.astype(str), return_inverse=True)
    else:
        nodes, codes = np.array([], dtype=str), np.array([], dtype=np.int64)
    codes = codes.astype(np.int64)
    u, v = codes[: len(links)], codes[len(links):]
    if np.any(u == v):
        raise ValueError(f"self-loop at link {int(np.flatnonzero(u == v)[0])}")
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    _, pair = np.unique(lo * max(len(nodes), 1) + hi, return_inverse=True)
    pair = pair.astype(np.int64)
    return EncodedStream(t, u, v, pair, nodes, int(pair.max()) + 1 if len(pair) else 0)


class StreamState:
    """Resumable compiled state of one history graph over an encoded stream."""

    def __init__(self, config: HistoryConfig, stream: EncodedStream):
        self.config = config
        self.stream = stream
        n = len(stream)
        by_size = config.kind is Kind.BY_SIZE
        cap = min(n, int(config.parameter)) if by_size else n
        cap = max(cap, 1)
        n_nodes = max(len(stream.nodes), 1)
        self.meta = np.zeros(2, dtype=np.int64)
        self.degrees = _kernels.new_counters(n_nodes, min(cap, n_nodes))
        # a node's weighted degree can reach the window length
        self.weighted = _kernels.new_counters(n_nodes, cap)
        self.weights = _kernels.new_counters(max(stream.n_pairs, 1), cap)
        param = config.parameter
        if by_size:
            self._param = int(param)
        elif stream.t.dtype == np.int64 and float(param).is_integer():
            self._param = int(param)
        else:
            self._param = float(param)
        self._by_size = by_size

    @property
    def position(self) -> int:
        return int(self.meta[_kernels.NEXT])

    def advance(self, hi: int, out: np.ndarray, row0: int = 0) -> None:
        """Compute rows for links ``position..hi-1`` into ``out[row0:]``."""
        s = self.stream
        _kernels.advance(
            s.t, s.u, s.v, s.pair, self._by_size, self._param,
            self.position, hi, out, row0, self.meta,
            *self.degrees, *self.weighted, *self.weights,
        )


def extract_features(
    stream: EncodedStream | Iterable[TimestampedLink],
    configs: Sequence[HistoryConfig],
    threads: int = 1,
) -> np.ndarray:
    """Feature matrix of shape ``(len(stream), 30 * len(configs))``.

    Graphs are independent, so with ``threads > 1`` they are processed
    concurrently; the result is identical either way.
    """
    if not isinstance(stream, EncodedStream):
        stream = encode(stream)
    column_names(configs)
    n = len(stream)
    out = np.zeros((n, _kernels.N_FEATURES * len(configs)), dtype=np.int64)

    def run(k: int) -> None:
        block = out[:, k * _kernels.N_FEATURES:(k + 1) * _kernels.N_FEATURES]
        StreamState(configs[k], stream).advance(n, block)

    if threads > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(len(configs))))
    else:
        for k in range(len(configs)):
            run(k)
    return out


def parse_history_spec(kind: str, text: str) -> HistoryConfig:
    """``"1000"`` or ``"1000:label"`` for a size or duration flag."""
    value, _, label = text.partition(":")
    if kind == "H":
        return HistoryConfig.size(int(value), label)
    number = float(value)
    if number.is_integer() and "." not in value and "e" not in value.lower():
        number = int(value)
    if not math.isfinite(number):
        raise ValueError(f"invalid duration {text!r}")
    return HistoryConfig.duration(number, label)
