"""Reading, writing and labelling link streams.

Input files hold one link per line, ``t u v`` (optionally a fourth
``label`` column, 0 or 1), whitespace separated unless a delimiter is
given. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .history import OrderError, TimestampedLink

log = logging.getLogger(__name__)

NORMAL, ANOMALOUS = 0, 1


class StreamFormatError(ValueError):
    """Malformed or unusable stream file."""


class EmptyStreamError(StreamFormatError):
    """The file holds no usable link."""


class LabeledLink(NamedTuple):
    link: TimestampedLink
    label: int


@dataclass
class StreamSummary:
    ell: int
    n_nodes: int
    m_distinct: int
    t_min: int | float | None
    t_max: int | float | None
    n_timestamps: int
    self_loops_dropped: int = 0

    @classmethod
    def of(cls, links: Iterable[TimestampedLink], self_loops_dropped: int = 0) -> "StreamSummary":
        nodes, pairs, times = set(), set(), set()
        ell = 0
        for t, u, v in links:
            ell += 1
            nodes.add(u)
            nodes.add(v)
            pairs.add((u, v) if u < v else (v, u))
            times.add(t)
        return cls(
            ell=ell,
            n_nodes=len(nodes),
            m_distinct=len(pairs),
            t_min=min(times) if times else None,
            t_max=max(times) if times else None,
            n_timestamps=len(times),
            self_loops_dropped=self_loops_dropped,
        )


def _number(text: str) -> int | float:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not math.isfinite(value):
            raise
        return value


def read_stream(
    path: str | Path,
    delimiter: str | None = None,
    labeled: bool | None = None,
) -> tuple[list[TimestampedLink], list[int] | None, StreamSummary]:
    """Parse a stream file.

    ``labeled=None`` detects a fourth column from the first data line.
    Returns links, labels (or None) and a summary. Self-loops are dropped
    with a warning; decreasing timestamps and malformed lines raise.
    """
    links: list[TimestampedLink] = []
    labels: list[int] = []
    loops = 0
    previous = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split(delimiter) if delimiter else stripped.split()
            parts = [p.strip() for p in parts]
            if labeled is None:
                labeled = len(parts) >= 4
            want = 4 if labeled else 3
            if len(parts) < want:
                raise StreamFormatError(f"{path}:{lineno}: expected {want} columns, got {len(parts)}")
            try:
                t = _number(parts[0])
            except ValueError:
                raise StreamFormatError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
            if t < 0:
                raise StreamFormatError(f"{path}:{lineno}: negative timestamp {t}")
            if previous is not None and t < previous:
                raise StreamFormatError(
                    f"{path}:{lineno}: timestamp {parts[0]} is before previous timestamp {previous}"
                )
            previous = t
            u, v = parts[1], parts[2]
            if u == v:
                loops += 1
                continue
            if labeled:
                if parts[3] not in ("0", "1"):
                    raise StreamFormatError(f"{path}:{lineno}: label must be 0 or 1, got {parts[3]!r}")
                labels.append(int(parts[3]))
            links.append(TimestampedLink(t, u, v))
    if loops:
        log.warning("%s: dropped %d self-loop(s)", path, loops)
    if not links:
        raise EmptyStreamError(f"{path}: empty stream")
    # mixed int/float files compare as floats everywhere
    if any(isinstance(link.t, float) for link in links):
        links = [TimestampedLink(float(t), u, v) for t, u, v in links]
    return links, (labels if labeled else None), StreamSummary.of(links, loops)


def parse_stream(path: str | Path, delimiter: str | None = None) -> tuple[list[TimestampedLink], StreamSummary]:
    links, _, summary = read_stream(path, delimiter, labeled=False)
    return links, summary


def read_konect(path: str | Path) -> tuple[list[TimestampedLink], StreamSummary]:
    """Parse a KONECT ``out.*`` edge file (``u v weight t``, ``%`` comments).

    Links are stably sorted by timestamp; a positive integer weight ``w``
    stands for ``w`` simultaneous occurrences. Self-loops are dropped.
    """
    rows = []
    loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("%"):
                continue
            if len(parts) < 4:
                raise StreamFormatError(f"{path}:{lineno}: expected 'u v weight t', got {len(parts)} columns")
            try:
                t = _number(parts[3])
                w = int(float(parts[2]))
            except ValueError:
                raise StreamFormatError(f"{path}:{lineno}: bad weight or timestamp") from None
            if parts[0] == parts[1]:
                loops += 1
                continue
            rows.extend([TimestampedLink(t, parts[0], parts[1])] * max(w, 1))
    if loops:
        log.warning("%s: dropped %d self-loop(s)", path, loops)
    if not rows:
        raise EmptyStreamError(f"{path}: empty stream")
    rows.sort(key=lambda link: link.t)
    if any(isinstance(link.t, float) for link in rows):
        rows = [TimestampedLink(float(t), u, v) for t, u, v in rows]
    return rows, StreamSummary.of(rows, loops)


def write_stream(
    path: str | Path,
    links: Sequence[TimestampedLink],
    labels: Sequence[int] | None = None,
    delimiter: str = " ",
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if labels is None:
            for t, u, v in links:
                fh.write(f"{t}{delimiter}{u}{delimiter}{v}\n")
        else:
            for (t, u, v), y in zip(links, labels):
                fh.write(f"{t}{delimiter}{u}{delimiter}{v}{delimiter}{y}\n")


class InjectionError(RuntimeError):
    """Rejection sampling could not find enough admissible links."""


@dataclass
class InjectionReport:
    seed: int
    rate: float
    ell: int
    injected: int
    total: int
    attempts: int
    rejected_existing: int
    rejected_duplicate: int
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def anomaly_count(rate: float, ell: int) -> int:
    """``rate * ell`` rounded half up."""
    if rate < 0:
        raise ValueError(f"injection rate must be non-negative, got {rate}")
    return int(math.floor(rate * ell + 0.5 + 1e-9))


def inject(
    links: Sequence[TimestampedLink],
    rate: float,
    seed: int,
    max_attempts: int | None = None,
) -> tuple[list[LabeledLink], InjectionReport]:
    """Add ``round(rate * len(links))`` random anomalous links.

    Each injected link draws a timestamp uniformly from the distinct
    timestamps and two distinct nodes uniformly, and is rejected when
    the same (timestamp, unordered pair) already occurs in the stream or
    among earlier injections. Injected links land at a random position
    among the links sharing their timestamp; original links keep their
    relative order.
    """
    if not links:
        raise ValueError("cannot inject into an empty stream")
    ell = len(links)
    k = anomaly_count(rate, ell)
    nodes = sorted({x for _, u, v in links for x in (u, v)})
    if k and len(nodes) < 2:
        raise ValueError("injection needs at least two nodes")
    times = sorted({link.t for link in links})
    existing = {(t, (u, v) if u < v else (v, u)) for t, u, v in links}
    if max_attempts is None:
        max_attempts = 1000 + 100 * k

    rng = np.random.default_rng(seed)
    injected: list[TimestampedLink] = []
    taken: set = set()
    attempts = rej_existing = rej_dup = 0
    while len(injected) < k:
        if attempts >= max_attempts:
            raise InjectionError(
                f"gave up after {attempts} attempts with {len(injected)}/{k} anomalies placed"
            )
        attempts += 1
        t = times[int(rng.integers(len(times)))]
        i, j = rng.choice(len(nodes), size=2, replace=False)
        u, v = nodes[int(i)], nodes[int(j)]
        key = (t, (u, v) if u < v else (v, u))
        if key in existing:
            rej_existing += 1
            continue
        if key in taken:
            rej_dup += 1
            continue
        taken.add(key)
        injected.append(TimestampedLink(t, u, v))

    # position keys: original j of a timestamp block sits at (t, j, 1);
    # an injection in gap g (before original g) sits at (t, g, 0, random)
    block_size: dict = {}
    keys = []
    for idx, link in enumerate(links):
        j = block_size.get(link.t, 0)
        block_size[link.t] = j + 1
        keys.append((link.t, j, 1, 0.0, idx))
    for idx, link in enumerate(injected):
        gap = int(rng.integers(block_size.get(link.t, 0) + 1))
        keys.append((link.t, gap, 0, float(rng.random()), ell + idx))
    keys.sort()
    out = [
        LabeledLink(links[key[4]], NORMAL) if key[4] < ell else LabeledLink(injected[key[4] - ell], ANOMALOUS)
        for key in keys
    ]
    report = InjectionReport(
        seed=seed,
        rate=rate,
        ell=ell,
        injected=k,
        total=len(out),
        attempts=attempts,
        rejected_existing=rej_existing,
        rejected_duplicate=rej_dup,
        summary=asdict(StreamSummary.of(links)),
    )
    return out, report


def synthetic_stream(
    n_links: int,
    n_nodes: int = 2000,
    seed: int = 0,
    exponent: float = 1.2,
    repeat_prob: float = 0.6,
    recent: int = 500,
    mean_gap: float = 1.0,
) -> list[TimestampedLink]:
    """Stationary stream with heavy-tailed node activity and repeated pairs.

    Each link either repeats a pair drawn from the last ``recent`` links
    (probability ``repeat_prob``) or joins two nodes drawn independently
    with Zipf-like weights ``rank ** -exponent``. Integer timestamps
    advance by Poisson gaps, so many links share a timestamp.
    """
    rng = np.random.default_rng(seed)
    weights = np.arange(1, n_nodes + 1, dtype=float) ** -exponent
    weights /= weights.sum()
    labels = rng.permutation(n_nodes)
    fresh_u = rng.choice(n_nodes, size=n_links, p=weights)
    fresh_v = rng.choice(n_nodes, size=n_links, p=weights)
    repeat = rng.random(n_links) < repeat_prob
    back = rng.integers(1, recent + 1, size=n_links)
    gaps = rng.poisson(mean_gap, size=n_links)
    us = np.empty(n_links, dtype=np.int64)
    vs = np.empty(n_links, dtype=np.int64)
    for i in range(n_links):
        if repeat[i] and i > 0:
            j = max(0, i - int(back[i]))
            us[i], vs[i] = us[j], vs[j]
            continue
        u, v = fresh_u[i], fresh_v[i]
        while u == v:
            v = rng.choice(n_nodes, p=weights)
        us[i], vs[i] = u, v
    t = np.cumsum(gaps)
    return [TimestampedLink(int(t[i]), f"v{labels[us[i]]}", f"v{labels[vs[i]]}") for i in range(n_links)]


__all__ = [
    "ANOMALOUS",
    "EmptyStreamError",
    "InjectionError",
    "InjectionReport",
    "LabeledLink",
    "NORMAL",
    "OrderError",
    "StreamFormatError",
    "StreamSummary",
    "anomaly_count",
    "inject",
    "parse_stream",
    "read_konect",
    "read_stream",
    "synthetic_stream",
    "write_stream",
]
