"""Evaluation protocol: chronological split, undersampling, ROC-AUC,
sliding windows, permutation importance and value histograms."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.stats import rankdata

from .history import HistoryConfig, TimestampedLink, encode, extract_features
from .learn import ForestParams, train
from .seeds import derive_seed

log = logging.getLogger(__name__)


class EvaluationError(ValueError):
    """The data cannot be evaluated under the protocol."""


class Scorer(Protocol):
    def score_many(self, X: np.ndarray) -> np.ndarray: ...


Learner = Callable[[np.ndarray, np.ndarray], Scorer]


def split_point(ell: int, r: float) -> int:
    """``floor(r * ell)``, robust to binary representation of ``r``."""
    if not 0 < r < 1:
        raise ValueError(f"split ratio must lie in (0, 1), got {r}")
    return int(math.floor(round(r * ell, 9)))


def chronological_split(X: np.ndarray, y: np.ndarray, r: float):
    """First ``floor(r * len)`` rows for training, the rest for testing."""
    k = split_point(len(y), r)
    return X[:k], y[:k], X[k:], y[k:]


def undersample(y: np.ndarray, seed: int) -> np.ndarray:
    """Row indices: every anomaly plus as many random normals, shuffled."""
    y = np.asarray(y)
    anomalies = np.flatnonzero(y == 1)
    normals = np.flatnonzero(y == 0)
    if len(anomalies) == 0:
        raise EvaluationError("no anomalous link in the training part")
    rng = np.random.default_rng(seed)
    if len(normals) < len(anomalies):
        log.warning("only %d normal rows for %d anomalies; keeping all normals", len(normals), len(anomalies))
        picked = normals
    else:
        picked = rng.choice(normals, size=len(anomalies), replace=False)
    rows = np.concatenate([anomalies, picked])
    return rows[rng.permutation(len(rows))]


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the Mann-Whitney rank sum, ties as mid-ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = int(np.sum(labels == 1))
    neg = int(np.sum(labels == 0))
    if pos == 0 or neg == 0 or pos + neg != len(labels):
        raise EvaluationError("roc_auc needs both classes and 0/1 labels")
    ranks = rankdata(scores, method="average")
    r_pos = float(np.sum(ranks[labels == 1]))
    return (r_pos - pos * (pos + 1) / 2.0) / (pos * neg)


def forest_learner(params: ForestParams, feature_names: Sequence[str] | None = None, threads: int = 1) -> Learner:
    return lambda X, y: train(X, y, params, feature_names, threads)


@dataclass
class EvalReport:
    auc: float
    counts: dict
    config: dict
    timings: dict = field(default_factory=dict)

    def to_json(self, timings: bool = True) -> str:
        doc = asdict(self)
        if not timings:
            doc.pop("timings")
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass
class EvalResult:
    report: EvalReport
    model: Scorer
    test_index: np.ndarray
    test_scores: np.ndarray
    test_labels: np.ndarray


def evaluate(
    X: np.ndarray,
    y: np.ndarray,
    r: float = 0.7,
    seed: int = 0,
    learner: Learner | None = None,
    config: dict | None = None,
) -> EvalResult:
    """Split, undersample the training part, fit, score the test part."""
    y = np.asarray(y)
    if learner is None:
        learner = forest_learner(ForestParams(seed=derive_seed(seed, "forest")))
    k = split_point(len(y), r)
    X_train, y_train, X_test, y_test = X[:k], y[:k], X[k:], y[k:]
    if len(set(y_test.tolist())) < 2:
        raise EvaluationError("test part must contain both normal and anomalous links")
    started = time.perf_counter()
    rows = undersample(y_train, derive_seed(seed, "undersample"))
    t_sample = time.perf_counter()
    model = learner(X_train[rows], y_train[rows])
    t_train = time.perf_counter()
    scores = model.score_many(X_test)
    t_test = time.perf_counter()
    auc = roc_auc(scores, y_test)
    counts = {
        "links": int(len(y)),
        "train": int(k),
        "test": int(len(y) - k),
        "train_anomalies": int(np.sum(y_train == 1)),
        "test_anomalies": int(np.sum(y_test == 1)),
        "undersampled": int(len(rows)),
        "undersampled_anomalies": int(np.sum(y_train[rows] == 1)),
    }
    echo = {"ratio": r, "seed": seed}
    echo.update(config or {})
    timings = {
        "undersample_s": t_sample - started,
        "train_s": t_train - t_sample,
        "test_s": t_test - t_train,
    }
    report = EvalReport(auc=auc, counts=counts, config=echo, timings=timings)
    return EvalResult(report, model, np.arange(k, len(y)), scores, y_test)


@dataclass
class WindowResult:
    index: int
    begin: int
    end: int
    auc: float
    train_anomalies: int
    test_anomalies: int


def window_bounds(ell: int, w: float = 0.5, step: float | None = None, n_windows: int = 50) -> list[tuple[int, int]]:
    """``[b_i, e_i)`` with ``b_i = floor(i * step)`` and ``e_i = b_i + ceil(w * ell)``."""
    if not 0 < w <= 1:
        raise ValueError(f"window fraction must lie in (0, 1], got {w}")
    length = int(math.ceil(round(w * ell, 9)))
    bounds = []
    for i in range(n_windows):
        begin = (i * ell) // 100 if step is None else int(math.floor(i * step))
        end = begin + length
        if end > ell:
            raise ValueError(f"window {i} ends at {end}, past the stream end {ell}")
        bounds.append((begin, end))
    return bounds


def sliding_window_eval(
    links: Sequence[TimestampedLink],
    labels: Sequence[int],
    configs: Sequence[HistoryConfig],
    w: float = 0.5,
    step: float | None = None,
    r: float = 0.7,
    params: ForestParams = ForestParams(),
    seed: int = 0,
    n_windows: int = 50,
    threads: int = 1,
) -> list[WindowResult]:
    """AUC of the full protocol run independently in each window.

    Histories start empty at every window start, and each window gets
    its own seeds derived from ``(seed, window index)``.
    """
    labels = np.asarray(labels)
    results = []
    for i, (begin, end) in enumerate(window_bounds(len(links), w, step, n_windows)):
        X = extract_features(encode(links[begin:end]), configs, threads)
        y = labels[begin:end]
        window_seed = derive_seed(seed, "window", i)
        forest = ForestParams(**{**asdict(params), "seed": derive_seed(window_seed, "forest")})
        try:
            res = evaluate(X, y, r, window_seed, forest_learner(forest, threads=threads))
        except EvaluationError as exc:
            raise EvaluationError(f"window {i} [{begin}, {end}): {exc}") from None
        c = res.report.counts
        results.append(WindowResult(i, begin, end, res.report.auc, c["train_anomalies"], c["test_anomalies"]))
    return results


@dataclass
class Importance:
    baseline: float
    names: list[str]
    decreases: np.ndarray  # (features, repeats)

    @property
    def mean(self) -> np.ndarray:
        return self.decreases.mean(axis=1)

    def ranking(self) -> list[tuple[str, float]]:
        order = np.argsort(-self.mean, kind="stable")
        return [(self.names[j], float(self.mean[j])) for j in order]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["feature", "rank", "mean_decrease"] + [f"repeat_{k}" for k in range(self.decreases.shape[1])])
            rank = {name: k for k, (name, _) in enumerate(self.ranking(), start=1)}
            for j, name in enumerate(self.names):
                out.writerow([name, rank[name], repr(float(self.mean[j]))] + [repr(float(v)) for v in self.decreases[j]])


def permutation_importance(
    model: Scorer,
    X: np.ndarray,
    y: np.ndarray,
    repeats: int = 10,
    seed: int = 0,
    names: Sequence[str] | None = None,
) -> Importance:
    """AUC drop when each test column is shuffled on its own, ``repeats`` times."""
    X = np.asarray(X, dtype=np.float64)
    baseline = roc_auc(model.score_many(X), y)
    n_feat = X.shape[1]
    decreases = np.zeros((n_feat, repeats))
    work = X.copy()
    for j in range(n_feat):
        for k in range(repeats):
            rng = np.random.default_rng(derive_seed(seed, "permutation", j, k))
            work[:, j] = X[rng.permutation(len(X)), j]
            decreases[j, k] = baseline - roc_auc(model.score_many(work), y)
        work[:, j] = X[:, j]
    names = list(names) if names is not None else [f"f{j}" for j in range(n_feat)]
    return Importance(baseline, names, decreases)


def feature_distribution(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    feature: str,
    label: int,
) -> dict[int, int]:
    """Exact value histogram of one feature among rows of class ``label``."""
    try:
        j = list(names).index(feature)
    except ValueError:
        raise KeyError(f"unknown feature {feature!r}") from None
    values, counts = np.unique(np.asarray(X)[np.asarray(y) == label, j], return_counts=True)
    return {int(v) if float(v).is_integer() else float(v): int(c) for v, c in zip(values, counts)}


def write_histogram_csv(path: str | Path, X, y, names, feature: str) -> None:
    """Long-format ``value,label,count`` rows for both classes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["value", "label", "count"])
        for label in (0, 1):
            for value, count in feature_distribution(X, y, names, feature, label).items():
                out.writerow([value, label, count])
