"""End-to-end acceptance criteria, one test per criterion.

Each test prints (and records for the terminal summary) a single
``criterion N PASS|FAIL|SKIP: ...`` line before asserting.
"""

import bisect
import json
import os
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from linkanom.cli import main
from linkanom.dsc import DSC
from linkanom.evaluate import evaluate, permutation_importance, roc_auc, sliding_window_eval, window_bounds
from linkanom.history import FEATURE_NAMES, HistoryConfig, HistoryGraph, StreamState, encode, extract_features
from linkanom.streamio import inject, read_konect, synthetic_stream, write_stream

from naive import brute_force_auc, naive_features_np
from test_history import FIG1, FIG1_H3_LAST, random_stream

SEEDS = range(5)


def record(n, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def skip(n, reason):
    ACCEPTANCE_LINES.append(f"criterion {n} SKIP: {reason}")
    print(ACCEPTANCE_LINES[-1])
    pytest.skip(reason)


_labeled_cache = {}


def labeled_synthetic(seed):
    """The 50,000-link synthetic stream with 5% injected anomalies."""
    if seed not in _labeled_cache:
        links = synthetic_stream(50_000, seed=seed)
        out, _ = inject(links, 0.05, seed=seed)
        _labeled_cache[seed] = ([x.link for x in out], np.array([x.label for x in out]))
    return _labeled_cache[seed]


def test_criterion_01_dsc_oracle():
    rng = random.Random(1)
    names = [f"c{k}" for k in range(1000)]
    dsc = DSC()
    value = {}
    asc = []  # naive sorted multiset of present values
    started = time.perf_counter()
    mismatches = 0
    for _ in range(100_000):
        name = rng.choice(names)
        if value.get(name, 0) > 0 and rng.random() < 0.45:
            old = value[name]
            del asc[bisect.bisect_left(asc, old)]
            value[name] = old - 1
            if old > 1:
                bisect.insort(asc, old - 1)
            got = dsc.decrease(name)
        else:
            old = value.get(name, 0)
            if old:
                del asc[bisect.bisect_left(asc, old)]
            value[name] = old + 1
            bisect.insort(asc, old + 1)
            got = dsc.increase(name)
        n = len(asc)
        probe = rng.choice(names)
        present = value.get(probe, 0)
        v = rng.randint(0, 8)
        expected = (
            value[name], value.get(probe, 0), n, sum(asc) if n < 50 else None,
            asc[-1] if n else 0, asc[n - 1 - n // 2] if n else 0,
            asc.count(v) if v else 0,
            n - bisect.bisect_right(asc, present), n,
        )
        actual = (
            got, dsc.value(probe), dsc.size(), dsc.sum() if n < 50 else None,
            dsc.max_value(), dsc.median_value(), dsc.count_with_value(v),
            dsc.count_greater_than(present), dsc.count_greater_than(0),
        )
        if expected != actual:
            mismatches += 1
    total_ok = dsc.sum() == sum(asc)
    elapsed = time.perf_counter() - started
    ok = mismatches == 0 and total_ok and elapsed < 10
    record(1, ok, f"{mismatches} mismatching steps over 1e5 ops, {elapsed:.1f}s (limit 10s)")
    assert ok


def test_criterion_02_feature_oracle():
    configs = [HistoryConfig.size(5), HistoryConfig.size(100), HistoryConfig.size(1000),
               HistoryConfig.duration(3), HistoryConfig.duration(50)]
    links = random_stream(10_000, 200, seed=2)
    started = time.perf_counter()
    bad = []
    kernel = extract_features(links, configs)
    for k, config in enumerate(configs):
        expected = np.array(naive_features_np(links, config))
        graph = HistoryGraph(config)
        python_rows = np.array([graph.observe(link) for link in links])
        block = kernel[:, 30 * k:30 * (k + 1)]
        if not (np.array_equal(block, expected) and np.array_equal(python_rows, expected)):
            bad.append(config.id)
    elapsed = time.perf_counter() - started
    ok = not bad and elapsed < 30
    record(2, ok, f"mismatching configs {bad or 'none'}, {elapsed:.1f}s (limit 30s)")
    assert ok


def test_criterion_03_fig1():
    graph = HistoryGraph(HistoryConfig.size(3))
    for link in FIG1[:-1]:
        graph.observe(link)
    window = dict(graph.occurrence_count)
    row = dict(zip(FEATURE_NAMES, graph.observe(FIG1[-1])))
    ok = window == {("c", "d"): 2, ("a", "b"): 1} and row == FIG1_H3_LAST
    record(3, ok, f"H3 before (10,b,c) = {window}")
    assert ok


def test_criterion_04_auc():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 120))
        scores = rng.integers(0, int(rng.integers(2, 30)), size=n).astype(float)
        labels = rng.integers(0, 2, size=n)
        labels[rng.choice(n, 2, replace=False)] = [0, 1]
        worst = max(worst, abs(roc_auc(scores, labels) - brute_force_auc(scores, labels)))
    ok = worst <= 1e-12
    record(4, ok, f"max |auc - brute force| = {worst:.2e} (tolerance 1e-12)")
    assert ok


def test_criterion_05_synthetic_quality():
    started = time.perf_counter()
    aucs = []
    for seed in SEEDS:
        links, y = labeled_synthetic(seed)
        X = extract_features(encode(links), [HistoryConfig.size(1000)])
        aucs.append(evaluate(X, y, 0.7, seed=seed).report.auc)
    elapsed = time.perf_counter() - started
    ok = min(aucs) >= 0.90 and elapsed < 120
    record(5, ok, f"AUC per seed {[round(a, 4) for a in aucs]} (need >= 0.90), {elapsed:.0f}s (limit 120s)")
    assert ok


REAL_DATA = {
    "LINKANOM_UCI": ("UCI Messages", 0.9635),
    "LINKANOM_DNC": ("DNC Emails", 0.9893),
}


def test_criterion_06_real_data():
    present = {var: os.environ[var] for var in REAL_DATA if os.environ.get(var)}
    if not present:
        skip(6, "set LINKANOM_UCI / LINKANOM_DNC to KONECT out.* files to run (network data)")
    results = []
    for var, path in present.items():
        name, reference = REAL_DATA[var]
        links, _ = read_konect(path)
        out, _ = inject(links, 0.05, seed=0)
        stream = [x.link for x in out]
        y = np.array([x.label for x in out])
        X = extract_features(encode(stream), [HistoryConfig.size(1000)])
        auc = evaluate(X, y, 0.7, seed=0).report.auc
        results.append((name, auc, reference, abs(auc - reference) <= 0.04))
    ok = all(r[3] for r in results)
    record(6, ok, "; ".join(f"{n} AUC {a:.4f} vs {ref} +/- 0.04" for n, a, ref, _ in results))
    assert ok


def test_criterion_07_combination():
    configs = [HistoryConfig.size(s) for s in (5, 50, 100, 1000, 10000)]
    configs += [HistoryConfig.duration(100), HistoryConfig.duration(2000)]
    details = []
    ok = True
    for seed in SEEDS:
        links, y = labeled_synthetic(seed)
        X = extract_features(encode(links), configs, threads=4)
        singles = [evaluate(X[:, 30 * k:30 * (k + 1)], y, 0.7, seed=seed).report.auc for k in range(len(configs))]
        combined = evaluate(X, y, 0.7, seed=seed).report.auc
        ok &= combined >= max(singles) - 0.01
        details.append(f"{combined:.4f}/{max(singles):.4f}")
    record(7, ok, f"combined/best-single per seed {details} (need combined >= best - 0.01)")
    assert ok


def test_criterion_08_per_link_cost():
    stream = encode(synthetic_stream(1_000_000, n_nodes=20_000, seed=8))
    n = len(stream)
    # compile outside the timed region
    StreamState(HistoryConfig.size(2), stream).advance(10, np.zeros((10, 30), dtype=np.int64))
    rate = {}
    for s in (100, 10000):
        state = StreamState(HistoryConfig.size(s), stream)
        out = np.zeros((n, 30), dtype=np.int64)
        t0 = time.perf_counter()
        state.advance(n, out)
        rate[s] = n / (time.perf_counter() - t0)
    ratio = max(rate.values()) / min(rate.values())
    ok = ratio < 2 and min(rate.values()) >= 100_000
    record(8, ok, f"H100 {rate[100]:,.0f} links/s, H10000 {rate[10000]:,.0f} links/s, "
                  f"cost ratio {ratio:.2f} (need < 2 and >= 100,000 links/s)")
    assert ok


def test_criterion_09_sliding_windows():
    links = synthetic_stream(40_000, seed=9)
    out, _ = inject(links, 0.05, seed=9)
    stream = [x.link for x in out]
    y = np.array([x.label for x in out])
    bounds = window_bounds(len(stream), 0.5)
    results = sliding_window_eval(stream, y, [HistoryConfig.size(1000)], w=0.5, seed=9, threads=4)
    aucs = np.array([r.auc for r in results])
    spread = float(np.max(np.abs(aucs - aucs.mean())))
    ok = len(bounds) == len(results) == 50 and spread <= 0.05
    record(9, ok, f"{len(results)} windows, mean AUC {aucs.mean():.4f}, max deviation {spread:.4f} (limit 0.05)")
    assert ok


def test_criterion_10_permutation_importance():
    links, y = labeled_synthetic(0)
    X = extract_features(encode(links), [HistoryConfig.size(1000)])
    noise = np.random.default_rng(10).integers(0, 100, size=len(y))
    X = np.column_stack([X, y, noise])
    names = list(FEATURE_NAMES) + ["planted", "noise"]
    res = evaluate(X, y, 0.7, seed=0)
    k = res.report.counts["train"]
    imp = permutation_importance(res.model, X[k:], y[k:], repeats=10, seed=10, names=names)
    planted, noisy = imp.mean[30], imp.mean[31]
    target = imp.baseline - 0.5
    first = imp.ranking()[0][0]
    ok = first == "planted" and abs(planted - target) <= 0.05 and abs(noisy) < 0.02
    record(10, ok, f"top feature {first}; planted mean decrease {planted:.4f} vs baseline-0.5 = {target:.4f} "
                   f"(tolerance 0.05); noise mean decrease {noisy:.4f} (limit 0.02)")
    assert ok


def test_criterion_11_determinism(tmp_path):
    src = tmp_path / "stream.txt"
    write_stream(src, synthetic_stream(20_000, seed=11))
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", "--input", str(src), "--hsize", "1000", "--gdur", "500", "--seed", "11",
                     "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        report.pop("timings")
        runs.append(((out / "features.csv").read_bytes(), (out / "model.json").read_bytes(), report))
    same = [a == b for a, b in zip(*runs)]
    ok = all(same)
    record(11, ok, f"features.csv/model.json/report identical: {same}")
    assert ok
