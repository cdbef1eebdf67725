"""Command-line front end.

Every command reads files and writes files under ``--out``; all
randomness derives from ``--seed``. Exit codes: 0 ok, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluate import (
    EvaluationError,
    evaluate,
    forest_learner,
    permutation_importance,
    roc_auc,
    sliding_window_eval,
    write_histogram_csv,
)
from .history import (
    FEATURE_NAMES,
    HistoryConfig,
    OrderError,
    StreamState,
    column_names,
    encode,
    extract_features,
    parse_history_spec,
)
from .learn import ForestParams, TrainingError
from .seeds import derive_seed
from .streamio import EmptyStreamError, InjectionError, StreamFormatError, inject, read_stream, write_stream

log = logging.getLogger("linkanom")

DATA_ERRORS = (StreamFormatError, OrderError, InjectionError, EvaluationError, TrainingError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _ratio(text: str) -> float:
    r = float(text)
    if not 0 < r < 1:
        raise argparse.ArgumentTypeError(f"ratio must lie strictly between 0 and 1, got {text}")
    return r


def _rate(text: str) -> float:
    r = float(text)
    if r < 0:
        raise argparse.ArgumentTypeError(f"rate must be non-negative, got {text}")
    return r


def _positive_int(text: str) -> int:
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return k


def _add_io(p, out=True):
    p.add_argument("--input", required=True, help="input file")
    p.add_argument("--delimiter", default=None, help="column delimiter (default: whitespace)")
    if out:
        p.add_argument("--out", required=True, help="output directory")


def _add_history(p):
    p.add_argument("--hsize", action="append", default=[], metavar="S[:ID]",
                   help="size-bounded history of the last S links (repeatable)")
    p.add_argument("--gdur", action="append", default=[], metavar="D[:ID]",
                   help="duration-bounded history over the last D time units (repeatable)")


def _add_learning(p):
    p.add_argument("--ratio", type=_ratio, default=0.7, help="training fraction (default 0.7)")
    p.add_argument("--trees", type=_positive_int, default=100, help="trees in the forest (default 100)")


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="linkanom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("inject", help="add random anomalous links to a stream")
    _add_io(p, out=False)
    p.add_argument("--rate", type=_rate, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="labeled output stream (report written next to it)")

    p = sub.add_parser("features", help="compute history-graph features")
    _add_io(p, out=False)
    _add_history(p)
    _common(p)
    p.add_argument("--out", required=True, help="feature CSV path")

    p = sub.add_parser("eval", help="train and test on a feature CSV")
    _add_io(p)
    _add_learning(p)
    _common(p)

    p = sub.add_parser("windows", help="sliding-window evaluation of a labeled stream")
    _add_io(p)
    _add_history(p)
    _add_learning(p)
    _common(p)
    p.add_argument("--window", type=float, default=0.5, help="window size as a fraction of the stream")
    p.add_argument("--step", type=float, default=None, help="window step in links (default len/100)")
    p.add_argument("--count", type=_positive_int, default=50, help="number of windows (default 50)")

    p = sub.add_parser("importance", help="permutation importance on a feature CSV")
    _add_io(p)
    _add_learning(p)
    _common(p)
    p.add_argument("--repeats", type=_positive_int, default=10)
    p.add_argument("--top", type=int, default=2, help="dump value histograms of the top features")

    p = sub.add_parser("bench", help="per-link feature computation cost")
    _add_io(p)
    _add_history(p)
    p.add_argument("--chunk", type=_positive_int, default=1024, help="links per timed chunk")

    p = sub.add_parser("run", help="inject, extract features and evaluate in one go")
    _add_io(p)
    _add_history(p)
    _add_learning(p)
    _common(p)
    p.add_argument("--rate", type=_rate, default=0.05)
    return parser


def _configs(args) -> list[HistoryConfig]:
    try:
        configs = [parse_history_spec("H", s) for s in args.hsize]
        configs += [parse_history_spec("G", s) for s in args.gdur]
        if not configs:
            raise UsageError("at least one --hsize or --gdur is required")
        column_names(configs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return configs


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- pipeline steps shared by the individual commands and ``run`` ---

def do_inject(input_path, delimiter, rate, seed, output: Path) -> dict:
    links, labels, summary = read_stream(input_path, delimiter, labeled=False)
    out, report = inject(links, rate, derive_seed(seed, "inject"))
    write_stream(output, [x.link for x in out], [x.label for x in out])
    doc = json.loads(report.to_json())
    doc["master_seed"] = seed
    doc["self_loops_dropped"] = summary.self_loops_dropped
    _write_json(output.with_name(output.name + ".report.json"), doc)
    return doc


def write_feature_csv(path: Path, X: np.ndarray, names: Sequence[str], labels=None) -> None:
    header = ["index", *names] + (["label"] if labels is not None else [])
    cols = [np.arange(len(X))[:, None], X]
    if labels is not None:
        cols.append(np.asarray(labels)[:, None])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.hstack(cols).astype(np.int64), fmt="%d", delimiter=",")


def read_feature_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    with open(path, encoding="utf-8") as fh:
        header = next(csv.reader(fh))
        if header[0] != "index" or header[-1] != "label":
            raise StreamFormatError(f"{path}: expected index,...,label columns")
        data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
    if data.shape[0] == 0:
        raise StreamFormatError(f"{path}: no rows")
    return data[:, 1:-1], data[:, -1], header[1:-1]


def do_features(input_path, delimiter, configs, threads, output: Path) -> tuple[np.ndarray, list[str]]:
    links, labels, _ = read_stream(input_path, delimiter)
    X = extract_features(encode(links), configs, threads)
    names = column_names(configs)
    write_feature_csv(output, X, names, labels)
    return X, names


def do_eval(X, y, names, ratio, trees, seed, threads, out: Path) -> dict:
    params = ForestParams(n_trees=trees, seed=derive_seed(seed, "forest"))
    graphs = sorted({n.split(".", 1)[0] for n in names}, key=[n.split(".", 1)[0] for n in names].index)
    res = evaluate(X, y, ratio, seed, forest_learner(params, names, threads),
                   config={"histories": graphs, "forest": asdict(params), "features": len(names)})
    (out / "model.json").write_text(res.model.to_json(), encoding="utf-8")
    with open(out / "scores.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label", "score"])
        for i, label, s in zip(res.test_index, res.test_labels, res.test_scores):
            w.writerow([int(i), int(label), repr(float(s))])
    (out / "report.json").write_text(res.report.to_json(), encoding="utf-8")
    return json.loads(res.report.to_json())


# --- commands ---

def cmd_inject(args) -> int:
    doc = do_inject(args.input, args.delimiter, args.rate, args.seed, Path(args.out))
    log.info("injected %d anomalies into %d links", doc["injected"], doc["ell"])
    return 0


def cmd_features(args) -> int:
    configs = _configs(args)
    X, _ = do_features(args.input, args.delimiter, configs, args.threads, Path(args.out))
    log.info("wrote %d rows x %d features", *X.shape)
    return 0


def cmd_eval(args) -> int:
    X, y, names = read_feature_csv(args.input)
    doc = do_eval(X, y, names, args.ratio, args.trees, args.seed, args.threads, _outdir(args.out))
    print(f"AUC {doc['auc']:.4f}")
    return 0


def cmd_windows(args) -> int:
    configs = _configs(args)
    links, labels, _ = read_stream(args.input, args.delimiter, labeled=True)
    out = _outdir(args.out)
    params = ForestParams(n_trees=args.trees)
    results = sliding_window_eval(links, labels, configs, args.window, args.step, args.ratio,
                                  params, args.seed, args.count, args.threads)
    with open(out / "windows.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "begin", "end", "auc", "train_anomalies", "test_anomalies"])
        for r in results:
            w.writerow([r.index, r.begin, r.end, repr(r.auc), r.train_anomalies, r.test_anomalies])
    aucs = np.array([r.auc for r in results])
    _write_json(out / "windows.json", {
        "windows": len(results), "mean_auc": float(aucs.mean()),
        "min_auc": float(aucs.min()), "max_auc": float(aucs.max()),
        "histories": [c.id for c in configs], "ratio": args.ratio, "seed": args.seed,
    })
    print(f"{len(results)} windows, mean AUC {aucs.mean():.4f}")
    return 0


def cmd_importance(args) -> int:
    X, y, names = read_feature_csv(args.input)
    out = _outdir(args.out)
    params = ForestParams(n_trees=args.trees, seed=derive_seed(args.seed, "forest"))
    res = evaluate(X, y, args.ratio, args.seed, forest_learner(params, names, args.threads))
    k = len(y) - len(res.test_labels)
    imp = permutation_importance(res.model, X[k:], y[k:], args.repeats, derive_seed(args.seed, "importance"), names)
    imp.write_csv(out / "importance.csv")
    ranking = imp.ranking()
    for name, _ in ranking[: args.top]:
        write_histogram_csv(out / f"hist_{name}.csv", X[k:], y[k:], names, name)
    _write_json(out / "importance.json", {
        "baseline_auc": imp.baseline, "repeats": args.repeats,
        "ranking": [{"feature": n, "mean_decrease": m} for n, m in ranking],
    })
    for name, m in ranking[:10]:
        print(f"{name:30s} {m:+.4f}")
    return 0


def cmd_bench(args) -> int:
    configs = _configs(args)
    try:
        links, _, _ = read_stream(args.input, args.delimiter)
    except EmptyStreamError as exc:
        raise UsageError(f"nothing to benchmark: {exc}") from None
    stream = encode(links)
    n = len(stream)
    out = _outdir(args.out)
    # compile outside the timed region
    StreamState(configs[0], encode(links[:2])).advance(2, np.zeros((2, len(FEATURE_NAMES)), dtype=np.int64))
    results = {}
    for config in configs:
        state = StreamState(config, stream)
        rows = np.zeros((n, len(FEATURE_NAMES)), dtype=np.int64)
        per_link = []
        started = time.perf_counter()
        while state.position < n:
            lo = state.position
            hi = min(n, lo + args.chunk)
            t0 = time.perf_counter()
            state.advance(hi, rows, row0=lo)
            per_link.append((time.perf_counter() - t0) / (hi - lo))
        total = time.perf_counter() - started
        us = np.array(per_link) * 1e6
        results[config.id] = {
            "links": n,
            "total_s": total,
            "mean_us": total / n * 1e6,
            "p50_us": float(np.percentile(us, 50)),
            "p99_us": float(np.percentile(us, 99)),
            "links_per_s": n / total,
        }
        print(f"{config.id:>10s}  mean {results[config.id]['mean_us']:.3f} us/link  "
              f"{results[config.id]['links_per_s']:,.0f} links/s")
    _write_json(out / "bench.json", {"chunk": args.chunk, "results": results})
    return 0


def cmd_run(args) -> int:
    configs = _configs(args)
    out = _outdir(args.out)
    labeled = out / "labeled.txt"
    do_inject(args.input, args.delimiter, args.rate, args.seed, labeled)
    X, names = do_features(labeled, None, configs, args.threads, out / "features.csv")
    _, y, _ = read_feature_csv(out / "features.csv")
    doc = do_eval(X, y, names, args.ratio, args.trees, args.seed, args.threads, out)
    print(f"AUC {doc['auc']:.4f}")
    return 0


COMMANDS = {
    "inject": cmd_inject,
    "features": cmd_features,
    "eval": cmd_eval,
    "windows": cmd_windows,
    "importance": cmd_importance,
    "bench": cmd_bench,
    "run": cmd_run,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"linkanom {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"linkanom {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
