"""Command-line front end: ingest raw graph files, run sweeps, report, replay.

Exit codes: 0 success, 1 partial cell failures during a run, 2 configuration
or ingestion errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bundle import BundleError, build_bundle, load_bundle, save_bundle
from .datasets import cora
from .experiment import (ConfigError, ExperimentConfig, replay_cell,
                         run_experiment, summarize_results)

log = logging.getLogger(__name__)


def _read_labels(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as e:
        raise BundleError(f"{path}: {e}") from e


def _read_edges(path: Path) -> np.ndarray:
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise BundleError(f"{path}:{lineno}: expected 'i,j', got {line!r}")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError as e:
                raise BundleError(f"{path}:{lineno}: {e}") from e
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def _read_features(path: Path, fmt: str, n: int, num_features: int | None) -> np.ndarray:
    if fmt == "dense":
        try:
            feats = np.loadtxt(path, delimiter=",", dtype=np.float32, ndmin=2)
        except ValueError as e:
            raise BundleError(f"{path}: {e}") from e
        if feats.shape[0] != n:
            raise BundleError(
                f"{path}: {feats.shape[0]} feature rows for {n} labeled nodes")
        return feats
    if num_features is None:
        raise BundleError("--num-features is required for triplet features")
    feats = np.zeros((n, num_features), dtype=np.float32)
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise BundleError(f"{path}:{lineno}: expected 'node,feature,value'")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as e:
                raise BundleError(f"{path}:{lineno}: {e}") from e
            if not 0 <= i < n:
                raise BundleError(f"{path}:{lineno}: node id {i} out of range")
            if not 0 <= j < num_features:
                raise BundleError(f"{path}:{lineno}: feature index {j} out of range")
            feats[i, j] = v
    return feats


def cmd_ingest(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        print(f"refusing to overwrite existing bundle at {out} (use --force)",
              file=sys.stderr)
        return 2
    try:
        labels = _read_labels(Path(args.labels))
        n = labels.shape[0]
        edges = _read_edges(Path(args.edges))
        feats = _read_features(Path(args.features), args.features_format, n,
                               args.num_features)
        if args.masks:
            tags = np.array(Path(args.masks).read_text().split(), dtype=object)
            if tags.shape[0] != n:
                raise BundleError(
                    f"{args.masks}: {tags.shape[0]} mask lines for {n} nodes")
        else:
            log.warning("no masks file given; every node tagged 'none'")
            tags = np.full(n, "none", dtype=object)
        num_classes = args.num_classes or int(labels.max()) + 1
        bundle = build_bundle(edges, feats, labels, tags, num_classes,
                              dataset_name=args.name)
        save_bundle(bundle, out)
    except (BundleError, OSError) as e:
        print(f"ingest error: {e}", file=sys.stderr)
        return 2
    print(f"wrote bundle {out} (n={bundle.num_nodes}, d={bundle.num_features}, "
          f"classes={bundle.num_classes}, undirected edges={bundle.num_edges})")
    return 0


def cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.from_json(args.config)
        if args.asr_include_target:
            cfg.asr_include_target = True
        csv_path, failures = run_experiment(cfg, out_dir=args.out, force=args.force,
                                            jobs=args.jobs)
    except (ConfigError, BundleError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    print(f"results written to {csv_path} ({failures} failed cells)")
    return 1 if failures else 0


def cmd_report(args) -> int:
    try:
        out = Path(args.out) if args.out else Path(args.results).parent / "report"
        mean_path = summarize_results(args.results, out)
    except (ConfigError, OSError, ValueError) as e:
        print(f"report error: {e}", file=sys.stderr)
        return 2
    print(f"class-mean table written to {mean_path}")
    with open(mean_path) as f:
        for line in f:
            print("  " + line.rstrip())
    return 0


def cmd_replay(args) -> int:
    try:
        bundle = cora() if args.dataset == "cora" else load_bundle(args.dataset)
        recorded, replayed = replay_cell(args.cell, bundle)
    except (BundleError, OSError, ValueError) as e:
        print(f"replay error: {e}", file=sys.stderr)
        return 2
    match = abs(recorded - replayed) < 1e-9
    print(f"recorded asr={recorded:.6f} replayed asr={replayed:.6f} "
          f"{'MATCH' if match else 'MISMATCH'}")
    return 0 if match else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphpoison",
        description="Clean-label feature-trigger backdoor experiments on node classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert raw edge/feature/label files to a bundle")
    p.add_argument("--edges", required=True, help="csv of 'i,j' pairs, 0-based")
    p.add_argument("--features", required=True, help="feature file (see --features-format)")
    p.add_argument("--labels", required=True, help="one class id per line")
    p.add_argument("--masks", help="one of train/val/test/none per line")
    p.add_argument("--features-format", choices=("dense", "triplet"), default="dense",
                   help="dense csv rows, or sparse 'node,feature,value' triplets")
    p.add_argument("--num-features", type=int, help="feature dimension (triplet format)")
    p.add_argument("--num-classes", type=int, help="class count (default: max label + 1)")
    p.add_argument("--name", default="ingested", help="dataset name for meta.json")
    p.add_argument("--force", action="store_true", help="overwrite an existing bundle")
    p.add_argument("out", help="bundle directory to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run the sweep described by a config file")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--force", action="store_true", help="recompute completed cells")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="worker pool size for cells")
    p.add_argument("--asr-include-target", action="store_true",
                   help="count target-class test nodes in the ASR population")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="aggregate a results CSV into class-mean tables")
    p.add_argument("results", help="results.csv from a run")
    p.add_argument("--out", help="report directory (default: alongside the CSV)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", help="re-run one cell from its artifacts")
    p.add_argument("cell", help="cell directory containing attack.json and model.bin")
    p.add_argument("--dataset", default="cora", help="bundle directory or 'cora'")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
