"""Config-driven sweep runner with replayable per-cell artifacts and CSV output.

A run expands the cross product of (target class, poisoning rate, trigger
ratio, optional defense threshold, replication seed) into cells, executes each
cell through the metrics module, and assembles one CSV row per cell in
deterministic key order. Completed cells are skipped on re-runs unless forced,
and per-cell failures are recorded in the CSV without aborting the sweep.
"""

from __future__ import annotations

import csv
import json
import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bundle import GraphBundle, load_bundle
from .models import ModelConfig, TrainConfig, TrainedModel
from .train import train, save_model, load_model
from .attack import (apply_attack, build_test_poison, load_attack, make_plan,
                     save_attack, select_trigger)
from .datasets import cora
from .metrics import EvalReport, asr, evaluate_cell

log = logging.getLogger(__name__)

CSV_COLUMNS = ["dataset", "model", "variant", "target_class", "pr", "trigger_ratio",
               "threshold", "seed", "asr", "ca", "cad", "daa", "dpa", "error"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    dataset: str
    model: ModelConfig
    train: dict
    variant: str
    target_classes: list[int] | str
    poison_rates: list[float]
    trigger_ratios: list[float]
    thresholds: list[float] | None
    seeds: list[int]
    out_dir: str
    asr_include_target: bool = False

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            mc = ModelConfig(**doc.get("model", {}))
            cfg = cls(
                dataset=doc["dataset"],
                model=mc,
                train=doc.get("train", {}),
                variant=doc.get("variant", "max_feature"),
                target_classes=doc.get("target_classes", "all"),
                poison_rates=doc["poison_rates"],
                trigger_ratios=doc["trigger_ratios"],
                thresholds=doc.get("thresholds"),
                seeds=doc.get("seeds", [0]),
                out_dir=doc.get("out", "runs"),
                asr_include_target=doc.get("asr_include_target", False),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid config {path}: {e}") from e
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for axis in ("poison_rates", "trigger_ratios", "seeds"):
            if not getattr(self, axis):
                raise ConfigError(f"sweep axis {axis} is empty")
        if self.thresholds is not None and not self.thresholds:
            raise ConfigError("sweep axis thresholds is empty")
        if isinstance(self.target_classes, list) and not self.target_classes:
            raise ConfigError("sweep axis target_classes is empty")
        if self.dataset != "cora" and not Path(self.dataset).is_dir():
            raise ConfigError(f"dataset path {self.dataset} does not exist")

    def load_dataset(self) -> GraphBundle:
        return cora() if self.dataset == "cora" else load_bundle(self.dataset)


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:g}"


def cell_key(dataset: str, model: str, variant: str, target_class: int,
             pr: float, ratio: float, threshold: float | None, seed: int) -> str:
    thr = "none" if threshold is None else f"{threshold:g}"
    return (f"{dataset}_{model}_{variant}_c{target_class}"
            f"_pr{pr:g}_tr{ratio:g}_T{thr}_s{seed}")


def expand_cells(cfg: ExperimentConfig, num_classes: int) -> list[dict]:
    classes = list(range(num_classes)) if cfg.target_classes == "all" \
        else list(cfg.target_classes)
    thresholds = cfg.thresholds if cfg.thresholds is not None else [None]
    cells = []
    for c in classes:
        for pr in cfg.poison_rates:
            for ratio in cfg.trigger_ratios:
                for thr in thresholds:
                    for seed in cfg.seeds:
                        cells.append({"target_class": c, "pr": pr, "ratio": ratio,
                                      "threshold": thr, "seed": seed})
    return cells


def run_cell(bundle: GraphBundle, cfg: ExperimentConfig, cell: dict,
             cell_dir: Path, clean_model: TrainedModel | None = None) -> dict:
    """Execute one cell, write its artifacts, and return its CSV row."""
    seed = cell["seed"]
    tc = TrainConfig(**cfg.train, seed=seed)
    row = {"dataset": bundle.dataset_name, "model": cfg.model.arch,
           "variant": cfg.variant, "target_class": cell["target_class"],
           "pr": _fmt(cell["pr"]), "trigger_ratio": _fmt(cell["ratio"]),
           "threshold": _fmt(cell["threshold"]), "seed": seed,
           "asr": "", "ca": "", "cad": "", "daa": "", "dpa": "", "error": ""}
    try:
        trigger = select_trigger(bundle, cell["target_class"], cell["ratio"],
                                 cfg.variant, seed=seed)
        plan = make_plan(bundle, cell["target_class"], cell["pr"], cfg.variant,
                         seed=seed)
        report = evaluate_cell(bundle, plan, trigger, cfg.model, tc,
                               cell["threshold"], attack_seed=seed,
                               include_target_class=cfg.asr_include_target,
                               clean_model=clean_model,
                               artifacts_dir=cell_dir)
        row.update(asr=f"{report.asr:.6f}", ca=f"{report.ca:.6f}",
                   cad=f"{report.cad:.6f}",
                   daa="" if report.daa is None else f"{report.daa:.6f}",
                   dpa="" if report.dpa is None else f"{report.dpa:.6f}")
        result = {k: row[k] for k in CSV_COLUMNS}
        result["wall_clock"] = report.wall_clock
        (cell_dir / "result.json").write_text(json.dumps(result, indent=2) + "\n")
    except Exception as e:  # cell failures must not abort the sweep
        log.error("cell failed: %s", e)
        row["error"] = f"{type(e).__name__}: {e}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        (cell_dir / "result.json").write_text(
            json.dumps({**row, "traceback": traceback.format_exc()}, indent=2) + "\n")
    return row


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   force: bool = False, jobs: int = 1) -> tuple[Path, int]:
    """Run every cell of the sweep; returns (results.csv path, failure count)."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = cfg.load_dataset()
    cells = expand_cells(cfg, bundle.num_classes)

    # the clean model depends only on (bundle, model config, train seed): share it
    clean_models: dict[int, TrainedModel] = {}
    for seed in sorted({c["seed"] for c in cells}):
        clean_models[seed] = train(bundle, cfg.model, TrainConfig(**cfg.train, seed=seed))

    def key_of(cell: dict) -> str:
        return cell_key(bundle.dataset_name, cfg.model.arch, cfg.variant,
                        cell["target_class"], cell["pr"], cell["ratio"],
                        cell["threshold"], cell["seed"])

    def execute(cell: dict) -> tuple[str, dict]:
        key = key_of(cell)
        cell_dir = out / "cells" / key
        if (cell_dir / "result.json").exists() and not force:
            cached = json.loads((cell_dir / "result.json").read_text())
            return key, {k: cached.get(k, "") for k in CSV_COLUMNS}
        cell_dir.mkdir(parents=True, exist_ok=True)
        return key, run_cell(bundle, cfg, cell, cell_dir, clean_models[cell["seed"]])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = dict(pool.map(execute, cells))
    else:
        rows = dict(execute(c) for c in cells)

    csv_path = out / "results.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for key in sorted(rows):
            writer.writerow(rows[key])
    failures = sum(1 for r in rows.values() if r["error"])
    return csv_path, failures


# -- aggregation -----------------------------------------------------------------


def summarize_results(csv_path: str | Path, out_dir: str | Path) -> Path:
    """Aggregate a results CSV into per-dataset class-mean tables.

    Pure aggregation: rows are grouped by every key except the target class and
    averaged over classes. The output table is plot-ready (one row per sweep
    point). Returns the path of the class-mean CSV.
    """
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or set(CSV_COLUMNS) - set(reader.fieldnames):
            raise ConfigError(f"{csv_path} does not match the results schema")
        rows = [r for r in reader]

    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        if r["error"]:
            continue
        key = (r["dataset"], r["model"], r["variant"], r["pr"],
               r["trigger_ratio"], r["threshold"], r["seed"])
        groups.setdefault(key, []).append(r)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mean_path = out_dir / "class_mean.csv"
    cols = ["dataset", "model", "variant", "pr", "trigger_ratio", "threshold",
            "seed", "n_classes", "mean_asr", "mean_ca", "mean_cad", "mean_daa",
            "mean_dpa"]
    with open(mean_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(cols)
        for key in sorted(groups):
            members = groups[key]
            def mean_of(col):
                vals = [float(r[col]) for r in members if r[col] != ""]
                return f"{np.mean(vals):.6f}" if vals else ""
            writer.writerow(list(key) + [len(members), mean_of("asr"), mean_of("ca"),
                                         mean_of("cad"), mean_of("daa"), mean_of("dpa")])
    return mean_path


def replay_cell(cell_dir: str | Path, bundle: GraphBundle) -> tuple[float, float]:
    """Re-run a cell from its artifacts; returns (recorded ASR, replayed ASR)."""
    cell_dir = Path(cell_dir)
    plan, trigger, seed, _ = load_attack(cell_dir / "attack.json")
    model = load_model(cell_dir)
    recorded = json.loads((cell_dir / "result.json").read_text())
    if recorded.get("error"):
        raise ValueError(f"cell {cell_dir.name} recorded an error; nothing to replay")

    poisoned = apply_attack(bundle, plan, trigger, seed=seed)
    retrained = train(poisoned, model.model_config, model.train_config)
    test_bundle, population = build_test_poison(poisoned, trigger, plan.target_class,
                                                plan.variant, seed=seed)
    replayed = asr(retrained, test_bundle, population, plan.target_class)
    return float(recorded["asr"]), replayed
