"""The five evaluation rates and the end-to-end measurement of one experiment cell."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import GraphBundle
from .models import ModelConfig, TrainConfig, TrainedModel
from .train import accuracy, predict, train
from .attack import PoisonPlan, TriggerSpec, apply_attack, build_test_poison


@dataclass
class EvalReport:
    """One (dataset, model, attack, defense) measurement."""

    dataset: str
    model: str
    variant: str
    target_class: int
    poison_rate: float
    trigger_ratio: float
    threshold: Optional[float]
    asr: float
    ca: float
    cad: float
    daa: Optional[float] = None
    dpa: Optional[float] = None
    train_seed: int = 0
    attack_seed: int = 0
    wall_clock: float = 0.0

    def __post_init__(self):
        for name in ("asr", "ca"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not -1.0 <= self.cad <= 1.0:
            raise ValueError(f"cad={self.cad} outside [-1, 1]")


def asr(model: TrainedModel, poisoned_test: GraphBundle, population: np.ndarray,
        target_class: int) -> float:
    """Fraction of the evaluation population classified as the target class."""
    population = np.asarray(population)
    if population.size == 0:
        raise ValueError("evaluation population is empty")
    preds = predict(model, poisoned_test)
    return float((preds[population] == target_class).mean())


def cad(clean_model_ca: float, backdoor_model_ca: float) -> float:
    """Clean-accuracy drop; negative when the backdoor model is more accurate."""
    _check_rate(clean_model_ca)
    _check_rate(backdoor_model_ca)
    return clean_model_ca - backdoor_model_ca


def dpa(backdoor_ca: float, pruned_retrained_ca: float) -> float:
    """Clean-accuracy loss caused by the pruning defense."""
    _check_rate(backdoor_ca)
    _check_rate(pruned_retrained_ca)
    return backdoor_ca - pruned_retrained_ca


def _check_rate(v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"rate {v} outside [0, 1]")


def evaluate_cell(clean: GraphBundle, plan: PoisonPlan, trigger: TriggerSpec,
                  mc: ModelConfig, tc: TrainConfig, threshold: float | None = None,
                  *, attack_seed: int = 0, include_target_class: bool = False,
                  clean_model: TrainedModel | None = None,
                  artifacts_dir=None) -> EvalReport:
    """Train the clean/backdoor pair and fill every applicable rate.

    Both trainings share the seed in ``tc`` so the accuracy drop isolates the
    poisoning. Passing a precomputed ``clean_model`` (same bundle and configs)
    is a pure cache: training is deterministic, so the result is unchanged.
    With ``artifacts_dir`` the attack, backdoor model, and prune report are
    written out for replay.
    """
    t0 = time.perf_counter()
    poisoned = apply_attack(clean, plan, trigger, seed=attack_seed)
    f_c = clean_model if clean_model is not None else train(clean, mc, tc)
    f_b = train(poisoned, mc, tc)

    ca_clean_model = accuracy(f_c, clean, clean.test_mask)
    ca_backdoor = accuracy(f_b, clean, clean.test_mask)

    test_bundle, population = build_test_poison(poisoned, trigger, plan.target_class,
                                                plan.variant, seed=attack_seed,
                                                include_target_class=include_target_class)
    attack_rate = asr(f_b, test_bundle, population, plan.target_class)

    daa_value = dpa_value = None
    prune_report = None
    if threshold is not None:
        from .defense import defense_pipeline
        daa_value, dpa_value, prune_report = defense_pipeline(
            clean, poisoned, threshold, mc, tc, plan, trigger,
            backdoor_model=f_b, attack_seed=attack_seed,
            include_target_class=include_target_class)

    if artifacts_dir is not None:
        from pathlib import Path
        from .attack import save_attack
        from .train import save_model
        out = Path(artifacts_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_attack(out / "attack.json", plan, trigger, seed=attack_seed,
                    dataset=clean.dataset_name)
        save_model(f_b, out)
        if prune_report is not None:
            prune_report.to_json(out / "defense.json")

    return EvalReport(
        dataset=clean.dataset_name,
        model=mc.arch,
        variant=plan.variant,
        target_class=plan.target_class,
        poison_rate=plan.poison_rate,
        trigger_ratio=trigger.ratio,
        threshold=threshold,
        asr=attack_rate,
        ca=ca_backdoor,
        cad=cad(ca_clean_model, ca_backdoor),
        daa=daa_value,
        dpa=dpa_value,
        train_seed=tc.seed,
        attack_seed=attack_seed,
        wall_clock=time.perf_counter() - t0,
    )


def mean_class_asr(reports: list[EvalReport]) -> float:
    """Unweighted mean of per-class attack success rates."""
    if not reports:
        raise ValueError("no reports to average")
    return float(np.mean([r.asr for r in reports]))
