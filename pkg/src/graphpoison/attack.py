"""Clean-label feature-trigger construction, poison-set selection, and injection.

The default attack copies the largest-valued non-zero features of the
highest-degree training node of the target class and writes them into victim
rows at the same positions, leaving labels and structure untouched. Variants
change one knob at a time: the source node (min_degree), which features are
picked (min_feature / random_feature), where they land (random_position), or
the labeling discipline (dirty_label).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bundle import GraphBundle, max_degree_node_in_class, min_degree_node_in_class

log = logging.getLogger(__name__)

VARIANTS = (
    "max_feature",      # default: top-value features of the max-degree source
    "random_position",  # same trigger, but injected at per-victim random positions
    "min_degree",       # source node is the minimum-degree node of the class
    "min_feature",      # smallest non-zero features instead of largest
    "random_feature",   # seeded random choice among non-zero features
    "dirty_label",      # victims drawn from all classes and relabeled to the target
)

CLEAN_LABEL_VARIANTS = tuple(v for v in VARIANTS if v != "dirty_label")


@dataclass(frozen=True)
class TriggerSpec:
    """A set of (feature index, value) pairs lifted from one source node."""

    source_node: int
    indices: np.ndarray
    values: np.ndarray
    ratio: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float32)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.size == 0:
            raise ValueError("trigger must contain at least one feature")
        if idx.shape != val.shape:
            raise ValueError("indices and values must align")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("trigger indices must be strictly increasing")
        if np.any(idx < 0):
            raise ValueError("trigger index out of range")
        if not np.all(np.isfinite(val)) or np.any(val <= 0):
            raise ValueError("trigger values must be finite and positive")

    @property
    def size(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class PoisonPlan:
    """Which nodes get the trigger and what happens to their labels."""

    target_class: int
    poison_rate: float
    victims: np.ndarray
    variant: str
    label_action: str = "keep"  # keep | overwrite

    def __post_init__(self):
        object.__setattr__(self, "victims", np.asarray(self.victims, dtype=np.int64))
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown attack variant {self.variant!r}")
        if self.label_action not in ("keep", "overwrite"):
            raise ValueError(f"unknown label action {self.label_action!r}")
        if self.variant in CLEAN_LABEL_VARIANTS and self.label_action != "keep":
            raise ValueError("clean-label variants never overwrite labels")
        if self.variant == "dirty_label" and self.label_action != "overwrite":
            raise ValueError("dirty_label requires label overwriting")

    def validate_against(self, g: GraphBundle) -> None:
        if self.victims.size and not g.train_mask[self.victims].all():
            raise ValueError("victims must be training nodes")
        if self.variant in CLEAN_LABEL_VARIANTS:
            if not np.all(g.labels[self.victims] == self.target_class):
                raise ValueError("clean-label victims must belong to the target class")


def trigger_size(ratio: float, d: int) -> int:
    """floor(ratio * d), at least 1."""
    k = int(ratio * d)
    if k < 1:
        raise ValueError(f"trigger ratio {ratio} selects no features for d={d}")
    return k


def select_trigger(g: GraphBundle, target_class: int, ratio: float,
                   variant: str = "max_feature", seed: int = 0) -> TriggerSpec:
    """Build the trigger from the source node's non-zero features.

    Features are ranked by value (descending by default, ascending for
    min_feature, seeded shuffle for random_feature; ranking ties keep
    ascending index order). If the source has fewer non-zeros than the trigger
    size, fresh indices are drawn uniformly from its zero positions with values
    uniform over the source's non-zero value interval.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown attack variant {variant!r}")
    k = trigger_size(ratio, g.num_features)
    picker = min_degree_node_in_class if variant == "min_degree" else max_degree_node_in_class
    source = picker(g, target_class, "train")

    row = g.features[source]
    nz = np.flatnonzero(row)
    if nz.size == 0:
        raise ValueError(f"source node {source} has no non-zero features")
    values = row[nz]

    rng = np.random.default_rng(seed)
    if variant == "min_feature":
        order = np.argsort(values, kind="stable")
    elif variant == "random_feature":
        order = rng.permutation(nz.size)
    else:
        order = np.argsort(-values, kind="stable")
    take = min(k, nz.size)
    chosen_idx = nz[order[:take]]
    chosen_val = values[order[:take]]

    if take < k:
        lo, hi = float(values.min()), float(values.max())
        zeros = np.setdiff1d(np.arange(g.num_features), nz, assume_unique=False)
        pad_idx = rng.choice(zeros, size=k - take, replace=False)
        pad_val = rng.uniform(lo, hi, size=k - take).astype(np.float32)
        chosen_idx = np.concatenate([chosen_idx, pad_idx])
        chosen_val = np.concatenate([chosen_val, pad_val])

    order = np.argsort(chosen_idx)
    return TriggerSpec(source, chosen_idx[order], chosen_val[order], ratio)


def select_poison_nodes(g: GraphBundle, target_class: int, poison_rate: float,
                        variant: str = "max_feature", seed: int = 0) -> np.ndarray:
    """Victim node ids; budget is max(1, floor(rate * train size)).

    Clean-label variants take the first N training nodes of the target class in
    ascending id order, capped at the class size. dirty_label samples N training
    nodes uniformly without replacement from all classes.
    """
    if not 0.0 < poison_rate <= 1.0:
        raise ValueError("poisoning rate must be in (0, 1]")
    train_ids = np.flatnonzero(g.train_mask)
    if train_ids.size == 0:
        raise ValueError("train split is empty")
    budget = max(1, int(poison_rate * train_ids.size))
    if variant == "dirty_label":
        rng = np.random.default_rng(seed)
        return rng.permutation(train_ids)[:budget]
    in_class = train_ids[g.labels[train_ids] == target_class]
    if in_class.size == 0:
        raise ValueError(f"class {target_class} has no training nodes")
    if budget > in_class.size:
        log.info("poison budget %d capped at class size %d", budget, in_class.size)
        budget = in_class.size
    return in_class[:budget]


def make_plan(g: GraphBundle, target_class: int, poison_rate: float,
              variant: str = "max_feature", seed: int = 0) -> PoisonPlan:
    victims = select_poison_nodes(g, target_class, poison_rate, variant, seed)
    action = "overwrite" if variant == "dirty_label" else "keep"
    plan = PoisonPlan(target_class, poison_rate, victims, variant, action)
    plan.validate_against(g)
    return plan


def inject_trigger(g: GraphBundle, victims: np.ndarray, t: TriggerSpec) -> GraphBundle:
    """Write the trigger values at the trigger positions of every victim row."""
    victims = np.asarray(victims, dtype=np.int64)
    if victims.size == 0:
        return g
    if victims.min() < 0 or victims.max() >= g.num_nodes:
        raise IndexError("victim id out of range")
    if t.indices.max() >= g.num_features:
        raise IndexError("trigger index out of range for this graph")
    feats = g.features.copy()
    feats[np.ix_(victims, t.indices)] = t.values.astype(np.float32)
    return g.with_features(feats)


def inject_trigger_random_positions(g: GraphBundle, victims: np.ndarray,
                                    t: TriggerSpec, seed: int = 0) -> GraphBundle:
    """Variant injection: per victim, a fresh seeded draw of k distinct positions.

    Values are written in ascending value order against the ascending position
    list; everything but the victim rows is untouched.
    """
    victims = np.asarray(victims, dtype=np.int64)
    if victims.size == 0:
        return g
    if victims.min() < 0 or victims.max() >= g.num_nodes:
        raise IndexError("victim id out of range")
    rng = np.random.default_rng(seed)
    vals = np.sort(t.values)
    feats = g.features.copy()
    for v in victims:
        pos = np.sort(rng.choice(g.num_features, size=t.size, replace=False))
        feats[v, pos] = vals
    return g.with_features(feats)


def apply_dirty_label(g: GraphBundle, victims: np.ndarray, target_class: int) -> GraphBundle:
    """Relabel victims to the target class; everything else unchanged."""
    if not 0 <= target_class < g.num_classes:
        raise ValueError(f"class {target_class} out of range [0, {g.num_classes})")
    victims = np.asarray(victims, dtype=np.int64)
    labels = g.labels.copy()
    labels[victims] = target_class
    return g.with_labels(labels)


def apply_attack(g: GraphBundle, plan: PoisonPlan, t: TriggerSpec,
                 seed: int = 0) -> GraphBundle:
    """Produce the poisoned training bundle a plan describes."""
    plan.validate_against(g)
    if plan.variant == "random_position":
        poisoned = inject_trigger_random_positions(g, plan.victims, t, seed=(seed, 0))
    else:
        poisoned = inject_trigger(g, plan.victims, t)
    if plan.label_action == "overwrite":
        poisoned = apply_dirty_label(poisoned, plan.victims, plan.target_class)
    return poisoned


def poison_test_set(g: GraphBundle, t: TriggerSpec, target_class: int,
                    include_target_class: bool = False) -> tuple[GraphBundle, np.ndarray]:
    """Inject the trigger into evaluation nodes; returns (bundle, population).

    The population is the test-mask nodes whose true label differs from the
    target class (or all test nodes with ``include_target_class``); it is the
    denominator of the attack success rate.
    """
    if not g.test_mask.any():
        raise ValueError("test split is empty")
    eligible = np.flatnonzero(g.test_mask) if include_target_class else \
        np.flatnonzero(g.test_mask & (g.labels != target_class))
    if eligible.size == 0:
        raise ValueError("no eligible evaluation nodes (all test nodes share the target class)")
    return inject_trigger(g, eligible, t), eligible


def poison_test_set_random_positions(g: GraphBundle, t: TriggerSpec, target_class: int,
                                     seed: int = 0, include_target_class: bool = False
                                     ) -> tuple[GraphBundle, np.ndarray]:
    """Evaluation-set counterpart of random-position injection."""
    if not g.test_mask.any():
        raise ValueError("test split is empty")
    eligible = np.flatnonzero(g.test_mask) if include_target_class else \
        np.flatnonzero(g.test_mask & (g.labels != target_class))
    if eligible.size == 0:
        raise ValueError("no eligible evaluation nodes (all test nodes share the target class)")
    return inject_trigger_random_positions(g, eligible, t, seed=(seed, 1)), eligible


def build_test_poison(g: GraphBundle, t: TriggerSpec, target_class: int, variant: str,
                      seed: int = 0, include_target_class: bool = False
                      ) -> tuple[GraphBundle, np.ndarray]:
    """Variant-aware evaluation poisoning (random_position randomizes here too)."""
    if variant == "random_position":
        return poison_test_set_random_positions(g, t, target_class, seed,
                                                include_target_class)
    return poison_test_set(g, t, target_class, include_target_class)


# -- replay artifact -------------------------------------------------------------


def save_attack(path: str | Path, plan: PoisonPlan, t: TriggerSpec,
                seed: int = 0, dataset: str = "") -> None:
    """attack.json: everything needed to replay the poisoning exactly."""
    doc = {
        "variant": plan.variant,
        "seed": seed,
        "dataset": dataset,
        "target_class": plan.target_class,
        "poison_rate": plan.poison_rate,
        "label_action": plan.label_action,
        "trigger_ratio": t.ratio,
        "source_node": t.source_node,
        "indices": t.indices.tolist(),
        "values": [float(v) for v in t.values],
        "victims": plan.victims.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_attack(path: str | Path) -> tuple[PoisonPlan, TriggerSpec, int, str]:
    doc = json.loads(Path(path).read_text())
    t = TriggerSpec(doc["source_node"], np.array(doc["indices"]),
                    np.array(doc["values"], dtype=np.float32), doc["trigger_ratio"])
    plan = PoisonPlan(doc["target_class"], doc["poison_rate"],
                      np.array(doc["victims"]), doc["variant"], doc["label_action"])
    return plan, t, int(doc["seed"]), doc.get("dataset", "")
