"""Similarity-based edge pruning and the retrain-after-pruning evaluation.

The defender removes every undirected edge whose endpoint feature cosine
similarity falls strictly below a threshold, then retrains from scratch on the
cropped graph. Similarities are computed on the features the defender actually
observes, i.e. post-injection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bundle import GraphBundle, edge_cosine_similarities, symmetrize_edges
from .models import ModelConfig, TrainConfig, TrainedModel
from .train import accuracy, train
from .attack import PoisonPlan, TriggerSpec, build_test_poison


@dataclass
class PruneReport:
    threshold: float
    edges_examined: int
    edges_removed: int
    removed_edges: np.ndarray  # (r, 2) array, i < j
    victim_incident_fraction: Optional[float] = None

    def to_json(self, path: str | Path) -> None:
        doc = {
            "threshold": self.threshold,
            "edges_examined": self.edges_examined,
            "edges_removed": self.edges_removed,
            "removed_edges": self.removed_edges.tolist(),
            "victim_incident_fraction": self.victim_incident_fraction,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def prune_low_similarity_edges(g: GraphBundle, threshold: float,
                               poisoned_nodes: np.ndarray | None = None
                               ) -> tuple[GraphBundle, PruneReport]:
    """Drop every edge with endpoint cosine similarity < threshold.

    Equality keeps the edge. Features, labels, and masks pass through
    untouched. When ``poisoned_nodes`` is given, the report records what
    fraction of the removed edges touches one of them.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [-1, 1]")
    edges = g.edge_array()
    sims = edge_cosine_similarities(g, edges)
    drop = sims < threshold
    kept = edges[~drop]
    removed = edges[drop]
    indptr, indices, _, _ = symmetrize_edges(kept, g.num_nodes)
    pruned = g.with_adjacency(indptr, indices)

    fraction = None
    if poisoned_nodes is not None and removed.shape[0] > 0:
        hits = np.isin(removed, np.asarray(poisoned_nodes)).any(axis=1)
        fraction = float(hits.mean())
    elif poisoned_nodes is not None:
        fraction = 0.0
    report = PruneReport(float(threshold), int(edges.shape[0]), int(removed.shape[0]),
                         removed, fraction)
    return pruned, report


def defense_pipeline(clean: GraphBundle, poisoned: GraphBundle, threshold: float,
                     mc: ModelConfig, tc: TrainConfig, plan: PoisonPlan,
                     trigger: TriggerSpec, *, backdoor_model: TrainedModel | None = None,
                     attack_seed: int = 0, include_target_class: bool = False
                     ) -> tuple[float, float, PruneReport]:
    """Prune the observed (poisoned) training graph, retrain, and measure.

    Returns (daa, dpa, prune_report):

    * daa — attack success rate of the retrained model against the trigger-
      bearing evaluation population, inferred over the pruned graph;
    * dpa — clean-test accuracy of the unpruned backdoor model minus that of
      the pruned retrain, both measured on trigger-free features (the clean
      bundle carrying the pruned adjacency), so threshold -1 gives exactly 0.
    """
    pruned, report = prune_low_similarity_edges(poisoned, threshold, plan.victims)
    defended = train(pruned, mc, tc)
    if backdoor_model is None:
        backdoor_model = train(poisoned, mc, tc)

    test_bundle, population = build_test_poison(pruned, trigger, plan.target_class,
                                                plan.variant, seed=attack_seed,
                                                include_target_class=include_target_class)
    from .metrics import asr  # local import to avoid a cycle
    daa = asr(defended, test_bundle, population, plan.target_class)

    clean_pruned = clean.with_adjacency(pruned.indptr, pruned.indices)
    ca_backdoor = accuracy(backdoor_model, clean, clean.test_mask)
    ca_defended = accuracy(defended, clean_pruned, clean_pruned.test_mask)
    dpa = ca_backdoor - ca_defended
    return daa, dpa, report
