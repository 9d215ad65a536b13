"""Clean-label feature-trigger backdoor attacks on graph node classification.

The package trains small GNNs from scratch on citation-style graphs, poisons
them by copying high-value features of a well-connected node into same-class
victims, evaluates a similarity-based edge-pruning defense, and measures the
whole exchange with five rates (ASR, CA, CAD, DAA, DPA).
"""

from .bundle import (BundleError, GraphBundle, build_bundle, cosine_similarity,
                     degree, load_bundle, max_degree_node_in_class,
                     min_degree_node_in_class, save_bundle)
from .sbm import SbmParams, generate_sbm
from .models import ModelConfig, TrainConfig, TrainedModel, forward, init_model
from .train import (DivergenceError, accuracy, load_model, masked_cross_entropy,
                    predict, predict_proba, save_model, train)
from .attack import (PoisonPlan, TriggerSpec, apply_attack, apply_dirty_label,
                     inject_trigger, inject_trigger_random_positions, make_plan,
                     poison_test_set, select_poison_nodes, select_trigger)
from .defense import PruneReport, defense_pipeline, prune_low_similarity_edges
from .metrics import EvalReport, asr, cad, dpa, evaluate_cell, mean_class_asr
from .datasets import cora, load_npz_graph
from .experiment import ExperimentConfig, run_experiment, summarize_results

__version__ = "0.1.0"
