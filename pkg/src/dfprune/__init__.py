"""Data-free structured pruning of dense networks with robustness-aware sampling."""

__version__ = "0.1.0"

from .model import (
    DenseLayer,
    LabeledDataset,
    Network,
    compact,
    forward,
    load_dataset,
    load_network,
    save_network,
)
from .intervals import (
    BoundsMap,
    Interval,
    IntervalVector,
    build_bounds_map,
    propagate_impact,
    pruning_impact,
    refresh_bounds,
)
from .saliency import CandidatePair, saliency, saliency_list
from .annealing import AnnealState, EnergyWeights, acceptance_rate, decide, energy
from .pruning import PruneTrace, PruningConfig, one_shot_baseline, prune_pair, run
from .evaluation import AttackConfig, EvalReport, evaluate_pair, fgsm

__all__ = [
    "AnnealState",
    "AttackConfig",
    "BoundsMap",
    "CandidatePair",
    "DenseLayer",
    "EnergyWeights",
    "EvalReport",
    "Interval",
    "IntervalVector",
    "LabeledDataset",
    "Network",
    "PruneTrace",
    "PruningConfig",
    "acceptance_rate",
    "build_bounds_map",
    "compact",
    "decide",
    "energy",
    "evaluate_pair",
    "fgsm",
    "forward",
    "load_dataset",
    "load_network",
    "one_shot_baseline",
    "propagate_impact",
    "prune_pair",
    "pruning_impact",
    "refresh_bounds",
    "run",
    "saliency",
    "saliency_list",
    "save_network",
]
