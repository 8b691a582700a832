"""Estimate interpretable finite-state decision models from choice data."""

from .analysis import (builtin_strategy, identifiability, model_error, variable_importance,
                       accessible_mask)
from .codec import (Layout, binary_to_gray, chromosome_length, decode_chromosome,
                    encode_chromosome, gray_to_binary)
from .dataset import (Dataset, Schema, SplitSpec, binarize, fold_assignments, load_table,
                      split_train_test, write_table)
from .fitness import accuracy, evaluate_population
from .fsm import Fsm, column_index, predict_sequence, to_dot
from .ga import EvolveResult, GaConfig, evolve
from .selection import HyperGrid, cross_validate, importance_guided_reduction, subset_search
from .simulate import ExperimentDesign, MatchConfig, play_match, recovery_study, run_experiment

__all__ = [
    "Dataset", "EvolveResult", "ExperimentDesign", "Fsm", "GaConfig", "HyperGrid", "Layout",
    "MatchConfig", "Schema", "SplitSpec", "accessible_mask", "accuracy", "binarize",
    "binary_to_gray", "builtin_strategy", "chromosome_length", "column_index",
    "cross_validate", "decode_chromosome", "encode_chromosome", "evaluate_population",
    "evolve", "fold_assignments", "gray_to_binary", "identifiability",
    "importance_guided_reduction", "load_table", "model_error", "play_match",
    "predict_sequence", "recovery_study", "run_experiment", "split_train_test",
    "subset_search", "to_dot", "variable_importance", "write_table",
]
