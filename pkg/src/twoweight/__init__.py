"""Two-weight inequalities for positive dyadic operators on finite trees."""
from .tree import (
    DyadicTree,
    ExponentConfig,
    Instance,
    MeasurePair,
    TreeTooLarge,
    active_collection,
    average,
    build_tree,
    localized_sum,
    node_measure,
    random_instance,
)
from .lpspaces import FNormSpec, f_norm, lp_norm
from .operator import NormEstimate, SolverConfig, apply_T, estimate_norm
from .wolff import WolffReport, dlbo_ratio, lambda_gamma, wolff_condition_value, wolff_potential
from .characterizations import CharacterizationReport, characterize
from .counterexamples import classify_series, run_large_gamma, run_small_gamma
from .io import load_instance, save_instance
from .suites import SuiteConfig, run_suite

__all__ = [
    "CharacterizationReport",
    "DyadicTree",
    "ExponentConfig",
    "FNormSpec",
    "Instance",
    "MeasurePair",
    "NormEstimate",
    "SolverConfig",
    "SuiteConfig",
    "TreeTooLarge",
    "WolffReport",
    "active_collection",
    "apply_T",
    "average",
    "build_tree",
    "characterize",
    "classify_series",
    "dlbo_ratio",
    "estimate_norm",
    "f_norm",
    "lambda_gamma",
    "load_instance",
    "localized_sum",
    "lp_norm",
    "node_measure",
    "random_instance",
    "run_large_gamma",
    "run_small_gamma",
    "run_suite",
    "save_instance",
    "wolff_condition_value",
    "wolff_potential",
]
