"""Robust stochastic optimization by spectral gradient filtering.

Wraps black-box base learners (closed-form ridge, projected subgradient
descent for hinge/logistic) in an outlier-removal loop driven by the
top singular direction of the centered per-sample gradient matrix,
together with contamination attacks, baseline defenses, and a seeded
experiment harness.
"""

from .attacks import AttackSpec, attack_label_flip, attack_ridge
from .baselines import (
    BASELINE_KINDS,
    RansacConfig,
    baseline_scores,
    run_baseline,
    run_ransac,
)
from .core import (
    SeverConfig,
    SeverOutcome,
    run_robust_gd,
    run_sever,
    run_sever_best_of,
)
from .data import (
    Dataset,
    compute_p,
    gen_classification,
    gen_regression,
    load_csv,
    load_provenance,
    robust_center_scale,
    save_csv,
    save_provenance,
    save_scores,
    test_error,
)
from .filtering import (
    FilterConfig,
    ScoreReport,
    compute_scores,
    randomized_filter,
    robust_mean,
    top_p_filter,
)
from .learners import (
    LearnerConfig,
    achieved_gamma,
    fit_ridge_closed_form,
    fit_subgradient,
)
from .losses import LossModel
from .sweep import run_sweep, save_results

__version__ = "0.1.0"

__all__ = [
    "AttackSpec",
    "BASELINE_KINDS",
    "Dataset",
    "FilterConfig",
    "LearnerConfig",
    "LossModel",
    "RansacConfig",
    "ScoreReport",
    "SeverConfig",
    "SeverOutcome",
    "achieved_gamma",
    "attack_label_flip",
    "attack_ridge",
    "baseline_scores",
    "compute_p",
    "compute_scores",
    "fit_ridge_closed_form",
    "fit_subgradient",
    "gen_classification",
    "gen_regression",
    "load_csv",
    "load_provenance",
    "randomized_filter",
    "robust_center_scale",
    "robust_mean",
    "run_baseline",
    "run_ransac",
    "run_robust_gd",
    "run_sever",
    "run_sever_best_of",
    "run_sweep",
    "save_csv",
    "save_provenance",
    "save_results",
    "save_scores",
    "test_error",
    "top_p_filter",
]
