"""Comparison defenses sharing the remove-and-retrain loop.

All filter-style baselines differ from the spectral defense only in
how a sample's score is computed:

* l2: squared distance of the covariate from the (group) mean
* loss: per-sample loss at the current fit
* gradient: squared norm of the per-sample gradient
* gradientCentered: squared distance of the gradient from the mean
  gradient

noDefense fits once and removes nothing. RANSAC is not filter-based:
it fits many learners on uniform subsamples and picks one, either by
oracle test error (deliberately strengthened, and clearly labeled) or
by the honest median-train-loss rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from .core import SeverConfig, SeverOutcome, run_filter_loop
from .data import Dataset, test_error
from .filtering import ScoreReport
from .learners import achieved_gamma
from .losses import LossModel

BASELINE_KINDS = ("noDefense", "l2", "loss", "gradient", "gradientCentered", "ransac")

SCORE_KINDS = ("l2", "loss", "gradient", "gradientCentered")


def _degenerate_direction(d: int) -> np.ndarray:
    e1 = np.zeros(d)
    e1[0] = 1.0
    return e1


def baseline_scores(kind: str, model: LossModel, w, data, ids=None) -> ScoreReport:
    """Per-sample scores for a filter-style baseline.

    Scores are squared norms/distances so every defense shares the same
    squared units; the monotone square leaves removal order unchanged.
    The report's direction field is a placeholder unit vector.
    """
    if kind not in SCORE_KINDS:
        raise ValueError(f"no scores for baseline kind {kind!r}")
    if ids is None:
        ids = data.active_indices
    else:
        ids = np.asarray(ids, dtype=int)
    if ids.size == 0:
        raise ValueError("empty active set")
    X = data.X[ids]
    y = data.y[ids]
    if kind == "l2":
        scores = np.sum((X - X.mean(axis=0)) ** 2, axis=1)
    elif kind == "loss":
        scores = losses.point_losses(model, w, X, y)
    else:
        rows = losses.grad_rows(model, w, X, y)
        if kind == "gradientCentered":
            rows = rows - rows.mean(axis=0)
        scores = np.sum(rows**2, axis=1)
    return ScoreReport(ids, scores, _degenerate_direction(data.d), 0.0)


def run_baseline(
    kind: str, model: LossModel, data, learner, cfg: SeverConfig
) -> SeverOutcome:
    """Run a filter-style baseline (or noDefense) with the shared loop."""
    if kind not in BASELINE_KINDS or kind == "ransac":
        raise ValueError(f"unknown filter baseline {kind!r}")
    if kind == "noDefense":
        work = data.defense_view()
        w = learner(model, work)
        return SeverOutcome(
            w=w,
            removed_per_round=[],
            rounds_run=1,
            achieved_gamma=achieved_gamma(model, work, w),
            final_score_report=None,
            retained=work.active.copy(),
        )
    if cfg.variant != "practical":
        raise ValueError("filter baselines run in practical mode only")

    def score_fn(model_, w, work, ids, rng):
        return baseline_scores(kind, model_, w, work, ids=ids)

    return run_filter_loop(model, data, learner, cfg, score_fn)


@dataclass(frozen=True)
class RansacConfig:
    subsample_size: int | None = None  # default d + 5, set at run time
    num_rounds: int = 100
    selection: str = "median_train_loss"  # or oracle_test
    seed: int | None = 0

    def __post_init__(self):
        if self.selection not in ("oracle_test", "median_train_loss"):
            raise ValueError(f"unknown selection rule {self.selection!r}")
        if self.num_rounds < 1:
            raise ValueError("num_rounds must be positive")


def run_ransac(
    model: LossModel,
    data,
    learner,
    cfg: RansacConfig,
    test_data: Dataset | None = None,
) -> SeverOutcome:
    """Fit on uniform subsamples and keep the best fit.

    selection="oracle_test" reports the fit with the lowest test error;
    this peeks at the test set and exists as the strengthened variant
    for comparison studies. selection="median_train_loss" picks the fit
    minimizing the median per-sample training loss and never touches
    test_data.
    """
    work = data.defense_view()
    n_active = work.n_active
    size = cfg.subsample_size if cfg.subsample_size is not None else work.d + 5
    if size < 1 or size > n_active:
        raise ValueError(f"subsample_size {size} out of range (active count {n_active})")
    if cfg.selection == "oracle_test" and test_data is None:
        raise ValueError("oracle_test selection requires test_data")

    active_ids = work.active_indices
    ss = (
        cfg.seed
        if isinstance(cfg.seed, np.random.SeedSequence)
        else np.random.SeedSequence(cfg.seed)
    )
    children = ss.spawn(cfg.num_rounds)
    best_w = None
    best_value = np.inf
    for child in children:
        rng = np.random.default_rng(child)
        pick = rng.choice(active_ids, size=size, replace=False)
        sub = Dataset(work.X, work.y, np.isin(np.arange(work.n), pick))
        w = learner(model, sub)
        if cfg.selection == "oracle_test":
            value = test_error(model, w, test_data)
        else:
            value = float(
                np.median(losses.point_losses(model, w, work.active_X, work.active_y))
            )
        if value < best_value:
            best_value, best_w = value, w

    return SeverOutcome(
        w=best_w,
        removed_per_round=[],
        rounds_run=cfg.num_rounds,
        achieved_gamma=achieved_gamma(model, work, best_w),
        final_score_report=None,
        retained=work.active.copy(),
    )
