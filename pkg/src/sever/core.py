"""The remove-and-retrain meta-algorithm around a black-box learner.

One round is: fit the learner on the active samples, build the matrix
of per-sample loss gradients at the fit, score the rows spectrally,
remove the highest-scoring samples, repeat. Two variants:

* theoretical: the randomized filter runs until it removes nothing
  (a fixed point certified by the mean score falling below the
  sigma-scaled threshold). Each non-final round removes at least one
  sample, so the loop runs at most n times.
* practical: remove the top p fraction for exactly num_rounds rounds.

With per_class set, centering, direction, and removal quotas are
computed independently within each label class.

run_robust_gd is the alternative scheme: plain projected gradient
descent where every step's gradient is a robustly estimated mean of
the per-sample gradients, with no permanent sample removal.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .filtering import (
    DEFAULT_THRESHOLD_MULT,
    FilterConfig,
    ScoreReport,
    compute_scores,
    randomized_filter,
    robust_mean,
    top_p_filter,
)
from .learners import LearnerConfig, achieved_gamma, criticality, project_to_ball
from .losses import LossModel


@dataclass(frozen=True)
class SeverConfig:
    variant: str = "practical"  # practical | theoretical
    sigma: float | None = None  # theoretical-mode spread bound
    p_fraction: float = 0.01  # practical per-round removal fraction
    num_rounds: int = 1  # practical round budget
    per_class: bool = False
    threshold_mult: float = DEFAULT_THRESHOLD_MULT
    eps_budget: float = 0.1  # robust-gradient variant: per-step removal budget
    warm_start: bool = False  # pass the previous round's w to the learner
    seed: int | None = 0

    def __post_init__(self):
        if self.variant not in ("practical", "theoretical"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "practical":
            if self.num_rounds < 1:
                raise ValueError("practical variant needs num_rounds >= 1")
            if not 0.0 < self.p_fraction < 1.0:
                raise ValueError("practical variant needs p_fraction in (0, 1)")
        else:
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("theoretical variant needs sigma > 0")


@dataclass
class SeverOutcome:
    w: np.ndarray
    removed_per_round: list  # one array of sample ids per round
    rounds_run: int
    achieved_gamma: float  # criticality of w over the retained samples
    final_score_report: ScoreReport | None
    score_history: list = field(default_factory=list)  # one merged report per round
    retained: np.ndarray | None = None  # active mask after the final round
    budget_flags: list = field(default_factory=list)  # robust-gd only

    @property
    def removed_total(self) -> np.ndarray:
        if not self.removed_per_round:
            return np.empty(0, dtype=int)
        return np.concatenate(self.removed_per_round)


def _accepts_w_init(learner) -> bool:
    try:
        return "w_init" in inspect.signature(learner).parameters
    except (TypeError, ValueError):
        return False


def _class_groups(work, per_class: bool) -> list[np.ndarray]:
    """Active sample ids, grouped by label when per_class is set."""
    ids = work.active_indices
    if not per_class:
        return [ids]
    labels = work.y[ids]
    return [ids[labels == lab] for lab in np.unique(labels)]


def _merge_reports(reports: list[ScoreReport]) -> ScoreReport:
    """Concatenate per-group reports into one audit record.

    The direction of the group with the largest sigma_hat is kept as
    the representative one; scores and ids are simply concatenated.
    """
    if len(reports) == 1:
        return reports[0]
    top = max(reports, key=lambda r: r.sigma_hat)
    return ScoreReport(
        np.concatenate([r.indices for r in reports]),
        np.concatenate([r.scores for r in reports]),
        top.direction,
        top.sigma_hat,
    )


def run_filter_loop(model, data, learner, cfg: SeverConfig, score_fn) -> SeverOutcome:
    """Shared remove-and-retrain engine.

    score_fn(model, w, work, ids, rng) -> ScoreReport scores the given
    active sample ids at the current fit; the spectral scorer and every
    filter-style baseline plug in here. The input dataset is never
    mutated, and the working copy carries no provenance flags.
    """
    work = data.defense_view()
    rng = np.random.default_rng(cfg.seed)
    practical = cfg.variant == "practical"
    max_rounds = cfg.num_rounds if practical else work.n_active
    warm_capable = cfg.warm_start and _accepts_w_init(learner)

    removed_per_round: list[np.ndarray] = []
    score_history: list[ScoreReport] = []
    w = None

    rounds = 0
    while rounds < max_rounds:
        if work.n_active < 2:
            raise RuntimeError("filtered everything; attack budget or p too large")
        if warm_capable and w is not None:
            w = learner(model, work, w_init=w)
        else:
            w = learner(model, work)
        rounds += 1

        reports = []
        removed_groups = []
        for gids in _class_groups(work, cfg.per_class):
            if gids.size == 0:
                continue
            report = score_fn(model, w, work, gids, rng)
            reports.append(report)
            if practical:
                decision = top_p_filter(report, cfg.p_fraction)
            else:
                fcfg = FilterConfig(
                    sigma=cfg.sigma, threshold_mult=cfg.threshold_mult, seed=cfg.seed
                )
                decision = randomized_filter(report, fcfg, rng=rng)
            removed_groups.append(decision.removed)

        score_history.append(_merge_reports(reports))
        removed = (
            np.sort(np.concatenate(removed_groups))
            if removed_groups
            else np.empty(0, dtype=int)
        )
        removed_per_round.append(removed)
        if not practical and removed.size == 0:
            break  # fixed point: filter kept everything
        work.deactivate(removed)

    gamma = achieved_gamma(model, work, w)
    return SeverOutcome(
        w=w,
        removed_per_round=removed_per_round,
        rounds_run=rounds,
        achieved_gamma=gamma,
        final_score_report=score_history[-1] if score_history else None,
        score_history=score_history,
        retained=work.active.copy(),
    )


def spectral_score_fn(model, w, work, ids, rng) -> ScoreReport:
    """Score rows of the per-sample gradient matrix at w."""
    rows = losses.grad_rows(model, w, work.X[ids], work.y[ids])
    return compute_scores(rows, ids=ids, seed=rng)


def run_sever(model: LossModel, data, learner, cfg: SeverConfig) -> SeverOutcome:
    """Harden a base learner by spectral gradient filtering.

    learner is a callable (model, dataset) -> w fitting the active
    samples. Returns the final fit plus the full audit trail (per-round
    removals and score reports).
    """
    if data.n_active < 2:
        raise ValueError("need at least two active samples")
    return run_filter_loop(model, data, learner, cfg, spectral_score_fn)


def run_sever_best_of(
    model: LossModel, data, learner, cfg: SeverConfig, repeats: int
) -> SeverOutcome:
    """Success amplification: rerun with derived seeds, keep the best.

    The randomized filter succeeds with constant probability per run;
    repeating and selecting the outcome with the smallest retained-set
    criticality amplifies that. Default usage is a single run; this
    wrapper is opt-in.
    """
    if repeats < 1:
        raise ValueError("repeats must be positive")
    children = np.random.SeedSequence(cfg.seed).spawn(repeats)
    best = None
    for child in children:
        attempt = replace(cfg, seed=child)
        out = run_filter_loop(model, data, learner, attempt, spectral_score_fn)
        if best is None or out.achieved_gamma < best.achieved_gamma:
            best = out
    return best


def run_robust_gd(
    model: LossModel, data, cfg: SeverConfig, learner_cfg: LearnerConfig
) -> SeverOutcome:
    """Projected gradient descent on robustly estimated mean gradients.

    Each epoch estimates the mean per-sample gradient by iterative
    spectral filtering (no samples are permanently removed), takes one
    projected step, and stops once the criticality measure reaches
    gamma_target. Budget overruns of the inner estimator are recorded
    per epoch in budget_flags.
    """
    if data.n_active < 2:
        raise ValueError("need at least two active samples")
    if cfg.sigma is None or cfg.sigma <= 0:
        raise ValueError("robust gradient descent needs sigma > 0")
    work = data.defense_view()
    radius = learner_cfg.domain_radius
    rng = np.random.default_rng(cfg.seed)

    w = project_to_ball(np.zeros(work.d), radius)
    budget_flags: list[bool] = []
    gamma = np.inf
    g0 = None
    epochs = 0
    for epochs in range(1, learner_cfg.max_epochs + 1):
        rows = losses.grad_matrix(model, w, work)
        fcfg = FilterConfig(
            sigma=cfg.sigma,
            threshold_mult=cfg.threshold_mult,
            seed=int(rng.integers(2**62)),
        )
        est = robust_mean(rows, cfg.sigma, cfg.eps_budget, fcfg)
        budget_flags.append(est.budget_exceeded)
        g = est.mean + model.lam * w
        gamma = criticality(g, w, radius)
        if gamma <= learner_cfg.gamma_target:
            break
        gnorm = float(np.linalg.norm(g))
        if g0 is None:
            g0 = max(1.0, gnorm)
        elif gnorm > 1e6 * g0:
            raise RuntimeError("diverged; reduce step_size")
        w = project_to_ball(w - learner_cfg.step_size * g, radius)

    return SeverOutcome(
        w=w,
        removed_per_round=[],
        rounds_run=epochs,
        achieved_gamma=float(gamma),
        final_score_report=None,
        score_history=[],
        retained=work.active.copy(),
        budget_flags=budget_flags,
    )
