"""Spectral outlier scores and the filters that consume them.

A score report assigns every active sample the squared projection of
its centered gradient (or feature) row onto the top right singular
direction of the centered row matrix. Two removal rules operate on the
scores:

* randomized_filter draws a uniform threshold T on [0, max score] and
  removes every row whose score exceeds T, so each row is removed with
  probability score / max score. If the mean score is already below
  threshold_mult * sigma^2 the set is declared a fixed point and kept
  whole.
* top_p_filter deterministically removes the top ceil(p * count) rows,
  breaking score ties toward lower sample ids.

robust_mean iterates score-and-filter on a point cloud until a fixed
point (or a removal budget trips) and returns the survivor mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import center_rows, mean_rows, top_right_singular_vector

DEFAULT_THRESHOLD_MULT = 12.0


@dataclass
class ScoreReport:
    """Per-sample outlier scores plus the direction that produced them."""

    indices: np.ndarray  # sample ids, shape (k,)
    scores: np.ndarray  # nonnegative, shape (k,)
    direction: np.ndarray  # unit vector used for projection
    sigma_hat: float  # top singular value of the centered matrix / sqrt(k)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.indices.shape != self.scores.shape:
            raise ValueError("indices and scores must have equal length")


@dataclass(frozen=True)
class FilterConfig:
    sigma: float = 0.0  # spread bound of the uncorrupted rows
    threshold_mult: float = DEFAULT_THRESHOLD_MULT
    mode: str = "randomized"  # randomized | top_p
    p_fraction: float = 0.0
    seed: int | None = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.threshold_mult <= 0:
            raise ValueError("threshold_mult must be positive")
        if self.mode not in ("randomized", "top_p"):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if not 0.0 <= self.p_fraction < 1.0:
            raise ValueError("p_fraction must lie in [0, 1)")


class FilterDecision(NamedTuple):
    kept: np.ndarray  # sample ids kept
    removed: np.ndarray  # sample ids removed


def compute_scores(rows, ids=None, seed=0) -> ScoreReport:
    """Score each row by its squared projection on the top direction.

    rows is a (k, d) matrix; ids (default 0..k-1) labels the rows in the
    returned report. The rows are centered at their mean before the top
    right singular direction is extracted. A degenerate (all-equal) set
    of rows yields all-zero scores.
    """
    rows = np.asarray(rows, dtype=np.float64)
    mu = mean_rows(rows)
    centered = center_rows(rows, mu)
    result = top_right_singular_vector(centered, seed=seed)
    if ids is None:
        ids = np.arange(rows.shape[0])
    projections = centered @ result.v
    scores = projections**2
    sigma_hat = result.sigma / np.sqrt(rows.shape[0])
    return ScoreReport(np.asarray(ids), scores, result.v, float(sigma_hat))


def randomized_filter(
    report: ScoreReport, cfg: FilterConfig, rng: np.random.Generator | None = None
) -> FilterDecision:
    """Remove each sample with probability proportional to its score.

    Fixed point: when mean(scores) <= threshold_mult * sigma^2 nothing
    is removed. Otherwise T ~ Uniform[0, max score) and every sample
    with score > T goes, so the top-scoring sample is always removed
    and removal probabilities are exactly score / max score.
    """
    if report.scores.size == 0:
        raise ValueError("empty score report")
    if cfg.mode != "randomized":
        raise ValueError("randomized_filter needs cfg.mode == 'randomized'")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    scores = report.scores
    ids = report.indices
    threshold = cfg.threshold_mult * cfg.sigma**2
    if scores.mean() <= threshold:
        return FilterDecision(ids.copy(), np.empty(0, dtype=int))
    t = rng.uniform(0.0, scores.max())
    removed = scores > t
    return FilterDecision(ids[~removed], ids[removed])


def top_p_filter(report: ScoreReport, p_fraction: float) -> FilterDecision:
    """Remove the ceil(p * count) highest-scoring samples.

    Ties are broken by removing lower sample ids first, which keeps the
    rule deterministic.
    """
    if not 0.0 <= p_fraction < 1.0:
        raise ValueError("p_fraction must lie in [0, 1)")
    scores = report.scores
    ids = report.indices
    k = int(np.ceil(p_fraction * scores.size))
    if k == 0:
        return FilterDecision(ids.copy(), np.empty(0, dtype=int))
    # lexsort: primary key -scores (descending), tie key ids (ascending)
    order = np.lexsort((ids, -scores))
    removed = np.sort(ids[order[:k]])
    kept = np.sort(ids[order[k:]])
    return FilterDecision(kept, removed)


class RobustMeanResult(NamedTuple):
    mean: np.ndarray
    n_removed: int
    budget_exceeded: bool


def robust_mean(points, sigma: float, eps_budget: float, cfg: FilterConfig) -> RobustMeanResult:
    """Mean of a point cloud after iterative spectral outlier removal.

    Repeatedly scores the surviving points and applies the randomized
    filter until a fixed point. A removal budget of 3 * eps_budget * n
    points bounds the damage when the threshold is miscalibrated: on
    overrun the current survivor mean is returned with the flag set
    rather than aborting, since callers only need an approximate center.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if not 0.0 <= eps_budget <= 0.3:
        raise ValueError("eps_budget must lie in [0, 0.3]")
    cfg = FilterConfig(
        sigma=sigma,
        threshold_mult=cfg.threshold_mult,
        mode="randomized",
        p_fraction=cfg.p_fraction,
        seed=cfg.seed,
    )
    rng = np.random.default_rng(cfg.seed)
    budget = 3.0 * eps_budget * n
    alive = np.arange(n)
    removed_total = 0
    while True:
        report = compute_scores(points[alive], ids=alive, seed=cfg.seed)
        decision = randomized_filter(report, cfg, rng=rng)
        if decision.removed.size == 0:
            return RobustMeanResult(points[alive].mean(axis=0), removed_total, False)
        proposed = removed_total + decision.removed.size
        if proposed > budget or decision.kept.size < 1:
            return RobustMeanResult(points[alive].mean(axis=0), removed_total, True)
        removed_total = proposed
        alive = decision.kept
