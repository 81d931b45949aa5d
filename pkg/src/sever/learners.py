"""Base learners satisfying the approximate-critical-point contract.

A learner maps the active samples of a dataset to parameters w whose
mean regularized (sub)gradient is small: either exactly (closed-form
ridge) or up to a target tolerance gamma (projected subgradient
descent). achieved_gamma measures that criticality after the fact,
honoring the domain constraint: at the boundary of the parameter ball
only inward directions count, so an inward-pointing radial gradient
component is discounted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import losses
from .losses import LossModel

_BOUNDARY_EPS = 1e-9
_MIN_STEP = 1e-14


@dataclass(frozen=True)
class LearnerConfig:
    gamma_target: float = 1e-6
    max_epochs: int = 500
    step_size: float = 0.1
    domain_radius: float | None = None  # None means unconstrained
    seed: int | None = 0

    def __post_init__(self):
        if self.gamma_target <= 0:
            raise ValueError("gamma_target must be positive")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.domain_radius is not None and self.domain_radius <= 0:
            raise ValueError("domain_radius must be positive")


def project_to_ball(w, radius: float | None) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if radius is None:
        return w
    norm = np.linalg.norm(w)
    if norm <= radius:
        return w
    return w * (radius / norm)


def criticality(g, w, radius: float | None) -> float:
    """Largest descent rate over feasible unit directions at w.

    Unconstrained this is ||g||. On the boundary of the radius ball,
    a gradient pointing inward is partially absorbed by the constraint:
    only its tangential component can still be descended.
    """
    g = np.asarray(g, dtype=np.float64)
    gnorm = float(np.linalg.norm(g))
    if radius is None:
        return gnorm
    w = np.asarray(w, dtype=np.float64)
    wnorm = float(np.linalg.norm(w))
    if wnorm < radius - _BOUNDARY_EPS or wnorm == 0.0:
        return gnorm
    w_hat = w / wnorm
    radial = float(g @ w_hat)
    if radial >= 0:
        return gnorm
    return float(np.linalg.norm(g - radial * w_hat))


def achieved_gamma(model: LossModel, data, w, domain_radius: float | None = None) -> float:
    """Criticality of w for the mean regularized objective on the active set."""
    g = losses.mean_grad(model, w, data.active_X, data.active_y)
    return criticality(g, w, domain_radius)


def fit_ridge_closed_form(data, lam: float) -> np.ndarray:
    """Solve (X^T X / n + lam I) w = X^T y / n over the active samples.

    Uses a Cholesky factorization of the (symmetric positive definite)
    normal matrix. With lam == 0 a singular system raises.
    """
    if data.n_active < 1:
        raise ValueError("no active samples")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X = data.active_X
    y = data.active_y
    n = X.shape[0]
    A = X.T @ X / n + lam * np.eye(X.shape[1])
    b = X.T @ y / n
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular normal equations") from exc
    return scipy.linalg.cho_solve(factor, b)


class SubgradientResult(NamedTuple):
    w: np.ndarray
    gamma: float  # criticality achieved at w
    epochs: int
    converged: bool  # gamma <= gamma_target was reached
    objective_history: list  # accepted objective value per epoch


def fit_subgradient(
    model: LossModel, data, cfg: LearnerConfig, w_init=None
) -> SubgradientResult:
    """Full-batch projected (sub)gradient descent from w = 0 (or w_init).

    Constant step size, halved whenever a step would increase the mean
    regularized objective; a step is only accepted if it does not
    increase it, so the objective history is non-increasing. Stops as
    soon as the criticality measure drops to gamma_target, otherwise
    returns the best iterate seen when the epoch budget or the step
    size is exhausted.
    """
    if data.n_active < 1:
        raise ValueError("no active samples")
    X = data.active_X
    y = data.active_y
    radius = cfg.domain_radius

    start = np.zeros(data.d) if w_init is None else np.asarray(w_init, dtype=np.float64)
    w = project_to_ball(start, radius)
    obj = losses.mean_objective(model, w, X, y)
    step = cfg.step_size
    history = [obj]

    g = losses.mean_grad(model, w, X, y)
    g0 = max(1.0, float(np.linalg.norm(g)))
    best_w = w
    best_gamma = criticality(g, w, radius)

    epochs = 0
    for epochs in range(1, cfg.max_epochs + 1):
        gamma_now = criticality(g, w, radius)
        if gamma_now < best_gamma:
            best_gamma, best_w = gamma_now, w
        if gamma_now <= cfg.gamma_target:
            return SubgradientResult(w, gamma_now, epochs - 1, True, history)
        if np.linalg.norm(g) > 1e6 * g0:
            raise RuntimeError("diverged; reduce step_size")

        while True:
            w_next = project_to_ball(w - step * g, radius)
            obj_next = losses.mean_objective(model, w_next, X, y)
            if obj_next <= obj:
                break
            step *= 0.5
            if step < _MIN_STEP:
                # no descent possible at any step size; settle on best seen
                return SubgradientResult(best_w, best_gamma, epochs, False, history)
        w, obj = w_next, obj_next
        history.append(obj)
        g = losses.mean_grad(model, w, X, y)

    gamma_now = criticality(g, w, radius)
    if gamma_now < best_gamma:
        best_gamma, best_w = gamma_now, w
    return SubgradientResult(best_w, best_gamma, epochs, best_gamma <= cfg.gamma_target, history)
