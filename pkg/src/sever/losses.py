"""Per-sample losses and gradients for the three supported objectives.

Conventions, shared by every consumer in this package:

* squared:  l(w; x, y) = (w.x - y)^2 / 2,      grad = x (w.x - y)
* hinge:    l(w; x, y) = max(0, 1 - y (w.x)),  grad = -y x inside the
  margin (y (w.x) < 1) and the zero vector otherwise, including exactly
  at the kink.
* logistic: l(w; x, y) = (-ln(phi(t) phi(-t)) - y t) / 2 with t = w.x
  and phi the sigmoid, grad = (phi(t) - phi(-t) - y) x / 2.

The l2 regularizer lam * ||w||^2 / 2 belongs to the learner objective,
never to the per-sample values: outlier scoring downstream consumes raw
per-sample gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("squared", "hinge", "logistic")


@dataclass(frozen=True)
class LossModel:
    """A task definition: loss kind plus the l2 regularization weight."""

    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    @property
    def is_classification(self) -> bool:
        return self.kind in ("hinge", "logistic")


def sigmoid(t):
    """Numerically stable logistic function, elementwise.

    For t >= 0 uses 1 / (1 + e^-t); otherwise e^t / (1 + e^t), so the
    exponent never overflows.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def _margins(w, X):
    # (X * w).sum(1) rather than X @ w: the per-row pairwise reduction is
    # independent of the batch size, so one-sample and batched gradient
    # computations agree bitwise.
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return (X * w[None, :]).sum(axis=1)


def point_losses(model: LossModel, w, X, y) -> np.ndarray:
    """Vector of per-sample losses at w. X is (n, d), y is (n,)."""
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(over="ignore"):  # overflow is reported as an exception
        t = _margins(w, X)
        if model.kind == "squared":
            vals = 0.5 * (t - y) ** 2
        elif model.kind == "hinge":
            vals = np.maximum(0.0, 1.0 - y * t)
        else:
            # -ln(phi(t) phi(-t)) = |t| + 2 ln(1 + e^-|t|), stable for large |t|
            a = np.abs(t)
            vals = 0.5 * (a + 2.0 * np.log1p(np.exp(-a)) - y * t)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite loss value (overflow)")
    return vals


def loss(model: LossModel, w, x, y: float) -> float:
    """Loss of a single sample (x, y) at parameters w."""
    return float(point_losses(model, w, np.asarray(x, dtype=np.float64)[None, :], [y])[0])


def grad_rows(model: LossModel, w, X, y) -> np.ndarray:
    """Matrix whose row j is the per-sample (sub)gradient at sample j."""
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.shape[1] != w.shape[0]:
        raise ValueError(
            f"dimension mismatch: samples have {X.shape[1]} features, w has {w.shape[0]}"
        )
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(over="ignore"):
        t = _margins(w, X)
        if model.kind == "squared":
            coef = t - y
        elif model.kind == "hinge":
            coef = np.where(y * t < 1.0, -y, 0.0)
        else:
            coef = 0.5 * (sigmoid(t) - sigmoid(-t) - y)
        rows = coef[:, None] * X
    if not np.all(np.isfinite(rows)):
        raise FloatingPointError("non-finite gradient (overflow)")
    return rows


def grad(model: LossModel, w, x, y: float) -> np.ndarray:
    """(Sub)gradient of a single sample's loss at w."""
    return grad_rows(model, w, np.asarray(x, dtype=np.float64)[None, :], [y])[0]


def grad_matrix(model: LossModel, w, data) -> np.ndarray:
    """Per-sample gradient rows over the active samples of a dataset.

    Row j corresponds to the j-th active sample in active-mask order.
    """
    if data.n_active == 0:
        raise ValueError("empty active set")
    return grad_rows(model, w, data.active_X, data.active_y)


def mean_objective(model: LossModel, w, X, y) -> float:
    """Mean per-sample loss plus the regularizer lam ||w||^2 / 2."""
    w = np.asarray(w, dtype=np.float64)
    reg = 0.5 * model.lam * float(w @ w)
    return float(point_losses(model, w, X, y).mean()) + reg


def mean_grad(model: LossModel, w, X, y) -> np.ndarray:
    """Gradient of mean_objective: mean per-sample gradient + lam w."""
    w = np.asarray(w, dtype=np.float64)
    return grad_rows(model, w, X, y).mean(axis=0) + model.lam * w
