"""Additive contamination generators.

Both attacks only ever append rows: every sample present in the input
reappears unchanged, and exactly round(eps * n) outliers are added,
flagged in the provenance metadata. Provenance is ground truth for
evaluation; defenses never see it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

ATTACK_KINDS = ("ridge_alpha_beta", "label_flip_cluster")


@dataclass(frozen=True)
class AttackSpec:
    eps: float  # fraction of the clean sample count added as outliers
    kind: str
    alpha: float = 1.0
    beta: float = 1.0
    noise_scale: float | None = None  # None: 0.01 * median feature scale
    cluster_center: np.ndarray | None = None
    seed: int | None = 0

    def __post_init__(self):
        if not 0.0 < self.eps <= 0.3:
            raise ValueError("eps must lie in (0, 0.3]")
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind == "ridge_alpha_beta" and self.alpha <= 0:
            raise ValueError("ridge attack requires alpha > 0")
        if self.noise_scale is not None and self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")


def n_outliers(eps: float, n: int) -> int:
    """round(eps * n), half away from zero."""
    return int(np.floor(eps * n + 0.5))


def _default_noise_scale(X: np.ndarray) -> float:
    # small perturbation relative to the median per-coordinate spread
    med = np.median(X, axis=0)
    scale = 1.4826 * np.median(np.abs(X - med), axis=0)
    return 0.01 * float(np.median(scale))


def _append(data: Dataset, X_bad: np.ndarray, y_bad: np.ndarray) -> Dataset:
    n_bad = X_bad.shape[0]
    prov = data.provenance
    if prov is None:
        prov = np.zeros(data.n, dtype=bool)
    return Dataset(
        np.vstack([data.X, X_bad]),
        np.concatenate([data.y, y_bad]),
        np.concatenate([data.active, np.ones(n_bad, dtype=bool)]),
        np.concatenate([prov, np.ones(n_bad, dtype=bool)]),
    )


def attack_ridge(data: Dataset, spec: AttackSpec) -> Dataset:
    """Append identical responses-cancelling outliers.

    Every outlier sits at (1 / (alpha * n_bad)) * sum_i y_i x_i plus a
    small Gaussian perturbation, with response -beta. With alpha == beta
    the cross-moment X^T y of the corrupted set vanishes, so the ridge
    fit collapses to w = 0 for any regularization strength.
    """
    if spec.kind != "ridge_alpha_beta":
        raise ValueError("spec.kind must be 'ridge_alpha_beta'")
    n_bad = n_outliers(spec.eps, data.n)
    if n_bad == 0:
        raise ValueError("attack budget empty")
    rng = np.random.default_rng(spec.seed)
    X = data.active_X
    y = data.active_y
    base = (X.T @ y) / (spec.alpha * n_bad)
    noise = spec.noise_scale
    if noise is None:
        noise = _default_noise_scale(X)
    X_bad = base[None, :] + noise * rng.standard_normal((n_bad, data.d))
    y_bad = np.full(n_bad, -spec.beta)
    return _append(data, X_bad, y_bad)


def attack_label_flip(data: Dataset, spec: AttackSpec) -> Dataset:
    """Append a mislabeled point cluster.

    The cluster sits at spec.cluster_center (default: the mean of the
    minority class) and carries the label opposite to the class whose
    mean is nearest the center, i.e. the wrong label for that location.
    Each injected point gets an independent Gaussian perturbation.
    """
    if spec.kind != "label_flip_cluster":
        raise ValueError("spec.kind must be 'label_flip_cluster'")
    ya = data.active_y
    if not np.all(np.isin(ya, (-1.0, 1.0))):
        raise ValueError("non-binary labels; attack needs y in {-1, +1}")
    n_bad = n_outliers(spec.eps, data.n)
    if n_bad == 0:
        raise ValueError("attack budget empty")
    rng = np.random.default_rng(spec.seed)
    X = data.active_X

    means = {lab: X[ya == lab].mean(axis=0) for lab in (-1.0, 1.0) if np.any(ya == lab)}
    if spec.cluster_center is not None:
        center = np.asarray(spec.cluster_center, dtype=np.float64)
        if center.shape != (data.d,):
            raise ValueError("cluster_center dimension mismatch")
    else:
        n_plus = int((ya > 0).sum())
        minority = 1.0 if n_plus <= ya.size - n_plus else -1.0
        center = means[minority]
    nearest = min(means, key=lambda lab: np.linalg.norm(means[lab] - center))
    flip = -nearest

    noise = spec.noise_scale
    if noise is None:
        noise = _default_noise_scale(X)
    X_bad = center[None, :] + noise * rng.standard_normal((n_bad, data.d))
    y_bad = np.full(n_bad, flip)
    return _append(data, X_bad, y_bad)
