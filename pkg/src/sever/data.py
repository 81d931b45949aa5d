"""Datasets, synthetic generators, robust preprocessing, and CSV I/O.

A Dataset bundles the feature matrix, responses, and the active-sample
mask that defenses shrink as they remove points. Provenance flags
(which rows were injected by an attack) ride along for evaluation only;
defense code paths operate on a view with the flags stripped, so no
defense can cheat by reading them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .filtering import FilterConfig, robust_mean
from .losses import LossModel

# Maximum per-round removal fraction; compute_p results are capped here
# so a badly imbalanced class ratio cannot filter everything.
P_CAP = 0.45


@dataclass
class Dataset:
    """Feature matrix plus responses with an active-sample mask."""

    X: np.ndarray
    y: np.ndarray
    active: np.ndarray = field(default=None)  # type: ignore[assignment]
    provenance: np.ndarray | None = None  # True where the row was injected

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-d")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must match number of rows of X")
        if self.active is None:
            self.active = np.ones(self.X.shape[0], dtype=bool)
        else:
            self.active = np.asarray(self.active, dtype=bool)
            if self.active.shape != (self.X.shape[0],):
                raise ValueError("active mask length must match number of rows")
        if self.provenance is not None:
            self.provenance = np.asarray(self.provenance, dtype=bool)
            if self.provenance.shape != (self.X.shape[0],):
                raise ValueError("provenance length must match number of rows")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def active_X(self) -> np.ndarray:
        return self.X[self.active]

    @property
    def active_y(self) -> np.ndarray:
        return self.y[self.active]

    def class_counts(self) -> tuple[int, int]:
        """(n_plus, n_minus) over the active samples."""
        ya = self.active_y
        n_plus = int((ya > 0).sum())
        return n_plus, ya.size - n_plus

    def deactivate(self, ids) -> None:
        self.active[np.asarray(ids, dtype=int)] = False

    def copy(self) -> "Dataset":
        prov = None if self.provenance is None else self.provenance.copy()
        return Dataset(self.X.copy(), self.y.copy(), self.active.copy(), prov)

    def defense_view(self) -> "Dataset":
        """Copy with provenance stripped; what defense code gets to see."""
        return Dataset(self.X.copy(), self.y.copy(), self.active.copy(), None)


def test_error(model: LossModel, w, data: Dataset) -> float:
    """Test metric at w: MSE for regression, 0/1 error for classification."""
    preds = data.active_X @ np.asarray(w, dtype=np.float64)
    ya = data.active_y
    if model.is_classification:
        signs = np.where(preds >= 0, 1.0, -1.0)  # sign(0) := +1
        return float(np.mean(signs != ya))
    return float(np.mean((preds - ya) ** 2))


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------


def gen_regression(n: int, d: int, noise: float, seed, n_test: int = 200):
    """Gaussian design with a unit-sphere ground truth.

    x ~ N(0, I_d); y = x . w* + noise * z with z standard normal; the
    test split shares w* and is drawn from the same stream.
    Returns (train, test, w_star).
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(d)
    w_star /= np.linalg.norm(w_star)

    def draw(count):
        X = rng.standard_normal((count, d))
        y = X @ w_star + noise * rng.standard_normal(count)
        return Dataset(X, y)

    return draw(n), draw(n_test), w_star


def gen_classification(n: int, d: int, noise: float, seed, n_test: int = 200):
    """Same design as gen_regression with y = sign(x . w* + noise * z).

    sign(0) is defined as +1. Returns (train, test, w_star).
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(d)
    w_star /= np.linalg.norm(w_star)

    def draw(count):
        X = rng.standard_normal((count, d))
        margins = X @ w_star + noise * rng.standard_normal(count)
        y = np.where(margins >= 0, 1.0, -1.0)
        return Dataset(X, y)

    return draw(n), draw(n_test), w_star


def split_dataset(data: Dataset, n_test: int, seed) -> tuple["Dataset", "Dataset"]:
    """Random train/test split of a loaded dataset.

    User-supplied corpora arrive as a single CSV; the split is seeded so
    experiments on them stay reproducible. Provenance flags follow their
    rows.
    """
    if not 0 < n_test < data.n:
        raise ValueError("n_test must be strictly between 0 and the sample count")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    test_ids, train_ids = perm[:n_test], perm[n_test:]

    def take(ids):
        prov = None if data.provenance is None else data.provenance[ids]
        return Dataset(data.X[ids], data.y[ids], data.active[ids], prov)

    return take(train_ids), take(test_ids)


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

SCALE_FLOOR = 1e-12


class CenterScaleResult(NamedTuple):
    train: Dataset
    test: Dataset
    center: np.ndarray
    scale: np.ndarray


def robust_center_scale(
    train: Dataset,
    test: Dataset,
    eps: float,
    do_scale: bool = False,
    seed=0,
) -> CenterScaleResult:
    """Center both splits by a robust mean of the train features.

    The center is computed by iterative spectral filtering over the
    active train rows, so planted outliers cannot drag it far. When
    do_scale is set, each coordinate is divided by a robust scale
    (median absolute deviation * 1.4826, floored at 1e-12). Test data
    is transformed with train statistics only.
    """
    if not 0.0 <= eps <= 0.3:
        raise ValueError("eps must lie in [0, 0.3]")
    Xtr = train.active_X
    # Conservative spread bound for the filter threshold: overestimating
    # it only makes the centering gentler.
    mads = 1.4826 * np.median(np.abs(Xtr - np.median(Xtr, axis=0)), axis=0)
    sigma = float(max(np.max(mads), SCALE_FLOOR))
    cfg = FilterConfig(sigma=sigma, seed=seed)
    center = robust_mean(Xtr, sigma, eps, cfg).mean

    if do_scale:
        centered = Xtr - center
        scale = 1.4826 * np.median(np.abs(centered), axis=0)
        scale = np.maximum(scale, SCALE_FLOOR)
    else:
        scale = np.ones(train.d)

    def transform(ds: Dataset) -> Dataset:
        out = ds.copy()
        out.X = (out.X - center) / scale
        return out

    return CenterScaleResult(transform(train), transform(test), center, scale)


def compute_p(n_plus: int, n_minus: int, eps: float, r: int) -> float:
    """Per-round removal fraction adjusted for class imbalance.

    p = (n_plus + n_minus) / min(n_plus, n_minus) * eps / r, capped at
    0.45 (with a warning) so extreme imbalance cannot remove everything.
    """
    if n_plus < 1 or n_minus < 1:
        raise ValueError("both classes must be nonempty")
    if r < 1:
        raise ValueError("r must be at least 1")
    p = (n_plus + n_minus) / min(n_plus, n_minus) * eps / r
    if p > P_CAP:
        warnings.warn(
            f"class-imbalance removal fraction {p:.3f} capped at {P_CAP}",
            stacklevel=2,
        )
        p = P_CAP
    return p


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------
# Dataset files carry no header; each row is x1,...,xd,y. Floats are
# written with 17 significant digits so a save/load round trip is exact.


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_csv(data: Dataset, path) -> None:
    with open(path, "w") as fh:
        for i in range(data.n):
            cells = [_fmt(v) for v in data.X[i]]
            cells.append(_fmt(data.y[i]))
            fh.write(",".join(cells) + "\n")


def load_csv(path) -> Dataset:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
                if width < 2:
                    raise ValueError(
                        f"{path}: line {lineno}: need at least one feature and a label"
                    )
            elif len(cells) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: non-numeric cell") from exc
    if not rows:
        raise ValueError(f"{path}: no rows")
    arr = np.asarray(rows, dtype=np.float64)
    return Dataset(arr[:, :-1], arr[:, -1])


def save_provenance(data: Dataset, path) -> None:
    """Sidecar CSV of ground-truth outlier flags: header id,is_outlier."""
    flags = data.provenance
    if flags is None:
        flags = np.zeros(data.n, dtype=bool)
    with open(path, "w") as fh:
        fh.write("id,is_outlier\n")
        for i, f in enumerate(flags):
            fh.write(f"{i},{int(f)}\n")


def load_provenance(path, n: int) -> np.ndarray:
    flags = np.zeros(n, dtype=bool)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "id,is_outlier":
            raise ValueError(f"{path}: expected header 'id,is_outlier'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                sid, flag = line.split(",")
                flags[int(sid)] = bool(int(flag))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: line {lineno}: bad provenance row") from exc
    return flags


def save_scores(score_history, path, provenance=None) -> None:
    """Per-round score dump: header round,id,score,is_outlier.

    score_history is a sequence of ScoreReport, one per round; the
    is_outlier column is 0 when no provenance is supplied.
    """
    with open(path, "w") as fh:
        fh.write("round,id,score,is_outlier\n")
        for rnd, report in enumerate(score_history, start=1):
            for sid, sc in zip(report.indices, report.scores):
                flag = 0 if provenance is None else int(provenance[sid])
                fh.write(f"{rnd},{sid},{_fmt(sc)},{flag}\n")
