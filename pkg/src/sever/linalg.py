"""Minimal dense linear algebra: row means, row centering, and the top
right singular direction of a matrix via seeded power iteration.

Matrices are 2-d float ndarrays, row-major: one row per sample. Vectors
are 1-d float ndarrays. No wrapper types; callers pass plain arrays.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 1000

# Iterates with norm below this are treated as collapsed and restarted.
_COLLAPSE_EPS = 1e-12


def as_matrix(m) -> np.ndarray:
    """Validate and return m as a finite 2-d float64 array."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def as_vector(v) -> np.ndarray:
    """Validate and return v as a finite 1-d float64 array."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def mean_rows(m) -> np.ndarray:
    """Arithmetic mean of the rows of m."""
    m = as_matrix(m)
    if m.shape[0] == 0:
        raise ValueError("empty input")
    return m.mean(axis=0)


def center_rows(m, mu) -> np.ndarray:
    """Subtract mu from every row of m."""
    m = as_matrix(m)
    mu = as_vector(mu)
    if mu.shape[0] != m.shape[1]:
        raise ValueError(
            f"dimension mismatch: matrix has {m.shape[1]} columns, "
            f"center has {mu.shape[0]}"
        )
    return m - mu[None, :]


class TopSingularResult(NamedTuple):
    v: np.ndarray  # unit right singular direction, shape (cols,)
    sigma: float  # ||m @ v||_2
    converged: bool
    degenerate: bool  # all-zero input, direction is arbitrary


def top_right_singular_vector(
    m,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed=0,
) -> TopSingularResult:
    """Top right singular direction of m by power iteration on m^T m.

    The Gram matrix is never materialized; each step applies m and m^T.
    The start vector is a seeded random unit vector, so results are
    deterministic given the seed. If the iterate collapses (norm below
    1e-12) a fresh random vector is drawn. Non-convergence within
    max_iters is reported via the converged flag rather than raised:
    callers tolerate an approximate direction.

    An all-zero matrix has no preferred direction; e_1 is returned with
    sigma 0 and the degenerate flag set.
    """
    m = as_matrix(m)
    rows, cols = m.shape
    if rows < 1 or cols < 1:
        raise ValueError("empty input")
    if tol <= 0:
        raise ValueError("tol must be positive")

    if not np.any(m):
        e1 = np.zeros(cols)
        e1[0] = 1.0
        return TopSingularResult(e1, 0.0, True, True)

    rng = np.random.default_rng(seed)

    def random_unit():
        while True:
            x = rng.standard_normal(cols)
            nx = np.linalg.norm(x)
            if nx > _COLLAPSE_EPS:
                return x / nx

    v = random_unit()
    sigma_prev = -1.0
    converged = False
    for _ in range(max_iters):
        w = m.T @ (m @ v)  # one power step on the Gram matrix
        nw = np.linalg.norm(w)
        if nw < _COLLAPSE_EPS:
            # started (numerically) in the nullspace; restart
            v = random_unit()
            sigma_prev = -1.0
            continue
        v_next = w / nw
        sigma = np.linalg.norm(m @ v_next)
        aligned = abs(float(v_next @ v)) >= 1.0 - tol
        sigma_settled = abs(sigma - sigma_prev) <= tol * max(1.0, sigma)
        v = v_next
        sigma_prev = sigma
        if aligned and sigma_settled:
            converged = True
            break

    sigma = float(np.linalg.norm(m @ v))
    return TopSingularResult(v, sigma, converged, False)
