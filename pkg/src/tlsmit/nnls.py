"""Active-set nonnegative least squares (Lawson-Hanson)."""

from __future__ import annotations

import numpy as np

__all__ = ["nnls", "projected_gradient"]


def projected_gradient(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gradient of ``0.5 * |Ax - b|^2`` projected onto the feasible cone at ``x``."""
    g = A.T @ (A @ x - b)
    return np.where(x > 0, g, np.minimum(g, 0.0))


def nnls(
    A: np.ndarray, b: np.ndarray, tol: float = 1e-10, max_iter: int | None = None
) -> tuple[np.ndarray, float]:
    """Solve ``min |Ax - b|`` subject to ``x >= 0``.

    Stops when the infinity norm of the projected gradient is at most
    ``tol``.  Ties in the entering variable go to the lowest index.

    Returns
    -------
    x : ndarray
    rnorm : float
        Residual norm ``|Ax - b|``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError("b must have one entry per row of A")
    max_iter = 3 * n + 10 if max_iter is None else max_iter
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while np.any(~passive) and np.max(np.where(passive, -np.inf, w)) > tol:
        if it >= max_iter:
            break
        it += 1
        cand = np.where(passive, -np.inf, w)
        j = int(np.argmax(cand))  # argmax returns the first maximum
        passive[j] = True
        while True:
            s = np.zeros(n)
            idx = np.flatnonzero(passive)
            s[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if np.all(s[idx] > 0):
                break
            bad = idx[s[idx] <= 0]
            denom = x[bad] - s[bad]
            alpha = np.min(np.where(denom > 0, x[bad] / np.where(denom > 0, denom, 1.0), 0.0))
            x = x + alpha * (s - x)
            passive &= ~(x <= 1e-15)
            x[~passive] = 0.0
            if not passive.any():
                s = np.zeros(n)
                break
        x = s
        w = A.T @ (b - A @ x)
    return x, float(np.linalg.norm(A @ x - b))
