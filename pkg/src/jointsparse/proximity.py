"""Exact projections onto l_q balls and the joint shrinkage operators.

All row-wise routines act on a ``(n_indices, n_channels)`` array and treat
each row as an independent vector in R^M; the single-vector functions are
thin wrappers around them.
"""

from __future__ import annotations

import numpy as np

from .core import ChannelNorm, check_coefficients, check_weights, row_norms


def _as_rows(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(1, -1) if x.ndim <= 1 else x


def _radius_column(r, n_rows, name):
    r = np.asarray(r, dtype=float)
    r = np.full(n_rows, float(r)) if r.ndim == 0 else r.ravel()
    if r.shape[0] != n_rows:
        raise ValueError(f"{name} has length {r.shape[0]}, expected {n_rows}")
    if np.any(r < 0):
        raise ValueError(f"{name} must be nonnegative")
    return r


def _shrink_inf_rows(X, half):
    """Sorted clipping scheme for the max-norm prox, row by row.

    ``half`` is v/2 per row.  Entries are ranked by magnitude with a stable
    sort so equal magnitudes keep ascending index order.
    """
    L, M = X.shape
    a = np.abs(X)
    order = np.argsort(-a, axis=1, kind="stable")
    s = np.take_along_axis(a, order, axis=1)
    cs = np.cumsum(s, axis=1)
    k = np.arange(M)
    # n = k+1 is admissible iff (sum of the k larger entries) - k*s_k <= v/2;
    # n = 1 is always admissible, and admissibility is a prefix property.
    admissible = (cs - s) - k * s <= half[:, None]
    admissible[:, 0] = True
    n = np.logical_and.accumulate(admissible, axis=1).sum(axis=1)
    rows = np.arange(L)
    t = (cs[rows, n - 1] - half) / n
    sx = np.take_along_axis(X, order, axis=1)
    out_sorted = np.where(k[None, :] < n[:, None], np.sign(sx) * t[:, None], sx)
    out = np.empty_like(X)
    np.put_along_axis(out, order, out_sorted, axis=1)
    out[cs[:, -1] <= half] = 0.0
    return out


def shrink_rows(X, v, q) -> np.ndarray:
    """Row-wise ``argmin_z ||z - x||_2^2 + v ||z||_q``."""
    q = ChannelNorm.parse(q)
    X = _as_rows(X)
    v = _radius_column(v, X.shape[0], "v")
    half = 0.5 * v
    if q is ChannelNorm.ONE:
        out = np.sign(X) * np.maximum(np.abs(X) - half[:, None], 0.0)
    elif q is ChannelNorm.TWO:
        nrm = row_norms(X, q)
        keep = nrm > half
        factor = np.zeros_like(nrm)
        factor[keep] = (nrm[keep] - half[keep]) / nrm[keep]
        out = X * factor[:, None]
    else:
        out = _shrink_inf_rows(X, half)
    # v = 0 is the identity
    zero = v == 0
    if np.any(zero):
        out[zero] = X[zero]
    return out


def project_ball_rows(X, radius, q) -> np.ndarray:
    """Row-wise Euclidean projection onto ``{z : ||z||_q <= radius}``."""
    q = ChannelNorm.parse(q)
    X = _as_rows(X)
    r = _radius_column(radius, X.shape[0], "radius")
    if q is ChannelNorm.TWO:
        nrm = row_norms(X, q)
        out = X.copy()
        outside = nrm > r
        out[outside] *= (r[outside] / nrm[outside])[:, None]
        return out
    if q is ChannelNorm.INF:
        return np.clip(X, -r[:, None], r[:, None])
    # l1 ball through the max-norm prox: P_r^1(x) = x - S_{2r}^inf(x)
    return X - _shrink_inf_rows(X, r)


def shrink(x, v: float, q) -> np.ndarray:
    """Shrink a single channel vector (see :func:`shrink_rows`)."""
    x = np.asarray(x, dtype=float)
    return shrink_rows(x.ravel(), v, q)[0]


def project_ball(x, radius: float, q) -> np.ndarray:
    """Project a single vector onto the l_q ball of the given radius."""
    x = np.asarray(x, dtype=float)
    return project_ball_rows(x.ravel(), radius, q)[0]


def threshold_block(u, v, omega, q) -> np.ndarray:
    """Thresholding operator of the inner iteration.

    Row ``lam`` of the result is ``shrink(u[lam], v[lam], q) / (1 + omega[lam])``.

    Parameters
    ----------
    u : ndarray of shape (n_indices, n_channels)
    v, omega : array-like of shape (n_indices,) or scalar
        Nonnegative sparsity weights and quadratic damping.
    q : ChannelNorm or {"1", "2", "inf"}
    """
    u = check_coefficients(u)
    L = u.shape[0]
    v = check_weights(v, L, name="v")
    omega = check_weights(omega, L, name="omega")
    return shrink_rows(u, v, q) / (1.0 + omega)[:, None]


def radius_lipschitz_constant(q, M: int) -> float:
    """Lipschitz constant of ``r -> P_r^q(x)`` in the Euclidean norm."""
    if M < 1:
        raise ValueError("M must be at least 1")
    return 1.0 if ChannelNorm.parse(q) is ChannelNorm.TWO else float(np.sqrt(M))
