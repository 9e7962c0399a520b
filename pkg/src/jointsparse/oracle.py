"""Independent brute-force references for the closed-form routines.

None of these call into :mod:`jointsparse.proximity` or the solver; they
evaluate objectives directly so they can be used to check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChannelNorm


class OracleBoundaryError(RuntimeError):
    """A grid minimum sits on the search box boundary; enlarge the box."""


def _norm_rows(Z, q):
    return np.linalg.norm(Z, ord=ChannelNorm.parse(q).ord, axis=-1)


def prox_objective(Z, x, v, q):
    """``||z - x||_2^2 + v ||z||_q`` for each row of ``Z``."""
    return np.sum((Z - x) ** 2, axis=-1) + v * _norm_rows(Z, q)


def _lattice(center, halfwidth, step, lo, hi):
    k0 = math.floor((center - halfwidth) / step)
    k1 = math.ceil((center + halfwidth) / step)
    pts = np.arange(k0, k1 + 1) * step
    return pts[(pts >= lo - 1e-12) & (pts <= hi + 1e-12)]


def brute_prox(x, v: float, q, box_halfwidth: float | None = None,
               step: float = 1e-3, points_per_side: int = 16) -> np.ndarray:
    """Grid minimiser of ``||z - x||^2 + v||z||_q`` over ``[-B, B]^M``.

    The search is exhaustive on a coarse lattice over the whole box and then
    on successively finer lattices (ratio 4) around the incumbent, each
    window spanning several cells of the previous lattice.  The final lattice
    is the multiples of ``step``, so the answer is a point of the global
    ``step`` grid.  Strong convexity keeps the minimiser inside the windows.
    """
    x = np.asarray(x, dtype=float).ravel()
    M = x.shape[0]
    if M > 3:
        raise ValueError("brute_prox is limited to M <= 3")
    if step <= 0:
        raise ValueError("step must be positive")
    if box_halfwidth is None:
        box_halfwidth = 1.5 * float(np.max(np.abs(x), initial=0.0)) + 1.0
    B = float(box_halfwidth)

    h = step
    while h * points_per_side < B:
        h *= 4
    center = np.zeros(M)
    window = B
    while True:
        axes = [_lattice(c, window, h, -B, B) for c in center]
        Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, M)
        f = prox_objective(Z, x, v, q)
        center = Z[int(np.argmin(f))]
        if h <= step * (1 + 1e-9):
            break
        window = 4 * h
        h /= 4
        if h < step:
            h = step
    if np.any(np.abs(center) >= B - step / 2):
        raise OracleBoundaryError(f"minimiser {center} touches the box of half-width {B}")
    return center


@dataclass(frozen=True)
class SubgradientCertificate:
    valid: bool
    defect: float


def subgradient_certificate(z, x, v: float, q, tol: float = 1e-9) -> SubgradientCertificate:
    """Check ``2(x - z)/v`` is a subgradient of ``||.||_q`` at ``z``.

    Uses the dual description: ``||xi||_{q'} <= 1`` and ``<xi, z> = ||z||_q``.
    """
    if not v > 0:
        raise ValueError("v must be positive")
    q = ChannelNorm.parse(q)
    z = np.asarray(z, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    xi = 2.0 * (x - z) / v
    dual_ord = {ChannelNorm.ONE: np.inf, ChannelNorm.TWO: 2, ChannelNorm.INF: 1}[q]
    defect = max(0.0, float(np.linalg.norm(xi, ord=dual_ord)) - 1.0)
    if np.any(z != 0):
        zq = float(np.linalg.norm(z, ord=q.ord))
        defect = max(defect, zq - float(xi @ z))
    return SubgradientCertificate(defect <= tol, defect)


@dataclass(frozen=True)
class GridResult:
    u: np.ndarray
    v: np.ndarray
    J: float
    on_boundary: bool


def grid_joint_minimizer(T, g, q, theta, rho, omega, u_axis, v_axes=None,
                         max_points: int = 10 ** 7, chunk: int = 2 ** 20) -> GridResult:
    """Exhaustive minimiser of the joint functional on a tiny instance.

    Parameters
    ----------
    T : ndarray of shape (n_measurements, n_indices * n_channels)
        Dense forward matrix acting on ``u.ravel()``.
    g : ndarray of shape (n_measurements,)
    theta, rho, omega : ndarray of shape (n_indices,)
    u_axis : 1-D grid used for every entry of ``u``
    v_axes : list of 1-D grids, one per index (default ``[0, rho]`` step 1e-3)
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    g = np.asarray(g, dtype=float).ravel()
    theta, rho, omega = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (theta, rho, omega))
    L = theta.shape[0]
    M = T.shape[1] // L
    u_axis = np.asarray(u_axis, dtype=float)
    if v_axes is None:
        v_axes = [np.linspace(0, r, int(round(r / 1e-3)) + 1) for r in rho]
    axes = [u_axis] * (L * M) + [np.asarray(a, dtype=float) for a in v_axes]
    sizes = [len(a) for a in axes]
    total = math.prod(sizes)
    if total > max_points:
        raise ValueError(f"grid has {total} points, limit is {max_points}")

    best_J, best_flat = math.inf, 0
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        idx = np.unravel_index(flat, sizes)
        P = np.column_stack([a[i] for a, i in zip(axes, idx)])
        U = P[:, :L * M]
        V = P[:, L * M:]
        disc = np.sum((U @ T.T - g) ** 2, axis=1)
        Ur = U.reshape(-1, L, M)
        phi = (V * _norm_rows(Ur, q) + omega * np.sum(Ur ** 2, axis=2)
               + theta * (rho - V) ** 2).sum(axis=1)
        J = disc + phi
        k = int(np.argmin(J))
        if J[k] < best_J:
            best_J, best_flat = float(J[k]), int(flat[k])
    idx = np.unravel_index(best_flat, sizes)
    point = np.array([a[i] for a, i in zip(axes, idx)])
    on_boundary = any(i in (0, len(u_axis) - 1) for i in idx[:L * M])
    return GridResult(point[:L * M].reshape(L, M), point[L * M:], best_J, on_boundary)


def dense_svd_norm(matrix) -> float:
    """Largest singular value of a dense matrix (LAPACK SVD)."""
    A = np.asarray(matrix, dtype=float)
    if max(A.shape) > 200:
        raise ValueError("dense_svd_norm is meant for matrices up to 200 x 200")
    return float(np.linalg.svd(A, compute_uv=False)[0])


def phi_single(x, y, omega, theta, rho, q):
    """Per-index sparsity measure evaluated pointwise (broadcasting over rows)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return y * _norm_rows(x, q) + omega * np.sum(x ** 2, axis=-1) + theta * (rho - y) ** 2


def midpoint_gap(x1, y1, x2, y2, omega, theta, rho, q):
    """``(Phi(p1) + Phi(p2))/2 - Phi(mid)``; negative values violate convexity."""
    mid = phi_single((np.asarray(x1) + x2) / 2, (np.asarray(y1) + y2) / 2, omega, theta, rho, q)
    return (phi_single(x1, y1, omega, theta, rho, q) + phi_single(x2, y2, omega, theta, rho, q)) / 2 - mid


def construct_convexity_violation(omega: float, theta: float, rho: float, q, M: int):
    """Two points whose midpoint breaks convexity of ``Phi_lam`` when
    ``omega*theta`` is below its threshold.

    Moves along a ray where the q-norm is linear: the all-ones direction for
    q = 1, a coordinate axis otherwise, with ``y`` decreasing at the rate that
    minimises the curvature.  Returns ``(x1, y1, x2, y2)``.
    """
    q = ChannelNorm.parse(q)
    if q is ChannelNorm.ONE:
        d = np.ones(M)
    else:
        d = np.zeros(M)
        d[0] = 1.0
    s = float(np.sum(d))            # slope of ||t d||_q in t
    e = -s / (2 * theta)            # y slope minimising the second derivative
    t_end = rho / abs(e)            # keeps y = rho + e t >= 0
    return np.zeros(M), float(rho), t_end * d, float(rho + e * t_end)
