"""Forward operators on joint coefficient fields.

A :class:`BlockOperator` maps a field ``u`` of shape ``(n_indices, M)`` to
``N`` measurement blocks, block ``j`` being ``sum_l T[j][l] @ u[:, l]``.
The scalar-channel blocks are :class:`scipy.sparse.linalg.LinearOperator`
instances, so dense matrices, the Haar synthesis and blur/decimation maps
compose with ``@`` and ``*``.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator
from sklearn.exceptions import ConvergenceWarning

from .core import check_coefficients, check_measurements

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.01


class BlockOperator:
    """N x M grid of scalar-channel operators, any of which may be ``None``.

    Parameters
    ----------
    blocks : list of N lists of M entries
        Each entry is ``None`` (zero block), an ndarray or a scipy
        ``LinearOperator`` of shape ``(range_size_j, n_indices)``.
    range_sizes : list of int, optional
        Needed only when some block row is entirely zero.
    scale : float, default=1.0
        Global factor applied to every block.
    """

    def __init__(self, blocks, range_sizes=None, scale=1.0, n_indices=None):
        rows = [list(row) for row in blocks]
        if not rows or not rows[0]:
            raise ValueError("blocks must be a non-empty N x M grid")
        M = len(rows[0])
        if any(len(row) != M for row in rows):
            raise ValueError("every block row needs the same number of channels")
        self.blocks = [[None if b is None else aslinearoperator(b) for b in row]
                       for row in rows]
        in_dims = {b.shape[1] for row in self.blocks for b in row if b is not None}
        if n_indices is not None:
            in_dims.add(int(n_indices))
        if len(in_dims) != 1:
            raise ValueError(f"blocks disagree on the number of indices: {sorted(in_dims)}")
        self.n_indices = in_dims.pop()
        self.n_channels = M
        sizes = []
        for j, row in enumerate(self.blocks):
            out = {b.shape[0] for b in row if b is not None}
            if range_sizes is not None:
                out.add(int(range_sizes[j]))
            if len(out) != 1:
                raise ValueError(f"block row {j} has inconsistent or unknown output size")
            sizes.append(out.pop())
        self.range_sizes = sizes
        self.scale = float(scale)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def domain_shape(self) -> tuple[int, int]:
        return (self.n_indices, self.n_channels)

    def apply(self, u) -> list[np.ndarray]:
        u = check_coefficients(u, lambda_count=self.n_indices, channels=self.n_channels)
        out = []
        for row, size in zip(self.blocks, self.range_sizes):
            acc = np.zeros(size)
            for ell, b in enumerate(row):
                if b is not None:
                    acc += b.matvec(u[:, ell])
            out.append(self.scale * acc)
        return out

    def adjoint(self, g) -> np.ndarray:
        g = check_measurements(g, self.range_sizes)
        u = np.zeros(self.domain_shape)
        for row, gj in zip(self.blocks, g):
            for ell, b in enumerate(row):
                if b is not None:
                    u[:, ell] += b.rmatvec(gj)
        return self.scale * u

    def normal(self, u) -> np.ndarray:
        """``T^* T u``."""
        return self.adjoint(self.apply(u))

    def scaled(self, factor: float) -> "BlockOperator":
        return BlockOperator(self.blocks, self.range_sizes, self.scale * factor,
                             n_indices=self.n_indices)

    def to_dense(self) -> np.ndarray:
        """Dense matrix acting on ``u.ravel()`` (row-major, index-major)."""
        L, M = self.domain_shape
        cols = []
        for k in range(L * M):
            e = np.zeros(L * M)
            e[k] = 1.0
            cols.append(np.concatenate(self.apply(e.reshape(L, M))))
        return np.column_stack(cols)

    def __repr__(self):
        return (f"BlockOperator(N={self.n_blocks}, M={self.n_channels}, "
                f"n_indices={self.n_indices}, scale={self.scale:g})")


def inner(g, h) -> float:
    """Inner product of two measurement lists."""
    return float(sum(np.dot(a, b) for a, b in zip(g, h)))


def identity_operator(n_indices: int, n_channels: int = 1) -> BlockOperator:
    eye = aslinearoperator(np.eye(n_indices))
    return BlockOperator([[eye if j == ell else None for ell in range(n_channels)]
                          for j in range(n_channels)])


def zero_operator(n_indices: int, n_channels: int, range_sizes) -> BlockOperator:
    return BlockOperator([[None] * n_channels for _ in range_sizes],
                         range_sizes=range_sizes, n_indices=n_indices)


def diagonal_operator(diag, n_channels: int = 1) -> BlockOperator:
    """The same diagonal matrix applied to every channel, one block per channel."""
    d = np.asarray(diag, dtype=float)
    D = aslinearoperator(np.diag(d))
    return BlockOperator([[D if j == ell else None for ell in range(n_channels)]
                          for j in range(n_channels)])


def shared_design_operator(X, n_channels: int) -> BlockOperator:
    """Multi-task model: every channel is measured by the same matrix ``X``."""
    A = aslinearoperator(np.asarray(X, dtype=float))
    return BlockOperator([[A if j == ell else None for ell in range(n_channels)]
                          for j in range(n_channels)])


# --- scalar-channel transforms ------------------------------------------------

def _haar_analysis_2d(img: np.ndarray, levels: int) -> np.ndarray:
    c = img.astype(float).copy()
    n = c.shape[0]
    s2 = np.sqrt(2.0)
    for _ in range(levels):
        blk = c[:n, :n]
        lo = (blk[0::2] + blk[1::2]) / s2
        hi = (blk[0::2] - blk[1::2]) / s2
        blk = np.vstack([lo, hi])
        lo = (blk[:, 0::2] + blk[:, 1::2]) / s2
        hi = (blk[:, 0::2] - blk[:, 1::2]) / s2
        c[:n, :n] = np.hstack([lo, hi])
        n //= 2
    return c


def _haar_synthesis_2d(coef: np.ndarray, levels: int) -> np.ndarray:
    c = coef.astype(float).copy()
    n = c.shape[0] >> (levels - 1) if levels > 0 else c.shape[0]
    s2 = np.sqrt(2.0)
    for _ in range(levels):
        blk = c[:n, :n]
        h = n // 2
        lo, hi = blk[:, :h], blk[:, h:]
        tmp = np.empty_like(blk)
        tmp[:, 0::2] = (lo + hi) / s2
        tmp[:, 1::2] = (lo - hi) / s2
        lo, hi = tmp[:h], tmp[h:]
        out = np.empty_like(blk)
        out[0::2] = (lo + hi) / s2
        out[1::2] = (lo - hi) / s2
        c[:n, :n] = out
        n *= 2
    return c


class HaarSynthesis(LinearOperator):
    """Orthonormal multi-level 2-D Haar synthesis (coefficients -> image).

    Coefficients use the usual in-place pyramid layout on a ``side x side``
    grid, flattened row-major.  The adjoint is the analysis transform.
    """

    def __init__(self, side: int, levels: int = 3):
        if levels < 0 or side % (1 << levels):
            raise ValueError(f"side {side} is not divisible by 2**{levels}")
        self.side = side
        self.levels = levels
        super().__init__(dtype=np.float64, shape=(side * side, side * side))

    def _matvec(self, x):
        c = np.asarray(x, dtype=float).reshape(self.side, self.side)
        return _haar_synthesis_2d(c, self.levels).ravel()

    def _rmatvec(self, y):
        img = np.asarray(y, dtype=float).reshape(self.side, self.side)
        return _haar_analysis_2d(img, self.levels).ravel()

    def _adjoint(self):
        return _HaarAnalysis(self)

    def scales(self) -> np.ndarray:
        """Scale index per coefficient: 0 for the coarse approximation, then
        1 for the coarsest details up to ``levels`` for the finest."""
        j = np.zeros((self.side, self.side), dtype=int)
        n = self.side
        for p in range(self.levels):
            j[:n, :n] = self.levels - p
            n //= 2
        j[:n, :n] = 0
        return j.ravel()


class _HaarAnalysis(LinearOperator):
    def __init__(self, synth: HaarSynthesis):
        self.synth = synth
        super().__init__(dtype=np.float64, shape=synth.shape[::-1])

    def _matvec(self, y):
        return self.synth._rmatvec(y)

    def _rmatvec(self, x):
        return self.synth._matvec(x)


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Normalised 1-D Gaussian taps; ``sigma = 0`` gives the identity tap."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return np.ones(1)
    if radius is None:
        radius = max(1, int(np.ceil(3 * sigma)))
    t = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _reflect_index(i: int, n: int) -> int:
    # half-sample symmetric extension: ... b a | a b c ... | c b ...
    period = 2 * n
    i %= period
    return i if i < n else period - 1 - i


def blur_decimate_matrix(kernel, n: int, factor: int) -> np.ndarray:
    """1-D convolution with mirror boundaries followed by keeping every
    ``factor``-th sample; shape ``(n // factor, n)``."""
    kernel = np.asarray(kernel, dtype=float).ravel()
    c = len(kernel) // 2
    C = np.zeros((n, n))
    for i in range(n):
        for k, w in enumerate(kernel):
            C[i, _reflect_index(i + k - c, n)] += w
    return C[::factor]


class BlurDecimate(LinearOperator):
    """Separable blur then decimation of a ``side x side`` image."""

    def __init__(self, kernel, side: int, factor: int):
        if factor < 1 or side % factor:
            raise ValueError(f"downsample factor {factor} must divide image side {side}")
        self.B = blur_decimate_matrix(kernel, side, factor)
        self.side = side
        self.low = side // factor
        super().__init__(dtype=np.float64, shape=(self.low ** 2, side * side))

    def _matvec(self, x):
        X = np.asarray(x, dtype=float).reshape(self.side, self.side)
        return (self.B @ X @ self.B.T).ravel()

    def _rmatvec(self, y):
        Y = np.asarray(y, dtype=float).reshape(self.low, self.low)
        return (self.B.T @ Y @ self.B).ravel()


def build_color_model(blur_kernel, downsample: int, transform: LinearOperator,
                      block_weights=(1.0, 1.0, 1.0)) -> BlockOperator:
    """Block-diagonal model ``diag(F, A F, A F)`` for luma/chroma recovery.

    ``transform`` is the synthesis map F on ``side*side`` pixels; A blurs
    with ``blur_kernel`` (separable, mirror boundaries) and decimates by
    ``downsample``.  ``block_weights`` multiplies each discrepancy term, which
    amounts to scaling block ``j`` (and its data) by ``sqrt(weight_j)``.
    """
    kernel = np.asarray(blur_kernel, dtype=float).ravel()
    if abs(kernel.sum() - 1.0) > 1e-8:
        raise ValueError(f"blur kernel must sum to 1, sums to {kernel.sum():.6g}")
    n_pix = transform.shape[0]
    side = int(round(np.sqrt(n_pix)))
    if side * side != n_pix:
        raise ValueError("transform must act on square images")
    A = BlurDecimate(kernel, side, downsample)
    w = np.sqrt(np.asarray(block_weights, dtype=float))
    F = aslinearoperator(transform)
    AF = A @ F
    return BlockOperator([[w[0] * F, None, None],
                          [None, w[1] * AF, None],
                          [None, None, w[2] * AF]])


# --- norm estimation -------------------------------------------------------------

def _power_iteration(sym_apply, shape, max_iters, tol, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    lam = 0.0
    for it in range(1, max_iters + 1):
        y = sym_apply(x)
        lam_new = float(np.vdot(x, y))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, True, it
        x = y / ny
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return abs(lam_new), True, it
        lam = lam_new
    return abs(lam), False, max_iters


def estimate_norm(op: BlockOperator, max_iters: int = 1000, tol: float = 1e-10,
                  seed: int = 0, safety: float = SAFETY_FACTOR) -> float:
    """Power-iteration estimate of ``||T||`` inflated by ``safety``.

    Emits a :class:`~sklearn.exceptions.ConvergenceWarning` when the
    Rayleigh quotient has not settled within ``max_iters``.
    """
    lam, converged, it = _power_iteration(op.normal, op.domain_shape, max_iters, tol, seed)
    if not converged:
        warnings.warn(f"norm estimate did not converge in {max_iters} iterations; "
                      "treat it as a lower-confidence value", ConvergenceWarning)
    logger.debug("power iteration: %d iterations, ||T||^2 ~ %.6g", it, lam)
    return safety * float(np.sqrt(lam))


def estimate_residual_norm(op: BlockOperator, max_iters: int = 1000,
                           tol: float = 1e-10, seed: int = 0) -> float:
    """Upper estimate of ``||I - T^*T||``, capped at 1.

    When the range is smaller than the domain ``T^*T`` is singular and the
    value is exactly 1 (assuming ``||T|| <= 1``).
    """
    L, M = op.domain_shape
    if sum(op.range_sizes) < L * M:
        return 1.0
    lam, converged, _ = _power_iteration(lambda x: x - op.normal(x), op.domain_shape,
                                         max_iters, tol, seed)
    if not converged:
        warnings.warn("||I - T*T|| estimate did not converge", ConvergenceWarning)
    return min(1.0, SAFETY_FACTOR * lam)


def rescale_to_contraction(op: BlockOperator, target: float = 0.9, **kwargs):
    """Scale ``op`` so its estimated norm is at most ``target``.

    Returns ``(scaled_op, s)``; the data must be multiplied by the same ``s``.
    """
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    est = estimate_norm(op, **kwargs)
    if est == 0.0:
        raise ValueError("cannot normalise the zero operator")
    s = target / est
    return op.scaled(s), s
