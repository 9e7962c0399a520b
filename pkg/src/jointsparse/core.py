"""Shared domain types: channel norms, coefficient fields, weights, parameters.

Coefficient fields are plain ``ndarray`` of shape ``(n_indices, n_channels)``
stored row-major, so the per-index vectors ``u[lam]`` are contiguous.
Measurement data is a list of 1-D arrays, one per measurement block.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ChannelNorm(enum.Enum):
    """Exponent of the interchannel norm ``||u_lam||_q``."""

    ONE = "1"
    TWO = "2"
    INF = "inf"

    @classmethod
    def parse(cls, value) -> "ChannelNorm":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"1": cls.ONE, "1.0": cls.ONE, "one": cls.ONE,
                   "2": cls.TWO, "2.0": cls.TWO, "two": cls.TWO,
                   "inf": cls.INF, "infinity": cls.INF, "oo": cls.INF}
        if key not in aliases:
            raise ValueError(
                f"unsupported channel norm {value!r}; only q in {{1, 2, inf}} "
                "have closed-form thresholding")
        return aliases[key]

    @property
    def dual(self) -> "ChannelNorm":
        return _DUAL[self]

    @property
    def ord(self):
        """Value accepted by ``numpy.linalg.norm(..., ord=...)``."""
        return {ChannelNorm.ONE: 1, ChannelNorm.TWO: 2, ChannelNorm.INF: np.inf}[self]


_DUAL = {ChannelNorm.ONE: ChannelNorm.INF,
         ChannelNorm.TWO: ChannelNorm.TWO,
         ChannelNorm.INF: ChannelNorm.ONE}


def channel_norm(x, q) -> float:
    """``||x||_q`` of a single channel vector."""
    return float(row_norms(np.asarray(x, dtype=float).reshape(1, -1), q)[0])


def row_norms(u: np.ndarray, q) -> np.ndarray:
    """``||u_lam||_q`` for every row of a coefficient field."""
    q = ChannelNorm.parse(q)
    u = np.asarray(u, dtype=float)
    if q is not ChannelNorm.TWO:
        return np.linalg.norm(u, ord=q.ord, axis=1)
    # scale by the row maximum so tiny rows do not underflow to zero
    m = np.max(np.abs(u), axis=1, initial=0.0)
    safe = np.where(m > 0, m, 1.0)
    return m * np.linalg.norm(u / safe[:, None], axis=1)


def dual_norm(q) -> ChannelNorm:
    return ChannelNorm.parse(q).dual


def check_coefficients(u, *, lambda_count: int | None = None,
                       channels: int | None = None, name: str = "u") -> np.ndarray:
    """Validate a coefficient field and return it as a float 2-D array."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[0] < 1 or u.shape[1] < 1:
        raise ValueError(f"{name} must have shape (n_indices, n_channels), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite entries")
    if lambda_count is not None and u.shape[0] != lambda_count:
        raise ValueError(f"{name} has {u.shape[0]} indices, expected {lambda_count}")
    if channels is not None and u.shape[1] != channels:
        raise ValueError(f"{name} has {u.shape[1]} channels, expected {channels}")
    return u


def check_weights(w, lambda_count: int, *, name: str = "weights",
                  allow_negative: bool = False) -> np.ndarray:
    """Broadcast a scalar or per-index weight to a length-``lambda_count`` array."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        w = np.full(lambda_count, float(w))
    w = w.ravel()
    if w.shape[0] != lambda_count:
        raise ValueError(f"{name} has length {w.shape[0]}, expected {lambda_count}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} contains non-finite entries")
    if not allow_negative and np.any(w < 0):
        raise ValueError(f"{name} must be nonnegative")
    return w


def check_measurements(g, sizes=None) -> list[np.ndarray]:
    """Validate measurement data as a list of finite 1-D blocks."""
    if isinstance(g, np.ndarray) and g.ndim == 1:
        g = [g]
    blocks = [np.asarray(b, dtype=float).ravel() for b in g]
    if not blocks:
        raise ValueError("measurement data needs at least one block")
    for j, b in enumerate(blocks):
        if not np.all(np.isfinite(b)):
            raise ValueError(f"measurement block {j} contains non-finite entries")
    if sizes is not None:
        sizes = list(sizes)
        if len(sizes) != len(blocks) or any(len(b) != s for b, s in zip(blocks, sizes)):
            raise ValueError(
                f"measurement block sizes {[len(b) for b in blocks]} do not match "
                f"operator range {sizes}")
    return blocks


@dataclass(frozen=True)
class RegularizationParams:
    """Weights of the joint-sparsity functional.

    ``theta`` couples the indicator to its ceiling ``rho``; ``omega`` is the
    quadratic damping whose lower bound ``gamma`` drives the inner rate.
    """

    q: ChannelNorm
    theta: np.ndarray
    rho: np.ndarray
    omega: np.ndarray
    gamma: float

    @classmethod
    def create(cls, lambda_count: int, q="inf", theta=10.0, rho=1.0,
               omega=0.05, gamma: float | None = None) -> "RegularizationParams":
        q = ChannelNorm.parse(q)
        theta = check_weights(theta, lambda_count, name="theta")
        rho = check_weights(rho, lambda_count, name="rho")
        omega = check_weights(omega, lambda_count, name="omega")
        if np.any(theta <= 0):
            raise ValueError("theta must be strictly positive")
        if gamma is None:
            gamma = float(omega.min())
        if not gamma > 0:
            raise ValueError("omega must be bounded below by some gamma > 0")
        if np.any(omega < gamma):
            raise ValueError(f"omega falls below gamma={gamma}")
        for arr in (theta, rho, omega):
            arr.setflags(write=False)
        return cls(q, theta, rho, omega, float(gamma))

    @property
    def lambda_count(self) -> int:
        return self.theta.shape[0]


@dataclass
class SolverTelemetry:
    """Append-only per-iteration record of a solve.

    ``inner`` rows are ``(n, m, J, K, step_norm, measured_ratio)``;
    ``outer`` rows are ``(n, J(u^(n), v^(n)), outer_step)``.
    """

    inner: list[tuple[int, int, float, float, float, float]] = field(default_factory=list)
    outer: list[tuple[int, float, float]] = field(default_factory=list)
    scale: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    inner_iters: int | None = None
    stop_reason: str = ""

    def record_inner(self, n, m, J, K, step_norm, ratio):
        self.inner.append((int(n), int(m), float(J), float(K), float(step_norm), float(ratio)))

    def record_outer(self, n, J, step):
        self.outer.append((int(n), float(J), float(step)))

    @property
    def objective(self) -> np.ndarray:
        """Outer-loop objective values J(u^(n), v^(n))."""
        return np.array([row[1] for row in self.outer])

    @property
    def ratios(self) -> np.ndarray:
        r = np.array([row[5] for row in self.inner])
        return r[np.isfinite(r)]


@dataclass
class Solution:
    u_star: np.ndarray
    v_star: np.ndarray
    telemetry: SolverTelemetry
