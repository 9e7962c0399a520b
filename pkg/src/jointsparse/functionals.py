"""Objective evaluation and parameter certificates.

Sums over indices go through :func:`math.fsum` so values are reproducible
and accurate enough for the 1e-12 monotonicity checks downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChannelNorm, RegularizationParams, check_coefficients, check_weights, row_norms
from .linop import BlockOperator


def eval_discrepancy(op: BlockOperator, u, g) -> float:
    """``||T u - g||^2`` summed over measurement blocks."""
    Tu = op.apply(u)
    if len(g) != len(Tu):
        raise ValueError(f"expected {len(Tu)} measurement blocks, got {len(g)}")
    total = []
    for j, (a, b) in enumerate(zip(Tu, g)):
        b = np.asarray(b, dtype=float).ravel()
        if a.shape != b.shape:
            raise ValueError(f"block {j}: operator gives {a.shape[0]} values, data has {b.shape[0]}")
        total.extend(((a - b) ** 2).tolist())
    return math.fsum(total)


def phi_terms(u, v, params: RegularizationParams) -> np.ndarray:
    """Per-index sparsity measure ``Phi_lam(u_lam, v_lam)``; +inf where ``v < 0``."""
    u = check_coefficients(u, lambda_count=params.lambda_count)
    v = check_weights(v, params.lambda_count, name="v", allow_negative=True)
    nq = row_norms(u, params.q)
    n2 = np.einsum("ij,ij->i", u, u)
    terms = v * nq + params.omega * n2 + params.theta * (params.rho - v) ** 2
    return np.where(v < 0, np.inf, terms)


def eval_phi(u, v, params: RegularizationParams) -> float:
    terms = phi_terms(u, v, params)
    if np.any(np.isinf(terms)):
        return math.inf
    return math.fsum(terms.tolist())


def eval_J(u, v, op: BlockOperator, g, params: RegularizationParams) -> float:
    """Joint functional ``||Tu - g||^2 + Phi(u, v)`` (extended-valued)."""
    phi = eval_phi(u, v, params)
    if math.isinf(phi):
        return math.inf
    return eval_discrepancy(op, u, g) + phi


def eval_K(u, op: BlockOperator, g, v, omega, q) -> float:
    """Inner objective ``||Tu - g||^2 + sum v||u||_q + sum omega||u||_2^2``."""
    u = check_coefficients(u)
    L = u.shape[0]
    v = check_weights(v, L, name="v")
    omega = check_weights(omega, L, name="omega")
    psi = v * row_norms(u, q) + omega * np.einsum("ij,ij->i", u, u)
    return eval_discrepancy(op, u, g) + math.fsum(psi.tolist())


def convexity_constant(q, n_channels: int) -> float:
    """kappa: M for q = 1, else 1."""
    return float(n_channels) if ChannelNorm.parse(q) is ChannelNorm.ONE else 1.0


def rate_constant(q, n_channels: int) -> float:
    """phi_q: M for q = 1, 1 for q = 2, sqrt(M) for q = inf."""
    q = ChannelNorm.parse(q)
    return {ChannelNorm.ONE: float(n_channels), ChannelNorm.TWO: 1.0,
            ChannelNorm.INF: math.sqrt(n_channels)}[q]


@dataclass(frozen=True)
class ConvexityCertificate:
    convex: bool
    strict: bool
    kappa: float
    min_product: float
    violating: tuple[int, ...]

    @property
    def J_label(self) -> str:
        if self.strict:
            return "sufficient condition for strict convexity of J holds"
        if self.convex:
            return "sufficient condition for convexity of J holds"
        return "no convexity guarantee for J"

    def explain(self) -> str:
        if self.strict:
            return f"Phi strictly convex: min omega*theta = {self.min_product:.6g} > kappa/4 = {self.kappa / 4:.6g}"
        idx = ", ".join(map(str, self.violating[:10]))
        rel = ">=" if self.convex else "<"
        return (f"omega*theta must exceed kappa/4 = {self.kappa / 4:.6g} at every index; "
                f"min omega*theta = {self.min_product:.6g} {rel} bound at index(es) {idx}")


@dataclass(frozen=True)
class StrongRateCertificate:
    ok: bool
    sigma: float
    phi_q: float
    violating: tuple[int, ...]

    def explain(self) -> str:
        if self.ok:
            return f"sigma = {self.sigma:.6g} > phi_q/4 = {self.phi_q / 4:.6g}"
        idx = ", ".join(map(str, self.violating[:10]))
        return (f"theta*omega must exceed phi_q/4 = {self.phi_q / 4:.6g}; "
                f"sigma = {self.sigma:.6g} fails at index(es) {idx}")


def check_convexity(params: RegularizationParams, n_channels: int) -> ConvexityCertificate:
    """Convexity of the sparsity measure: ``omega*theta >= kappa/4`` everywhere."""
    kappa = convexity_constant(params.q, n_channels)
    prod = params.omega * params.theta
    bound = kappa / 4
    return ConvexityCertificate(
        convex=bool(np.all(prod >= bound)),
        strict=bool(np.all(prod > bound)),
        kappa=kappa,
        min_product=float(prod.min()),
        violating=tuple(int(i) for i in np.flatnonzero(prod <= bound)),
    )


def check_strong_rate(params: RegularizationParams, n_channels: int) -> StrongRateCertificate:
    """Condition ``inf theta*omega > phi_q/4`` for the outer linear rate."""
    phi = rate_constant(params.q, n_channels)
    prod = params.theta * params.omega
    return StrongRateCertificate(
        ok=bool(prod.min() > phi / 4),
        sigma=float(prod.min()),
        phi_q=phi,
        violating=tuple(int(i) for i in np.flatnonzero(prod <= phi / 4)),
    )
