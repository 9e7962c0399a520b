"""Thresholded Landweber inner loop, closed-form indicator update, and the
two-loop joint-sparsity solver with its certified contraction rates."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (RegularizationParams, Solution, SolverTelemetry, check_coefficients,
                   check_measurements, check_weights, row_norms)
from .functionals import (check_convexity, check_strong_rate, eval_J, eval_K, rate_constant)
from .linop import BlockOperator, estimate_norm, estimate_residual_norm
from .proximity import threshold_block

logger = logging.getLogger(__name__)


class CertificateError(ValueError):
    """Parameters fail a convexity or rate condition the solver relies on."""


class RateWarning(UserWarning):
    """A contraction factor is so close to 1 that iteration budgets blow up."""


def landweber_step(u, v, params: RegularizationParams, op: BlockOperator, g) -> np.ndarray:
    """``U(u + T^*(g - T u))``: one surrogate-functional minimisation."""
    Tu = op.apply(u)
    residual = [gj - tj for gj, tj in zip(g, Tu)]
    return threshold_block(u + op.adjoint(residual), v, params.omega, params.q)


def update_v(u, theta, rho, q) -> np.ndarray:
    """Exact minimiser of ``J(u, .)`` over ``v >= 0``.

    ``v = rho - ||u_lam||_q / (2 theta)`` where that is positive, else 0.
    """
    u = check_coefficients(u)
    L = u.shape[0]
    theta = check_weights(theta, L, name="theta")
    rho = check_weights(rho, L, name="rho")
    nq = row_norms(u, q)
    v = np.where(nq < 2 * theta * rho, rho - nq / (2 * theta), 0.0)
    return np.clip(v, 0.0, rho)


def fixed_point_residual(u, v, params, op, g) -> float:
    return float(np.linalg.norm(u - landweber_step(u, v, params, op, g)))


def inner_solve(u0, v, params: RegularizationParams, op: BlockOperator, g,
                max_iters: int, step_tol: float = 0.0, *, telemetry: SolverTelemetry | None = None,
                n: int = 0, callback=None):
    """Iterate :func:`landweber_step` at fixed ``v``.

    Stops after ``max_iters`` steps or once a step is shorter than
    ``step_tol``.  Returns ``(u, telemetry)``; inner rows are appended to
    the given telemetry object or a fresh one.
    """
    telemetry = telemetry if telemetry is not None else SolverTelemetry()
    v = check_weights(v, params.lambda_count, name="v")
    u = check_coefficients(u0, lambda_count=params.lambda_count).copy()
    v_term = math.fsum((params.theta * (params.rho - v) ** 2).tolist())
    prev_step = math.nan
    for m in range(1, max_iters + 1):
        u_next = landweber_step(u, v, params, op, g)
        step = float(np.linalg.norm(u_next - u))
        u = u_next
        K = eval_K(u, op, g, v, params.omega, params.q)
        ratio = step / prev_step if prev_step > 0 else math.nan
        telemetry.record_inner(n, m, K + v_term, K, step, ratio)
        if callback is not None:
            callback(n, m, u)
        prev_step = step
        if step < step_tol:
            break
    return u, telemetry


def rate_alpha(gamma: float, residual_norm: float) -> float:
    """Inner contraction factor ``||I - T^*T|| / (1 + gamma)``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if residual_norm > 1 + 1e-12:
        raise ValueError("||I - T*T|| exceeds 1; rescale the operator first")
    alpha = residual_norm / (1.0 + gamma)
    if alpha > 0.999:
        warnings.warn(f"alpha = {alpha:.6f} is barely contractive; inner budgets "
                      "derived from it will be very large", RateWarning)
    return alpha


def rate_beta(params: RegularizationParams, residual_norm: float, n_channels: int) -> float:
    """Outer contraction factor, a supremum over indices."""
    cert = check_strong_rate(params, n_channels)
    if not cert.ok:
        raise CertificateError(cert.explain())
    phi = rate_constant(params.q, n_channels)
    denom = 4 * params.theta * params.omega + 4 * params.theta * (1.0 - residual_norm)
    return float(np.max(phi / denom))


def choose_inner_iters(alpha: float, beta: float, delta_target: float) -> int:
    """Smallest ``L`` with ``alpha**L * (1 + beta) + beta <= delta_target``."""
    if not alpha < 1:
        raise ValueError(f"alpha = {alpha} >= 1: no finite inner budget certifies contraction")
    if not beta < delta_target < 1:
        raise ValueError(f"delta_target must lie in (beta, 1) = ({beta}, 1), got {delta_target}")
    need = (delta_target - beta) / (1 + beta)
    if alpha == 0 or need >= 1:
        return 0 if need >= 1 else 1
    L = max(0, math.ceil(math.log(need) / math.log(alpha)))
    while L > 0 and alpha ** (L - 1) * (1 + beta) + beta <= delta_target:
        L -= 1
    while alpha ** L * (1 + beta) + beta > delta_target:
        L += 1
    return L


@dataclass(frozen=True)
class CertifiedRates:
    """Rates for an operator after the rescaling the solver would apply.

    ``beta`` is ``None`` when the strong-rate condition fails.
    """
    scale: float
    residual_norm: float
    alpha: float
    beta: float | None


def certified_rates(op: BlockOperator, params: RegularizationParams,
                    target_norm: float = 0.9) -> CertifiedRates:
    """Estimate ``alpha`` and ``beta``, rescaling ``op`` first when its norm
    estimate is not below 1."""
    scale = 1.0
    norm = estimate_norm(op)
    if norm >= 1.0:
        scale = target_norm / norm
        op = op.scaled(scale)
        logger.info("rescaled operator by %.6g to reach norm %.3g", scale, target_norm)
    residual = estimate_residual_norm(op)
    M = op.n_channels
    beta = rate_beta(params, residual, M) if check_strong_rate(params, M).ok else None
    return CertifiedRates(scale, residual, rate_alpha(params.gamma, residual), beta)


def jointsparse(op: BlockOperator, g, params: RegularizationParams, *, n_max: int = 15,
                inner_iters: int | None = None, delta_target: float | None = None,
                u0=None, v0=None, step_tol: float = 1e-12, outer_tol: float = 1e-8,
                target_norm: float = 0.9, check_certificates: bool = True,
                callback=None) -> Solution:
    """Alternating minimisation of the joint-sparsity functional.

    Each of the ``n_max + 1`` outer passes runs ``inner_iters`` thresholded
    Landweber steps at fixed indicator ``v`` and then replaces ``v`` by its
    closed-form minimiser.  When neither ``inner_iters`` nor
    ``delta_target`` is given, the inner budget is derived from the
    certified rates with ``delta_target = (1 + beta) / 2``.

    If the operator norm estimate is not below 1, operator and data are
    both rescaled so the norm is ``target_norm``; the factor is kept in
    ``telemetry.scale``.
    """
    L_idx, M = op.domain_shape
    if params.lambda_count != L_idx:
        raise ValueError(f"parameters cover {params.lambda_count} indices, operator has {L_idx}")
    g = check_measurements(g, op.range_sizes)
    cert = check_convexity(params, M)
    if check_certificates and not cert.strict:
        raise CertificateError(cert.explain())

    telemetry = SolverTelemetry()
    rates = certified_rates(op, params, target_norm)
    if rates.scale != 1.0:
        op = op.scaled(rates.scale)
        g = [rates.scale * gj for gj in g]
    telemetry.scale = rates.scale
    alpha = telemetry.alpha = rates.alpha
    telemetry.beta = rates.beta
    if inner_iters is None:
        if telemetry.beta is None:
            raise CertificateError("cannot derive an inner iteration budget: "
                                   + check_strong_rate(params, M).explain())
        if delta_target is None:
            delta_target = (1 + telemetry.beta) / 2
        inner_iters = choose_inner_iters(alpha, telemetry.beta, delta_target)
    telemetry.inner_iters = int(inner_iters)

    u = np.zeros((L_idx, M)) if u0 is None else check_coefficients(u0, lambda_count=L_idx, channels=M).copy()
    v = params.rho.copy() if v0 is None else check_weights(v0, L_idx, name="v0").copy()
    if np.any(v > params.rho):
        raise ValueError("v0 must satisfy 0 <= v0 <= rho")
    telemetry.record_outer(0, eval_J(u, v, op, g, params), math.nan)

    telemetry.stop_reason = "n_max"
    for n in range(n_max + 1):
        u_next, _ = inner_solve(u, v, params, op, g, inner_iters, step_tol,
                                telemetry=telemetry, n=n, callback=callback)
        v = update_v(u_next, params.theta, params.rho, params.q)
        step = float(np.linalg.norm(u_next - u))
        u = u_next
        telemetry.record_outer(n + 1, eval_J(u, v, op, g, params), step)
        if step < outer_tol:
            telemetry.stop_reason = "outer_tol"
            break
    return Solution(u, v, telemetry)
