"""Reproducible numerical experiments behind the ``verify`` command.

Each function returns plain arrays or small result records; deciding on a
tolerance is left to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChannelNorm, RegularizationParams
from .functionals import rate_constant
from .linop import BlockOperator, estimate_residual_norm, rescale_to_contraction
from .oracle import brute_prox, subgradient_certificate
from .proximity import shrink
from .solver import (choose_inner_iters, fixed_point_residual, inner_solve, jointsparse,
                     landweber_step, rate_alpha, rate_beta, update_v)


@dataclass
class RateInstance:
    op: BlockOperator
    g: list
    params: RegularizationParams
    residual: float
    alpha: float
    beta: float


def rate_instance(seed: int, q="2", n_indices: int = 50, n_channels: int = 3,
                  rows: int = 100, gamma: float = 0.05, rho: float = 0.5,
                  sparsity: int = 8) -> RateInstance:
    """Dense random instance with ``||T|| = 0.9`` and ``theta*omega = phi_q/2``.

    The operator is a ``1 x M`` grid of ``rows x n_indices`` Gaussian blocks,
    so every channel is mixed into one measurement vector.  With
    ``omega = gamma`` this puts the outer factor at ``beta = 1/2`` whenever
    ``||I - T^*T|| = 1``.
    """
    rng = np.random.default_rng(seed)
    blocks = [[rng.standard_normal((rows, n_indices)) for _ in range(n_channels)]]
    op, _ = rescale_to_contraction(BlockOperator(blocks), 0.9)
    u = np.zeros((n_indices, n_channels))
    supp = rng.choice(n_indices, sparsity, replace=False)
    u[supp] = rng.standard_normal((sparsity, n_channels))
    g = op.apply(u)
    theta = rate_constant(q, n_channels) / (2.0 * gamma)
    params = RegularizationParams.create(n_indices, q, theta, rho, gamma, gamma)
    residual = estimate_residual_norm(op)
    return RateInstance(op, g, params, residual, rate_alpha(gamma, residual),
                        rate_beta(params, residual, n_channels))


def _distance_ratios(iterates, reference):
    d = np.array([np.linalg.norm(u - reference) for u in iterates])
    with np.errstate(divide="ignore", invalid="ignore"):
        return d[1:] / d[:-1], d


def contraction_excess(distances, rate: float, ratio_slack: float = 1e-6,
                       floor: float = 1e-8) -> float:
    """Largest violation of ``d[k+1] <= (rate + ratio_slack) d[k] + floor``.

    The additive ``floor`` absorbs the accuracy of the reference limit;
    without it ratios of round-off sized distances are meaningless.
    Nonpositive means the contraction holds.
    """
    d = np.asarray(distances, dtype=float)
    return float(np.max(d[1:] - (rate + ratio_slack) * d[:-1] - floor, initial=-np.inf))


def inner_ratios(inst: RateInstance, steps: int = 40, reference_factor: int = 10):
    """Per-step ratios ``|u^(m+1) - u^inf| / |u^(m) - u^inf|`` at ``v = rho``.

    ``u^inf`` is the iterate after ``reference_factor * steps`` steps of the
    same recursion.  Returns ``(ratios, distances)``.
    """
    v = inst.params.rho
    iterates = [np.zeros(inst.op.domain_shape)]
    u = iterates[0]
    for _ in range(reference_factor * steps):
        u = landweber_step(u, v, inst.params, inst.op, inst.g)
        iterates.append(u)
    return _distance_ratios(iterates[:steps + 1], iterates[-1])


def _exact_inner(u, v, inst, tol, max_iters):
    u, _ = inner_solve(u, v, inst.params, inst.op, inst.g, max_iters, step_tol=tol * 1e-2)
    while fixed_point_residual(u, v, inst.params, inst.op, inst.g) >= tol:
        u, _ = inner_solve(u, v, inst.params, inst.op, inst.g, max_iters, step_tol=tol * 1e-2)
    return u


def outer_ratios(inst: RateInstance, passes: int = 12, reference_passes: int = 60,
                 residual_tol: float = 1e-10, max_inner: int = 5000):
    """Outer distance ratios with exact inner solves.

    Starts from ``u = 0, v = rho``, solves each inner problem to a
    fixed-point residual below ``residual_tol`` and updates ``v``.  The limit
    is taken from the same sequence continued to ``reference_passes``.
    Returns ``(ratios, distances)`` over the first ``passes`` outer steps.
    """
    u = np.zeros(inst.op.domain_shape)
    v = inst.params.rho.copy()
    iterates = [u]
    for _ in range(reference_passes):
        u = _exact_inner(u, v, inst, residual_tol, max_inner)
        v = update_v(u, inst.params.theta, inst.params.rho, inst.params.q)
        iterates.append(u)
    return _distance_ratios(iterates[:passes + 1], iterates[-1])


def combined_ratios(inst: RateInstance, passes: int = 12, reference_passes: int = 80):
    """Outer ratios with the inner budget certified for ``delta = (1+beta)/2``.

    Returns ``(ratios, distances, L, delta_target, objective)``.
    """
    delta = (1 + inst.beta) / 2
    L = choose_inner_iters(inst.alpha, inst.beta, delta)
    starts = []
    sol = jointsparse(inst.op, inst.g, inst.params, n_max=reference_passes - 1,
                      inner_iters=L, step_tol=0.0, outer_tol=0.0,
                      callback=lambda n, m, u: starts.append(u) if m == L else None)
    iterates = [np.zeros(inst.op.domain_shape)] + starts
    ratios, d = _distance_ratios(iterates[:passes + 1], iterates[-1])
    return ratios, d, L, delta, sol.telemetry.objective


# --- verify scopes ------------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    passed: bool
    detail: str


def verify_prox(n_triples: int = 500, step: float = 1e-3, seed: int = 0) -> list[CheckReport]:
    """Closed-form shrinkage against the grid oracle and the subgradient test."""
    rng = np.random.default_rng(seed)
    reports = []
    for q in ChannelNorm:
        worst, worst_cert = 0.0, 0.0
        for _ in range(n_triples):
            M = int(rng.integers(1, 4))
            x = rng.uniform(-2, 2, M)
            v = float(rng.uniform(0.05, 3))
            z = shrink(x, v, q)
            worst = max(worst, float(np.max(np.abs(z - brute_prox(x, v, q, step=step)))))
            worst_cert = max(worst_cert, subgradient_certificate(z, x, v, q).defect)
        ok = worst <= 2 * step and worst_cert <= 1e-9
        reports.append(CheckReport(f"prox q={q.value}", ok,
                                   f"max |shrink - grid| = {worst:.3e} (limit {2 * step:.1e}), "
                                   f"max subgradient defect = {worst_cert:.1e}"))
    return reports


def verify_rates(n_instances: int = 5, seed: int = 0) -> list[CheckReport]:
    """Measured contraction on random ``20 x 20`` instances vs. the certified rates."""
    reports = []
    for q in ChannelNorm:
        worst_a, worst_b, worst_d = -np.inf, -np.inf, -np.inf
        for k in range(n_instances):
            inst = rate_instance(seed + k, q, n_indices=10, n_channels=2, rows=10, sparsity=3)
            _, da = inner_ratios(inst)
            _, db = outer_ratios(inst, passes=8, reference_passes=40)
            _, dc, _, delta, _ = combined_ratios(inst, passes=8, reference_passes=60)
            worst_a = max(worst_a, contraction_excess(da, inst.alpha))
            worst_b = max(worst_b, contraction_excess(db, inst.beta))
            worst_d = max(worst_d, contraction_excess(dc, delta))
        ok = max(worst_a, worst_b, worst_d) <= 0
        reports.append(CheckReport(
            f"rates q={q.value}", ok,
            f"max excess over alpha {worst_a:+.2e}, beta {worst_b:+.2e}, delta {worst_d:+.2e}"))
    return reports


def verify_stationarity(n_instances: int = 5, seed: int = 0) -> list[CheckReport]:
    """Output satisfies the indicator formula exactly and is a surrogate fixed point."""
    reports = []
    for q in ChannelNorm:
        worst_res, exact_v, monotone = 0.0, True, True
        for k in range(n_instances):
            inst = rate_instance(seed + k, q, n_indices=10, n_channels=2, rows=10, sparsity=3)
            sol = jointsparse(inst.op, inst.g, inst.params, n_max=200, inner_iters=200,
                              step_tol=1e-14, outer_tol=1e-13)
            exact_v &= bool(np.array_equal(
                sol.v_star, update_v(sol.u_star, inst.params.theta, inst.params.rho, q)))
            worst_res = max(worst_res, fixed_point_residual(sol.u_star, sol.v_star,
                                                            inst.params, inst.op, inst.g))
            monotone &= bool(np.all(np.diff(sol.telemetry.objective) <= 1e-12))
        ok = exact_v and monotone and worst_res < 1e-8
        reports.append(CheckReport(
            f"stationarity q={q.value}", ok,
            f"v* exact: {exact_v}, J nonincreasing: {monotone}, "
            f"max fixed-point residual {worst_res:.2e}"))
    return reports


SCOPES = {"prox": verify_prox, "rates": verify_rates, "stationarity": verify_stationarity}
