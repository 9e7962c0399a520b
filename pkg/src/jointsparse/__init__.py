"""Joint-sparsity recovery of multi-channel signals by thresholded Landweber
iteration with an adaptive sparsity indicator."""

from .core import (ChannelNorm, RegularizationParams, Solution, SolverTelemetry,
                   channel_norm, dual_norm)
from .estimator import JointSparseRegressor
from .functionals import (check_convexity, check_strong_rate, eval_discrepancy, eval_J,
                          eval_K, eval_phi)
from .linop import (BlockOperator, HaarSynthesis, build_color_model, estimate_norm,
                    rescale_to_contraction)
from .proximity import project_ball, radius_lipschitz_constant, shrink, threshold_block
from .solver import (CertificateError, certified_rates, choose_inner_iters, inner_solve, jointsparse, landweber_step,
                     rate_alpha, rate_beta, update_v)

__all__ = [
    "BlockOperator", "CertificateError", "ChannelNorm", "HaarSynthesis", "JointSparseRegressor",
    "RegularizationParams", "Solution", "SolverTelemetry", "build_color_model", "certified_rates",
    "channel_norm", "check_convexity", "check_strong_rate", "choose_inner_iters",
    "dual_norm", "estimate_norm", "eval_J", "eval_K", "eval_discrepancy", "eval_phi",
    "inner_solve", "jointsparse", "landweber_step", "project_ball",
    "radius_lipschitz_constant", "rate_alpha", "rate_beta", "rescale_to_contraction",
    "shrink", "threshold_block", "update_v",
]
