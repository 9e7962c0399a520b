"""scikit-learn compatible front end for the joint-sparsity solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import ChannelNorm, RegularizationParams
from .linop import BlockOperator, shared_design_operator
from .solver import jointsparse


class JointSparseRegressor(RegressorMixin, BaseEstimator):
    """Multi-channel sparse recovery with an adaptive joint-sparsity indicator.

    Minimises ``||T u - g||^2 + sum_lam v_lam ||u_lam||_q + omega ||u_lam||^2
    + theta (rho - v_lam)^2`` jointly over the coefficients ``u`` and the
    indicator ``v`` by alternating thresholded Landweber sweeps with the
    closed-form ``v`` update.

    Parameters
    ----------
    q : {"1", "2", "inf"}, default="inf"
        Interchannel norm. ``"1"`` decouples the channels.
    theta, rho, omega : float or array-like of shape (n_features,)
        Indicator coupling, indicator ceiling and quadratic damping.
    n_max : int, default=15
        Outer iterations (the solver runs ``n_max + 1`` passes).
    inner_iters : int, default=None
        Landweber steps per pass. ``None`` derives it from the certified rates.
    delta_target : float, default=None
        Target combined rate used when ``inner_iters`` is None.
    step_tol, outer_tol : float
        Early-exit tolerances for the inner and outer loops.
    target_norm : float, default=0.9
        Operator norm enforced by rescaling when the estimate is not below 1.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features, n_channels)
    indicator_ : ndarray of shape (n_features,)
        Final sparsity indicator ``v``.
    telemetry_ : SolverTelemetry
    n_iter_ : int
        Outer passes performed.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = rng.standard_normal((20, 40)) / 10
    >>> U = np.zeros((40, 3)); U[[3, 17]] = [[1, -2, 1], [2, 1, -1]]
    >>> reg = JointSparseRegressor(q="inf", theta=10, rho=0.5, omega=0.05).fit(X, X @ U)
    >>> reg.coef_.shape
    (40, 3)
    """

    def __init__(self, q="inf", theta=10.0, rho=1.0, omega=0.05, n_max=15,
                 inner_iters=None, delta_target=None, step_tol=1e-12, outer_tol=1e-8,
                 target_norm=0.9):
        self.q = q
        self.theta = theta
        self.rho = rho
        self.omega = omega
        self.n_max = n_max
        self.inner_iters = inner_iters
        self.delta_target = delta_target
        self.step_tol = step_tol
        self.outer_tol = outer_tol
        self.target_norm = target_norm

    def _operator(self, X, n_channels):
        if isinstance(X, BlockOperator):
            return X
        X = check_array(X, dtype=np.float64)
        return shared_design_operator(X, n_channels)

    def fit(self, X, y):
        """Fit on a design matrix shared by all channels, or a BlockOperator.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features) or BlockOperator
        y : array-like of shape (n_samples, n_channels), or a list of
            measurement blocks when ``X`` is a BlockOperator.
        """
        if isinstance(X, BlockOperator):
            op = X
            g = [np.asarray(b, dtype=float) for b in y]
        else:
            Y = check_array(y, dtype=np.float64, ensure_2d=False)
            if Y.ndim == 1:
                Y = Y[:, None]
            op = self._operator(X, Y.shape[1])
            if Y.shape[0] != op.range_sizes[0]:
                raise ValueError(f"X has {op.range_sizes[0]} samples but y has {Y.shape[0]}")
            g = [Y[:, j] for j in range(Y.shape[1])]
        params = RegularizationParams.create(op.n_indices, ChannelNorm.parse(self.q),
                                             self.theta, self.rho, self.omega)
        sol = jointsparse(op, g, params, n_max=self.n_max, inner_iters=self.inner_iters,
                          delta_target=self.delta_target, step_tol=self.step_tol,
                          outer_tol=self.outer_tol, target_norm=self.target_norm)
        self.coef_ = sol.u_star
        self.indicator_ = sol.v_star
        self.telemetry_ = sol.telemetry
        self.n_iter_ = len(sol.telemetry.outer) - 1
        self.n_features_in_ = op.n_indices
        return self

    def predict(self, X):
        """Forward model applied to the fitted coefficients."""
        check_is_fitted(self)
        if isinstance(X, BlockOperator):
            return X.apply(self.coef_)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_

    def support(self, tol: float = 0.0) -> np.ndarray:
        """Indices whose coefficient row is nonzero."""
        check_is_fitted(self)
        return np.flatnonzero(np.abs(self.coef_).max(axis=1) > tol)
