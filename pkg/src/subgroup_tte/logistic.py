"""Logistic regression by iteratively reweighted least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .coxph import _check_columns
from .errors import ConvergenceError, EstimationError, SeparationError

TOLERANCE = 1e-8
MAX_ITER = 100
DIVERGENCE_NORM = 1e3
ROUNDOFF = 1e-13


@dataclass(frozen=True, eq=False)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    iterations: int
    gradient_norm: float
    loglik_history: tuple = ()
    information: np.ndarray | None = None

    @property
    def converged(self) -> bool:
        return self.gradient_norm < TOLERANCE

    def linear_predictor(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(1, -1)
        if z.shape[1] != self.coefficients.size:
            raise ValueError(f"expected {self.coefficients.size} covariates, got {z.shape[1]}")
        return self.intercept + z @ self.coefficients

    def standard_errors(self) -> np.ndarray:
        """Standard errors for ``(intercept, *coefficients)``; 0 for dropped columns."""
        info = self.information
        se = np.zeros(info.shape[0])
        active = np.diag(info) > 0
        se[active] = np.sqrt(np.diag(np.linalg.inv(info[np.ix_(active, active)])))
        return se


def _loglik(y, eta):
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(labels, covariates=None) -> LogisticModel:
    """Maximum-likelihood logistic regression with an intercept.

    Newton/IRLS from zero with step-halving, stopping when the max-norm of
    the score is below 1e-8. Constant covariate columns are dropped (their
    coefficient is reported as 0).

    Raises
    ------
    EstimationError
        Labels contain a single class.
    SeparationError
        The classes are completely separated, so no finite MLE exists.
    ConvergenceError
        No convergence within 100 iterations.
    """
    y = np.asarray(labels, dtype=bool).reshape(-1).astype(float)
    n = y.size
    X = np.empty((n, 0)) if covariates is None else np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise ValueError("labels and covariates must have the same number of rows")
    if n == 0 or y.min() == y.max():
        raise EstimationError("logistic fit needs both classes among the labels")
    keep, _ = _check_columns(X)
    design = np.column_stack([np.ones(n), X[:, keep]])

    theta = np.zeros(design.shape[1])
    eta = design @ theta
    loglik = _loglik(y, eta)
    history = [loglik]
    it = 0
    while True:
        mu = expit(eta)
        grad = design.T @ (y - mu)
        gnorm = float(np.max(np.abs(grad)))
        info = design.T @ (design * (mu * (1 - mu))[:, None])
        if gnorm < TOLERANCE:
            break
        if it == MAX_ITER:
            raise ConvergenceError(
                f"logistic fit did not converge in {MAX_ITER} iterations (gradient norm {gnorm:.3g})", gnorm
            )
        it += 1
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise SeparationError("singular information matrix; classes appear separated") from None
        for _ in range(40):
            new_eta = design @ (theta + step)
            new_loglik = _loglik(y, new_eta)
            if new_loglik >= loglik - ROUNDOFF * (1.0 + abs(loglik)):
                break
            step = step / 2
        else:
            raise ConvergenceError(f"step-halving failed (gradient norm {gnorm:.3g})", gnorm)
        theta = theta + step
        eta, loglik = new_eta, new_loglik
        history.append(loglik)
        if np.linalg.norm(theta) > DIVERGENCE_NORM:
            raise SeparationError(f"coefficient norm exceeded {DIVERGENCE_NORM:g}; classes are separated")

    signs = np.where(y > 0, 1.0, -1.0)
    if design.shape[1] > 1 and np.all(signs * eta > 0):
        # the fitted hyperplane itself separates the classes
        raise SeparationError("complete separation: fitted linear predictor classifies every label")

    coef = np.zeros(X.shape[1])
    coef[keep] = theta[1:]
    full_info = np.zeros((X.shape[1] + 1,) * 2)
    idx = np.concatenate(([0], keep + 1))
    full_info[np.ix_(idx, idx)] = info
    return LogisticModel(
        intercept=float(theta[0]),
        coefficients=coef,
        iterations=it,
        gradient_norm=gnorm,
        loglik_history=tuple(history),
        information=full_info,
    )


def predict_probability(m: LogisticModel, z) -> np.ndarray | float:
    """``logistic(intercept + z . coef)``; scalar for a single vector."""
    z_arr = np.asarray(z, dtype=float)
    p = expit(m.linear_predictor(z_arr))
    return float(p[0]) if z_arr.ndim <= 1 else p
