"""Cox proportional-hazards fit (Breslow ties) with a Breslow baseline hazard."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, EstimationError, RankDeficiencyError
from .survival import SurvivalCurve

TOLERANCE = 1e-8
MAX_ITER = 50
MAX_HALVINGS = 40
# likelihood comparisons tolerate accumulated rounding near the optimum
ROUNDOFF = 1e-13
_TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class CoxModel:
    coefficients: np.ndarray
    baseline_times: np.ndarray
    baseline_cumhaz: np.ndarray
    iterations: int
    gradient_norm: float
    loglik_history: tuple = ()
    information: np.ndarray = field(default=None, repr=False)
    horizon: float | None = None

    @property
    def converged(self) -> bool:
        return self.gradient_norm < TOLERANCE

    @property
    def loglik(self) -> float:
        return self.loglik_history[-1]

    def standard_errors(self) -> np.ndarray:
        """Square roots of the diagonal of the inverse observed information."""
        p = self.coefficients.size
        se = np.zeros(p)
        active = np.diag(self.information) > 0
        if active.any():
            sub = self.information[np.ix_(active, active)]
            se[active] = np.sqrt(np.diag(np.linalg.inv(sub)))
        return se

    def to_json(self) -> str:
        return json.dumps(
            {
                "coefficients": self.coefficients.tolist(),
                "baseline_times": self.baseline_times.tolist(),
                "baseline_cumhaz": self.baseline_cumhaz.tolist(),
                "iterations": self.iterations,
                "gradient_norm": self.gradient_norm,
            }
        )


def _revcumsum(a):
    return np.cumsum(a[::-1], axis=0)[::-1]


def _check_columns(X):
    """Split columns into estimable ones and constant ones (coefficient fixed at 0).

    Raises RankDeficiencyError naming the first column that is a linear
    combination of the preceding non-constant columns.
    """
    p = X.shape[1]
    constant = np.ptp(X, axis=0) == 0 if X.shape[0] else np.ones(p, bool)
    keep = []
    centered = X - X.mean(axis=0)
    for j in range(p):
        if constant[j]:
            continue
        trial = keep + [j]
        if np.linalg.matrix_rank(centered[:, trial]) < len(trial):
            raise RankDeficiencyError(f"covariate column {j} is collinear with earlier columns", column=j)
        keep.append(j)
    return np.array(keep, dtype=int), constant


class _PartialLikelihood:
    """Breslow partial likelihood with risk-set sums via reverse cumulative sums."""

    def __init__(self, times, events, X):
        order = np.argsort(times, kind="stable")
        self.t = times[order]
        self.e = events[order]
        self.X = X[order]
        uniq, first, inv = np.unique(self.t, return_index=True, return_inverse=True)
        d = np.bincount(inv, weights=self.e.astype(float), minlength=uniq.size)
        has = d > 0
        self.event_times = uniq[has]
        self.first = first[has]
        self.d = d[has]
        self.x_event_sum = self.X[self.e].sum(axis=0)

    def evaluate(self, beta, derivatives=True):
        X = self.X
        eta = X @ beta
        shift = eta.max() if eta.size else 0.0
        r = np.exp(eta - shift)
        s0 = _revcumsum(r)[self.first]
        loglik = eta[self.e].sum() - np.sum(self.d * (np.log(s0) + shift))
        if not derivatives:
            return loglik, None, None
        s1 = _revcumsum(r[:, None] * X)[self.first]
        xbar = s1 / s0[:, None]
        grad = self.x_event_sum - (self.d[:, None] * xbar).sum(axis=0)
        s2 = _revcumsum(r[:, None, None] * X[:, :, None] * X[:, None, :])[self.first]
        cov = s2 / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :]
        info = (self.d[:, None, None] * cov).sum(axis=0)
        return loglik, grad, info

    def baseline(self, beta):
        r = np.exp(self.X @ beta)
        s0 = _revcumsum(r)[self.first]
        return self.event_times, np.cumsum(self.d / s0)


def fit_cox(times, events, covariates) -> CoxModel:
    """Maximise the Breslow partial likelihood by Newton-Raphson.

    Starts at zero; a step that lowers the likelihood is halved until it does
    not. Converged once the max-norm of the score drops below 1e-8.
    Constant covariate columns cannot be estimated and keep a zero
    coefficient.

    Raises
    ------
    EstimationError
        No events.
    RankDeficiencyError
        A covariate column is collinear with earlier ones.
    ConvergenceError
        Not converged within 50 iterations; carries the final gradient norm.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    events = np.asarray(events, dtype=bool).reshape(-1)
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != times.size or events.size != times.size:
        raise ValueError("times, events and covariates must have the same number of rows")
    if not events.any():
        raise EstimationError("Cox fit needs at least one event")
    p = X.shape[1]
    keep, constant = _check_columns(X)
    if constant.any() and X.shape[0] > 1 and not (X[:, constant] == 0).all():
        warnings.warn(f"constant covariate columns {np.flatnonzero(constant).tolist()} fixed at 0", stacklevel=2)

    pl = _PartialLikelihood(times, events, X[:, keep])
    beta = np.zeros(keep.size)
    loglik, grad, info = pl.evaluate(beta)
    history = [loglik]
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    it = 0
    while gnorm >= TOLERANCE:
        if it == MAX_ITER:
            raise ConvergenceError(
                f"Cox fit did not converge in {MAX_ITER} iterations (gradient norm {gnorm:.3g})", gnorm
            )
        it += 1
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError(f"singular information matrix (gradient norm {gnorm:.3g})", gnorm) from None
        for _ in range(MAX_HALVINGS):
            new_loglik, _, _ = pl.evaluate(beta + step, derivatives=False)
            if np.isfinite(new_loglik) and new_loglik >= loglik - ROUNDOFF * (1.0 + abs(loglik)):
                break
            step = step / 2
        else:
            raise ConvergenceError(f"step-halving failed (gradient norm {gnorm:.3g})", gnorm)
        beta = beta + step
        loglik, grad, info = pl.evaluate(beta)
        history.append(loglik)
        gnorm = float(np.max(np.abs(grad)))

    if keep.size and np.linalg.eigvalsh(info).min() < 1e-6:
        warnings.warn(
            "partial likelihood is nearly flat at the solution; coefficients may be infinite",
            stacklevel=2,
        )
    coef = np.zeros(p)
    coef[keep] = beta
    full_info = np.zeros((p, p))
    full_info[np.ix_(keep, keep)] = info
    bt, bh = pl.baseline(beta)
    return CoxModel(
        coefficients=coef,
        baseline_times=bt,
        baseline_cumhaz=bh,
        iterations=it,
        gradient_norm=gnorm,
        loglik_history=tuple(history),
        information=full_info,
        horizon=float(times.max()),
    )


def _as_rows(m: CoxModel, z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[None, :] if m.coefficients.size else z.reshape(-1, 0)
    if z.shape[1] != m.coefficients.size:
        raise ValueError(f"expected {m.coefficients.size} covariates, got {z.shape[1]}")
    return z


def predict_survival(m: CoxModel, z) -> SurvivalCurve:
    """``S(t | z) = exp(-Lambda0(t) * exp(z . coef))`` on the baseline grid."""
    z = _as_rows(m, z)
    if z.shape[0] != 1:
        raise ValueError("predict_survival takes a single covariate vector")
    risk = np.exp(z[0] @ m.coefficients)
    values = np.maximum(np.exp(-m.baseline_cumhaz * risk), _TINY)
    return SurvivalCurve(m.baseline_times, values, horizon=m.horizon)


def average_predicted_curve(m: CoxModel, zs, chunk: int = 1024) -> SurvivalCurve:
    """Pointwise mean of the predicted curves for each row of ``zs``."""
    zs = np.asarray(zs, dtype=float)
    if zs.ndim == 1:
        zs = zs.reshape(-1, m.coefficients.size)
    zs = _as_rows(m, zs)
    if zs.shape[0] == 0:
        raise ValueError("average_predicted_curve needs at least one row")
    risk = np.exp(zs @ m.coefficients)
    total = np.zeros(m.baseline_times.size)
    for start in range(0, risk.size, chunk):
        total += np.exp(-np.outer(risk[start:start + chunk], m.baseline_cumhaz)).sum(axis=0)
    values = np.clip(total / risk.size, _TINY, 1.0)
    return SurvivalCurve(m.baseline_times, values, horizon=m.horizon)
