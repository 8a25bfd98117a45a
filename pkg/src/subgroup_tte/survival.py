"""Step-function survival curves, weighted Nelson-Aalen estimation and RMST."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExtrapolationWarning

PROVENANCES = ("uniform", "logistic-model", "mea-rank")


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Right-continuous step function ``S(t)``.

    ``values[k]`` is the survival just after ``times[k]``; ``S(t) = 1`` before
    the first grid time. ``horizon`` is the last time the curve is supported
    by data (the largest follow-up time for an estimated curve); evaluating
    past it is flat extrapolation.
    """

    times: np.ndarray
    values: np.ndarray
    horizon: float | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(-1)
        if times.shape != values.shape:
            raise ValueError("times and values must have the same length")
        if times.size:
            if times[0] <= 0 or np.any(np.diff(times) <= 0):
                raise ValueError("curve times must be positive and strictly increasing")
            if np.any(values <= 0) or np.any(values > 1):
                raise ValueError("survival values must lie in (0, 1]")
            if np.any(np.diff(values) > 0):
                raise ValueError("survival values must be non-increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        horizon = self.horizon
        if horizon is None:
            horizon = float(times[-1]) if times.size else 0.0
        object.__setattr__(self, "horizon", float(horizon))

    def __call__(self, t):
        return evaluate(self, t)

    def cumulative_hazard(self) -> np.ndarray:
        return -np.log(self.values)

    def equals(self, other: "SurvivalCurve") -> bool:
        """Exact equality of grid and values."""
        return np.array_equal(self.times, other.times) and np.array_equal(self.values, other.values)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "survival"])
            w.writerow([0.0, 1.0])
            for t, s in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(s))])


@dataclass(frozen=True, eq=False)
class WeightVector:
    weights: np.ndarray
    provenance: str = "uniform"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if w.size == 0:
            raise ValueError("empty weight vector")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ValueError("weights must be finite and nonnegative")
        if not (w > 0).any():
            raise ValueError("all weights are zero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.ones(n), "uniform")


def nelson_aalen(times, events, weights: WeightVector | None = None) -> SurvivalCurve:
    """Weighted Nelson-Aalen estimate returned as ``S(t) = exp(-Lambda(t))``.

    At each distinct event time ``s`` the hazard increment is the weighted
    number of events at ``s`` over the weighted number at risk
    (``time >= s``). Tied events share one increment; subjects censored at
    ``s`` stay in the risk set. Weights are rescaled by their maximum first,
    so any constant weight vector reproduces the unweighted estimate bit for
    bit.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    events = np.asarray(events, dtype=bool).reshape(-1)
    if times.size == 0:
        raise ValueError("empty input")
    if events.shape != times.shape:
        raise ValueError("times and events must have the same length")
    if (times < 0).any() or not np.isfinite(times).all():
        raise ValueError("times must be finite and nonnegative")
    if weights is None:
        w = np.ones(times.size)
    else:
        if len(weights) != times.size:
            raise ValueError("weights must align with times")
        w = weights.weights / weights.weights.max()

    grid, inverse = np.unique(times, return_inverse=True)
    at_time = np.bincount(inverse, weights=w, minlength=grid.size)
    died = np.bincount(inverse, weights=np.where(events, w, 0.0), minlength=grid.size)
    has_event = np.bincount(inverse, weights=events.astype(float), minlength=grid.size) > 0
    at_risk = np.cumsum(at_time[::-1])[::-1]

    grid, died, at_risk = grid[has_event], died[has_event], at_risk[has_event]
    # curve grids are strictly positive
    if grid.size and grid[0] == 0.0:
        raise ValueError("events at time 0 are not supported")
    with np.errstate(invalid="ignore", divide="ignore"):
        increments = np.where(at_risk > 0, died / at_risk, 0.0)
    cumhaz = np.cumsum(increments)
    return SurvivalCurve(grid, np.exp(-cumhaz), horizon=float(times.max()))


def evaluate(c: SurvivalCurve, t):
    """``S(t)`` under the right-continuous convention; vectorised over ``t``."""
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(c.times, t_arr, side="right")
    padded = np.concatenate(([1.0], c.values))
    out = padded[idx]
    return float(out) if out.ndim == 0 else out


def survival_difference(treat: SurvivalCurve, ctrl: SurvivalCurve, t: float) -> float:
    return float(evaluate(treat, t) - evaluate(ctrl, t))


def restricted_mean(c: SurvivalCurve, t_star: float) -> float:
    """Area under the step function over ``[0, t_star]``, computed exactly."""
    if t_star <= 0:
        raise ValueError("t_star must be positive")
    inside = c.times < t_star
    knots = np.concatenate(([0.0], c.times[inside], [t_star]))
    heights = np.concatenate(([1.0], c.values[inside]))
    return float(np.sum(np.diff(knots) * heights))


def rmst_difference(treat: SurvivalCurve, ctrl: SurvivalCurve, t_star: float) -> float:
    if t_star <= 0:
        raise ValueError("t_star must be positive")
    for name, c in (("treatment", treat), ("control", ctrl)):
        if c.horizon < t_star:
            warnings.warn(
                f"{name} curve ends at {c.horizon:.4g} < t_star={t_star:g}; extrapolating flat",
                ExtrapolationWarning,
                stacklevel=2,
            )
    knots = np.union1d(treat.times, ctrl.times)
    knots = np.concatenate(([0.0], knots[knots < t_star], [t_star]))
    left = knots[:-1]
    diff = evaluate(treat, left) - evaluate(ctrl, left)
    return float(np.sum(np.diff(knots) * diff))


def cumulative_hazard_ratio(treat: SurvivalCurve, ctrl: SurvivalCurve, grid: Sequence[float]) -> np.ndarray:
    """Pointwise ``Lambda_treat / Lambda_ctrl``; NaN where the control hazard is zero."""
    grid = np.asarray(grid, dtype=float)
    num = -np.log(evaluate(treat, grid))
    den = -np.log(evaluate(ctrl, grid))
    out = np.full(grid.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def mixture(curves: Sequence[SurvivalCurve], weights: Sequence[float]) -> SurvivalCurve:
    """Convex combination of curves on their merged grid.

    Components with zero weight are skipped, so a degenerate mixture returns
    its single remaining component unchanged.
    """
    pairs = [(c, float(w)) for c, w in zip(curves, weights) if w != 0]
    if not pairs:
        raise ValueError("mixture needs at least one positive weight")
    if any(w < 0 for _, w in pairs) or abs(sum(w for _, w in pairs) - 1) > 1e-12:
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    if len(pairs) == 1:
        return pairs[0][0]
    grid = pairs[0][0].times
    for c, _ in pairs[1:]:
        grid = np.union1d(grid, c.times)
    values = sum(w * evaluate(c, grid) for c, w in pairs)
    values = np.minimum(np.minimum.accumulate(values), 1.0)
    horizon = min(c.horizon for c, _ in pairs)
    return SurvivalCurve(grid, values, horizon=horizon)
