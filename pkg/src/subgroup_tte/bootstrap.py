"""Arm-stratified nonparametric bootstrap with percentile intervals."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .data import TrialDataset
from .errors import EstimationError
from .estimators import DEFAULT_HORIZONS, DEFAULT_T_STAR, MethodSpec, estimate_many

MAX_FAILURE_RATE = 0.10


@dataclass(frozen=True)
class BootstrapConfig:
    n_resamples: int = 1000
    level: float = 0.90
    seed: int = 0

    def __post_init__(self):
        if self.n_resamples < 2:
            raise ValueError("n_resamples must be at least 2")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    n_failed_resamples: int = 0

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def resample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


def resample_indices(d: TrialDataset, rng: np.random.Generator) -> np.ndarray:
    """Row indices drawn with replacement within each arm, arm sizes preserved."""
    parts = []
    for a in (0, 1):
        rows = np.flatnonzero(d.arm == a)
        parts.append(rows[rng.integers(0, rows.size, rows.size)])
    return np.concatenate(parts)


def resample(d: TrialDataset, rng: np.random.Generator) -> TrialDataset:
    idx = resample_indices(d, rng)
    ids = [f"{d.ids[i]}#{k}" for k, i in enumerate(idx)]
    return d.take(idx, ids=ids)


def _run_resamples(d, statistic, seed, indices):
    out = []
    for b in indices:
        try:
            out.append(statistic(resample(d, resample_rng(seed, b))))
        except (EstimationError, ValueError) as exc:
            out.append(exc)
    return out


def bootstrap_distribution(
    d: TrialDataset,
    statistic: Callable[[TrialDataset], object],
    cfg: BootstrapConfig,
    jobs: int = 1,
) -> list:
    """Apply ``statistic`` to each resample; failures come back as exception objects.

    Resample ``b`` always uses the stream keyed by ``(cfg.seed, b)``, so the
    result does not depend on ``jobs``.
    """
    indices = range(cfg.n_resamples)
    if jobs <= 1:
        return _run_resamples(d, statistic, cfg.seed, indices)
    chunks = [list(indices[k::jobs]) for k in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(partial(_run_resamples, d, statistic, cfg.seed), chunks))
    out = [None] * cfg.n_resamples
    for chunk, part in zip(chunks, parts):
        for b, value in zip(chunk, part):
            out[b] = value
    return out


def percentile_interval(point: float, values, level: float, n_total: int) -> IntervalEstimate:
    """Type-7 quantile interval over the successful resample values.

    ``values`` may contain ``None`` for failed resamples; more than 10%
    failures is an error.
    """
    ok = np.array([v for v in values if v is not None], dtype=float)
    failed = n_total - ok.size
    if failed > MAX_FAILURE_RATE * n_total:
        raise EstimationError(f"{failed} of {n_total} bootstrap resamples failed")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(ok, [alpha, 1.0 - alpha], method="linear")
    return IntervalEstimate(point=float(point), lower=float(lo), upper=float(hi), n_failed_resamples=int(failed))


def _estimands_for(methods, horizons, t_star, d):
    reports = estimate_many(d, methods, horizons, t_star, errors="collect")
    return {
        label: (r if isinstance(r, Exception) else r.estimands())
        for label, r in reports.items()
    }


def bootstrap_methods(
    d: TrialDataset,
    methods: Sequence[MethodSpec],
    cfg: BootstrapConfig,
    horizons: Sequence[float] = DEFAULT_HORIZONS,
    t_star: float = DEFAULT_T_STAR,
    jobs: int = 1,
) -> dict:
    """Intervals for every (method, estimand) pair from one set of resamples.

    Returns ``{method_label: {estimand_label: IntervalEstimate}}``. A method
    whose point estimate fails, or that fails on more than 10% of the
    resamples, maps to the exception instead.
    """
    points = _estimands_for(methods, horizons, t_star, d)
    stat = partial(_estimands_for, list(methods), tuple(horizons), float(t_star))
    draws = bootstrap_distribution(d, stat, cfg, jobs=jobs)
    out = {}
    for m in methods:
        label = m.label
        if isinstance(points[label], Exception):
            out[label] = points[label]
            continue
        per_draw = [
            None if isinstance(dr, Exception) or isinstance(dr[label], Exception) else dr[label]
            for dr in draws
        ]
        try:
            out[label] = {
                est: percentile_interval(
                    point,
                    [None if v is None else v[est] for v in per_draw],
                    cfg.level,
                    cfg.n_resamples,
                )
                for est, point in points[label].items()
            }
        except EstimationError as exc:
            out[label] = exc
    return out


def bootstrap_estimate(
    d: TrialDataset,
    m: MethodSpec | None,
    estimand: str,
    cfg: BootstrapConfig,
    horizons: Sequence[float] = DEFAULT_HORIZONS,
    t_star: float = DEFAULT_T_STAR,
    statistic: Callable[[TrialDataset], float] | None = None,
    jobs: int = 1,
) -> IntervalEstimate:
    """Percentile interval for one estimand (e.g. ``"rmst(5)"``) of one method.

    ``statistic`` overrides the estimation pipeline with any scalar function
    of a dataset.

    Raises
    ------
    EstimationError
        If the point estimate fails or more than 10% of resamples fail.
    """
    if statistic is None:
        if m is None:
            raise ValueError("need a method or a statistic")
        result = bootstrap_methods(d, [m], cfg, horizons, t_star, jobs=jobs)[m.label]
        if isinstance(result, Exception):
            raise result
        if estimand not in result:
            raise KeyError(f"unknown estimand {estimand!r}; available: {sorted(result)}")
        return result[estimand]
    point = statistic(d)
    draws = bootstrap_distribution(d, statistic, cfg, jobs=jobs)
    values = [None if isinstance(v, Exception) else v for v in draws]
    return percentile_interval(point, values, cfg.level, cfg.n_resamples)
