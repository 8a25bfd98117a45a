"""Repeated simulate -> estimate cycles scored against the Monte Carlo truth."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .estimators import DEFAULT_HORIZONS, DEFAULT_T_STAR, default_methods, estimate_many
from .simulator import ScenarioConfig, TruthReport, default_scenario, simulate_trial, true_subgroup_curves

SWEEP_COLUMNS = ("replicate", "method", "estimand", "estimate", "truth", "error")


@dataclass
class SweepConfig:
    scenario: str = "i"
    n_replicates: int = 200
    methods: list = field(default_factory=default_methods)
    horizons: tuple = DEFAULT_HORIZONS
    t_star: float = DEFAULT_T_STAR
    master_seed: int = 0
    output_dir: Path | None = None
    first_replicate: int = 0
    mc_samples: int = 1_000_000
    scenario_config: ScenarioConfig | None = None

    def __post_init__(self):
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")
        if not self.methods:
            raise ValueError("at least one method is required")

    def resolved_scenario(self) -> ScenarioConfig:
        if self.scenario_config is not None:
            return self.scenario_config
        return default_scenario(self.scenario, seed=self.master_seed)


def _replicate_rows(cfg: ScenarioConfig, methods, horizons, t_star, truth: dict, replicates):
    rows = []
    for r in replicates:
        d = simulate_trial(cfg, replicate=r)
        reports = estimate_many(d, methods, horizons, t_star, errors="collect")
        for m in methods:
            rep = reports[m.label]
            for est, true_value in truth.items():
                value = math.nan if isinstance(rep, Exception) else rep.estimands()[est]
                rows.append((r, m.label, est, value, true_value, value - true_value))
    return rows


def run_replicates(sc: SweepConfig, truth: TruthReport, jobs: int = 1) -> list:
    cfg = sc.resolved_scenario()
    reps = list(range(sc.first_replicate, sc.first_replicate + sc.n_replicates))
    work = partial(_replicate_rows, cfg, list(sc.methods), tuple(sc.horizons), float(sc.t_star), truth.estimands())
    if jobs <= 1:
        return work(reps)
    chunks = [reps[k::jobs] for k in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(work, chunks))
    rows = [row for part in parts for row in part]
    rows.sort(key=lambda row: row[0])
    return rows


def summarize(rows) -> dict:
    """Median, quartiles and mean of the error per (method, estimand)."""
    groups: dict = {}
    for _, method, est, _, _, err in rows:
        groups.setdefault(method, {}).setdefault(est, []).append(err)
    out = {}
    for method, per in groups.items():
        out[method] = {}
        for est, errs in per.items():
            e = np.asarray(errs, dtype=float)
            ok = e[np.isfinite(e)]
            if ok.size == 0:
                out[method][est] = {"n": 0, "n_failed": int(e.size)}
                continue
            q25, med, q75 = np.quantile(ok, [0.25, 0.5, 0.75])
            out[method][est] = {
                "n": int(ok.size),
                "n_failed": int(e.size - ok.size),
                "median": float(med),
                "q25": float(q25),
                "q75": float(q75),
                "iqr": float(q75 - q25),
                "mean": float(ok.mean()),
            }
    return out


def run_sweep(sc: SweepConfig, jobs: int = 1, truth: TruthReport | None = None) -> tuple:
    """Run the sweep; write ``errors.csv``, ``summary.json`` and ``truth.json`` if an output dir is set."""
    cfg = sc.resolved_scenario()
    if truth is None:
        truth = true_subgroup_curves(cfg, sc.mc_samples, horizons=sc.horizons, t_star=sc.t_star)
    rows = run_replicates(sc, truth, jobs=jobs)
    summary = summarize(rows)
    if sc.output_dir is not None:
        write_sweep(Path(sc.output_dir), sc, truth, rows, summary)
    return rows, summary, truth


def write_sweep(out: Path, sc: SweepConfig, truth: TruthReport, rows: Sequence, summary: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with (out / "errors.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r, method, est, value, true_value, err in rows:
            w.writerow([r, method, est, repr(float(value)), repr(float(true_value)), repr(float(err))])
    meta = {
        "scenario": sc.resolved_scenario().to_dict(),
        "first_replicate": sc.first_replicate,
        "n_replicates": sc.n_replicates,
        "methods": [m.to_dict() for m in sc.methods],
        "horizons": list(sc.horizons),
        "t_star": sc.t_star,
        "summary": summary,
    }
    (out / "summary.json").write_text(json.dumps(meta, indent=2))
    (out / "truth.json").write_text(json.dumps(truth.to_dict(), indent=2))
