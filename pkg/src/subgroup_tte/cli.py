"""Command-line entry point: ``subgroup-tte {simulate,estimate,sweep,truth}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 estimation failure.
``SUBGROUP_TTE_OUTPUT_DIR`` sets where outputs go when no path is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_methods
from .data import COVARIATES, load_dataset, write_dataset
from .errors import DataError, EstimationError
from .estimators import Method, MethodSpec, estimate_many
from .simulator import ScenarioConfig, default_scenario, simulate_trial, true_subgroup_curves
from .sweep import SweepConfig, run_sweep

log = logging.getLogger("subgroup_tte")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3
OUTPUT_DIR_ENV = "SUBGROUP_TTE_OUTPUT_DIR"
DEFAULT_DELTAS = (0.05, 50.0)
COVARIATE_CHOICES = {"both": COVARIATES, "z0": ("z0",), "z1": ("z1",), "none": ()}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text):
    """Parse ``start:stop:step`` (inclusive) or a comma list."""
    if ":" not in text:
        return np.array(_float_list(text))
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
    return np.linspace(start, stop, int(round((stop - start) / step)) + 1)


def parse_methods(names, deltas, covariates) -> list[MethodSpec]:
    """Expand method names; every MEA entry fans out over ``deltas``."""
    covs = COVARIATE_CHOICES[covariates]
    if names is None:
        names = ["PPR", "WPP", "MEA", "NAIVE_FULLPBO", "NAIVE_THRES"]
    deltas = deltas or DEFAULT_DELTAS
    out = []
    for name in names:
        key = name.strip().upper()
        if key in ("FULLPBO", "THRES"):
            key = f"NAIVE_{key}"
        try:
            kind = Method(key)
        except ValueError:
            raise UsageError(f"unknown method {name!r}") from None
        if kind is Method.MEA:
            out.extend(MethodSpec(kind, delta=d) for d in deltas)
        elif kind in (Method.PPR, Method.WPP):
            out.append(MethodSpec(kind, covariates=covs))
        else:
            out.append(MethodSpec(kind))
    return out


def _default_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _scenario(args) -> ScenarioConfig:
    if getattr(args, "config", None):
        try:
            cfg = ScenarioConfig.from_json(Path(args.config).read_text())
        except (OSError, ValueError, TypeError) as exc:
            raise DataError(f"cannot read scenario config {args.config}: {exc}") from None
        if args.seed is not None:
            cfg = ScenarioConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    else:
        cfg = default_scenario(args.scenario, seed=args.seed or 0)
    if getattr(args, "null_effect", False):
        cfg = cfg.with_null_effect()
    return cfg


def _safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", label).strip("_")


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    out = Path(args.out) if args.out else _default_dir() / f"scenario-{cfg.name}-seed-{cfg.seed}.csv"
    d = simulate_trial(cfg, replicate=args.replicate)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(d, out)
    log.info("wrote %d patients (%d events) to %s", len(d), int(d.event.sum()), out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    methods = parse_methods(args.methods, args.delta, args.covariates)
    data_path = Path(args.data)
    if not data_path.is_file():
        raise DataError(f"no such file: {data_path}")
    d = load_dataset(data_path, args.threshold)
    out = Path(args.out) if args.out else _default_dir() / "report.json"

    reports = estimate_many(d, methods, args.horizons, args.tstar, errors="collect")
    intervals = {}
    if args.bootstrap:
        cfg = BootstrapConfig(n_resamples=args.bootstrap, level=args.level, seed=args.seed)
        intervals = bootstrap_methods(d, methods, cfg, args.horizons, args.tstar, jobs=args.jobs)

    out.parent.mkdir(parents=True, exist_ok=True)
    curve_dir = out.with_name(out.stem + "_curves")
    curve_dir.mkdir(exist_ok=True)
    entries = []
    failed = 0
    treat_written = False
    for m in methods:
        rep = reports[m.label]
        if isinstance(rep, Exception):
            failed += 1
            entries.append({"method": m.label, "spec": m.to_dict(), "error": str(rep)})
            continue
        entry = rep.to_dict()
        iv = intervals.get(m.label)
        if isinstance(iv, Exception):
            entry["bootstrap_error"] = str(iv)
        elif iv:
            entry["intervals"] = {
                k: {"point": v.point, "lower": v.lower, "upper": v.upper, "n_failed_resamples": v.n_failed_resamples}
                for k, v in iv.items()
            }
            entry["level"] = args.level
            entry["n_resamples"] = args.bootstrap
        control_csv = curve_dir / f"{_safe_label(m.label)}_control.csv"
        rep.control_curve.to_csv(control_csv)
        entry["control_curve_csv"] = str(control_csv)
        if not treat_written:
            rep.treat_curve.to_csv(curve_dir / "treatment.csv")
            treat_written = True
        entries.append(entry)
    payload = {
        "data": str(data_path),
        "n_patients": len(d),
        "threshold": d.threshold,
        "treatment_curve_csv": str(curve_dir / "treatment.csv") if treat_written else None,
        "methods": entries,
    }
    out.write_text(json.dumps(payload, indent=2))
    for e in entries:
        if "error" in e:
            log.error("%s failed: %s", e["method"], e["error"])
    return EXIT_ESTIMATION if failed else EXIT_OK


def cmd_sweep(args) -> int:
    methods = parse_methods(args.methods, args.delta, args.covariates)
    out = Path(args.output_dir) if args.output_dir else _default_dir()
    sc = SweepConfig(
        scenario=args.scenario,
        n_replicates=args.replicates,
        methods=methods,
        horizons=args.horizons,
        t_star=args.tstar,
        master_seed=args.seed or 0,
        output_dir=out,
        first_replicate=args.start,
        mc_samples=args.mc_samples,
        scenario_config=_scenario(args) if args.config or args.null_effect else None,
    )
    rows, summary, _ = run_sweep(sc, jobs=args.jobs)
    log.info("wrote %d rows to %s", len(rows), out / "errors.csv")
    return EXIT_OK


def cmd_truth(args) -> int:
    cfg = _scenario(args)
    out = Path(args.out) if args.out else _default_dir() / f"truth-{cfg.name}.json"
    truth = true_subgroup_curves(cfg, args.mc_samples, grid=args.grid, horizons=args.horizons, t_star=args.tstar)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(truth.to_dict(), indent=2))
    with out.with_name(out.stem + "_curves.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "treatment", "control", "difference"])
        for t, s1, s0 in zip(truth.grid, truth.treat_values, truth.control_values):
            w.writerow([repr(float(t)), repr(float(s1)), repr(float(s0)), repr(float(s1 - s0))])
    return EXIT_OK


def _add_scenario_args(p):
    p.add_argument("--scenario", choices=("i", "ii", "iii"), default="i")
    p.add_argument("--config", help="scenario configuration JSON (overrides --scenario)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--null-effect", action="store_true", help="zero all treatment-effect parameters")


def _add_method_args(p):
    p.add_argument("--methods", type=lambda s: [x for x in s.split(",") if x.strip()], default=None,
                   help="comma list from PPR,WPP,MEA,NAIVE_FULLPBO,NAIVE_THRES")
    p.add_argument("--delta", type=_float_list, default=None, help="MEA sensitivity values")
    p.add_argument("--covariates", choices=tuple(COVARIATE_CHOICES), default="both")
    p.add_argument("--horizons", type=_float_list, default=(2.0, 5.0))
    p.add_argument("--tstar", type=float, default=5.0)


def get_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subgroup-tte", description="Treatment effects in early biomarker responders")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate one event-driven trial")
    _add_scenario_args(s)
    s.add_argument("--replicate", type=int, default=None, help="replicate index within the seed")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate subgroup effects from a trial CSV")
    e.add_argument("--data", required=True)
    e.add_argument("--threshold", type=float, default=0.0)
    _add_method_args(e)
    e.add_argument("--bootstrap", type=int, default=0, help="number of bootstrap resamples (0 = none)")
    e.add_argument("--level", type=float, default=0.90)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    w = sub.add_parser("sweep", help="simulation study against the Monte Carlo truth")
    _add_scenario_args(w)
    _add_method_args(w)
    w.add_argument("--replicates", type=int, default=200)
    w.add_argument("--start", type=int, default=0, help="first replicate index")
    w.add_argument("--mc-samples", type=int, default=1_000_000)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--output-dir", "--out", dest="output_dir")
    w.set_defaults(func=cmd_sweep)

    t = sub.add_parser("truth", help="Monte Carlo truth for the responder subgroup")
    _add_scenario_args(t)
    t.add_argument("--mc-samples", type=int, default=1_000_000)
    t.add_argument("--grid", type=_grid, default=None, help="start:stop:step, e.g. 0:5:0.05")
    t.add_argument("--horizons", type=_float_list, default=(2.0, 5.0))
    t.add_argument("--tstar", type=float, default=5.0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_truth)
    return p


def main(argv=None) -> int:
    parser = get_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"subgroup-tte: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # DataError is a ValueError; config validation errors land here too
        print(f"subgroup-tte: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationError, OSError) as exc:
        print(f"subgroup-tte: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION if isinstance(exc, EstimationError) else EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
