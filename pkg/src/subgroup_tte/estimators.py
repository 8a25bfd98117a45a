"""Subgroup effect estimators for the would-be treatment responders.

Every method shares the treatment-arm curve (Nelson-Aalen on treated
responders) and differs only in how the placebo curve for that subgroup is
built:

* ``PPR``  - average of Cox-predicted placebo curves over the treated
  responders' covariates.
* ``WPP``  - placebo Nelson-Aalen weighted by the treatment-arm probability
  of responding given covariates.
* ``MEA``  - mixture of placebo responders and rank-weighted placebo
  non-responders, with a sensitivity parameter ``delta``.
* ``NAIVE_FULLPBO`` / ``NAIVE_THRES`` - whole placebo arm / placebo
  responders.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .coxph import average_predicted_curve, fit_cox
from .data import COVARIATES, TrialDataset, stratum_proportions
from .errors import EstimationError
from .logistic import fit_logistic, predict_probability
from .survival import (
    SurvivalCurve,
    WeightVector,
    mixture,
    nelson_aalen,
    rmst_difference,
    survival_difference,
)

DEFAULT_HORIZONS = (2.0, 5.0)
DEFAULT_T_STAR = 5.0


class Method(str, enum.Enum):
    PPR = "PPR"
    WPP = "WPP"
    MEA = "MEA"
    NAIVE_FULLPBO = "NAIVE_FULLPBO"
    NAIVE_THRES = "NAIVE_THRES"


@dataclass(frozen=True)
class MethodSpec:
    kind: Method
    delta: float | None = None
    covariates: tuple = COVARIATES

    def __post_init__(self):
        object.__setattr__(self, "kind", Method(self.kind))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.kind is Method.MEA:
            if self.delta is None or not self.delta > 0:
                raise ValueError("MEA needs a positive delta")
            object.__setattr__(self, "delta", float(self.delta))
        elif self.delta is not None:
            raise ValueError(f"delta only applies to MEA, not {self.kind.value}")
        for c in self.covariates:
            if c not in COVARIATES:
                raise ValueError(f"unknown covariate {c!r}")

    @property
    def label(self) -> str:
        if self.kind is Method.MEA:
            return f"MEA(delta={self.delta:g})"
        if self.kind in (Method.PPR, Method.WPP) and self.covariates != COVARIATES:
            return f"{self.kind.value}({'+'.join(self.covariates) or 'none'})"
        return self.kind.value

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.delta is not None:
            out["delta"] = self.delta
        if self.kind in (Method.PPR, Method.WPP):
            out["covariates"] = list(self.covariates)
        return out


def default_methods() -> list[MethodSpec]:
    """The six analyses compared in the simulation study."""
    return [
        MethodSpec(Method.PPR),
        MethodSpec(Method.WPP),
        MethodSpec(Method.MEA, delta=0.05),
        MethodSpec(Method.MEA, delta=50.0),
        MethodSpec(Method.NAIVE_FULLPBO),
        MethodSpec(Method.NAIVE_THRES),
    ]


def delta_label(t: float) -> str:
    return f"delta({t:g})"


def rmst_label(t_star: float) -> str:
    return f"rmst({t_star:g})"


@dataclass(frozen=True, eq=False)
class EstimateReport:
    method: MethodSpec
    treat_curve: SurvivalCurve
    control_curve: SurvivalCurve
    delta_t: dict
    delta_rmst: float
    horizons: tuple
    t_star: float
    intervals: dict = field(default_factory=dict)

    def estimands(self) -> dict:
        """All point estimates keyed by estimand label, e.g. ``delta(2)``."""
        out = {delta_label(t): v for t, v in self.delta_t.items()}
        out[rmst_label(self.t_star)] = self.delta_rmst
        return out

    def to_dict(self) -> dict:
        out = {
            "method": self.method.label,
            "spec": self.method.to_dict(),
            "horizons": list(self.horizons),
            "t_star": self.t_star,
            "delta_t": {f"{t:g}": v for t, v in self.delta_t.items()},
            "delta_rmst": self.delta_rmst,
        }
        if self.intervals:
            out["intervals"] = {
                k: {"point": iv.point, "lower": iv.lower, "upper": iv.upper,
                    "n_failed_resamples": iv.n_failed_resamples}
                for k, iv in self.intervals.items()
            }
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def treatment_subgroup_curve(d: TrialDataset) -> SurvivalCurve:
    sel = (d.arm == 1) & d.responder
    if not sel.any():
        raise EstimationError("no biomarker responders on the treatment arm")
    return nelson_aalen(d.time[sel], d.event[sel])


def _placebo(d: TrialDataset):
    sel = d.arm == 0
    if not sel.any():
        raise EstimationError("empty placebo arm")
    return sel


def ppr_control_curve(d: TrialDataset, covariate_set: Sequence[str] = COVARIATES) -> SurvivalCurve:
    """Average Cox-predicted placebo survival over the treated responders."""
    pbo = _placebo(d)
    target = (d.arm == 1) & d.responder
    if not target.any():
        raise EstimationError("no biomarker responders on the treatment arm")
    Z = d.covariates(tuple(covariate_set))
    model = fit_cox(d.time[pbo], d.event[pbo], Z[pbo])
    return average_predicted_curve(model, Z[target])


def wpp_weights(d: TrialDataset, covariate_set: Sequence[str] = COVARIATES) -> WeightVector:
    """Treatment-arm response probabilities, predicted for every placebo patient."""
    treated = d.arm == 1
    pbo = _placebo(d)
    Z = d.covariates(tuple(covariate_set))
    model = fit_logistic(d.responder[treated], Z[treated])
    w = np.atleast_1d(predict_probability(model, Z[pbo]))
    if w.sum() < 1e-10:
        raise EstimationError("predicted response probabilities on placebo are all ~0")
    return WeightVector(w, "logistic-model")


def wpp_control_curve(d: TrialDataset, covariate_set: Sequence[str] = COVARIATES) -> SurvivalCurve:
    pbo = _placebo(d)
    return nelson_aalen(d.time[pbo], d.event[pbo], wpp_weights(d, covariate_set))


def mea_weight(tau, pi_tilde: float, delta: float):
    """Decreasing logistic in the placebo biomarker quantile ``tau``, centred at ``pi_tilde``.

    Tends to ``1[tau < pi_tilde]`` as ``delta -> 0`` and to ``1/2`` as
    ``delta -> inf``.
    """
    x = (np.asarray(tau, dtype=float) - pi_tilde) / delta
    out = expit(-x)
    return float(out) if out.ndim == 0 else out


def mea_weights(placebo_nonresponder_betas, pi_tilde: float, delta: float) -> WeightVector:
    """Rank-based weights for placebo non-responders.

    The ``i``-th smallest biomarker (ties kept in input order) gets quantile
    ``tau_i = i / (n + 1)`` and weight ``mea_weight(tau_i, pi_tilde, delta)``.
    Weights are returned in input order.
    """
    betas = np.asarray(placebo_nonresponder_betas, dtype=float).reshape(-1)
    if betas.size == 0:
        raise EstimationError("no placebo non-responders to weight")
    if not 0 <= pi_tilde <= 1:
        raise ValueError("pi_tilde must lie in [0, 1]")
    if not delta > 0:
        raise ValueError("delta must be positive")
    order = np.argsort(betas, kind="stable")
    tau = np.empty(betas.size)
    tau[order] = np.arange(1, betas.size + 1) / (betas.size + 1)
    w = mea_weight(tau, pi_tilde, delta)
    if not (w > 0).any():
        raise EstimationError(f"all MEA weights underflow to 0 (pi_tilde={pi_tilde:g}, delta={delta:g})")
    return WeightVector(w, "mea-rank")


def mea_control_curve(d: TrialDataset, delta: float) -> SurvivalCurve:
    """``pi * S(placebo responders) + (1 - pi) * S(weighted placebo non-responders)``."""
    props = stratum_proportions(d)
    pbo = _placebo(d)
    resp = pbo & d.responder
    nonresp = pbo & ~d.responder
    if not resp.any():
        raise EstimationError("no biomarker responders on placebo")
    if not nonresp.any():
        raise EstimationError("no biomarker non-responders on placebo")
    s_resp = nelson_aalen(d.time[resp], d.event[resp])
    if props.pi == 1.0:
        return s_resp
    w = mea_weights(d.beta[nonresp], props.pi_tilde, delta)
    s_nonresp = nelson_aalen(d.time[nonresp], d.event[nonresp], w)
    return mixture([s_resp, s_nonresp], [props.pi, 1.0 - props.pi])


def naive_control_curve(d: TrialDataset, kind: str | Method) -> SurvivalCurve:
    if kind in ("FULLPBO", "THRES"):
        kind = f"NAIVE_{kind}"
    kind = Method(kind)
    pbo = _placebo(d)
    if kind is Method.NAIVE_FULLPBO:
        sel = pbo
    elif kind is Method.NAIVE_THRES:
        sel = pbo & d.responder
    else:
        raise ValueError(f"not a naive method: {kind}")
    if not sel.any():
        raise EstimationError(f"{kind.value}: no placebo patients selected")
    return nelson_aalen(d.time[sel], d.event[sel])


def control_curve(d: TrialDataset, m: MethodSpec) -> SurvivalCurve:
    if m.kind is Method.PPR:
        return ppr_control_curve(d, m.covariates)
    if m.kind is Method.WPP:
        return wpp_control_curve(d, m.covariates)
    if m.kind is Method.MEA:
        return mea_control_curve(d, m.delta)
    return naive_control_curve(d, m.kind)


def _report(m, treat, ctrl, horizons, t_star):
    horizons = tuple(float(h) for h in horizons)
    if any(h > t_star for h in horizons):
        warnings.warn("survival-difference horizons beyond t_star", stacklevel=3)
    return EstimateReport(
        method=m,
        treat_curve=treat,
        control_curve=ctrl,
        delta_t={h: survival_difference(treat, ctrl, h) for h in horizons},
        delta_rmst=rmst_difference(treat, ctrl, t_star),
        horizons=horizons,
        t_star=float(t_star),
    )


def estimate(
    d: TrialDataset,
    m: MethodSpec,
    horizons: Sequence[float] = DEFAULT_HORIZONS,
    t_star: float = DEFAULT_T_STAR,
) -> EstimateReport:
    d.require_both_arms()
    return _report(m, treatment_subgroup_curve(d), control_curve(d, m), horizons, t_star)


def estimate_many(
    d: TrialDataset,
    methods: Sequence[MethodSpec],
    horizons: Sequence[float] = DEFAULT_HORIZONS,
    t_star: float = DEFAULT_T_STAR,
    errors: str = "raise",
) -> dict:
    """Run several methods sharing one treatment curve.

    Returns ``{label: EstimateReport}``; with ``errors="collect"`` a failing
    method maps to its exception instead of aborting the others.
    """
    d.require_both_arms()
    treat = treatment_subgroup_curve(d)
    out = {}
    for m in methods:
        try:
            out[m.label] = _report(m, treat, control_curve(d, m), horizons, t_star)
        except (EstimationError, ValueError) as exc:
            if errors == "raise":
                raise
            out[m.label] = exc
    return out


def exponential_rate(c: SurvivalCurve) -> float:
    """Least-squares rate of ``log S(t) = -rate * t`` through the origin."""
    if c.times.size == 0:
        raise EstimationError("curve has no event times")
    t = c.times
    return float(-np.sum(t * np.log(c.values)) / np.sum(t * t))


def summarize_hazard_ratio(treat: SurvivalCurve, ctrl: SurvivalCurve) -> float:
    """Approximate hazard ratio from exponential fits to both curves."""
    lam_t, lam_c = exponential_rate(treat), exponential_rate(ctrl)
    if lam_c <= 0 or not math.isfinite(lam_c):
        raise EstimationError("control curve has zero fitted hazard")
    return lam_t / lam_c
