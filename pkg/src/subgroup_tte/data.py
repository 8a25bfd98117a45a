"""Trial data representation, validation and CSV ingestion."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, EstimationError, MonotonicityWarning

CSV_COLUMNS = ("id", "arm", "z0", "z1", "beta", "time", "event")
COVARIATES = ("z0", "z1")


@dataclass(frozen=True)
class PatientRecord:
    id: str
    arm: int
    z0: float
    z1: float
    beta: float
    time: float
    event: bool

    def __post_init__(self):
        if self.arm not in (0, 1):
            raise DataError(f"arm must be 0 or 1, got {self.arm!r}")
        if not math.isfinite(self.time):
            raise DataError("follow-up time must be finite")
        if self.time < 0:
            raise DataError("negative follow-up time")
        if not math.isfinite(self.beta):
            raise DataError("post-baseline biomarker must be finite")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """Column-oriented collection of patients plus the responder cutoff.

    Responder status is never stored: a patient responds iff
    ``beta < threshold``.
    """

    ids: np.ndarray
    arm: np.ndarray
    z0: np.ndarray
    z1: np.ndarray
    beta: np.ndarray
    time: np.ndarray
    event: np.ndarray
    threshold: float = 0.0
    _n: int = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "ids", _frozen(self.ids, object))
        set_(self, "arm", _frozen(self.arm, np.int8))
        for name in ("z0", "z1", "beta", "time"):
            set_(self, name, _frozen(getattr(self, name), float))
        set_(self, "event", _frozen(self.event, bool))
        set_(self, "threshold", float(self.threshold))
        n = len(self.ids)
        for name in CSV_COLUMNS[1:]:
            if getattr(self, name).shape != (n,):
                raise DataError(f"column {name!r} has length {getattr(self, name).shape}, expected {n}")
        set_(self, "_n", n)
        if not np.isin(self.arm, (0, 1)).all():
            raise DataError("arm must be 0 or 1")
        if not np.isfinite(self.time).all():
            raise DataError("follow-up time must be finite")
        if (self.time < 0).any():
            raise DataError("negative follow-up time")
        if not np.isfinite(self.beta).all():
            raise DataError("post-baseline biomarker must be finite")
        if len(set(self.ids.tolist())) != n:
            raise DataError("duplicate id")

    def __len__(self):
        return self._n

    @classmethod
    def from_records(cls, records: Iterable[PatientRecord], threshold: float = 0.0) -> "TrialDataset":
        records = list(records)
        cols = {name: [getattr(r, name) for r in records] for name in CSV_COLUMNS}
        return cls(ids=cols.pop("id"), **cols, threshold=threshold)

    def records(self) -> Iterator[PatientRecord]:
        for i in range(self._n):
            yield PatientRecord(
                id=str(self.ids[i]),
                arm=int(self.arm[i]),
                z0=float(self.z0[i]),
                z1=float(self.z1[i]),
                beta=float(self.beta[i]),
                time=float(self.time[i]),
                event=bool(self.event[i]),
            )

    @property
    def responder(self) -> np.ndarray:
        return self.beta < self.threshold

    def covariates(self, names: Sequence[str] = COVARIATES) -> np.ndarray:
        """Return an ``(n, len(names))`` matrix of the named baseline covariates."""
        for name in names:
            if name not in COVARIATES:
                raise ValueError(f"unknown covariate {name!r}")
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([getattr(self, name) for name in names])

    def take(self, index, ids=None) -> "TrialDataset":
        """Subset (or resample) rows by integer index or boolean mask."""
        index = np.asarray(index)
        return TrialDataset(
            ids=self.ids[index] if ids is None else ids,
            arm=self.arm[index],
            z0=self.z0[index],
            z1=self.z1[index],
            beta=self.beta[index],
            time=self.time[index],
            event=self.event[index],
            threshold=self.threshold,
        )

    def require_both_arms(self):
        for a in (0, 1):
            if not (self.arm == a).any():
                raise DataError(f"empty arm {a}")


@dataclass(frozen=True)
class StratumProportions:
    """Observed responder rates per arm and the derived mixing fractions.

    ``pi`` is the share of would-be treatment responders that also respond on
    placebo; ``pi_tilde`` is the share of placebo non-responders that would
    respond on treatment. Both follow from assuming nobody responds on
    placebo without also responding on treatment.
    """

    p1_dot: float
    p_dot1: float
    pi: float
    pi_tilde: float
    counts: tuple = (0, 0, 0, 0)
    monotonicity_violated: bool = False

    def as_fractions(self) -> dict:
        """Exact rational versions of all four quantities, from ``counts``."""
        n1, r1, n0, r0 = self.counts
        p1, p0 = Fraction(r1, n1), Fraction(r0, n0)
        if self.monotonicity_violated:
            return {"p1_dot": p1, "p_dot1": p0, "pi": Fraction(1), "pi_tilde": Fraction(0)}
        pi_tilde = Fraction(0) if p0 == 1 else (p1 - p0) / (1 - p0)
        return {"p1_dot": p1, "p_dot1": p0, "pi": p0 / p1, "pi_tilde": pi_tilde}


def responder_mask(d: TrialDataset, arm: int) -> np.ndarray:
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm!r}")
    return d.beta[d.arm == arm] < d.threshold


def proportions_from_counts(n1: int, r1: int, n0: int, r0: int) -> StratumProportions:
    """Build stratum proportions from arm sizes and responder counts."""
    if n1 == 0 or n0 == 0:
        raise DataError("empty arm")
    if r1 == 0:
        raise EstimationError("no responders on the treatment arm; subgroup is empty")
    violated = r1 * n0 < r0 * n1
    if violated:
        warnings.warn(
            f"responder rate on placebo ({r0}/{n0}) exceeds treatment ({r1}/{n1}); "
            "clamping pi=1, pi_tilde=0",
            MonotonicityWarning,
            stacklevel=3,
        )
    props = StratumProportions(
        p1_dot=r1 / n1, p_dot1=r0 / n0, pi=0.0, pi_tilde=0.0,
        counts=(n1, r1, n0, r0), monotonicity_violated=violated,
    )
    exact = props.as_fractions()
    return StratumProportions(
        p1_dot=float(exact["p1_dot"]),
        p_dot1=float(exact["p_dot1"]),
        pi=float(exact["pi"]),
        pi_tilde=float(exact["pi_tilde"]),
        counts=props.counts,
        monotonicity_violated=violated,
    )


def stratum_proportions(d: TrialDataset) -> StratumProportions:
    resp = d.responder
    treated = d.arm == 1
    return proportions_from_counts(
        int(treated.sum()), int((resp & treated).sum()),
        int((~treated).sum()), int((resp & ~treated).sum()),
    )


def _parse_bool01(value, name):
    if value.strip() not in ("0", "1"):
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


def load_dataset(path, threshold: float) -> TrialDataset:
    """Read a trial CSV with header ``id,arm,z0,z1,beta,time,event``.

    Raises
    ------
    DataError
        On a malformed row (the message carries the line number), duplicate
        id, negative time, or an arm with no patients.
    """
    path = Path(path)
    cols = {name: [] for name in CSV_COLUMNS}
    seen = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = set(CSV_COLUMNS) - set(header)
        if missing:
            raise DataError(f"{path}: header is missing columns {sorted(missing)}")
        pos = {name: header.index(name) for name in CSV_COLUMNS}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                pid = row[pos["id"]].strip()
                if not pid:
                    raise ValueError("empty id")
                arm = _parse_bool01(row[pos["arm"]], "arm")
                event = _parse_bool01(row[pos["event"]], "event")
                z0, z1, beta, time = (float(row[pos[c]]) for c in ("z0", "z1", "beta", "time"))
            except ValueError as exc:
                raise DataError(f"{path}:{line}: malformed row: {exc}") from None
            if not math.isfinite(beta):
                raise DataError(f"{path}:{line}: missing or non-finite beta")
            if not math.isfinite(time):
                raise DataError(f"{path}:{line}: non-finite follow-up time")
            if time < 0:
                raise DataError(f"{path}:{line}: negative follow-up time")
            if pid in seen:
                raise DataError(f"{path}:{line}: duplicate id {pid!r} (first on line {seen[pid]})")
            seen[pid] = line
            for name, value in zip(CSV_COLUMNS, (pid, arm, z0, z1, beta, time, bool(event))):
                cols[name].append(value)
    d = TrialDataset(ids=cols.pop("id"), **cols, threshold=threshold)
    d.require_both_arms()
    return d


def write_dataset(d: TrialDataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in d.records():
            writer.writerow([r.id, r.arm, repr(r.z0), repr(r.z1), repr(r.beta), repr(r.time), int(r.event)])
