import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subgroup_tte.data import (
    PatientRecord,
    TrialDataset,
    load_dataset,
    proportions_from_counts,
    responder_mask,
    stratum_proportions,
    write_dataset,
)
from subgroup_tte.errors import DataError, EstimationError, MonotonicityWarning

from conftest import make_dataset

HEADER = "id,arm,z0,z1,beta,time,event\n"
ROWS = [
    "p1,0,0.1,-0.2,0.5,1.5,1",
    "p2,0,-1.0,0.3,-0.4,2.0,0",
    "p3,1,0.7,0.0,-1.2,0.8,1",
    "p4,1,0.0,1.1,0.3,3.25,0",
]


def write(tmp_path, rows, header=HEADER):
    p = tmp_path / "trial.csv"
    p.write_text(header + "\n".join(rows) + "\n")
    return p


def test_load_four_rows(tmp_path):
    d = load_dataset(write(tmp_path, ROWS), 0.0)
    assert len(d) == 4
    assert list(d.ids) == ["p1", "p2", "p3", "p4"]
    assert d.arm.tolist() == [0, 0, 1, 1]
    assert d.event.tolist() == [True, False, True, False]
    assert d.time[3] == 3.25


def test_negative_time_rejected(tmp_path):
    rows = ROWS[:3] + ["p4,1,0.0,1.1,0.3,-1,0"]
    with pytest.raises(DataError, match="negative follow-up time"):
        load_dataset(write(tmp_path, rows), 0.0)


def test_duplicate_id_rejected(tmp_path):
    rows = ROWS[:3] + ["p1,1,0.0,1.1,0.3,1.0,0"]
    with pytest.raises(DataError, match="duplicate id"):
        load_dataset(write(tmp_path, rows), 0.0)


def test_malformed_row_reports_line(tmp_path):
    rows = ROWS[:2] + ["p3,1,abc,0.0,-1.2,0.8,1", ROWS[3]]
    with pytest.raises(DataError, match=r":4: malformed"):
        load_dataset(write(tmp_path, rows), 0.0)


def test_wrong_field_count(tmp_path):
    with pytest.raises(DataError, match=r":3: expected 7 fields"):
        load_dataset(write(tmp_path, [ROWS[0], "p2,0,1"]), 0.0)


def test_missing_beta_is_error(tmp_path):
    rows = ROWS[:3] + ["p4,1,0.0,1.1,nan,1.0,0"]
    with pytest.raises(DataError, match="beta"):
        load_dataset(write(tmp_path, rows), 0.0)


def test_empty_arm(tmp_path):
    with pytest.raises(DataError, match="empty arm"):
        load_dataset(write(tmp_path, ROWS[:2]), 0.0)


def test_missing_column(tmp_path):
    with pytest.raises(DataError, match="missing columns"):
        load_dataset(write(tmp_path, ["p1,0,0,0,0,1"], header="id,arm,z0,z1,beta,time\n"), 0.0)


def test_bad_arm_value(tmp_path):
    with pytest.raises(DataError, match="arm"):
        load_dataset(write(tmp_path, ["p1,2,0,0,0,1,1"] + ROWS[1:]), 0.0)


@pytest.mark.parametrize("beta, expected", [(-0.5, True), (0.0, False), (0.3, False)])
def test_responder_mask_strict(beta, expected):
    d = make_dataset([1, 0], [beta, 5.0], [1.0, 1.0], [True, True])
    assert responder_mask(d, 1).tolist() == [expected]


def test_responder_mask_bad_arm(small_trial):
    with pytest.raises(ValueError):
        responder_mask(small_trial, 2)


def test_proportions_typical_rates():
    p = proportions_from_counts(100, 75, 100, 19)
    assert p.pi == pytest.approx(0.19 / 0.75)
    assert p.pi == pytest.approx(0.2533, abs=1e-4)
    assert p.pi_tilde == pytest.approx(0.6914, abs=1e-4)


def test_proportions_boundaries():
    p = proportions_from_counts(10, 10, 10, 0)
    assert (p.pi, p.pi_tilde) == (0.0, 1.0)
    p = proportions_from_counts(10, 5, 10, 5)
    assert (p.pi, p.pi_tilde) == (1.0, 0.0)


def test_proportions_errors():
    with pytest.raises(DataError):
        proportions_from_counts(0, 0, 5, 1)
    with pytest.raises(EstimationError):
        proportions_from_counts(5, 0, 5, 1)


def test_monotonicity_violation_clamped():
    with pytest.warns(MonotonicityWarning):
        p = proportions_from_counts(10, 2, 10, 6)
    assert p.monotonicity_violated
    assert (p.pi, p.pi_tilde) == (1.0, 0.0)


def test_all_placebo_responders_no_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = proportions_from_counts(4, 4, 6, 6)
    assert (p.pi, p.pi_tilde) == (1.0, 0.0)


@given(
    n1=st.integers(1, 500),
    n0=st.integers(1, 500),
    f1=st.fractions(0, 1),
    f0=st.fractions(0, 1),
)
@settings(max_examples=200, deadline=None)
def test_proportion_identities_exact(n1, n0, f1, f0):
    r1 = max(1, int(f1 * n1))
    r0 = int(f0 * n0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotonicityWarning)
        p = proportions_from_counts(n1, r1, n0, r0)
    fr = p.as_fractions()
    if p.monotonicity_violated:
        assert (fr["pi"], fr["pi_tilde"]) == (1, 0)
        return
    assert fr["pi"] * fr["p1_dot"] == fr["p_dot1"]
    assert fr["pi_tilde"] * (1 - fr["p_dot1"]) == fr["p1_dot"] - fr["p_dot1"]
    assert 0 <= fr["pi"] <= 1 and 0 <= fr["pi_tilde"] <= 1
    assert p.pi == float(fr["pi"])
    assert fr["p1_dot"] == Fraction(r1, n1)


def test_stratum_proportions_from_dataset(small_trial):
    p = stratum_proportions(small_trial)
    resp = small_trial.responder
    assert p.p1_dot == resp[small_trial.arm == 1].mean()
    assert p.p_dot1 == resp[small_trial.arm == 0].mean()


def test_roundtrip(tmp_path):
    src = write(tmp_path, ROWS)
    d = load_dataset(src, 0.0)
    out = tmp_path / "out.csv"
    write_dataset(d, out)
    again = load_dataset(out, 0.0)
    for name in ("arm", "z0", "z1", "beta", "time", "event"):
        assert np.array_equal(getattr(d, name), getattr(again, name))
    assert list(again.ids) == list(d.ids)


@given(st.lists(st.tuples(
    st.integers(0, 1),
    st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5),
    st.floats(0, 10), st.booleans(),
), min_size=2, max_size=30))
@settings(max_examples=50, deadline=None)
def test_roundtrip_random(tmp_path_factory, rows):
    rows[0] = (0,) + rows[0][1:]
    rows[1] = (1,) + rows[1][1:]
    recs = [PatientRecord(f"id{i}", a, z0, z1, b, t, e) for i, (a, z0, z1, b, t, e) in enumerate(rows)]
    d = TrialDataset.from_records(recs, threshold=0.25)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_dataset(d, path)
    again = load_dataset(path, 0.25)
    assert list(again.records()) == recs


def test_dataset_is_read_only(small_trial):
    with pytest.raises(ValueError):
        small_trial.time[0] = 1.0


def test_patient_record_validation():
    with pytest.raises(DataError, match="negative"):
        PatientRecord("a", 0, 0.0, 0.0, 0.0, -0.1, True)
    with pytest.raises(DataError):
        PatientRecord("a", 3, 0.0, 0.0, 0.0, 1.0, True)


def test_take_and_covariates(small_trial):
    sub = small_trial.take(np.array([0, 5, 7]))
    assert len(sub) == 3
    assert sub.covariates().shape == (3, 2)
    assert sub.covariates(()).shape == (3, 0)
    with pytest.raises(ValueError):
        sub.covariates(("age",))
