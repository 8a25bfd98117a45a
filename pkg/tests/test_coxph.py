import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subgroup_tte.coxph import ROUNDOFF, average_predicted_curve, fit_cox, predict_survival
from subgroup_tte.errors import ConvergenceError, EstimationError, RankDeficiencyError
from subgroup_tte.simulator import default_scenario, draw_cohort, replicate_rng
from subgroup_tte.survival import nelson_aalen


def breslow_loglik(b, times, events, z):
    """Direct double loop over event times; reference for the vectorised likelihood."""
    ll = 0.0
    for s in sorted(set(times[events])):
        dying = (times == s) & events
        at_risk = times >= s
        ll += b * z[dying].sum() - dying.sum() * math.log(np.exp(b * z[at_risk]).sum())
    return ll


def grid_argmax(times, events, z):
    grid = np.round(np.arange(-5, 5 + 1e-9, 1e-4), 4)
    ll = [breslow_loglik(b, times, events, z) for b in grid]
    return grid[int(np.argmax(ll))]


def test_null_covariates():
    rng = np.random.default_rng(0)
    t = rng.exponential(1, 50)
    e = rng.random(50) < 0.7
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        m = fit_cox(t, e, np.zeros((50, 2)))
    assert np.array_equal(m.coefficients, [0.0, 0.0])
    na = nelson_aalen(t, e)
    assert np.array_equal(m.baseline_times, na.times)
    assert np.allclose(m.baseline_cumhaz, na.cumulative_hazard(), rtol=1e-14)


def test_recovers_known_coefficient():
    rng = np.random.default_rng(7)
    z = rng.standard_normal(200)
    t = rng.exponential(1.0 / np.exp(-3.1 + 0.7 * z))
    m = fit_cox(t, np.ones(200, bool), z[:, None])
    se = m.standard_errors()[0]
    assert abs(m.coefficients[0] - 0.7) < 3 * se
    assert m.converged and m.gradient_norm < 1e-8


@pytest.mark.parametrize(
    "times, events, z",
    [
        ([1.0, 2.0, 2.0], [True, True, False], [1.0, 0.0, 1.0]),
        ([1.0, 2.0, 3.0, 4.0], [True, True, True, True], [0.0, 1.0, 0.0, 1.0]),
        ([0.5, 1.0, 1.0, 4.0], [True, True, True, False], [1.0, 0.0, 1.0, 0.0]),
        ([1.0, 1.0], [True, True], [0.0, 1.0]),
    ],
)
def test_matches_grid_search_when_mle_is_finite(times, events, z):
    times, events, z = np.array(times), np.array(events), np.array(z)
    m = fit_cox(times, events, z[:, None])
    assert m.coefficients[0] == pytest.approx(grid_argmax(times, events, z), abs=1e-3)


def test_likelihood_matches_reference():
    rng = np.random.default_rng(1)
    t = np.round(rng.exponential(1, 40), 1) + 0.1
    e = rng.random(40) < 0.6
    z = rng.standard_normal(40)
    m = fit_cox(t, e, z[:, None])
    assert m.loglik == pytest.approx(breslow_loglik(m.coefficients[0], t, e, z), rel=1e-12)


def test_two_subjects_distinct_times_is_flagged():
    # the partial likelihood 1/(1+exp(-b)) has no finite maximum; Newton stops
    # once the score is below tolerance, far out on the plateau
    with pytest.warns(UserWarning, match="nearly flat"):
        m = fit_cox([1.0, 2.0], [True, True], [[1.0], [0.0]])
    assert m.coefficients[0] > 15


def test_errors():
    with pytest.raises(EstimationError, match="at least one event"):
        fit_cox([1.0, 2.0], [False, False], [[0.0], [1.0]])
    z = np.random.default_rng(0).standard_normal((30, 1))
    with pytest.raises(RankDeficiencyError) as info:
        fit_cox(np.arange(1, 31.0), np.ones(30, bool), np.hstack([z, 2 * z]))
    assert info.value.column == 1


def test_constant_column_fixed_at_zero():
    rng = np.random.default_rng(5)
    z = rng.standard_normal(80)
    t = rng.exponential(1 / np.exp(0.5 * z))
    with pytest.warns(UserWarning, match="constant"):
        m = fit_cox(t, np.ones(80, bool), np.column_stack([z, np.full(80, 3.0)]))
    ref = fit_cox(t, np.ones(80, bool), z[:, None])
    assert m.coefficients[1] == 0.0
    assert m.coefficients[0] == ref.coefficients[0]


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_loglik_non_decreasing(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 80))
    z = rng.standard_normal((n, 2))
    t = rng.exponential(1 / np.exp(z @ [0.8, -0.4]))
    e = rng.random(n) < 0.8
    e[0] = True
    try:
        m = fit_cox(t, e, z)
    except ConvergenceError:
        return
    h = np.array(m.loglik_history)
    assert np.all(np.diff(h) >= -ROUNDOFF * (1 + np.abs(h[:-1])))


def fitted_model():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((100, 2))
    t = rng.exponential(1 / np.exp(z @ [0.5, -0.3]))
    return fit_cox(t, rng.random(100) < 0.8, z)


def test_predict_baseline_identity():
    m = fitted_model()
    c = predict_survival(m, [0.0, 0.0])
    assert np.array_equal(c.values, np.exp(-m.baseline_cumhaz))


def test_predict_null_coefficients():
    m = fit_cox([1.0, 2.0, 3.0], [True, True, False], np.zeros((3, 1)))
    assert predict_survival(m, [4.2]).equals(predict_survival(m, [0.0]))


def test_predict_doubling_squares():
    m = fitted_model()
    b = m.coefficients
    z1 = np.array([0.3, -0.2])
    z2 = z1 + b * (math.log(2) / (b @ b))
    s1, s2 = predict_survival(m, z1).values, predict_survival(m, z2).values
    assert np.allclose(s2, s1**2, rtol=0, atol=1e-12)


def test_predict_dimension_mismatch():
    with pytest.raises(ValueError):
        predict_survival(fitted_model(), [1.0])


@given(st.lists(st.floats(-4, 4), min_size=2, max_size=2))
@settings(max_examples=50, deadline=None)
def test_predict_monotone(z):
    v = predict_survival(fitted_model(), z).values
    assert np.all(np.diff(v) <= 0) and np.all(v > 0)


def test_average_single_and_identical_rows():
    m = fitted_model()
    z = np.array([[0.4, 1.0]])
    ref = predict_survival(m, z[0])
    assert np.allclose(average_predicted_curve(m, z).values, ref.values, rtol=1e-15)
    assert np.allclose(average_predicted_curve(m, np.repeat(z, 2, axis=0)).values, ref.values, rtol=1e-15)


def test_average_two_rows_hand_arithmetic():
    m = fitted_model()
    b = m.coefficients
    rows = np.array([[0.0, 0.0], b * (math.log(2) / (b @ b))])
    avg = average_predicted_curve(m, rows)
    lam = m.baseline_cumhaz
    for k in (0, lam.size // 2, lam.size - 1):
        assert avg.values[k] == pytest.approx((math.exp(-lam[k]) + math.exp(-2 * lam[k])) / 2, abs=1e-12)


def test_average_empty():
    with pytest.raises(ValueError):
        average_predicted_curve(fitted_model(), np.empty((0, 2)))


def test_json_dump():
    d = json.loads(fitted_model().to_json())
    assert set(d) >= {"coefficients", "baseline_times", "baseline_cumhaz", "iterations", "gradient_norm"}


def test_placebo_coefficients_recovered_scenario_i():
    # placebo hazard depends on (z0, z1) directly and on beta only through them
    cfg = default_scenario("i")
    g1, g2 = cfg.gamma[1], cfg.gamma[2]
    est = []
    for r in range(200):
        c = draw_cohort(cfg, 800, replicate_rng(99, r))
        pbo = c["arm"] == 0
        m = fit_cox(c["event_time"][pbo], np.ones(pbo.sum(), bool), np.column_stack([c["z0"], c["z1"]])[pbo])
        est.append(m.coefficients)
    mean = np.mean(est, axis=0)
    assert abs(mean[0] - g1) < 0.05
    assert abs(mean[1] - g2) < 0.05
