import logging

import numpy as np
import pytest

from app.errors import DegenerateDatasetError
from app.schemas.survival import TimedOutcome
from app.services.survival_service import CURVE_COLUMNS, survival_service


def timed(pairs):
    return [TimedOutcome(time=t, event=e) for t, e in pairs]


def brute_force_km(outcomes):
    """S(t) at each distinct death time, straight from the product-limit definition."""
    survival, curve = 1.0, {}
    for t in sorted({o.time for o in outcomes if o.event}):
        at_risk = sum(1 for o in outcomes if o.time >= t)
        deaths = sum(1 for o in outcomes if o.time == t and o.event)
        survival *= 1.0 - deaths / at_risk
        curve[t] = survival
    return curve


def test_hand_computed_curve():
    curve = survival_service.km_estimate(timed([(2, True), (3, False), (4, True), (5, False)]))
    assert [(s.time, s.at_risk, s.deaths) for s in curve.steps] == [(2, 4, 1), (4, 2, 1)]
    assert curve.steps[0].survival == 0.75
    assert curve.steps[1].survival == 0.375


def test_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 11))
        outcomes = timed(zip(rng.integers(0, 8, n).tolist(), (rng.random(n) < 0.6).tolist()))
        curve = survival_service.km_estimate(outcomes)
        expected = brute_force_km(outcomes)
        assert [s.time for s in curve.steps] == sorted(expected)
        for step in curve.steps:
            assert abs(step.survival - expected[step.time]) < 1e-12


def test_censored_at_a_death_time_is_still_at_risk():
    curve = survival_service.km_estimate(timed([(2, True), (2, False)]))
    assert curve.steps[0].at_risk == 2
    assert curve.steps[0].survival == 0.5


def test_all_censored_gives_a_flat_curve():
    curve = survival_service.km_estimate(timed([(3, False), (7, False)]))
    assert curve.steps == []
    assert survival_service.survival_rate_at(curve, 60) == 1.0
    assert survival_service.median_survival(curve) is None


def test_empty_input_is_degenerate():
    with pytest.raises(DegenerateDatasetError):
        survival_service.km_estimate([])


def test_rate_and_median_lookups():
    curve = survival_service.km_estimate(timed([(2, True), (3, False), (4, True), (5, False)]))
    assert survival_service.survival_rate_at(curve, 1) == 1.0
    assert survival_service.survival_rate_at(curve, 3.5) == 0.75
    assert survival_service.survival_rate_at(curve, 100) == 0.375
    assert survival_service.median_survival(curve) == 4


def test_groups_are_independent_and_empty_ones_are_reported(caplog):
    outcomes = timed([(2, True), (4, True), (3, True), (6, False)])
    with caplog.at_level(logging.WARNING):
        grouped = survival_service.km_by_group(outcomes, ["a", "a", "b", "b"], expected_groups=["a", "b", "c"])
    assert list(grouped.curves) == ["a", "b"]
    assert grouped.omitted == ["c"]
    assert "'c'" in caplog.text
    assert grouped.curves["a"].steps[-1].survival == 0.0
    assert grouped.curves["b"].steps[0].survival == 0.5


def test_prognosis_summary_per_group():
    outcomes = timed([(10, True), (70, False), (20, True), (30, True)])
    grouped = survival_service.km_by_group(outcomes, ["good", "good", "poor", "poor"])
    summary = {s.group: s for s in survival_service.prognosis_summary(grouped, 60)}
    assert summary["good"].n_patients == 2
    assert summary["good"].survival_at_horizon == 0.5
    assert summary["poor"].survival_at_horizon == 0.0
    assert summary["poor"].median_survival == 20


def test_curves_frame_layout():
    outcomes = timed([(2, True), (3, False), (4, True), (80, False)])
    grouped, frame = survival_service.curves_frame(outcomes, ["g"] * 4, horizon=60)
    assert list(frame.columns) == CURVE_COLUMNS
    assert frame.iloc[0].tolist() == ["g", 0, 4, 0, 1.0]
    assert frame.iloc[-1].tolist() == ["g", 60, 1, 0, pytest.approx(1.0 * 0.75 * 0.5)]
    assert len(frame) == 4


def test_death_at_time_zero_writes_a_single_first_row():
    outcomes = timed([(0, True), (5, True), (9, False), (12, False)])
    _, frame = survival_service.curves_frame(outcomes, ["g"] * 4)
    assert frame["time"].tolist() == [0, 5]
    assert frame.iloc[0].tolist() == ["g", 0, 4, 1, 0.75]


def test_timed_outcomes_treat_other_deaths_as_censored(make_dataset, attribute, outcome):
    ds = make_dataset(
        [attribute("x")], np.zeros((3, 1)),
        [outcome(10, "dead_of_disease"), outcome(20, "dead_other"), outcome(70, "alive")],
    )
    outcomes, rows = survival_service.timed_outcomes(ds)
    assert [(o.time, o.event) for o in outcomes] == [(10, True), (20, False), (70, False)]
    assert rows == [0, 1, 2]
    outcomes, rows = survival_service.timed_outcomes(ds, exclude_other_deaths=True)
    assert rows == [0, 2]
