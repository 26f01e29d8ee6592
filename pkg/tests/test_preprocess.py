import numpy as np
import pytest
from scipy.stats import chi2_contingency

from app.errors import DegenerateDatasetError, SchemaMismatchError
from app.schemas.dataset import AttributeKind, Role
from app.schemas.preprocess import ExclusionConfig, ImputationStatistic, SurvivalLabel
from app.services.preprocess_service import preprocess_service

S, D, X = SurvivalLabel.SURVIVED, SurvivalLabel.DIED, SurvivalLabel.EXCLUDED


@pytest.fixture
def protocol_fixture(make_dataset, attribute, outcome):
    """Ten patients and seven attributes with one known violation per rule."""
    attributes = [
        attribute("a1"),
        attribute("a2"),
        attribute("sparse"),
        attribute("tnm", "ordinal", 4, roles=(Role.TNM_DERIVED,)),
        attribute("post", "binary", roles=(Role.POST_OPERATIVE,)),
        attribute("comp", roles=(Role.COMPOUND,)),
        attribute("dup"),
    ]
    outcomes = [
        outcome(100, "alive"),             # low coverage
        outcome(30, "alive"),              # censored before 60 months
        outcome(20, "dead_other"),         # other-cause death before 60 months
        outcome(80, "dead_other"),
        outcome(70, "alive"),
        outcome(70, "dead_of_disease", 3),
        outcome(12, "dead_of_disease", 3),
        outcome(60, "alive"),
        outcome(59, "dead_of_disease", 3),
        outcome(90, "alive", 1),
    ]
    rng = np.random.default_rng(0)
    values = rng.normal(size=(10, 7))
    values[:, 3] = [o.tnm_stage - 1 for o in outcomes]
    values[:, 4] = rng.integers(0, 2, 10)
    present = np.ones((10, 7), dtype=bool)
    present[0, 1:] = False
    present[2:, 2] = False
    return make_dataset(attributes, values, outcomes, present)


def test_protocol_removal_counts(protocol_fixture):
    ds, audit = preprocess_service.apply_protocol(protocol_fixture, ExclusionConfig(drop_attributes=["dup"]))
    removed = [(s.step, s.patients_removed, s.attributes_removed) for s in audit.steps]
    assert removed == [
        ("patient_coverage", 1, 0),
        ("attribute_coverage", 0, 1),
        ("alive_before_threshold", 1, 0),
        ("dead_other_before_threshold", 1, 0),
        ("dropped_roles", 0, 3),
        ("derived_or_correlated", 0, 1),
    ]
    assert audit.telescopes()
    assert ds.attribute_names == ("a1", "a2")
    assert ds.patient_ids == ("P004", "P005", "P006", "P007", "P008", "P009", "P010")


def test_stage_restriction_is_audited(protocol_fixture):
    ds, audit = preprocess_service.apply_protocol(protocol_fixture, ExclusionConfig(drop_attributes=["dup"]))
    restricted = preprocess_service.restrict_stages(ds, [2, 3], audit)
    assert restricted.n_patients == 6
    assert audit.steps[-1].step == "stage_restriction"
    assert audit.steps[-1].patients_removed == 1
    assert audit.telescopes()


def test_restriction_to_absent_stages_is_degenerate(protocol_fixture):
    with pytest.raises(DegenerateDatasetError):
        preprocess_service.restrict_stages(protocol_fixture, [4])


def test_protocol_that_removes_everyone_carries_the_audit(make_dataset, attribute, outcome):
    present = np.array([[True, False], [False, True]])
    ds = make_dataset([attribute("a"), attribute("b")], np.ones((2, 2)), [outcome(70), outcome(70)], present)
    with pytest.raises(DegenerateDatasetError) as e:
        preprocess_service.apply_protocol(ds, ExclusionConfig(min_patient_coverage=1.0))
    assert e.value.audit.steps[0].patients_left == 0
    assert e.value.exit_status == 2


def test_correlation_filter_drops_the_later_column(make_dataset, attribute, outcome):
    x = np.arange(6, dtype=float)
    values = np.column_stack([x, 2 * x + 1, np.array([1.0, -1.0, 2.0, 0.0, 1.0, -2.0])])
    ds = make_dataset([attribute("x"), attribute("x2"), attribute("z")], values, [outcome(70)] * 6)
    kept, audit = preprocess_service.apply_protocol(ds, ExclusionConfig(correlation_threshold=0.9))
    assert kept.attribute_names == ("x", "z")
    assert audit.steps[-1].attributes_removed == 1


@pytest.mark.parametrize("months,status,expected", [
    (60, "alive", S),
    (59, "alive", X),
    (61, "dead_of_disease", S),
    (59, "dead_of_disease", D),
    (0, "dead_of_disease", D),
    (80, "dead_other", X),
    (10, "dead_other", X),
])
def test_five_year_label(outcome, months, status, expected):
    assert preprocess_service.label_five_year(outcome(months, status), 60) == expected


def test_drop_excluded_keeps_labels_aligned(protocol_fixture):
    labels = preprocess_service.label_all(protocol_fixture, 60)
    kept, kept_labels = preprocess_service.drop_excluded(protocol_fixture, labels)
    assert X not in kept_labels
    assert len(kept_labels) == kept.n_patients == 7
    assert kept.patient_ids[0] == "P001"


def test_imputation_statistics(make_dataset, attribute, outcome):
    attributes = [attribute("c"), attribute("o", "ordinal", 5), attribute("b", "binary")]
    values = np.array([
        [1.0, 0, 1],
        [2.0, 1, 0],
        [6.0, 2, 1],
        [0.0, 3, 0],
        [0.0, 0, 0],
    ])
    present = np.array([
        [True, True, True],
        [True, True, True],
        [True, True, True],
        [True, True, True],
        [False, False, False],
    ])
    ds = make_dataset(attributes, values, [outcome(70)] * 5, present)
    plan = preprocess_service.fit_imputation(ds)
    assert [e.statistic for e in plan.entries] == [
        ImputationStatistic.MEAN, ImputationStatistic.MEDIAN, ImputationStatistic.MODE,
    ]
    # median of 0..3 is 1.5, rounded half up; the binary tie goes to the lower value
    assert [e.fill_value for e in plan.entries] == [2.25, 2.0, 0.0]
    filled = preprocess_service.apply_imputation(ds, plan)
    assert filled.present.all()
    assert filled.values[4].tolist() == [2.25, 2.0, 0.0]
    assert filled.values[:4].tolist() == ds.values[:4].tolist()


def test_imputation_plan_must_cover_every_attribute(make_dataset, attribute, outcome):
    ds = make_dataset([attribute("c"), attribute("d")], np.ones((2, 2)), [outcome(70)] * 2)
    plan = preprocess_service.fit_imputation(make_dataset([attribute("c")], np.ones((2, 1)), [outcome(70)] * 2))
    with pytest.raises(SchemaMismatchError):
        preprocess_service.apply_imputation(ds, plan)


def graded_fixture(make_dataset, attribute, outcome):
    # level: (labelled, survived) = 0: 3/10, 1: 8/10, 2: 7/10, 3: 2/10
    levels, labels = [], []
    for level, survivors in ((0, 3), (1, 8), (2, 7), (3, 2)):
        levels += [level] * 10
        labels += [S] * survivors + [D] * (10 - survivors)
    ds = make_dataset([attribute("grade", "ordinal", 4)], np.array(levels, dtype=float), [outcome(70)] * 40)
    return ds, labels


def test_linearization_merges_levels_by_survival_rate(make_dataset, attribute, outcome):
    ds, labels = graded_fixture(make_dataset, attribute, outcome)
    mapping = preprocess_service.fit_linearization(ds, labels)
    grade = mapping.get("grade")
    assert {level: grade.group_of(level) for level in range(4)} == {0: 0, 1: 1, 2: 1, 3: 0}
    assert grade.split_statistic == pytest.approx(10.0)

    linear = preprocess_service.apply_linearization(ds, mapping)
    assert linear.attributes[0].kind == AttributeKind.BINARY
    assert linear.values[:, 0].tolist() == [0.0] * 10 + [1.0] * 20 + [0.0] * 10


def test_level_seen_only_on_excluded_patients_is_flagged(make_dataset, attribute, outcome):
    ds, labels = graded_fixture(make_dataset, attribute, outcome)
    values = np.append(ds.values[:, 0], 4.0)
    extended = make_dataset([attribute("grade", "ordinal", 5)], values, [outcome(70)] * 41)
    mapping = preprocess_service.fit_linearization(extended, labels + [X])
    level4 = [a for a in mapping.get("grade").levels if a.level == 4][0]
    assert level4.flagged
    assert level4.group == 0


def test_attributes_with_two_levels_are_left_alone(make_dataset, attribute, outcome):
    ds = make_dataset([attribute("g", "ordinal", 3)], np.array([0.0, 2.0, 0.0, 2.0]), [outcome(70)] * 4)
    assert preprocess_service.fit_linearization(ds, [S, D, D, S]).attributes == []


def _brute_force_best(levels, survived, n_levels):
    n_labeled = np.bincount(levels, minlength=n_levels)
    n_survived = np.bincount(levels[survived], minlength=n_levels)
    rated = [level for level in range(n_levels) if n_labeled[level]]
    ordered = sorted(rated, key=lambda level: (-n_survived[level] / n_labeled[level], level))
    best = 0.0
    for size in range(1, len(ordered)):
        high, low = ordered[:size], ordered[size:]
        table = np.array([
            [n_survived[high].sum(), n_labeled[high].sum() - n_survived[high].sum()],
            [n_survived[low].sum(), n_labeled[low].sum() - n_survived[low].sum()],
        ])
        if (table.sum(axis=0) > 0).all():
            best = max(best, chi2_contingency(table, correction=False)[0])
    return best


def test_split_matches_brute_force_prefix_search(make_dataset, attribute, outcome):
    rng = np.random.default_rng(7)
    for trial in range(20):
        n_levels = int(rng.integers(3, 7))
        levels = np.concatenate([np.arange(n_levels), rng.integers(0, n_levels, 60 - n_levels)])
        survived = rng.random(60) < 0.2 + 0.6 * (levels % 2)
        survived[:2] = [True, False]
        labels = [S if s else D for s in survived]
        ds = make_dataset([attribute("g", "ordinal", n_levels)], levels.astype(float), [outcome(70)] * 60)
        fitted = preprocess_service.fit_linearization(ds, labels).get("g")
        assert fitted.split_statistic == pytest.approx(_brute_force_best(levels, survived, n_levels), abs=1e-9)
        high = [a.survival_rate for a in fitted.levels if a.group == 1]
        low = [a.survival_rate for a in fitted.levels if a.group == 0]
        assert min(high) >= max(low)


def test_refitting_after_imputation_gives_the_same_fills(make_dataset, attribute, outcome):
    attributes = [attribute("c"), attribute("o", "ordinal", 5), attribute("b", "binary")]
    values = np.array([[1.0, 0, 1], [2.0, 1, 0], [6.0, 2, 1], [0.0, 3, 0], [0.0, 0, 0], [0.0, 0, 0]])
    present = np.ones_like(values, dtype=bool)
    present[4:] = False
    ds = make_dataset(attributes, values, [outcome(70)] * 6, present)
    plan = preprocess_service.fit_imputation(ds)
    refit = preprocess_service.fit_imputation(preprocess_service.apply_imputation(ds, plan))
    assert [e.statistic for e in refit.entries] == [e.statistic for e in plan.entries]
    assert [e.fill_value for e in refit.entries] == pytest.approx([e.fill_value for e in plan.entries])


def test_equal_survival_rates_split_off_the_first_level(make_dataset, attribute, outcome):
    levels = [0] * 10 + [1] * 10 + [2] * 10
    labels = ([S] * 5 + [D] * 5) * 3
    ds = make_dataset([attribute("g", "ordinal", 3)], np.array(levels, dtype=float), [outcome(70)] * 30)
    fitted = preprocess_service.fit_linearization(ds, labels).get("g")
    assert fitted.split_statistic == 0.0
    assert {level: fitted.group_of(level) for level in range(3)} == {0: 1, 1: 0, 2: 0}


def test_level_absent_from_fitting_follows_its_nearest_level(make_dataset, attribute, outcome):
    ds, labels = graded_fixture(make_dataset, attribute, outcome)
    wide = make_dataset([attribute("grade", "ordinal", 5)], ds.values, [outcome(70)] * 40)
    mapping = preprocess_service.fit_linearization(wide, labels)
    assert 4 not in [a.level for a in mapping.get("grade").levels]

    fold = make_dataset([attribute("grade", "ordinal", 5)], np.array([4.0, 3.0, 1.0]), [outcome(70)] * 3)
    assert preprocess_service.apply_linearization(fold, mapping).values[:, 0].tolist() == [0.0, 0.0, 1.0]


def test_linearization_keeps_patients_and_missing_cells(make_dataset, attribute, outcome):
    ds, labels = graded_fixture(make_dataset, attribute, outcome)
    present = np.ones((40, 1), dtype=bool)
    present[[3, 17, 38]] = False
    gappy = make_dataset(list(ds.attributes), ds.values, list(ds.outcomes), present)
    linear = preprocess_service.apply_linearization(gappy, preprocess_service.fit_linearization(gappy, labels))
    assert linear.n_patients == gappy.n_patients
    assert linear.patient_ids == gappy.patient_ids
    assert (linear.present == gappy.present).all()
