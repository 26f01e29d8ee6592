import numpy as np
import pytest

from app.errors import InvariantError, OutOfScopeStageError, SchemaMismatchError
from app.schemas.ensemble import (
    SUBSETS,
    AgreementReport,
    ModelSource,
    PatientPrediction,
    PredictionClass,
    PrognosisGroup,
    ReportRow,
    subset_name,
)
from app.schemas.models import LinearModel, MlpModel
from app.schemas.preprocess import SurvivalLabel
from app.services.ensemble_service import ensemble_service

SURVIVE, DIE = PredictionClass.SURVIVE, PredictionClass.DIE
T, L, A = ModelSource.T, ModelSource.L, ModelSource.A


def test_tnm_rule():
    assert ensemble_service.tnm_rule(2) == SURVIVE
    assert ensemble_service.tnm_rule(3) == DIE
    for stage in (1, 4):
        with pytest.raises(OutOfScopeStageError):
            ensemble_service.tnm_rule(stage)


def test_agreement_filter_predicts_only_on_consensus():
    preds = {T: SURVIVE, L: SURVIVE, A: DIE}
    assert ensemble_service.agreement_filter(preds, [T, L]).prediction == SURVIVE
    assert ensemble_service.agreement_filter(preds, [T, L, A]).abstained
    assert ensemble_service.agreement_filter(preds, [A]).prediction == DIE


def test_agreement_filter_needs_every_consulted_source():
    with pytest.raises(SchemaMismatchError):
        ensemble_service.agreement_filter({T: SURVIVE}, [T, L])


@pytest.mark.parametrize("stage,learned,expected", [
    (2, SURVIVE, SURVIVE),
    (3, DIE, DIE),
    (2, DIE, None),
    (3, SURVIVE, None),
])
def test_confidence_rule(stage, learned, expected):
    assert ensemble_service.confidence_rule(stage, learned).prediction == expected


def test_prognosis_groups():
    assert ensemble_service.prognosis_group(2, SURVIVE) == PrognosisGroup.TNM2_PRED_SURVIVE
    assert ensemble_service.prognosis_group(3, SURVIVE) == PrognosisGroup.TNM3_PRED_SURVIVE
    assert ensemble_service.prognosis_group(3, DIE).value == "TNM3_PredDie"
    with pytest.raises(OutOfScopeStageError):
        ensemble_service.prognosis_group(1, DIE)


def test_antilearner_inverts_its_base_model():
    base = LinearModel(weights=[1.0], bias=0.0, objective=0.0)
    assert ensemble_service.base_classes(base, np.array([[2.0], [-2.0]])) == [SURVIVE, DIE]
    assert ensemble_service.antilearn_predict(base, [2.0]) == DIE
    assert ensemble_service.antilearn_classes(base, np.array([[-2.0]])) == [SURVIVE]


def test_undecided_mlp_base_sends_the_antilearner_to_die():
    base = MlpModel(layer_sizes=[2, 2, 1], weights=[[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0]]], biases=[[0.0, 0.0], [0.0]])
    assert ensemble_service.base_classes(base, np.array([[1.0, -3.0]])) == [SURVIVE]
    assert ensemble_service.antilearn_predict(base, [1.0, -3.0]) == DIE


def test_inverting_twice_recovers_the_base_classes():
    base = LinearModel(weights=[1.0, -0.5], bias=0.25, objective=0.0)
    X = np.array([[2.0, 0.0], [-2.0, 1.0], [0.0, 3.0], [0.5, 0.5]])
    twice = [c.inverted() for c in ensemble_service.antilearn_classes(base, X)]
    assert twice == ensemble_service.base_classes(base, X)


@pytest.mark.parametrize("stage", [2, 3])
@pytest.mark.parametrize("learned", [SURVIVE, DIE])
def test_confidence_rule_is_the_stage_and_learner_agreement(stage, learned):
    via_filter = ensemble_service.agreement_filter({T: ensemble_service.tnm_rule(stage), L: learned}, [T, L])
    assert ensemble_service.confidence_rule(stage, learned) == via_filter


def test_documented_accuracy_formatting():
    row = ReportRow(subset="T", n_patients=240, n_correct=155, accuracy=155 / 240, coverage=1.0)
    assert row.percent == "64.6%"
    report = AgreementReport(total_patients=240, rows=[row])
    assert "64.6%" in ensemble_service.format_report(report)


def test_row_accuracy_must_match_counts():
    with pytest.raises(ValueError):
        ReportRow(subset="T", n_patients=10, n_correct=5, accuracy=0.6, coverage=1.0)


def random_fixture(rng, n):
    classes = [SURVIVE, DIE]
    preds = [{s: classes[rng.integers(2)] for s in ModelSource} for _ in range(n)]
    labels = [SurvivalLabel.SURVIVED if rng.random() < 0.5 else SurvivalLabel.DIED for _ in range(n)]
    return preds, labels


def test_report_rows_match_a_brute_force_recount():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(1, 60))
        preds, labels = random_fixture(rng, n)
        report = ensemble_service.build_report(preds, labels, seed=1)
        for subset in SUBSETS:
            agreed = [i for i in range(n) if len({preds[i][s] for s in subset}) == 1]
            correct = [
                i for i in agreed
                if (preds[i][subset[0]] == SURVIVE) == (labels[i] == SurvivalLabel.SURVIVED)
            ]
            row = report.row(subset_name(subset))
            assert (row.n_patients, row.n_correct) == (len(agreed), len(correct))
            assert row.coverage == pytest.approx(len(agreed) / n)
        pairwise = min(report.row(name).n_patients for name in ("T+L", "T+A", "L+A"))
        assert report.row("T+L+A").n_patients <= pairwise
        ensemble_service.verify_report(report, preds, labels)


def test_report_row_order_and_empty_subsets():
    preds = [{T: SURVIVE, L: DIE, A: SURVIVE}]
    report = ensemble_service.build_report(preds, [SurvivalLabel.SURVIVED])
    assert [r.subset for r in report.rows] == ["T", "L", "A", "T+L", "T+A", "L+A", "T+L+A"]
    assert report.row("T+L+A").accuracy is None
    assert report.row("T+L+A").percent == "n/a"


def test_verify_report_catches_a_tampered_row():
    rng = np.random.default_rng(3)
    preds, labels = random_fixture(rng, 30)
    report = ensemble_service.build_report(preds, labels)
    rows = list(report.rows)
    first = rows[0]
    rows[0] = ReportRow(
        subset=first.subset,
        n_patients=first.n_patients,
        n_correct=first.n_correct - 1,
        accuracy=(first.n_correct - 1) / first.n_patients,
        coverage=first.coverage,
    )
    tampered = AgreementReport(total_patients=report.total_patients, rows=rows)
    with pytest.raises(InvariantError):
        ensemble_service.verify_report(tampered, preds, labels)


def test_excluded_labels_cannot_be_scored():
    with pytest.raises(SchemaMismatchError):
        ensemble_service.build_report([{T: SURVIVE, L: SURVIVE, A: SURVIVE}], [SurvivalLabel.EXCLUDED])


def test_predictions_table_reads_back():
    predictions = [
        PatientPrediction(patient_id="P1", tnm_stage=2, label="survived", fold=1, T=SURVIVE, L=SURVIVE, A=DIE),
        PatientPrediction(patient_id="P2", tnm_stage=3, label="died", fold=2, T=DIE, L=DIE, A=DIE),
    ]
    frame = ensemble_service.predictions_frame(predictions)
    assert list(frame.columns) == ["patient_id", "tnm_stage", "label", "fold", "T", "L", "A"]
    assert ensemble_service.predictions_from_frame(frame) == predictions
    report = ensemble_service.report_from_predictions(predictions)
    assert report.row("T+L+A").n_patients == 1
    assert report.row("T+L").accuracy == 1.0


def test_single_attribute_scan_finds_the_threshold(make_dataset, attribute, outcome):
    ds = make_dataset([attribute("x"), attribute("flat")], [[1, 0], [2, 0], [3, 0], [4, 0]], [outcome(70)] * 4)
    labels = [SurvivalLabel.SURVIVED, SurvivalLabel.SURVIVED, SurvivalLabel.DIED, SurvivalLabel.DIED]
    scores = ensemble_service.single_attribute_scan(ds, labels)
    best = scores[0]
    assert (best.attribute, best.direction, best.threshold, best.accuracy) == ("x", "lt", 3.0, 1.0)
    assert scores[1].attribute == "flat"
    assert scores[1].accuracy == 0.5


def test_single_attribute_scan_ignores_missing_cells(make_dataset, attribute, outcome):
    present = [[True], [True], [False], [True]]
    ds = make_dataset([attribute("x")], [[5.0], [1.0], [0.0], [1.0]], [outcome(70)] * 4, present)
    labels = [SurvivalLabel.SURVIVED, SurvivalLabel.DIED, SurvivalLabel.SURVIVED, SurvivalLabel.DIED]
    [score] = ensemble_service.single_attribute_scan(ds, labels)
    assert score.accuracy == 1.0
    assert score.direction == "ge"
