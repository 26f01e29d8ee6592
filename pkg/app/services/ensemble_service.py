import logging
from typing import Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import InvariantError, OutOfScopeStageError, SchemaMismatchError
from ..schemas.dataset import Dataset
from ..schemas.ensemble import (
    SUBSETS,
    AgreementReport,
    AttributeScore,
    ModelSource,
    PatientPrediction,
    PredictionClass,
    PrognosisGroup,
    ReportRow,
    SelectiveDecision,
    subset_name,
)
from ..schemas.models import LinearModel, MlpModel
from ..schemas.preprocess import SurvivalLabel
from .learner_service import learner_service

logger = logging.getLogger(__name__)

BaseModel_ = Union[LinearModel, MlpModel]

_PROGNOSIS = {
    (2, PredictionClass.SURVIVE): PrognosisGroup.TNM2_PRED_SURVIVE,
    (2, PredictionClass.DIE): PrognosisGroup.TNM2_PRED_DIE,
    (3, PredictionClass.SURVIVE): PrognosisGroup.TNM3_PRED_SURVIVE,
    (3, PredictionClass.DIE): PrognosisGroup.TNM3_PRED_DIE,
}


def label_class(label: SurvivalLabel) -> PredictionClass:
    if label == SurvivalLabel.SURVIVED:
        return PredictionClass.SURVIVE
    if label == SurvivalLabel.DIED:
        return PredictionClass.DIE
    raise SchemaMismatchError("excluded patients carry no class and must be dropped before scoring")


class EnsembleService:
    @staticmethod
    def tnm_rule(stage: int) -> PredictionClass:
        """Stage 2 survives, stage 3 does not."""
        if stage == 2:
            return PredictionClass.SURVIVE
        if stage == 3:
            return PredictionClass.DIE
        raise OutOfScopeStageError(stage)

    @staticmethod
    def base_classes(base: BaseModel_, X) -> List[PredictionClass]:
        if isinstance(base, LinearModel):
            survive = learner_service.predict_linear_batch(base, X) > 0
        else:
            survive = learner_service.predict_mlp_batch(base, X) >= 0.5
        return [PredictionClass.SURVIVE if s else PredictionClass.DIE for s in survive]

    @staticmethod
    def antilearn_classes(base: BaseModel_, X) -> List[PredictionClass]:
        return [c.inverted() for c in EnsembleService.base_classes(base, X)]

    @staticmethod
    def antilearn_predict(base: BaseModel_, x) -> PredictionClass:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise SchemaMismatchError("antilearn_predict takes a single feature vector")
        return EnsembleService.antilearn_classes(base, x[None, :])[0]

    @staticmethod
    def agreement_filter(preds: Mapping[ModelSource, PredictionClass], consult: Iterable[ModelSource]) -> SelectiveDecision:
        consulted = list(consult)
        absent = [s.value for s in consulted if s not in preds]
        if absent:
            raise SchemaMismatchError(f"no prediction from source(s) {', '.join(absent)}")
        classes = {preds[s] for s in consulted}
        if len(classes) == 1:
            return SelectiveDecision.predicted(classes.pop())
        return SelectiveDecision.abstain()

    @staticmethod
    def confidence_rule(stage: int, learned: PredictionClass) -> SelectiveDecision:
        """Predict only where the stage rule and the learned model agree; otherwise abstain."""
        tnm = EnsembleService.tnm_rule(stage)
        return EnsembleService.agreement_filter(
            {ModelSource.T: tnm, ModelSource.L: learned}, (ModelSource.T, ModelSource.L)
        )

    @staticmethod
    def prognosis_group(stage: int, learned: PredictionClass) -> PrognosisGroup:
        if stage not in (2, 3):
            raise OutOfScopeStageError(stage)
        return _PROGNOSIS[(stage, learned)]

    @staticmethod
    def build_report(
        preds_by_source: Sequence[Mapping[ModelSource, PredictionClass]],
        labels: Sequence[SurvivalLabel],
        seed: Optional[int] = None,
    ) -> AgreementReport:
        if len(preds_by_source) != len(labels):
            raise SchemaMismatchError(f"{len(preds_by_source)} prediction sets for {len(labels)} labels")
        truth = [label_class(label) for label in labels]
        total = len(truth)
        rows = []
        for subset in SUBSETS:
            n_patients = n_correct = 0
            for preds, actual in zip(preds_by_source, truth):
                decision = EnsembleService.agreement_filter(preds, subset)
                if decision.abstained:
                    continue
                n_patients += 1
                n_correct += decision.prediction == actual
            rows.append(ReportRow(
                subset=subset_name(subset),
                n_patients=n_patients,
                n_correct=n_correct,
                accuracy=n_correct / n_patients if n_patients else None,
                coverage=n_patients / total if total else 0.0,
            ))
        return AgreementReport(total_patients=total, rows=rows, seed=seed)

    @staticmethod
    def verify_report(
        report: AgreementReport,
        preds_by_source: Sequence[Mapping[ModelSource, PredictionClass]],
        labels: Sequence[SurvivalLabel],
    ) -> None:
        """Recount every row directly from the predictions; raise InvariantError on any disagreement."""
        truth = np.array([label_class(label) == PredictionClass.SURVIVE for label in labels])
        votes = {
            source: np.array([p[source] == PredictionClass.SURVIVE for p in preds_by_source], dtype=bool)
            for source in ModelSource
        }
        counts = {}
        for subset in SUBSETS:
            stacked = np.vstack([votes[s] for s in subset])
            agree = stacked.all(axis=0) | (~stacked).all(axis=0)
            correct = agree & (stacked[0] == truth)
            counts[subset_name(subset)] = (int(agree.sum()), int(correct.sum()))
            row = report.row(subset_name(subset))
            if (row.n_patients, row.n_correct) != counts[subset_name(subset)]:
                raise InvariantError(
                    f"report row {row.subset} says {row.n_correct}/{row.n_patients}, "
                    f"recount gives {counts[subset_name(subset)][1]}/{counts[subset_name(subset)][0]}"
                )
        for single in ("T", "L", "A"):
            if counts[single][0] != report.total_patients:
                raise InvariantError(f"singleton row {single} does not cover all {report.total_patients} patients")
        pairwise = min(counts[name][0] for name in ("T+L", "T+A", "L+A"))
        if counts["T+L+A"][0] > pairwise:
            raise InvariantError("three-way agreement count exceeds a pairwise count")

    @staticmethod
    def report_frame(report: AgreementReport) -> pd.DataFrame:
        return pd.DataFrame({
            "subset": [r.subset for r in report.rows],
            "n": [r.n_patients for r in report.rows],
            "correct": [r.n_correct for r in report.rows],
            "accuracy": [r.accuracy for r in report.rows],
            "coverage": [r.coverage for r in report.rows],
        })

    @staticmethod
    def format_report(report: AgreementReport) -> str:
        lines = [f"{'subset':<8}{'accuracy':>10}{'patients':>10}{'coverage':>10}"]
        for r in report.rows:
            lines.append(f"{r.subset:<8}{r.percent:>10}{r.n_patients:>10}{100 * r.coverage:>9.1f}%")
        return "\n".join(lines) + "\n"

    @staticmethod
    def predictions_frame(predictions: Sequence[PatientPrediction]) -> pd.DataFrame:
        return pd.DataFrame.from_records(
            [p.model_dump(mode="json") for p in predictions],
            columns=["patient_id", "tnm_stage", "label", "fold", "T", "L", "A"],
        )

    @staticmethod
    def predictions_from_frame(frame: pd.DataFrame) -> List[PatientPrediction]:
        try:
            records = frame.astype(str).to_dict(orient="records")
            return [PatientPrediction.model_validate(r) for r in records]
        except ValueError as e:
            raise SchemaMismatchError(f"not a valid predictions table: {e}")

    @staticmethod
    def report_from_predictions(predictions: Sequence[PatientPrediction], seed: Optional[int] = None) -> AgreementReport:
        preds = [p.by_source() for p in predictions]
        labels = [SurvivalLabel(p.label) for p in predictions]
        report = EnsembleService.build_report(preds, labels, seed=seed)
        EnsembleService.verify_report(report, preds, labels)
        return report

    @staticmethod
    def single_attribute_scan(ds: Dataset, labels: Sequence[SurvivalLabel]) -> List[AttributeScore]:
        """Best one-threshold rule per attribute, scored on the patients where it is Present.

        Rules have the form "survive iff x >= t" or "survive iff x < t"; the
        threshold runs over observed values, plus one that sends everyone to
        a single class.
        """
        survived = np.array([label_class(label) == PredictionClass.SURVIVE for label in labels])
        if survived.shape != (ds.n_patients,):
            raise SchemaMismatchError(f"{survived.size} labels for {ds.n_patients} patients")
        scores = []
        for j, name in enumerate(ds.attribute_names):
            mask = ds.present[:, j]
            n = int(mask.sum())
            if n == 0:
                continue
            x, s = ds.values[mask, j], survived[mask]
            order = np.argsort(x, kind="stable")
            x, s = x[order], s[order]
            thresholds = np.unique(x)
            # survivors at or above each threshold, and deaths below it
            first = np.searchsorted(x, thresholds, side="left")
            survivors_above = s.sum() - np.concatenate([[0], np.cumsum(s)])[first]
            deaths_below = first - np.concatenate([[0], np.cumsum(s)])[first]
            ge_correct = np.append(survivors_above + deaths_below, n - s.sum())
            lt_correct = n - ge_correct
            thresholds = np.append(thresholds, x[-1] + 1.0)
            best_ge, best_lt = int(np.argmax(ge_correct)), int(np.argmax(lt_correct))
            if ge_correct[best_ge] >= lt_correct[best_lt]:
                threshold, direction, correct = thresholds[best_ge], "ge", ge_correct[best_ge]
            else:
                threshold, direction, correct = thresholds[best_lt], "lt", lt_correct[best_lt]
            scores.append(AttributeScore(
                attribute=name, threshold=float(threshold), direction=direction, accuracy=float(correct / n),
            ))
        return sorted(scores, key=lambda a: (-a.accuracy, a.attribute))


ensemble_service = EnsembleService()
