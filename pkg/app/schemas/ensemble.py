from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PredictionClass(str, Enum):
    SURVIVE = "survive"
    DIE = "die"

    def inverted(self) -> "PredictionClass":
        return PredictionClass.DIE if self is PredictionClass.SURVIVE else PredictionClass.SURVIVE


class ModelSource(str, Enum):
    T = "T"
    L = "L"
    A = "A"


# Row order of the agreement table
SUBSETS: Tuple[Tuple[ModelSource, ...], ...] = (
    (ModelSource.T,),
    (ModelSource.L,),
    (ModelSource.A,),
    (ModelSource.T, ModelSource.L),
    (ModelSource.T, ModelSource.A),
    (ModelSource.L, ModelSource.A),
    (ModelSource.T, ModelSource.L, ModelSource.A),
)


def subset_name(subset) -> str:
    return "+".join(s.value for s in subset)


class SelectiveDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    prediction: Optional[PredictionClass] = None

    @classmethod
    def predicted(cls, prediction: PredictionClass) -> "SelectiveDecision":
        return cls(prediction=prediction)

    @classmethod
    def abstain(cls) -> "SelectiveDecision":
        return cls(prediction=None)

    @property
    def abstained(self) -> bool:
        return self.prediction is None


class ReportRow(BaseModel):
    subset: str
    n_patients: int = Field(..., ge=0)
    n_correct: int = Field(..., ge=0)
    accuracy: Optional[float] = None
    coverage: float

    @model_validator(mode="after")
    def accuracy_matches_counts(self):
        if self.n_correct > self.n_patients:
            raise ValueError("more correct predictions than patients")
        expected = self.n_correct / self.n_patients if self.n_patients else None
        if self.accuracy != expected:
            raise ValueError(f"row {self.subset}: accuracy does not equal its own counts")
        return self

    @property
    def percent(self) -> str:
        return "n/a" if self.accuracy is None else f"{100 * self.accuracy:.1f}%"


class AgreementReport(BaseModel):
    total_patients: int
    rows: List[ReportRow]
    seed: Optional[int] = None

    def row(self, subset: str) -> ReportRow:
        for r in self.rows:
            if r.subset == subset:
                return r
        raise KeyError(subset)


class PrognosisGroup(str, Enum):
    TNM2_PRED_SURVIVE = "TNM2_PredSurvive"
    TNM2_PRED_DIE = "TNM2_PredDie"
    TNM3_PRED_SURVIVE = "TNM3_PredSurvive"
    TNM3_PRED_DIE = "TNM3_PredDie"


class PatientPrediction(BaseModel):
    patient_id: str
    tnm_stage: int
    label: str
    fold: int
    T: PredictionClass
    L: PredictionClass
    A: PredictionClass

    def by_source(self) -> Dict[ModelSource, PredictionClass]:
        return {ModelSource.T: self.T, ModelSource.L: self.L, ModelSource.A: self.A}


class SweepPoint(BaseModel):
    k: int
    variant: str
    accuracy: float


class AttributeScore(BaseModel):
    attribute: str
    threshold: float
    direction: str
    accuracy: float
