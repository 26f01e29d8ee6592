from typing import List, Union

from pydantic import BaseModel, Field

from .ensemble import PatientPrediction
from .models import LinearModel, MlpModel, Standardization
from .preprocess import ImputationPlan, LinearizationMap
from .ranking import Ranking


class TrainedEnsemble(BaseModel):
    """Everything needed to turn raw cohort rows into L and A predictions."""

    attribute_names: List[str]
    linearization: LinearizationMap
    imputation: ImputationPlan
    standardization: Standardization
    ranking: Ranking
    k_top: int
    k_bottom: int
    learner: MlpModel
    antilearner: Union[MlpModel, LinearModel] = Field(..., discriminator="kind")
    seed: int

    @property
    def top_indices(self) -> List[int]:
        return self.ranking.order[: self.k_top]

    @property
    def bottom_indices(self) -> List[int]:
        return self.ranking.order[::-1][: self.k_bottom]

    @property
    def top_attributes(self) -> List[str]:
        return [self.attribute_names[i] for i in self.top_indices]

    @property
    def bottom_attributes(self) -> List[str]:
        return [self.attribute_names[i] for i in self.bottom_indices]


class FoldSummary(BaseModel):
    fold: int
    seed: int
    n_train: int
    n_test: int
    top_attributes: List[str]
    bottom_attributes: List[str]


class EnsembleRun(BaseModel):
    seed: int
    mode: str
    predictions: List[PatientPrediction]
    folds: List[FoldSummary]
    models: List[TrainedEnsemble] = Field(default_factory=list, exclude=True)
