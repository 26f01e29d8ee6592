from enum import Enum
from typing import FrozenSet, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from .dataset import Role


class ExclusionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_patient_coverage: float = Field(0.5, gt=0.0, le=1.0)
    min_attribute_coverage: float = Field(0.5, gt=0.0, le=1.0)
    survival_threshold_months: int = Field(60, gt=0)
    drop_roles: FrozenSet[Role] = frozenset({Role.TNM_DERIVED, Role.POST_OPERATIVE, Role.COMPOUND})
    # derivable/correlated attributes: explicit names, plus an optional |r| filter
    drop_attributes: List[str] = Field(default_factory=list)
    correlation_threshold: Optional[float] = Field(None, gt=0.0, lt=1.0)

    @field_validator("drop_roles")
    @classmethod
    def outcome_not_droppable(cls, v):
        if Role.OUTCOME in v:
            raise ValueError("outcome columns cannot be dropped")
        return v

    @field_serializer("drop_roles")
    def roles_sorted(self, v):
        return sorted(role.value for role in v)


class AuditStep(BaseModel):
    step: str
    patients_removed: int
    attributes_removed: int
    patients_left: int
    attributes_left: int


class AuditLog(BaseModel):
    initial_patients: int
    initial_attributes: int
    steps: List[AuditStep] = Field(default_factory=list)

    @property
    def patients_left(self) -> int:
        return self.steps[-1].patients_left if self.steps else self.initial_patients

    @property
    def attributes_left(self) -> int:
        return self.steps[-1].attributes_left if self.steps else self.initial_attributes

    def record(self, step: str, patients_left: int, attributes_left: int) -> AuditStep:
        entry = AuditStep(
            step=step,
            patients_removed=self.patients_left - patients_left,
            attributes_removed=self.attributes_left - attributes_left,
            patients_left=patients_left,
            attributes_left=attributes_left,
        )
        self.steps.append(entry)
        return entry

    def telescopes(self) -> bool:
        patients, attributes = self.initial_patients, self.initial_attributes
        for s in self.steps:
            if s.patients_left != patients - s.patients_removed:
                return False
            if s.attributes_left != attributes - s.attributes_removed:
                return False
            if s.patients_removed < 0 or s.attributes_removed < 0:
                return False
            patients, attributes = s.patients_left, s.attributes_left
        return True


class SurvivalLabel(str, Enum):
    SURVIVED = "survived"
    DIED = "died"
    EXCLUDED = "excluded"


class ImputationStatistic(str, Enum):
    MEAN = "mean"
    MEDIAN = "median"
    MODE = "mode"


class ImputationEntry(BaseModel):
    attribute: str
    statistic: ImputationStatistic
    fill_value: float


class ImputationPlan(BaseModel):
    entries: List[ImputationEntry]

    @property
    def attributes(self) -> List[str]:
        return [e.attribute for e in self.entries]


class LevelAssignment(BaseModel):
    level: int
    group: int = Field(..., ge=0, le=1)
    n_labeled: int
    n_survived: int
    survival_rate: Optional[float] = None
    # level seen only on unlabeled patients, grouped with its nearest labeled level
    flagged: bool = False


class LinearizedAttribute(BaseModel):
    name: str
    levels: List[LevelAssignment]
    split_statistic: float

    @model_validator(mode="after")
    def both_groups_present(self):
        groups = {a.group for a in self.levels}
        if groups != {0, 1}:
            raise ValueError(f"linearization of '{self.name}' must populate both groups")
        return self

    def group_of(self, level: int) -> int:
        """Group for a level; unseen levels follow the nearest observed level (ties: lower)."""
        known = sorted(self.levels, key=lambda a: a.level)
        for a in known:
            if a.level == level:
                return a.group
        nearest = min(known, key=lambda a: (abs(a.level - level), a.level))
        return nearest.group


class LinearizationMap(BaseModel):
    attributes: List[LinearizedAttribute] = Field(default_factory=list)

    @property
    def names(self) -> List[str]:
        return [a.name for a in self.attributes]

    def get(self, name: str) -> Optional[LinearizedAttribute]:
        for a in self.attributes:
            if a.name == name:
                return a
        return None
