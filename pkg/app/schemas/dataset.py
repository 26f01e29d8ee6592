from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

OUTCOME_COLUMNS = ("survival_months", "vital_status", "tnm_stage")
MISSING_MARKERS = frozenset({"", "?", "NA"})


class AttributeKind(str, Enum):
    BINARY = "binary"
    ORDINAL = "ordinal"
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class Role(str, Enum):
    FEATURE = "feature"
    TNM_DERIVED = "tnm_derived"
    POST_OPERATIVE = "post_operative"
    COMPOUND = "compound"
    OUTCOME = "outcome"


class VitalStatus(str, Enum):
    ALIVE = "alive"
    DEAD_OF_DISEASE = "dead_of_disease"
    DEAD_OTHER = "dead_other"


class AttributeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    kind: AttributeKind
    levels: Optional[int] = None
    roles: FrozenSet[Role] = frozenset({Role.FEATURE})

    @field_validator("roles")
    @classmethod
    def roles_not_empty(cls, v):
        if not v:
            raise ValueError("an attribute needs at least one role")
        if Role.OUTCOME in v and len(v) > 1:
            raise ValueError("the outcome role cannot be combined with other roles")
        return v

    @field_serializer("roles")
    def roles_sorted(self, v):
        return sorted(role.value for role in v)

    @model_validator(mode="after")
    def levels_match_kind(self):
        if self.kind in (AttributeKind.ORDINAL, AttributeKind.CATEGORICAL):
            if self.levels is None or self.levels < 2:
                raise ValueError(f"{self.kind.value} attribute '{self.name}' needs a level count >= 2")
        elif self.levels is not None:
            raise ValueError(f"{self.kind.value} attribute '{self.name}' takes no level count")
        return self

    @property
    def is_outcome(self) -> bool:
        return Role.OUTCOME in self.roles

    def admits(self, values: np.ndarray) -> np.ndarray:
        """Element-wise check of the kind constraint."""
        if self.kind == AttributeKind.CONTINUOUS:
            return np.isfinite(values)
        if self.kind == AttributeKind.BINARY:
            return (values == 0) | (values == 1)
        return (values == np.round(values)) & (values >= 0) & (values < self.levels)

    def to_sidecar(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "levels": self.levels,
            "roles": sorted(role.value for role in self.roles),
        }


class OutcomeRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    survival_months: int = Field(..., ge=0)
    vital_status: VitalStatus
    tnm_stage: int = Field(..., ge=1, le=4)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Patients x feature attributes, plus one outcome record per patient.

    ``values`` holds the cell values; ``present`` marks which cells are
    Present. Missing cells carry 0.0 in ``values`` and never NaN. Both arrays
    are made read-only on construction.
    """

    attributes: Tuple[AttributeSpec, ...]
    patient_ids: Tuple[str, ...]
    values: np.ndarray
    present: np.ndarray
    outcomes: Tuple[OutcomeRecord, ...]
    _checked: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "patient_ids", tuple(self.patient_ids))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        n, d = len(self.patient_ids), len(self.attributes)
        values = np.array(self.values, dtype=float).reshape(n, d)
        present = np.array(self.present, dtype=bool).reshape(n, d)
        values[~present] = 0.0
        values.setflags(write=False)
        present.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "present", present)

        if len(self.outcomes) != n:
            raise ValueError(f"{len(self.outcomes)} outcome records for {n} patients")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        if any(a.is_outcome for a in self.attributes):
            raise ValueError("outcome attributes are held in the outcome records, not the cell matrix")
        if len(set(self.patient_ids)) != n:
            raise ValueError("patient ids must be unique")
        if self._checked:
            for j, attribute in enumerate(self.attributes):
                column = values[present[:, j], j]
                if not attribute.admits(column).all():
                    raise ValueError(f"attribute '{attribute.name}' holds values outside its kind")

    @property
    def n_patients(self) -> int:
        return len(self.patient_ids)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def stages(self) -> np.ndarray:
        return np.array([o.tnm_stage for o in self.outcomes], dtype=int)

    def attribute_index(self, name: str) -> int:
        return self.attribute_names.index(name)

    def matrix(self) -> np.ndarray:
        """Cell values as a float matrix; only meaningful once nothing is missing."""
        return np.array(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.attributes == other.attributes
            and self.patient_ids == other.patient_ids
            and self.outcomes == other.outcomes
            and np.array_equal(self.present, other.present)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None
