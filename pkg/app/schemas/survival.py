from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class TimedOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: int = Field(..., ge=0)
    # True: death from disease at `time`; False: censored at `time`
    event: bool


class KmStep(BaseModel):
    time: int
    at_risk: int
    deaths: int
    survival: float


class KmCurve(BaseModel):
    n_patients: int
    steps: List[KmStep] = Field(default_factory=list)

    @model_validator(mode="after")
    def steps_monotone(self):
        previous_time, previous_survival, previous_at_risk = -1, 1.0, self.n_patients
        for s in self.steps:
            if s.time <= previous_time:
                raise ValueError("curve times must be strictly increasing")
            if not 0.0 <= s.survival <= previous_survival:
                raise ValueError("survival must be non-increasing within [0, 1]")
            if s.at_risk > previous_at_risk:
                raise ValueError("at-risk counts must be non-increasing")
            previous_time, previous_survival, previous_at_risk = s.time, s.survival, s.at_risk
        return self


class GroupedCurves(BaseModel):
    curves: Dict[str, KmCurve]
    omitted: List[str] = Field(default_factory=list)


class GroupSummary(BaseModel):
    group: str
    n_patients: int
    survival_at_horizon: float
    median_survival: Optional[int] = None
