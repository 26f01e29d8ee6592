from pydantic import BaseModel, ConfigDict, Field, model_validator


class LinearSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=4)
    d_informative: int = Field(..., ge=1)
    d_noise: int = Field(0, ge=0)
    # gap between the two class means on each informative column
    separation: float = Field(2.0, gt=0.0)
    seed: int


def admissible_rho_between(n: int, rho_within: float):
    """Open/closed interval (rho_within, upper] of cross-class similarities keeping the Gram matrix PSD."""
    half = n // 2
    return rho_within, rho_within + (1.0 - rho_within) / half


class AntiSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=4)
    rho_within: float
    rho_between: float
    seed: int

    @model_validator(mode="after")
    def gram_is_psd(self):
        if self.n % 2:
            raise ValueError(f"n must be even, got {self.n}")
        if not -1.0 / (self.n - 1) < self.rho_within < 1.0:
            raise ValueError(f"rho_within must lie in (-{1.0 / (self.n - 1):g}, 1), got {self.rho_within}")
        low, high = admissible_rho_between(self.n, self.rho_within)
        if not low < self.rho_between <= high:
            raise ValueError(
                f"rho_between={self.rho_between} outside the admissible interval "
                f"({low:g}, {high:g}] for n={self.n}, rho_within={self.rho_within}"
            )
        return self


class SurrogateSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_patients: int = Field(300, ge=40)
    n_signal: int = Field(8, ge=1)
    n_antisignal: int = Field(6, ge=1)
    n_noise: int = Field(30, ge=1)
    missing_rate: float = Field(0.10, ge=0.0, le=0.5)
    nonlinear_attribute: bool = True
    seed: int

    # standardized class-mean gap of each signal attribute
    signal_strength: float = Field(1.2, gt=0.0)
    stage2_fraction: float = Field(0.5, gt=0.0, lt=1.0)
    stage2_survival: float = Field(0.70, gt=0.0, lt=1.0)
    stage3_survival: float = Field(0.30, gt=0.0, lt=1.0)

    # patients the exclusion protocol is expected to remove
    censored_fraction: float = Field(0.10, ge=0.0, lt=0.5)
    other_death_fraction: float = Field(0.05, ge=0.0, lt=0.5)
    sparse_patients: int = Field(3, ge=0)
    sparse_attribute_coverage: float = Field(0.40, gt=0.0, le=1.0)
    protocol_attributes: bool = True
    # stage 1 / stage 4 patients for all-stage survival plots
    outer_stage_fraction: float = Field(0.0, ge=0.0, lt=0.5)

    @model_validator(mode="after")
    def enough_core_patients(self):
        if self.stage2_survival <= self.stage3_survival:
            raise ValueError("stage 2 must have the more favourable survival odds")
        if self.core_patients < 20:
            raise ValueError(f"only {self.core_patients} labelled stage 2/3 patients would remain")
        return self

    @property
    def n_censored(self) -> int:
        return round(self.censored_fraction * self.n_patients)

    @property
    def n_other_deaths(self) -> int:
        return round(self.other_death_fraction * self.n_patients)

    @property
    def n_outer(self) -> int:
        return round(self.outer_stage_fraction * self.n_patients)

    @property
    def n_sparse(self) -> int:
        return self.sparse_patients if self.missing_rate > 0 else 0

    @property
    def core_patients(self) -> int:
        return self.n_patients - self.n_censored - self.n_other_deaths - self.n_outer - self.n_sparse


class SynthSummary(BaseModel):
    kind: str
    rows: int
    columns: int
    missing_fraction: float
    seed: int
