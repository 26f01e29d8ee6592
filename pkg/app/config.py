import json
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import UsageError
from .schemas.models import MlpParams, SvmParams
from .schemas.preprocess import ExclusionConfig


class EvaluationSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["cv", "holdout"] = "cv"
    folds: int = Field(5, ge=1)
    holdout_fraction: float = Field(0.25, gt=0.0, lt=1.0)
    sweep_k_values: List[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32])
    n_jobs: int = 1
    # the anti-learner's base model family
    antilearner: Literal["mlp", "linear"] = "mlp"


class RunConfig(BaseModel):
    seed: Optional[int] = Field(None, ge=0)
    k_top: int = Field(8, ge=1)
    k_bottom: int = Field(6, ge=1)
    linearize: bool = True
    stages: List[int] = Field(default_factory=lambda: [2, 3])

    dataset: Optional[Path] = None
    schema_path: Optional[Path] = Field(None, alias="schema")
    out_dir: Path = Path("out")
    km_horizon: Optional[int] = Field(None, gt=0)

    exclusion: ExclusionConfig = Field(default_factory=ExclusionConfig)
    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)
    svm: SvmParams = Field(default_factory=SvmParams)
    mlp: MlpParams = Field(default_factory=MlpParams)

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def paths_distinct(self):
        paths = [p.resolve() for p in (self.dataset, self.schema_path, self.out_dir) if p is not None]
        if len(set(paths)) != len(paths):
            raise ValueError("dataset, schema and output paths must be distinct")
        return self

    @property
    def survival_threshold_months(self) -> int:
        return self.exclusion.survival_threshold_months

    @property
    def master_seed(self) -> int:
        if self.seed is None:
            raise UsageError("this command is stochastic: pass --seed or set \"seed\" in the config file")
        return self.seed


def _nest(overrides: dict) -> dict:
    nested: dict = {}
    for key, value in overrides.items():
        if value is None:
            continue
        parts = key.split(".")
        target = nested
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return nested


def _merge(base: dict, extra: dict) -> dict:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _read_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}")


def get_run_config(path: Optional[str] = None, **overrides) -> RunConfig:
    """Load a RunConfig from a JSON file; dotted keyword overrides (``evaluation.folds``) win.

    Relative dataset/schema paths in the file are resolved against the file's directory.
    """
    raw: dict = {}
    if path is not None:
        raw = dict(_read_config_file(str(path)))
        base = Path(path).parent
        for key in ("dataset", "schema", "out_dir"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = str(base / raw[key])
    raw = _merge(raw, _nest(overrides))
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise UsageError(f"invalid run configuration: {e}")
