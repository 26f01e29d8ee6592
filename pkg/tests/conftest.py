import json

import numpy as np
import pytest

from app.config import RunConfig
from app.schemas.dataset import AttributeKind, AttributeSpec, Dataset, OutcomeRecord, Role, VitalStatus
from app.schemas.synth import SurrogateSpec
from app.services.synth_service import synth_service

# small enough for fold-level tests to run in seconds
SMALL_SURROGATE = dict(n_patients=120, n_noise=10, seed=5)
QUICK_SETTINGS = {
    "mlp": {"epochs": 300},
    "evaluation": {"folds": 3, "sweep_k_values": [1, 2, 4]},
}


def _outcome(months, status="dead_of_disease", stage=2):
    return OutcomeRecord(survival_months=months, vital_status=VitalStatus(status), tnm_stage=stage)


def _attribute(name, kind="continuous", levels=None, roles=(Role.FEATURE,)):
    return AttributeSpec(name=name, kind=AttributeKind(kind), levels=levels, roles=frozenset(roles))


def _dataset(attributes, values, outcomes, present=None, ids=None):
    values = np.asarray(values, dtype=float)
    n = len(outcomes)
    values = values.reshape(n, len(attributes))
    if present is None:
        present = np.ones_like(values, dtype=bool)
    ids = ids or [f"P{i + 1:03d}" for i in range(n)]
    return Dataset(tuple(attributes), tuple(ids), values, np.asarray(present, dtype=bool), tuple(outcomes))


@pytest.fixture
def outcome():
    return _outcome


@pytest.fixture
def attribute():
    return _attribute


@pytest.fixture
def make_dataset():
    return _dataset


@pytest.fixture(scope="session")
def small_surrogate() -> Dataset:
    return synth_service.gen_clinical_surrogate(SurrogateSpec(**SMALL_SURROGATE))


@pytest.fixture(scope="session")
def default_surrogate() -> Dataset:
    return synth_service.gen_clinical_surrogate(SurrogateSpec(seed=11))


@pytest.fixture
def quick_config() -> RunConfig:
    return RunConfig.model_validate({"seed": 3, **QUICK_SETTINGS})


@pytest.fixture
def quick_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(QUICK_SETTINGS), encoding="utf-8")
    return path
