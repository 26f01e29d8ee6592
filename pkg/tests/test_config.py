import json
import os

import pandas as pd
import pytest

from app.config import get_run_config
from app.errors import SchemaMismatchError, UsageError
from app.schemas.ranking import Ranking
from app.storage.artifacts import ArtifactStore, read_model


def write_config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_defaults():
    cfg = get_run_config()
    assert (cfg.k_top, cfg.k_bottom) == (8, 6)
    assert cfg.evaluation.folds == 5
    assert cfg.survival_threshold_months == 60
    assert cfg.linearize


def test_file_values_and_overrides(tmp_path):
    path = write_config(tmp_path, {"seed": 4, "k_top": 5, "evaluation": {"folds": 4, "n_jobs": 2}})
    cfg = get_run_config(str(path), **{"evaluation.folds": 3, "k_bottom": None})
    assert cfg.seed == 4
    assert cfg.k_top == 5
    # overrides win, None overrides leave the file value alone
    assert cfg.evaluation.folds == 3
    assert cfg.evaluation.n_jobs == 2
    assert cfg.k_bottom == 6


def test_edited_config_file_is_read_fresh(tmp_path):
    path = write_config(tmp_path, {"seed": 1, "k_top": 5})
    assert get_run_config(str(path)).k_top == 5
    write_config(tmp_path, {"seed": 1, "k_top": 3})
    assert get_run_config(str(path)).k_top == 3


def test_relative_paths_resolve_against_the_config_file(tmp_path):
    (tmp_path / "sub").mkdir()
    path = write_config(tmp_path / "sub", {"dataset": "cohort.csv", "schema": "/abs/cohort.schema.json"})
    cfg = get_run_config(str(path))
    assert cfg.dataset == tmp_path / "sub" / "cohort.csv"
    assert str(cfg.schema_path) == "/abs/cohort.schema.json"


@pytest.mark.parametrize("payload", [
    {"k_top": 0},
    {"evaluation": {"mode": "bootstrap"}},
    {"evaluation": {"holdout_fraction": 1.5}},
    {"seed": -1},
])
def test_invalid_values_are_usage_errors(tmp_path, payload):
    with pytest.raises(UsageError):
        get_run_config(str(write_config(tmp_path, payload)))


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(UsageError):
        get_run_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(UsageError):
        get_run_config(str(bad))


def test_output_must_differ_from_inputs(tmp_path):
    with pytest.raises(UsageError):
        get_run_config(dataset=str(tmp_path / "a.csv"), out_dir=str(tmp_path / "a.csv"))


def test_missing_seed_is_reported_when_needed():
    cfg = get_run_config()
    assert cfg.seed is None
    with pytest.raises(UsageError, match="--seed"):
        cfg.master_seed
    assert get_run_config(seed=0).master_seed == 0


def test_store_writes_stable_json_and_csv(tmp_path):
    store = ArtifactStore(tmp_path / "out").connect()
    ranking = Ranking(order=[1, 0], trace=[], seed=2, attribute_names=["a", "b"])
    path = store.write_json("nested/ranking.json", ranking)
    assert path.read_text(encoding="utf-8").endswith("}\n")
    assert store.read_json("nested/ranking.json", Ranking) == ranking

    store.write_csv("table.csv", pd.DataFrame({"k": [1, 2], "v": ["x", "y"]}))
    assert (tmp_path / "out" / "table.csv").read_bytes() == b"k,v\n1,x\n2,y\n"


def test_store_rejects_models_of_the_wrong_shape(tmp_path):
    store = ArtifactStore(tmp_path).connect()
    store.write_text("model.json", '{"order": "nope"}')
    with pytest.raises(SchemaMismatchError):
        read_model(store.path("model.json"), Ranking)
    with pytest.raises(UsageError):
        read_model(tmp_path / "absent.json", Ranking)


def test_unwritable_store_is_a_usage_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(UsageError):
        ArtifactStore(blocker / "out").connect()


@pytest.mark.skipif(os.name != "posix" or os.geteuid() == 0, reason="needs a non-root POSIX user")
def test_read_only_directory(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        with pytest.raises(UsageError):
            ArtifactStore(locked).connect()
    finally:
        locked.chmod(0o700)
