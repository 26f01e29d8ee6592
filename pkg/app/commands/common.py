import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import BaseModel

from ..config import RunConfig, get_run_config
from ..errors import UsageError
from ..schemas.dataset import Dataset
from ..schemas.preprocess import SurvivalLabel
from ..services.preprocess_service import preprocess_service
from ..services.tabular_service import tabular_service
from ..storage.artifacts import ArtifactStore

logger = logging.getLogger(__name__)

FORMATS = ("table", "csv", "json")
Payload = Union[BaseModel, Sequence[BaseModel], None]


def common_arguments() -> argparse.ArgumentParser:
    """Flags shared by every command."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="run configuration (JSON)")
    parent.add_argument("--seed", type=int, help="master seed for every stochastic step")
    parent.add_argument("--out", help="output directory")
    parent.add_argument("--format", choices=FORMATS, default="table", help="stdout payload format")
    parent.add_argument("--dataset", help="cohort CSV")
    parent.add_argument("--schema", help="schema sidecar (JSON)")
    verbosity = parent.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    return parent


def model_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--folds", type=int)
    parser.add_argument("--k-top", type=int, dest="k_top")
    parser.add_argument("--k-bottom", type=int, dest="k_bottom")


def run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "dataset": args.dataset,
        "schema": args.schema,
        "evaluation.folds": getattr(args, "folds", None),
        "k_top": getattr(args, "k_top", None),
        "k_bottom": getattr(args, "k_bottom", None),
        "km_horizon": getattr(args, "horizon", None),
    }
    return get_run_config(args.config, **overrides)


def open_store(cfg: RunConfig) -> ArtifactStore:
    return ArtifactStore(cfg.out_dir).connect()


def load_cohort(cfg: RunConfig) -> Dataset:
    if cfg.dataset is None or cfg.schema_path is None:
        raise UsageError("a dataset and its schema are required (--dataset/--schema or the config file)")
    return tabular_service.load_dataset(cfg.dataset, cfg.schema_path)


def labelled(ds: Dataset, cfg: RunConfig) -> Tuple[Dataset, List[SurvivalLabel]]:
    """Five-year labels for a preprocessed cohort, Excluded patients dropped."""
    labels = preprocess_service.label_all(ds, cfg.survival_threshold_months)
    kept, labels = preprocess_service.drop_excluded(ds, labels)
    if kept.n_patients < ds.n_patients:
        logger.warning("%d patients without a five-year label were dropped", ds.n_patients - kept.n_patients)
    return kept, labels


def emit(frame: pd.DataFrame, fmt: str, payload: Payload = None, text: Optional[str] = None):
    """Write a data payload to stdout in the requested format."""
    if fmt == "csv":
        out = frame.to_csv(index=False, lineterminator="\n")
    elif fmt == "json":
        if isinstance(payload, BaseModel):
            data = payload.model_dump(mode="json", by_alias=True)
        elif payload is not None:
            data = [item.model_dump(mode="json", by_alias=True) for item in payload]
        else:
            data = json.loads(frame.to_json(orient="records"))
        out = json.dumps(data, indent=2) + "\n"
    else:
        out = text if text is not None else frame.to_string(index=False) + "\n"
    sys.stdout.write(out)
