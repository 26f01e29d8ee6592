import logging

import pandas as pd

from ..config import RunConfig
from ..schemas.dataset import Dataset
from ..schemas.evaluation import TrainedEnsemble
from ..schemas.models import LinearModel
from ..services.evaluation_service import evaluation_service
from ..services.learner_service import learner_service
from ..services.seeding import derive_seed
from ..storage.artifacts import ArtifactStore
from .common import emit, labelled, load_cohort, model_arguments, open_store, run_config

logger = logging.getLogger(__name__)


def register(subparsers, parent):
    parser = subparsers.add_parser(
        "train", parents=[parent], help="fit the learner and anti-learner on the whole preprocessed cohort",
    )
    model_arguments(parser)
    parser.set_defaults(handler=run)


def train_cohort_model(cohort: Dataset, labels, cfg: RunConfig, store: ArtifactStore) -> TrainedEnsemble:
    te = evaluation_service.fit_ensemble(cohort, labels, cfg, derive_seed(cfg.master_seed, "cohort"))
    store.write_json("model.json", te)
    store.write_json("ranking.json", te.ranking)
    store.write_text("learner.weights.json", learner_service.export_weights(te.learner))
    if isinstance(te.antilearner, LinearModel):
        store.write_text("antilearner.weights.json", learner_service.export_linear(te.antilearner))
    else:
        store.write_text("antilearner.weights.json", learner_service.export_weights(te.antilearner))
    return te


def attribute_frame(te: TrainedEnsemble) -> pd.DataFrame:
    rows = [("learner", i + 1, name) for i, name in enumerate(te.top_attributes)]
    rows += [("antilearner", i + 1, name) for i, name in enumerate(te.bottom_attributes)]
    return pd.DataFrame(rows, columns=["model", "position", "attribute"])


def run(args) -> int:
    cfg = run_config(args)
    store = open_store(cfg)
    cohort, labels = labelled(load_cohort(cfg), cfg)
    te = train_cohort_model(cohort, labels, cfg, store)
    emit(attribute_frame(te), args.format)
    return 0
